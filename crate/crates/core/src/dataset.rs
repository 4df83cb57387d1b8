//! On-disk dataset layout and artifact writers.
//!
//! ```text
//! <root>/<group>/rgb/<stem>.{png,jpg,jpeg}
//! <root>/<group>/depth/<stem>.png          8- or 16-bit, optional per image
//! <root>/<group>/gt/<stem>.png             optional
//! <root>/<group>/saliency/<method>/<stem>.png
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::image::{DepthMap, PixelMap, RgbImage};
use crate::initialization::InputSaliencySet;
use crate::iteration::{GroupImage, ImageGroup};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// A group loaded from disk together with non-fatal findings.
#[derive(Debug, Clone)]
pub struct LoadedGroup {
    pub group: ImageGroup,
    pub warnings: Vec<String>,
}

/// Group directories (those containing an `rgb/` folder) under `root`, sorted by name.
pub fn list_groups(root: &Path) -> Result<Vec<PathBuf>> {
    let mut groups: Vec<PathBuf> = read_dir_sorted(root)?
        .into_iter()
        .filter(|p| p.join("rgb").is_dir())
        .collect();
    groups.sort();
    Ok(groups)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Image files in `dir` keyed by file stem.
pub fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(read_dir_sorted(dir)?.into_iter().filter(|p| is_image(p)).map(|p| (stem(&p), p)).collect())
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Decode { path: path.to_owned(), source })
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    RgbImage::from_image(&open(path)?.into_rgb8())
}

/// Depth at its native bit depth, min-max normalized to `[0, 1]`.
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sixteen = matches!(img.color(), ColorType::L16 | ColorType::La16 | ColorType::Rgb16 | ColorType::Rgba16);
    let raw: Vec<f64> = if sixteen {
        img.into_luma16().into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect()
    } else {
        img.into_luma8().into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect()
    };
    DepthMap::from_raw(w, h, &raw)
}

pub fn read_gray(path: &Path) -> Result<PixelMap> {
    let img = open(path)?.into_luma8();
    PixelMap::from_gray8(img.width() as usize, img.height() as usize, img.as_raw())
}

pub fn read_mask(path: &Path) -> Result<PixelMap> {
    let img = open(path)?.into_luma8();
    PixelMap::mask_from_gray8(img.width() as usize, img.height() as usize, img.as_raw())
}

/// Saliency methods of a group: `config.methods` when set, otherwise every
/// subdirectory of `saliency/`.
fn methods_for(dir: &Path, config: &PipelineConfig, problems: &mut Vec<String>) -> Vec<String> {
    let sal = dir.join("saliency");
    if !config.methods.is_empty() {
        for m in &config.methods {
            if !sal.join(m).is_dir() {
                problems.push(format!("missing saliency method directory {}", sal.join(m).display()));
            }
        }
        return config.methods.clone();
    }
    let found: Vec<String> = read_dir_sorted(&sal)
        .unwrap_or_default()
        .into_iter()
        .filter(|p| p.is_dir())
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    if found.is_empty() {
        problems.push(format!("no saliency methods under {}", sal.display()));
    }
    found
}

fn check_shape(what: &Path, w: usize, h: usize, expected: (usize, usize), problems: &mut Vec<String>) -> bool {
    if (w, h) != expected {
        problems.push(format!("{}: {w}x{h}, expected {}x{}", what.display(), expected.0, expected.1));
        return false;
    }
    true
}

/// Loads every image of one group. Problems are collected per file and
/// reported together; a missing depth file only produces a warning.
pub fn load_group(dir: &Path, config: &PipelineConfig) -> Result<LoadedGroup> {
    let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut problems = Vec::new();
    let mut warnings = Vec::new();
    let rgb_files = images_by_stem(&dir.join("rgb"))?;
    if rgb_files.is_empty() {
        return Err(Error::Dataset { group: name, problems: vec!["no images in rgb/".into()] });
    }
    let depth_files = images_by_stem(&dir.join("depth")).unwrap_or_default();
    let gt_dir = dir.join("gt");
    let gt_files = if gt_dir.is_dir() { images_by_stem(&gt_dir)? } else { BTreeMap::new() };
    let methods = methods_for(dir, config, &mut problems);
    let method_files: Vec<BTreeMap<String, PathBuf>> = methods
        .iter()
        .map(|m| images_by_stem(&dir.join("saliency").join(m)).unwrap_or_default())
        .collect();

    let mut images = Vec::with_capacity(rgb_files.len());
    for (stem, rgb_path) in &rgb_files {
        let rgb = match read_rgb(rgb_path) {
            Ok(r) => r,
            Err(e) => {
                problems.push(e.to_string());
                continue;
            }
        };
        let shape = (rgb.width(), rgb.height());
        let depth = match depth_files.get(stem) {
            Some(p) => match read_depth(p) {
                Ok(d) if check_shape(p, d.width(), d.height(), shape, &mut problems) => Some(d),
                Ok(_) => None,
                Err(e) => {
                    problems.push(e.to_string());
                    None
                }
            },
            None => {
                warnings.push(format!("{name}/{stem}: no depth map, image runs RGB-only"));
                None
            }
        };
        let ground_truth = match gt_files.get(stem) {
            Some(p) => match read_mask(p) {
                Ok(g) if check_shape(p, g.width(), g.height(), shape, &mut problems) => Some(g),
                Ok(_) => None,
                Err(e) => {
                    problems.push(e.to_string());
                    None
                }
            },
            None => None,
        };
        let mut saliency = InputSaliencySet::new();
        for (method, files) in methods.iter().zip(&method_files) {
            match files.get(stem) {
                Some(p) => match read_gray(p) {
                    Ok(m) if check_shape(p, m.width(), m.height(), shape, &mut problems) => saliency.push(method, m),
                    Ok(_) => {}
                    Err(e) => problems.push(e.to_string()),
                },
                None => problems.push(format!("method '{method}' has no map for image '{stem}'")),
            }
        }
        images.push(GroupImage { name: stem.clone(), rgb, depth, ground_truth, saliency });
    }
    if !gt_files.is_empty() && gt_files.len() != rgb_files.len() {
        warnings.push(format!("{name}: ground truth covers {} of {} images", gt_files.len(), rgb_files.len()));
    }
    if !problems.is_empty() {
        return Err(Error::Dataset { group: name, problems });
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(LoadedGroup { group: ImageGroup { name, images }, warnings })
}

pub fn write_gray_png(path: &Path, map: &PixelMap) -> Result<()> {
    ensure_parent(path)?;
    map.to_image().save(path).map_err(|source| Error::Encode { path: path.to_owned(), source })
}

pub fn write_rgb_png(path: &Path, rgb: &RgbImage) -> Result<()> {
    ensure_parent(path)?;
    rgb.to_image().save(path).map_err(|source| Error::Encode { path: path.to_owned(), source })
}

/// 16-bit depth PNG.
pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<()> {
    ensure_parent(path)?;
    let raw: Vec<u16> = depth.values().iter().map(|&v| (v * 65535.0).round() as u16).collect();
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(depth.width() as u32, depth.height() as u32, raw)
        .ok_or_else(|| Error::Internal("depth buffer size".into()))?;
    img.save(path).map_err(|source| Error::Encode { path: path.to_owned(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Writes a group to the dataset layout under `root/<group name>`.
pub fn write_group(root: &Path, group: &ImageGroup) -> Result<()> {
    let dir = root.join(&group.name);
    for img in &group.images {
        let file = format!("{}.png", img.name);
        write_rgb_png(&dir.join("rgb").join(&file), &img.rgb)?;
        if let Some(d) = &img.depth {
            write_depth_png(&dir.join("depth").join(&file), d)?;
        }
        if let Some(g) = &img.ground_truth {
            write_gray_png(&dir.join("gt").join(&file), g)?;
        }
        for (method, map) in img.saliency.method_names.iter().zip(&img.saliency.maps) {
            write_gray_png(&dir.join("saliency").join(method).join(&file), map)?;
        }
    }
    Ok(())
}
