//! Deterministic synthetic RGBD groups with a planted common object.
//!
//! Every image of a group shows the same object (shared colour, checker
//! texture and near depth) at a random position, one distractor with its own
//! colour, stripe texture and depth, and a noisy textured background on a
//! depth ramp. Input saliency maps highlight both objects; the ground truth
//! marks only the common one.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_gray_png, write_group};
use crate::error::Result;
use crate::image::{DepthMap, PixelMap, RgbImage};
use crate::initialization::InputSaliencySet;
use crate::iteration::{GroupImage, ImageGroup};

/// Name of the input method whose maps carry background false positives.
pub const DEGRADED_METHOD: &str = "degraded";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub groups: usize,
    pub images_per_group: usize,
    pub width: usize,
    pub height: usize,
    /// Number of ordinary noisy input methods.
    pub methods: usize,
    /// Adds the degraded method.
    pub degraded: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { groups: 5, images_per_group: 4, width: 160, height: 120, methods: 3, degraded: true, seed: 2024 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthGroup {
    pub group: ImageGroup,
    /// Per-image distractor masks (1 on distractor pixels).
    pub distractor_masks: Vec<PixelMap>,
}

#[derive(Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    /// Normalized squared radius; inside when ≤ 1.
    fn r2(&self, x: usize, y: usize) -> f64 {
        ((x as f64 - self.cx) / self.rx).powi(2) + ((y as f64 - self.cy) / self.ry).powi(2)
    }

    fn contains(&self, x: usize, y: usize) -> bool {
        self.r2(x, y) <= 1.0
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

fn to_u8(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn box_blur(v: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let (lo, hi, at): (usize, usize, Box<dyn Fn(usize) -> f64>) = if horizontal {
                    (x.saturating_sub(radius), (x + radius).min(w - 1), Box::new(|i| src[y * w + i]))
                } else {
                    (y.saturating_sub(radius), (y + radius).min(h - 1), Box::new(|j| src[j * w + x]))
                };
                out[y * w + x] = (lo..=hi).map(at).sum::<f64>() / (hi - lo + 1) as f64;
            }
        }
        out
    };
    pass(&pass(v, true), false)
}

fn place(rng: &mut ChaCha8Rng, w: usize, h: usize, rx: f64, ry: f64, left: bool) -> Ellipse {
    let half = w as f64 / 2.0;
    let (x0, x1) = if left { (rx + 2.0, half - rx * 0.3) } else { (half + rx * 0.3, w as f64 - rx - 2.0) };
    let cx = rng.gen_range(x0..x1.max(x0 + 1.0));
    let cy = rng.gen_range(ry + 2.0..(h as f64 - ry - 2.0).max(ry + 3.0));
    Ellipse { cx, cy, rx, ry }
}

struct Scene {
    object: Ellipse,
    distractor: Ellipse,
}

impl Scene {
    fn region(&self, x: usize, y: usize) -> u8 {
        if self.object.contains(x, y) {
            1
        } else if self.distractor.contains(x, y) {
            2
        } else {
            0
        }
    }
}

/// One input saliency map: per-region levels with pixel noise and soft edges.
fn saliency_map(rng: &mut ChaCha8Rng, scene: &Scene, w: usize, h: usize, degraded: bool) -> PixelMap {
    let (obj, dis, bg, noise) = if degraded {
        (rng.gen_range(0.75..0.9), rng.gen_range(0.6..0.75), rng.gen_range(0.05..0.15), 0.08)
    } else {
        (rng.gen_range(0.8..0.95), rng.gen_range(0.55..0.8), rng.gen_range(0.0..0.12), 0.05)
    };
    let blobs: Vec<(Ellipse, f64)> = if degraded {
        (0..4)
            .map(|_| {
                let r = rng.gen_range(9.0..14.0);
                let e = Ellipse { cx: rng.gen_range(0.0..w as f64), cy: rng.gen_range(0.0..h as f64), rx: r, ry: r * 0.8 };
                (e, rng.gen_range(0.6..0.75))
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut v = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let base = match scene.region(x, y) {
                1 => obj,
                2 => dis,
                _ => blobs.iter().filter(|(e, _)| e.contains(x, y)).map(|&(_, l)| l).fold(bg, f64::max),
            };
            v.push(base + rng.gen_range(-noise..noise));
        }
    }
    let v = box_blur(&v, w, h, 2).into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
    PixelMap::new(w, h, v).expect("values clamped").quantized()
}

fn synth_image(rng: &mut ChaCha8Rng, spec: &SynthSpec, name: String, object_hue: f64, object_depth: f64, methods: &[String]) -> (GroupImage, PixelMap) {
    let (w, h) = (spec.width, spec.height);
    let scale = w.min(h * 4 / 3) as f64 / 160.0;
    let left = rng.gen_bool(0.5);
    let (orx, ory) = (rng.gen_range(22.0..28.0) * scale, rng.gen_range(18.0..24.0) * scale);
    let object = place(rng, w, h, orx, ory, left);
    let (drx, dry) = (rng.gen_range(15.0..20.0) * scale, rng.gen_range(13.0..18.0) * scale);
    let distractor = place(rng, w, h, drx, dry, !left);
    let scene = Scene { object, distractor };

    let mut dis_hue = rng.gen_range(0.0..360.0);
    while hue_distance(dis_hue, object_hue) < 70.0 {
        dis_hue = rng.gen_range(0.0..360.0);
    }
    let bg_hue = rng.gen_range(0.0..360.0);
    let bg_val = rng.gen_range(0.4..0.55);
    let dis_depth = rng.gen_range(0.45..0.7);
    let dis_pattern = rng.gen_range(0..3u8);
    let obj_a = hsv(object_hue, 0.8, 0.9);
    let obj_b = hsv(object_hue, 0.8, 0.84);
    let dis_a = hsv(dis_hue, 0.75, 0.85);
    let dis_b = hsv(dis_hue, 0.75, 0.78);

    // blocky background texture
    let (bw, bh) = (w.div_ceil(4), h.div_ceil(4));
    let blocks: Vec<f64> = (0..bw * bh).map(|_| rng.gen_range(-0.07..0.07)).collect();

    let mut rgb = Vec::with_capacity(w * h);
    let mut depth = Vec::with_capacity(w * h);
    let mut gt = Vec::with_capacity(w * h);
    let mut dmask = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let jitter = rng.gen_range(-4.0..4.0);
            let (c, d) = match scene.region(x, y) {
                1 => {
                    let c = if (x / 4 + y / 4) % 2 == 0 { obj_a } else { obj_b };
                    (c, object_depth + 0.03 * (1.0 - scene.object.r2(x, y)))
                }
                2 => {
                    let stripe = match dis_pattern {
                        0 => (y / 3) % 2 == 0,
                        1 => (x / 3) % 2 == 0,
                        _ => ((x + y) / 4) % 2 == 0,
                    };
                    let c = if stripe { dis_a } else { dis_b };
                    (c, dis_depth + 0.02 * (1.0 - scene.distractor.r2(x, y)))
                }
                _ => {
                    let v = (bg_val + blocks[(y / 4) * bw + x / 4]).clamp(0.05, 1.0);
                    (hsv(bg_hue, 0.25, v), 0.1 + 0.3 * y as f64 / (h - 1) as f64)
                }
            };
            rgb.push(to_u8(c.map(|v| v + jitter)));
            depth.push(d);
            gt.push(if scene.region(x, y) == 1 { 1.0 } else { 0.0 });
            dmask.push(if scene.region(x, y) == 2 { 1.0 } else { 0.0 });
        }
    }

    let mut saliency = InputSaliencySet::new();
    for m in methods {
        saliency.push(m.clone(), saliency_map(rng, &scene, w, h, m == DEGRADED_METHOD));
    }
    // 16-bit storage precision, so the in-memory group matches a disk round trip
    let depth: Vec<f64> = depth.into_iter().map(|d: f64| (d * 65535.0).round() / 65535.0).collect();
    let image = GroupImage {
        name,
        rgb: RgbImage::new(w, h, rgb).expect("dimensions from spec"),
        depth: Some(DepthMap::from_raw(w, h, &depth).expect("finite depth")),
        ground_truth: Some(PixelMap::new(w, h, gt).expect("binary mask")),
        saliency,
    };
    (image, PixelMap::new(w, h, dmask).expect("binary mask"))
}

pub fn method_names(spec: &SynthSpec) -> Vec<String> {
    let mut names: Vec<String> = (0..spec.methods).map(|i| format!("method{}", i + 1)).collect();
    if spec.degraded {
        names.push(DEGRADED_METHOD.into());
    }
    names
}

pub fn generate(spec: &SynthSpec) -> Vec<SynthGroup> {
    let methods = method_names(spec);
    (0..spec.groups)
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(1_000_003).wrapping_add(g as u64));
            let object_hue = (g as f64 * 137.5 + rng.gen_range(0.0..30.0)) % 360.0;
            let object_depth = rng.gen_range(0.8..0.86);
            let (images, distractor_masks) = (0..spec.images_per_group)
                .map(|i| synth_image(&mut rng, spec, format!("img{i:02}"), object_hue, object_depth, &methods))
                .unzip();
            SynthGroup { group: ImageGroup { name: format!("group{g:02}"), images }, distractor_masks }
        })
        .collect()
}

/// Writes the groups in the dataset layout, plus `distractor/` masks.
pub fn write_synth(root: &Path, groups: &[SynthGroup]) -> Result<()> {
    for g in groups {
        write_group(root, &g.group)?;
        for (img, mask) in g.group.images.iter().zip(&g.distractor_masks) {
            write_gray_png(&root.join(&g.group.name).join("distractor").join(format!("{}.png", img.name)), mask)?;
        }
    }
    Ok(())
}
