//! The group-level refinement loop: initialize once, then alternate the
//! addition and deletion schemes until the maps settle or the cap is hit.

use rayon::prelude::*;

use crate::addition::{addition_pass, compute_dsp, depth_confidence, AdditionParams, DepthConfidence};
use crate::config::PipelineConfig;
use crate::deletion::{apply_deletion, group_common_probability, CommonProbability, MatchCues};
use crate::error::{Error, Result};
use crate::features::{extract_features, SuperpixelFeatures};
use crate::field::{normalize_min_max, pool_to_superpixels, render_to_pixels, SaliencyField};
use crate::image::{DepthMap, PixelMap, RgbImage};
use crate::initialization::{fuse_initial, InputSaliencySet};
use crate::segmentation::{segment_superpixels, Segmentation};

/// One RGBD image with its input saliency maps.
#[derive(Debug, Clone)]
pub struct GroupImage {
    pub name: String,
    pub rgb: RgbImage,
    /// `None` runs the image on the RGB-only path.
    pub depth: Option<DepthMap>,
    pub ground_truth: Option<PixelMap>,
    pub saliency: InputSaliencySet,
}

#[derive(Debug, Clone, Default)]
pub struct ImageGroup {
    pub name: String,
    pub images: Vec<GroupImage>,
}

impl ImageGroup {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Keeps a single saliency method per image.
    pub fn one_for_one(&self, method: &str) -> Result<ImageGroup> {
        let images = self
            .images
            .iter()
            .map(|img| {
                let saliency = img.saliency.only(method).ok_or_else(|| {
                    Error::InvalidInput(format!("image {} has no saliency map for method '{method}'", img.name))
                })?;
                Ok(GroupImage { saliency, ..img.clone() })
            })
            .collect::<Result<_>>()?;
        Ok(ImageGroup { name: self.name.clone(), images })
    }

    pub fn has_ground_truth(&self) -> bool {
        !self.images.is_empty() && self.images.iter().all(|i| i.ground_truth.is_some())
    }
}

/// Per-image data that stays fixed across iterations.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    pub segmentation: Segmentation,
    pub features: SuperpixelFeatures,
    pub lambda: DepthConfidence,
    pub cues: MatchCues,
}

pub fn prepare_image(image: &GroupImage, config: &PipelineConfig) -> Result<PreparedImage> {
    let (w, h) = (image.rgb.width(), image.rgb.height());
    let segmentation = segment_superpixels(&image.rgb, config.n_superpixels)?;
    let (depth, lambda) = match &image.depth {
        Some(d) => (d.clone(), depth_confidence(d)),
        None => {
            log::warn!("{}: no depth map, running RGB-only", image.name);
            (DepthMap::flat(w, h), DepthConfidence::NONE)
        }
    };
    let features = extract_features(&image.rgb, &depth, &segmentation)?;
    let cues = MatchCues::new(&features, config.sigma2);
    Ok(PreparedImage { segmentation, features, lambda, cues })
}

/// Mean absolute per-pixel change between two maps.
pub fn iteration_delta(prev: &PixelMap, curr: &PixelMap) -> f64 {
    assert!(prev.same_shape(curr.width(), curr.height()), "maps must share dimensions");
    let n = prev.values().len().max(1) as f64;
    prev.values().iter().zip(curr.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n
}

/// Superpixel fields captured at each stage of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFields {
    /// Fused initialization.
    pub initial: Vec<SaliencyField>,
    /// Addition-scheme output of the first pass.
    pub addition: Vec<SaliencyField>,
    /// `passes[i][0]` is the first addition + deletion pass; `passes[i][t]`
    /// the result of iteration `t`.
    pub passes: Vec<Vec<SaliencyField>>,
}

#[derive(Debug, Clone)]
pub struct GroupRunResult {
    pub names: Vec<String>,
    pub final_maps: Vec<PixelMap>,
    pub iterations_used: Vec<usize>,
    /// Per-image D_t values, one per completed iteration.
    pub delta_trace: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub segmentations: Vec<Segmentation>,
    pub stages: StageFields,
}

impl GroupRunResult {
    pub fn render(&self, fields: &[SaliencyField]) -> Vec<PixelMap> {
        fields.iter().zip(&self.segmentations).map(|(f, s)| render_to_pixels(f, s)).collect()
    }

    /// Maps of the first pass, before any iteration.
    pub fn iter0_maps(&self) -> Vec<PixelMap> {
        let firsts: Vec<SaliencyField> = self.stages.passes.iter().map(|p| p[0].clone()).collect();
        self.render(&firsts)
    }

    /// Pixel maps after iteration `t` (0 = first pass); converged images keep their last map.
    pub fn maps_at(&self, t: usize) -> Vec<PixelMap> {
        let fields: Vec<SaliencyField> =
            self.stages.passes.iter().map(|p| p[t.min(p.len() - 1)].clone()).collect();
        self.render(&fields)
    }
}

/// Runs the full iterative co-saliency framework over one group.
pub fn run_group(group: &ImageGroup, config: &PipelineConfig) -> Result<GroupRunResult> {
    config.validate()?;
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if let Some(img) = group.images.iter().find(|i| i.saliency.is_empty()) {
        return Err(Error::InvalidInput(format!("image {} has no input saliency maps", img.name)));
    }
    let prepared: Vec<PreparedImage> =
        group.images.par_iter().map(|img| prepare_image(img, config)).collect::<Result<_>>()?;
    let initial: Vec<SaliencyField> = group
        .images
        .iter()
        .zip(&prepared)
        .enumerate()
        .map(|(i, (img, p))| fuse_initial(&img.saliency, &p.segmentation, i))
        .collect::<Result<_>>()?;
    if group.len() == 1 {
        log::warn!("group {} has one image; deletion is skipped", group.name);
    }
    let runner = Runner { prepared: &prepared, params: AdditionParams::from(config), sigma2: config.sigma2 };
    let n = group.len();

    let mut active = vec![true; n];
    let mut s_sp: Vec<SaliencyField> = initial.clone();
    let first = runner.pass(&initial, &mut s_sp, &active);
    let addition = s_sp.clone();
    let mut passes: Vec<Vec<SaliencyField>> = first.iter().map(|f| vec![f.clone().expect("all active")]).collect();
    let mut previous: Vec<PixelMap> = passes
        .iter()
        .zip(&prepared)
        .map(|(p, prep)| render_to_pixels(&p[0], &prep.segmentation))
        .collect();

    let mut iterations_used = vec![0usize; n];
    let mut delta_trace = vec![Vec::new(); n];
    for t in 1..=config.i_max {
        let current: Vec<SaliencyField> = passes.iter().map(|p| p.last().expect("non-empty").clone()).collect();
        let updated = runner.pass(&current, &mut s_sp, &active);
        for (i, field) in updated.into_iter().enumerate() {
            let Some(field) = field else { continue };
            let rendered = render_to_pixels(&field, &prepared[i].segmentation);
            let delta = iteration_delta(&previous[i], &rendered);
            delta_trace[i].push(delta);
            iterations_used[i] = t;
            passes[i].push(field);
            previous[i] = rendered;
            if delta <= config.zeta {
                active[i] = false;
            }
        }
        if !active.iter().any(|&a| a) {
            break;
        }
    }

    Ok(GroupRunResult {
        names: group.images.iter().map(|i| i.name.clone()).collect(),
        final_maps: previous,
        iterations_used,
        delta_trace,
        lambdas: prepared.iter().map(|p| p.lambda.value()).collect(),
        segmentations: prepared.into_iter().map(|p| p.segmentation).collect(),
        stages: StageFields { initial, addition, passes },
    })
}

struct Runner<'a> {
    prepared: &'a [PreparedImage],
    params: AdditionParams,
    sigma2: f64,
}

impl Runner<'_> {
    /// One addition + deletion pass over the active images. `s_sp` holds the
    /// latest addition output of every image; inactive entries stay as they
    /// are and still serve as matching targets.
    fn pass(&self, start: &[SaliencyField], s_sp: &mut [SaliencyField], active: &[bool]) -> Vec<Option<SaliencyField>> {
        let fresh: Vec<Option<SaliencyField>> = start
            .par_iter()
            .zip(self.prepared)
            .zip(active)
            .map(|((s, p), &on)| {
                on.then(|| {
                    addition_pass(s, &p.features, p.segmentation.adjacency(), p.lambda, &self.params).s_sp
                })
            })
            .collect();
        for (slot, f) in s_sp.iter_mut().zip(fresh) {
            if let Some(f) = f {
                *slot = f;
            }
        }
        let probabilities: Vec<Option<CommonProbability>> = if self.prepared.len() == 1 {
            vec![active[0].then(|| CommonProbability { values: vec![1.0; s_sp[0].len()] })]
        } else {
            let cues: Vec<MatchCues> = self.prepared.iter().map(|p| p.cues.clone()).collect();
            let saliency: Vec<&[f64]> = s_sp.iter().map(|f| f.values()).collect();
            group_common_probability(&cues, &saliency, active, self.sigma2)
        };
        probabilities
            .into_iter()
            .zip(s_sp.iter())
            .map(|(pc, sp)| pc.map(|pc| apply_deletion(sp, &pc)))
            .collect()
    }
}

/// Standalone depth-shape-prior conversion of one 2D saliency map: root seeds
/// and DSP come from the superpixel-pooled map, the RGBD combination is
/// applied per pixel and the result is min-max normalized.
pub fn dsp_convert(prepared: &PreparedImage, map: &PixelMap, config: &PipelineConfig) -> Result<PixelMap> {
    let seg = &prepared.segmentation;
    let pooled = pool_to_superpixels(map, seg, 0)?;
    let params = AdditionParams::from(config);
    let dsp = compute_dsp(
        &SaliencyField::normalized(pooled.values(), 0),
        &prepared.features.mean_depth,
        seg.adjacency(),
        &params.dsp,
    );
    let l = prepared.lambda.value();
    let raw: Vec<f64> = map
        .values()
        .iter()
        .zip(seg.labels())
        .map(|(&s, &r)| s * (1.0 - l * (1.0 - dsp.values()[r as usize])))
        .collect();
    PixelMap::new(map.width(), map.height(), normalize_min_max(&raw))
}
