//! Fusion of several single-image saliency maps into one starting field.

use crate::error::{Error, Result};
use crate::field::{normalize_min_max, pool_to_superpixels, SaliencyField};
use crate::image::PixelMap;
use crate::segmentation::Segmentation;

/// The input saliency maps for one image, one per upstream method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputSaliencySet {
    pub maps: Vec<PixelMap>,
    pub method_names: Vec<String>,
}

impl InputSaliencySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, method: impl Into<String>, map: PixelMap) {
        self.method_names.push(method.into());
        self.maps.push(map);
    }

    pub fn single(method: impl Into<String>, map: PixelMap) -> Self {
        let mut set = Self::new();
        set.push(method, map);
        set
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Restricts the set to one method, for one-for-one runs.
    pub fn only(&self, method: &str) -> Option<Self> {
        let i = self.method_names.iter().position(|m| m == method)?;
        Some(Self::single(method, self.maps[i].clone()))
    }
}

/// Pools every map to superpixels, averages them and min-max normalizes the result.
pub fn fuse_initial(maps: &InputSaliencySet, seg: &Segmentation, image_index: usize) -> Result<SaliencyField> {
    Ok(SaliencyField::normalized(&fuse_raw(maps, seg)?, image_index))
}

/// Per-superpixel mean over the input maps, before normalization.
pub fn fuse_raw(maps: &InputSaliencySet, seg: &Segmentation) -> Result<Vec<f64>> {
    if maps.is_empty() {
        return Err(Error::InvalidInput("at least one input saliency map is required".into()));
    }
    let mut sum = vec![0.0; seg.len()];
    for (map, name) in maps.maps.iter().zip(&maps.method_names) {
        let pooled = pool_to_superpixels(map, seg, 0).map_err(|e| match e {
            Error::DimensionMismatch { expected_w, expected_h, got_w, got_h, .. } => Error::DimensionMismatch {
                what: format!("saliency map '{name}'"),
                expected_w,
                expected_h,
                got_w,
                got_h,
            },
            other => other,
        })?;
        for (s, v) in sum.iter_mut().zip(pooled.values()) {
            *s += v;
        }
    }
    let m = maps.len() as f64;
    let fused: Vec<f64> = sum.into_iter().map(|s| s / m).collect();
    if normalize_min_max(&fused).iter().all(|&v| v == 0.0) && !fused.is_empty() {
        log::warn!("fused initial saliency is constant; it normalizes to all zeros");
    }
    Ok(fused)
}
