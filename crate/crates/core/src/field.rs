//! Per-superpixel saliency vectors and their conversion to and from pixel maps.

use crate::error::{Error, Result};
use crate::image::PixelMap;
use crate::segmentation::Segmentation;

/// Saliency scores for every superpixel of one image, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyField {
    values: Vec<f64>,
    image_index: usize,
}

impl SaliencyField {
    pub fn new(values: Vec<f64>, image_index: usize) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("saliency value {v} outside [0,1]")));
        }
        Ok(Self { values, image_index })
    }

    /// Builds a field from arbitrary scores by min-max normalizing them.
    pub fn normalized(raw: &[f64], image_index: usize) -> Self {
        Self { values: normalize_min_max(raw), image_index }
    }

    pub(crate) fn from_unit(values: Vec<f64>, image_index: usize) -> Self {
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { values, image_index }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn image_index(&self) -> usize {
        self.image_index
    }

    pub fn with_index(mut self, image_index: usize) -> Self {
        self.image_index = image_index;
        self
    }
}

/// Rescales values linearly onto `[0, 1]`. Constant input maps to all zeros.
pub fn normalize_min_max(raw: &[f64]) -> Vec<f64> {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        if !raw.is_empty() {
            log::debug!("min-max normalization of a constant vector; mapping to zeros");
        }
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
}

/// Averages a pixel map over each superpixel.
pub fn pool_to_superpixels(map: &PixelMap, seg: &Segmentation, image_index: usize) -> Result<SaliencyField> {
    if !map.same_shape(seg.width(), seg.height()) {
        return Err(Error::DimensionMismatch {
            what: "saliency map vs segmentation".into(),
            expected_w: seg.width(),
            expected_h: seg.height(),
            got_w: map.width(),
            got_h: map.height(),
        });
    }
    Ok(SaliencyField::from_unit(pool_values(map.values(), seg), image_index))
}

pub(crate) fn pool_values(values: &[f64], seg: &Segmentation) -> Vec<f64> {
    let mut sums = vec![0.0; seg.len()];
    for (&label, &v) in seg.labels().iter().zip(values) {
        sums[label as usize] += v;
    }
    sums.iter()
        .zip(seg.areas())
        .map(|(s, &a)| (s / a as f64).clamp(0.0, 1.0))
        .collect()
}

/// Paints every pixel with its superpixel's value.
pub fn render_to_pixels(field: &SaliencyField, seg: &Segmentation) -> PixelMap {
    assert_eq!(field.len(), seg.len(), "field length must match segmentation");
    let data = seg.labels().iter().map(|&l| field.values[l as usize]).collect();
    PixelMap::new(seg.width(), seg.height(), data).expect("field values are in [0,1]")
}
