//! Per-superpixel descriptors: mean color and depth, centroid, color and texture histograms.

use crate::error::{Error, Result};
use crate::image::{lab_unit, luminance, srgb_to_lab, DepthMap, RgbImage};
use crate::segmentation::Segmentation;

/// Lab quantization per channel; the color histogram has `COLOR_LEVELS³` bins.
pub const COLOR_LEVELS: usize = 8;
pub const COLOR_BINS: usize = COLOR_LEVELS * COLOR_LEVELS * COLOR_LEVELS;
/// 58 uniform 8-neighbor patterns plus one bin for all others.
pub const TEXTURE_BINS: usize = 59;

const CHI_SQUARE_EPS: f64 = 1e-10;

/// Fixed-width histograms for a set of superpixels, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Histograms {
    bins: usize,
    data: Vec<f64>,
}

impl Histograms {
    fn zeros(count: usize, bins: usize) -> Self {
        Self { bins, data: vec![0.0; count * bins] }
    }

    pub fn from_rows(bins: usize, rows: &[Vec<f64>]) -> Self {
        assert!(rows.iter().all(|r| r.len() == bins));
        Self { bins, data: rows.concat() }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.bins..(i + 1) * self.bins]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.bins..(i + 1) * self.bins]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelFeatures {
    /// CIE L*a*b* mean color per superpixel.
    pub mean_lab: Vec<[f64; 3]>,
    pub mean_depth: Vec<f64>,
    /// Centroid in pixel units divided by the image diagonal.
    pub centroid: Vec<[f64; 2]>,
    pub color_hist: Histograms,
    pub texture_hist: Histograms,
}

impl SuperpixelFeatures {
    pub fn len(&self) -> usize {
        self.mean_depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_depth.is_empty()
    }

    /// Mean color with every Lab channel scaled into `[0, 1]`.
    pub fn unit_lab(&self, i: usize) -> [f64; 3] {
        lab_unit(self.mean_lab[i])
    }
}

pub fn extract_features(rgb: &RgbImage, depth: &DepthMap, seg: &Segmentation) -> Result<SuperpixelFeatures> {
    let (w, h) = (rgb.width(), rgb.height());
    for (what, dw, dh) in [("depth", depth.width(), depth.height()), ("segmentation", seg.width(), seg.height())] {
        if (dw, dh) != (w, h) {
            return Err(Error::DimensionMismatch {
                what: format!("{what} vs rgb"),
                expected_w: w,
                expected_h: h,
                got_w: dw,
                got_h: dh,
            });
        }
    }
    let n = seg.len();
    let diag = ((w * w + h * h) as f64).sqrt();
    let codes = uniform_lbp_codes(rgb);

    let mut lab_sum = vec![[0.0f64; 3]; n];
    let mut depth_sum = vec![0.0f64; n];
    let mut pos_sum = vec![[0.0f64; 2]; n];
    let mut color_hist = Histograms::zeros(n, COLOR_BINS);
    let mut texture_hist = Histograms::zeros(n, TEXTURE_BINS);

    for (p, (&label, &px)) in seg.labels().iter().zip(rgb.pixels()).enumerate() {
        let r = label as usize;
        let lab = srgb_to_lab(px);
        for c in 0..3 {
            lab_sum[r][c] += lab[c];
        }
        depth_sum[r] += depth.values()[p];
        pos_sum[r][0] += (p % w) as f64;
        pos_sum[r][1] += (p / w) as f64;
        color_hist.row_mut(r)[color_bin(lab)] += 1.0;
        texture_hist.row_mut(r)[codes[p] as usize] += 1.0;
    }

    let mut mean_lab = Vec::with_capacity(n);
    let mut mean_depth = Vec::with_capacity(n);
    let mut centroid = Vec::with_capacity(n);
    for r in 0..n {
        let area = seg.areas()[r];
        if area == 0 {
            return Err(Error::Internal(format!("superpixel {r} is empty")));
        }
        let a = area as f64;
        mean_lab.push([lab_sum[r][0] / a, lab_sum[r][1] / a, lab_sum[r][2] / a]);
        mean_depth.push((depth_sum[r] / a).clamp(0.0, 1.0));
        centroid.push([pos_sum[r][0] / a / diag, pos_sum[r][1] / a / diag]);
        color_hist.row_mut(r).iter_mut().for_each(|b| *b /= a);
        texture_hist.row_mut(r).iter_mut().for_each(|b| *b /= a);
    }
    Ok(SuperpixelFeatures { mean_lab, mean_depth, centroid, color_hist, texture_hist })
}

fn color_bin(lab: [f64; 3]) -> usize {
    let u = lab_unit(lab);
    let q = |v: f64| ((v * COLOR_LEVELS as f64) as usize).min(COLOR_LEVELS - 1);
    (q(u[0]) * COLOR_LEVELS + q(u[1])) * COLOR_LEVELS + q(u[2])
}

/// Maps each 8-bit LBP pattern to its uniform-pattern bin (0..58), with
/// every pattern having more than two 0/1 transitions sent to bin 58.
pub fn uniform_lbp_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut next = 0u8;
    for (code, slot) in table.iter_mut().enumerate() {
        let rotated = (code as u8).rotate_left(1);
        let transitions = (code as u8 ^ rotated).count_ones();
        if transitions <= 2 {
            *slot = next;
            next += 1;
        } else {
            *slot = (TEXTURE_BINS - 1) as u8;
        }
    }
    debug_assert_eq!(next as usize, TEXTURE_BINS - 1);
    table
}

/// Uniform LBP (8 neighbors, radius 1) on luminance. Border pixels read
/// replicated edge values; a neighbor sets its bit when it is at least as
/// bright as the center.
pub fn uniform_lbp_codes(rgb: &RgbImage) -> Vec<u8> {
    let (w, h) = (rgb.width() as isize, rgb.height() as isize);
    let gray: Vec<f64> = rgb.pixels().iter().map(|&p| luminance(p)).collect();
    let table = uniform_lbp_table();
    // circular order starting east, counter-clockwise
    const OFFSETS: [(isize, isize); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];
    let at = |x: isize, y: isize| gray[(y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize];
    let mut codes = Vec::with_capacity(gray.len());
    for y in 0..h {
        for x in 0..w {
            let center = at(x, y);
            let mut code = 0u8;
            for (bit, (dx, dy)) in OFFSETS.iter().enumerate() {
                if at(x + dx, y + dy) >= center {
                    code |= 1 << bit;
                }
            }
            codes.push(table[code as usize]);
        }
    }
    codes
}

/// χ²(h, g) = ½ Σ (h_b − g_b)² / (h_b + g_b + ε); lies in `[0, 1]` for L1-normalized inputs.
pub fn chi_square(h: &[f64], g: &[f64]) -> f64 {
    debug_assert_eq!(h.len(), g.len());
    0.5 * h
        .iter()
        .zip(g)
        .map(|(&a, &b)| {
            let d = a - b;
            if d == 0.0 {
                0.0
            } else {
                d * d / (a + b + CHI_SQUARE_EPS)
            }
        })
        .sum::<f64>()
}
