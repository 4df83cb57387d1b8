//! Intra-image enhancement: depth shape prior growth, depth confidence,
//! RGBD combination and graph saliency propagation.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::field::SaliencyField;
use crate::features::SuperpixelFeatures;
use crate::image::DepthMap;

const DEPTH_HIST_BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DspParams {
    pub k_roots: usize,
    /// Max depth step between a candidate and the current child set mean.
    pub t1: f64,
    /// Max depth gap between a candidate and the root.
    pub t2: f64,
}

impl Default for DspParams {
    fn default() -> Self {
        Self { k_roots: 10, t1: 0.1, t2: 0.2 }
    }
}

impl DspParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_roots == 0 || !(self.t1 > 0.0 && self.t1 <= self.t2 && self.t2 <= 1.0) {
            return Err(Error::InvalidParameter(format!("invalid DSP parameters {self:?}")));
        }
        Ok(())
    }
}

/// Scalar depth-map quality in `[0, 1]`; 0 disables depth cues.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DepthConfidence(f64);

impl DepthConfidence {
    pub const NONE: DepthConfidence = DepthConfidence(0.0);

    pub fn new(value: f64) -> Self {
        Self(if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// The three ingredients of the depth confidence: mean, coefficient of
/// variation and normalized 16-bin entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthStatistics {
    pub mean: f64,
    pub cv: f64,
    pub entropy: f64,
}

pub fn depth_statistics(values: &[f64]) -> DepthStatistics {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
    let mut hist = [0usize; DEPTH_HIST_BINS];
    for &v in values {
        hist[((v * DEPTH_HIST_BINS as f64) as usize).min(DEPTH_HIST_BINS - 1)] += 1;
    }
    let entropy = -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
        / (DEPTH_HIST_BINS as f64).ln();
    DepthStatistics { mean, cv, entropy }
}

/// λ = clamp(exp((1 − mean)·CV·H) − 1, 0, 1).
pub fn depth_confidence(depth: &DepthMap) -> DepthConfidence {
    let s = depth_statistics(depth.values());
    DepthConfidence::new(((1.0 - s.mean) * s.cv * s.entropy).exp() - 1.0)
}

/// Descending by value, ties by lower index.
fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// The `k` most salient superpixels, ties broken by lower index.
pub fn select_root_seeds(s_f: &SaliencyField, k: usize) -> Vec<usize> {
    if k > s_f.len() {
        log::warn!("k_roots {k} exceeds {} superpixels; clamping", s_f.len());
    }
    let mut idx = rank_desc(s_f.values());
    idx.truncate(k.min(s_f.len()));
    idx
}

/// Region growth from one root over the superpixel graph.
///
/// The root is the first child set and gets value 1. Each following loop
/// examines the unvisited neighbors of the previous loop's new children; a
/// neighbor joins when it is within `t1` of the mean depth of all children so
/// far and within `t2` of the root depth, taking the value
/// `1 − min(|d − mean|, |d − d_root|)`. Growth stops when a loop adds nothing.
pub fn grow_dsp(root: usize, depths: &[f64], adjacency: &[Vec<usize>], params: &DspParams) -> Vec<f64> {
    let n = depths.len();
    let mut dsp = vec![0.0; n];
    let mut member = vec![false; n];
    let d_root = depths[root];
    member[root] = true;
    dsp[root] = 1.0;
    let mut sum = d_root;
    let mut count = 1usize;
    let mut last = vec![root];
    let mut candidate = vec![false; n];
    while !last.is_empty() {
        let mean = sum / count as f64;
        let mut frontier: Vec<usize> = Vec::new();
        for &c in &last {
            for &q in &adjacency[c] {
                if !member[q] && !candidate[q] {
                    candidate[q] = true;
                    frontier.push(q);
                }
            }
        }
        frontier.sort_unstable();
        let mut joined = Vec::new();
        for &q in &frontier {
            candidate[q] = false;
            let step = (depths[q] - mean).abs();
            let gap = (depths[q] - d_root).abs();
            if step <= params.t1 && gap <= params.t2 {
                joined.push(q);
                dsp[q] = 1.0 - step.min(gap);
            }
        }
        for &q in &joined {
            member[q] = true;
            sum += depths[q];
            count += 1;
        }
        last = joined;
    }
    dsp
}

/// Mean of the root-wise growths over the top-K roots of `s_f`.
pub fn compute_dsp(
    s_f: &SaliencyField,
    depths: &[f64],
    adjacency: &[Vec<usize>],
    params: &DspParams,
) -> SaliencyField {
    let roots = select_root_seeds(s_f, params.k_roots);
    let mut acc = vec![0.0; s_f.len()];
    for &r in &roots {
        for (a, v) in acc.iter_mut().zip(grow_dsp(r, depths, adjacency, params)) {
            *a += v;
        }
    }
    let k = roots.len().max(1) as f64;
    SaliencyField::from_unit(acc.into_iter().map(|v| (v / k).clamp(0.0, 1.0)).collect(), s_f.image_index())
}

/// (1 − λ)·S + λ·S·DSP, before normalization.
pub fn combine_rgbd_raw(s_f: &[f64], dsp: &[f64], lambda: DepthConfidence) -> Vec<f64> {
    let l = lambda.value();
    s_f.iter().zip(dsp).map(|(&s, &d)| s * (1.0 - l * (1.0 - d))).collect()
}

pub fn combine_rgbd(s_f: &SaliencyField, dsp: &SaliencyField, lambda: DepthConfidence) -> SaliencyField {
    SaliencyField::normalized(&combine_rgbd_raw(s_f.values(), dsp.values(), lambda), s_f.image_index())
}

/// Sparse symmetric superpixel affinities, nonzero only between neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    sigma2: f64,
}

impl AffinityMatrix {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, sigma2: f64) -> Self {
        Self { rows, sigma2 }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn row(&self, u: usize) -> &[(usize, f64)] {
        &self.rows[u]
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.rows[u].iter().find(|(n, _)| *n == v).map_or(0.0, |&(_, w)| w)
    }
}

/// w_uv = exp(−(‖c_u − c_v‖ + λ·|d_u − d_v|) / σ²) for adjacent u, v, with
/// colors in unit-scaled Lab.
pub fn build_affinity(
    features: &SuperpixelFeatures,
    adjacency: &[Vec<usize>],
    lambda: DepthConfidence,
    sigma2: f64,
) -> AffinityMatrix {
    let l = lambda.value();
    let rows = adjacency
        .iter()
        .enumerate()
        .map(|(u, nbrs)| {
            let cu = features.unit_lab(u);
            nbrs.iter()
                .map(|&v| {
                    let cv = features.unit_lab(v);
                    let color = ((cu[0] - cv[0]).powi(2) + (cu[1] - cv[1]).powi(2) + (cu[2] - cv[2]).powi(2)).sqrt();
                    let depth = (features.mean_depth[u] - features.mean_depth[v]).abs();
                    (v, (-(color + l * depth) / sigma2).exp())
                })
                .collect()
        })
        .collect();
    AffinityMatrix { rows, sigma2 }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationSeeds {
    pub foreground: Vec<usize>,
    pub background: Vec<usize>,
}

/// Top-κ superpixels as foreground seeds and bottom-κ as background seeds.
/// With fewer than 2κ superpixels the ranking is split in half instead. A
/// constant field has no ranking and yields no seeds.
pub fn select_propagation_seeds(s_dp: &SaliencyField, kappa: usize) -> PropagationSeeds {
    let v = s_dp.values();
    if v.iter().all(|&x| x == v[0]) {
        return PropagationSeeds { foreground: Vec::new(), background: Vec::new() };
    }
    let order = rank_desc(v);
    let n = order.len();
    let (nf, nb) = if n >= 2 * kappa { (kappa, kappa) } else { (n - n / 2, n / 2) };
    PropagationSeeds { foreground: order[..nf].to_vec(), background: order[n - nb..].to_vec() }
}

/// How the propagation sum is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMode {
    /// Σ ŵ·S₀ with weights row-normalized over the neighbors plus a unit self weight.
    RowNormalized,
    /// The raw weighted sum Σ w·S₀ over neighbors.
    Unnormalized,
}

/// Seed-initialized scores: 1 on foreground seeds, 0 on background seeds, `s_dp` elsewhere.
pub fn initial_propagation_scores(s_dp: &SaliencyField, seeds: &PropagationSeeds) -> Vec<f64> {
    let mut s0 = s_dp.values().to_vec();
    for &f in &seeds.foreground {
        s0[f] = 1.0;
    }
    for &b in &seeds.background {
        s0[b] = 0.0;
    }
    s0
}

pub fn propagate_raw(affinity: &AffinityMatrix, s0: &[f64], mode: PropagationMode) -> Vec<f64> {
    (0..affinity.len())
        .map(|m| {
            let row = affinity.row(m);
            if row.is_empty() {
                return s0[m];
            }
            let weighted: f64 = row.iter().map(|&(n, w)| w * s0[n]).sum();
            match mode {
                PropagationMode::RowNormalized => {
                    let total: f64 = 1.0 + row.iter().map(|&(_, w)| w).sum::<f64>();
                    ((s0[m] + weighted) / total).clamp(0.0, 1.0)
                }
                PropagationMode::Unnormalized => weighted,
            }
        })
        .collect()
}

pub fn propagate(
    affinity: &AffinityMatrix,
    s_dp: &SaliencyField,
    seeds: &PropagationSeeds,
    mode: PropagationMode,
) -> SaliencyField {
    let s0 = initial_propagation_scores(s_dp, seeds);
    SaliencyField::normalized(&propagate_raw(affinity, &s0, mode), s_dp.image_index())
}

/// Everything the addition scheme produces for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditionOutput {
    pub dsp: SaliencyField,
    pub s_dp: SaliencyField,
    pub s_sp: SaliencyField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditionParams {
    pub dsp: DspParams,
    pub kappa: usize,
    pub sigma2: f64,
    pub mode: PropagationMode,
}

impl From<&crate::config::PipelineConfig> for AdditionParams {
    fn from(c: &crate::config::PipelineConfig) -> Self {
        Self {
            dsp: DspParams { k_roots: c.k_roots, t1: c.t1, t2: c.t2 },
            kappa: c.kappa,
            sigma2: c.sigma2,
            mode: if c.row_normalize { PropagationMode::RowNormalized } else { PropagationMode::Unnormalized },
        }
    }
}

/// Runs depth propagation then saliency propagation starting from `start`.
pub fn addition_pass(
    start: &SaliencyField,
    features: &SuperpixelFeatures,
    adjacency: &[Vec<usize>],
    lambda: DepthConfidence,
    params: &AdditionParams,
) -> AdditionOutput {
    let dsp = compute_dsp(start, &features.mean_depth, adjacency, &params.dsp);
    let s_dp = combine_rgbd(start, &dsp, lambda);
    let affinity = build_affinity(features, adjacency, lambda, params.sigma2);
    let seeds = select_propagation_seeds(&s_dp, params.kappa);
    let s_sp = propagate(&affinity, &s_dp, &seeds, params.mode);
    AdditionOutput { dsp, s_dp, s_sp }
}
