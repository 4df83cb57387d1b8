//! Inter-image constraint: multi-cue superpixel matching across the group and
//! suppression of regions that do not recur in the other images.

use rayon::prelude::*;

use crate::field::SaliencyField;
use crate::features::{chi_square, SuperpixelFeatures};

const CHI_SQUARE_EPS: f64 = 1e-10;

/// Combined similarity between every superpixel of `source` and of `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    pub source_image: usize,
    pub target_image: usize,
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl SimilarityTable {
    pub fn new(source_image: usize, target_image: usize, rows: usize, cols: usize, scores: Vec<f64>) -> Self {
        assert_eq!(scores.len(), rows * cols);
        Self { source_image, target_image, rows, cols, scores }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.scores[m * self.cols + n]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.scores[m * self.cols..(m + 1) * self.cols]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn transpose(&self) -> SimilarityTable {
        let mut t = vec![0.0; self.scores.len()];
        for m in 0..self.rows {
            for n in 0..self.cols {
                t[n * self.rows + m] = self.scores[m * self.cols + n];
            }
        }
        SimilarityTable::new(self.target_image, self.source_image, self.cols, self.rows, t)
    }
}

/// Per-superpixel probability of belonging to a region shared by the group.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonProbability {
    pub values: Vec<f64>,
}

/// 1 − ½[χ²(color) + χ²(texture)], clamped to `[0, 1]`.
pub fn rgb_similarity(hc_m: &[f64], ht_m: &[f64], hc_n: &[f64], ht_n: &[f64]) -> f64 {
    (1.0 - 0.5 * (chi_square(hc_m, hc_n) + chi_square(ht_m, ht_n))).clamp(0.0, 1.0)
}

/// Depth contrast of superpixel `m`: Σ_{k≠m} |d_m − d_k|·exp(−‖p_m − p_k‖/σ²).
pub fn depth_contrast(features: &SuperpixelFeatures, m: usize, sigma2: f64) -> f64 {
    let (dm, pm) = (features.mean_depth[m], features.centroid[m]);
    (0..features.len())
        .filter(|&k| k != m)
        .map(|k| {
            let pk = features.centroid[k];
            let dist = ((pm[0] - pk[0]).powi(2) + (pm[1] - pk[1]).powi(2)).sqrt();
            (dm - features.mean_depth[k]).abs() * (-dist / sigma2).exp()
        })
        .sum()
}

/// Depth contrast of every superpixel divided by the image maximum (zeros if the maximum is 0).
pub fn normalized_depth_contrast(features: &SuperpixelFeatures, sigma2: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..features.len()).map(|m| depth_contrast(features, m, sigma2)).collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// exp(−(|d_m − d_n| + |Dc_m − Dc_n|)/σ²).
pub fn depth_similarity(depth_m: f64, contrast_m: f64, depth_n: f64, contrast_n: f64, sigma2: f64) -> f64 {
    let w_d = (depth_m - depth_n).abs();
    let w_c = (contrast_m - contrast_n).abs();
    (-(w_d + w_c) / sigma2).exp()
}

/// exp(−|a − b|), in `[e⁻¹, 1]` for scores in `[0, 1]`.
pub fn saliency_similarity_raw(a: f64, b: f64) -> f64 {
    (-(a - b).abs()).exp()
}

/// Saliency similarity rescaled affinely from `[e⁻¹, 1]` onto `[0, 1]`.
pub fn saliency_similarity(a: f64, b: f64) -> f64 {
    let floor = (-1.0f64).exp();
    ((saliency_similarity_raw(a, b) - floor) / (1.0 - floor)).clamp(0.0, 1.0)
}

/// Sparse view of an L1 histogram: (bin, value) for nonzero bins, ascending.
#[derive(Debug, Clone, PartialEq)]
struct SparseHist(Vec<(u32, f64)>);

impl SparseHist {
    fn from_dense(h: &[f64]) -> Self {
        Self(h.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(b, &v)| (b as u32, v)).collect())
    }

    /// Same terms and summation order as the dense χ², skipping bins where both are zero.
    fn chi_square(&self, other: &SparseHist) -> f64 {
        let term = |a: f64, b: f64| {
            let d = a - b;
            if d == 0.0 {
                0.0
            } else {
                d * d / (a + b + CHI_SQUARE_EPS)
            }
        };
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < a.len() || j < b.len() {
            let ba = a.get(i).map_or(u32::MAX, |e| e.0);
            let bb = b.get(j).map_or(u32::MAX, |e| e.0);
            if ba == bb {
                sum += term(a[i].1, b[j].1);
                i += 1;
                j += 1;
            } else if ba < bb {
                sum += term(a[i].1, 0.0);
                i += 1;
            } else {
                sum += term(0.0, b[j].1);
                j += 1;
            }
        }
        0.5 * sum
    }
}

/// Everything about one image that the cross-image matching consumes.
#[derive(Debug, Clone)]
pub struct MatchCues {
    color: Vec<SparseHist>,
    texture: Vec<SparseHist>,
    depth: Vec<f64>,
    contrast: Vec<f64>,
}

impl MatchCues {
    pub fn new(features: &SuperpixelFeatures, sigma2: f64) -> Self {
        let n = features.len();
        Self {
            color: (0..n).map(|m| SparseHist::from_dense(features.color_hist.row(m))).collect(),
            texture: (0..n).map(|m| SparseHist::from_dense(features.texture_hist.row(m))).collect(),
            depth: features.mean_depth.clone(),
            contrast: normalized_depth_contrast(features, sigma2),
        }
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

/// Min-max normalizes a cue table in place; a constant table keeps its raw values.
fn normalize_table(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range > 0.0 {
        values.iter_mut().for_each(|v| *v = ((*v - lo) / range).clamp(0.0, 1.0));
    }
}

/// Averages the three cue tables after normalizing each over the table.
pub fn combine_cue_tables(
    source_image: usize,
    target_image: usize,
    rows: usize,
    cols: usize,
    mut color: Vec<f64>,
    mut depth: Vec<f64>,
    mut saliency: Vec<f64>,
) -> SimilarityTable {
    normalize_table(&mut color);
    normalize_table(&mut depth);
    normalize_table(&mut saliency);
    let scores = color
        .iter()
        .zip(&depth)
        .zip(&saliency)
        .map(|((c, d), s)| ((c + d + s) / 3.0).clamp(0.0, 1.0))
        .collect();
    SimilarityTable::new(source_image, target_image, rows, cols, scores)
}

/// Combined multi-cue similarity table from image `i` to image `j`.
pub fn combined_similarity(
    (i, cues_i, sal_i): (usize, &MatchCues, &[f64]),
    (j, cues_j, sal_j): (usize, &MatchCues, &[f64]),
    sigma2: f64,
) -> SimilarityTable {
    let (rows, cols) = (cues_i.len(), cues_j.len());
    let per_row: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..rows)
        .into_par_iter()
        .map(|m| {
            let mut c = Vec::with_capacity(cols);
            let mut d = Vec::with_capacity(cols);
            let mut s = Vec::with_capacity(cols);
            for n in 0..cols {
                let chi = cues_i.color[m].chi_square(&cues_j.color[n]) + cues_i.texture[m].chi_square(&cues_j.texture[n]);
                c.push((1.0 - 0.5 * chi).clamp(0.0, 1.0));
                d.push(depth_similarity(cues_i.depth[m], cues_i.contrast[m], cues_j.depth[n], cues_j.contrast[n], sigma2));
                s.push(saliency_similarity(sal_i[m], sal_j[n]));
            }
            (c, d, s)
        })
        .collect();
    let mut color = Vec::with_capacity(rows * cols);
    let mut depth = Vec::with_capacity(rows * cols);
    let mut saliency = Vec::with_capacity(rows * cols);
    for (c, d, s) in per_row {
        color.extend(c);
        depth.extend(d);
        saliency.extend(s);
    }
    combine_cue_tables(i, j, rows, cols, color, depth, saliency)
}

/// Index of the most similar target superpixel; ties go to the lower index.
pub fn best_match(table: &SimilarityTable, m: usize) -> usize {
    let row = table.row(m);
    let mut best = 0;
    for (n, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = n;
        }
    }
    best
}

/// Mean best-match score of each superpixel of the source image over the
/// tables to every other image. Without other images every value is 1.
pub fn common_probability(tables: &[&SimilarityTable], n_superpixels: usize) -> CommonProbability {
    if tables.is_empty() {
        log::warn!("group has a single image; deletion has no inter-image evidence");
        return CommonProbability { values: vec![1.0; n_superpixels] };
    }
    let k = tables.len() as f64;
    let values = (0..n_superpixels)
        .map(|m| {
            let sum: f64 = tables.iter().map(|t| t.get(m, best_match(t, m))).sum();
            (sum / k).clamp(0.0, 1.0)
        })
        .collect();
    CommonProbability { values }
}

/// S_sp·P_c, before normalization.
pub fn apply_deletion_raw(s_sp: &[f64], p_c: &CommonProbability) -> Vec<f64> {
    s_sp.iter().zip(&p_c.values).map(|(s, p)| s * p).collect()
}

pub fn apply_deletion(s_sp: &SaliencyField, p_c: &CommonProbability) -> SaliencyField {
    SaliencyField::normalized(&apply_deletion_raw(s_sp.values(), p_c), s_sp.image_index())
}

/// Similarity tables for every ordered pair (i, j), i ≠ j, where image `i`
/// is active. Each unordered pair is computed once and transposed.
pub fn group_tables(
    cues: &[MatchCues],
    saliency: &[&[f64]],
    active: &[bool],
    sigma2: f64,
) -> Vec<Vec<Option<SimilarityTable>>> {
    let n = cues.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| active[i] || active[j])
        .collect();
    let computed: Vec<((usize, usize), SimilarityTable)> = pairs
        .into_par_iter()
        .map(|(i, j)| ((i, j), combined_similarity((i, &cues[i], saliency[i]), (j, &cues[j], saliency[j]), sigma2)))
        .collect();
    let mut out: Vec<Vec<Option<SimilarityTable>>> = (0..n).map(|_| (0..n).map(|_| None).collect()).collect();
    for ((i, j), table) in computed {
        if active[j] {
            out[j][i] = Some(table.transpose());
        }
        if active[i] {
            out[i][j] = Some(table);
        }
    }
    out
}

/// Common probability for every active image of the group.
pub fn group_common_probability(
    cues: &[MatchCues],
    saliency: &[&[f64]],
    active: &[bool],
    sigma2: f64,
) -> Vec<Option<CommonProbability>> {
    let tables = group_tables(cues, saliency, active, sigma2);
    tables
        .iter()
        .enumerate()
        .map(|(i, row)| {
            active[i].then(|| {
                let mine: Vec<&SimilarityTable> = row.iter().flatten().collect();
                common_probability(&mine, cues[i].len())
            })
        })
        .collect()
}
