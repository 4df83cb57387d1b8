//! Threshold-sweep evaluation against binary ground truth: PR curves,
//! F-measure and ROC AUC, plus staged ablation reports.
//!
//! Maps are snapped to the 8-bit grid before scoring so that a map scores the
//! same in memory as after a PNG round trip. At threshold `k` (0..=255) a
//! pixel is predicted foreground when its level is strictly above `k`.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::image::{quantize, PixelMap};
use crate::iteration::{dsp_convert, prepare_image, run_group, ImageGroup};

pub const LEVELS: usize = 256;

/// Dataset-mean precision and recall at each of the 256 thresholds `k/255`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for ((t, p), r) in self.thresholds.iter().zip(&self.precision).zip(&self.recall) {
            out.push_str(&format!("{t:.6},{p:.6},{r:.6}\n"));
        }
        out
    }

    /// Max over thresholds of the F-measure of the mean precision and recall.
    pub fn max_f_measure(&self, beta2: f64) -> f64 {
        self.precision.iter().zip(&self.recall).map(|(&p, &r)| f_measure(p, r, beta2)).fold(0.0, f64::max)
    }
}

/// Foreground/background level histograms of one map.
#[derive(Debug, Clone)]
struct LevelCounts {
    fg: [u64; LEVELS],
    bg: [u64; LEVELS],
    n_fg: u64,
    n_bg: u64,
}

impl LevelCounts {
    fn new(map: &PixelMap, gt: &PixelMap) -> Result<Self> {
        if !map.same_shape(gt.width(), gt.height()) {
            return Err(Error::DimensionMismatch {
                what: "map vs ground truth".into(),
                expected_w: gt.width(),
                expected_h: gt.height(),
                got_w: map.width(),
                got_h: map.height(),
            });
        }
        let mut c = LevelCounts { fg: [0; LEVELS], bg: [0; LEVELS], n_fg: 0, n_bg: 0 };
        for (&v, &g) in map.values().iter().zip(gt.values()) {
            let q = quantize(v) as usize;
            if g > 0.5 {
                c.fg[q] += 1;
                c.n_fg += 1;
            } else {
                c.bg[q] += 1;
                c.n_bg += 1;
            }
        }
        Ok(c)
    }

    /// (TP, FP) at every threshold: counts of levels strictly above `k`.
    fn positives(&self) -> Vec<(u64, u64)> {
        let mut out = vec![(0, 0); LEVELS];
        let (mut tp, mut fp) = (0, 0);
        for k in (0..LEVELS).rev() {
            out[k] = (tp, fp);
            tp += self.fg[k];
            fp += self.bg[k];
        }
        out
    }
}

fn precision_recall(tp: u64, fp: u64, n_fg: u64) -> (f64, f64) {
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if n_fg == 0 { 1.0 } else { tp as f64 / n_fg as f64 };
    (precision, recall)
}

/// Per-threshold precision and recall of one map.
pub fn image_pr(map: &PixelMap, gt: &PixelMap) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = LevelCounts::new(map, gt)?;
    Ok(c.positives().into_iter().map(|(tp, fp)| precision_recall(tp, fp, c.n_fg)).unzip())
}

pub fn pr_curve(maps: &[PixelMap], gts: &[PixelMap]) -> Result<PrCurve> {
    if maps.len() != gts.len() || maps.is_empty() {
        return Err(Error::InvalidInput(format!("{} maps for {} ground truths", maps.len(), gts.len())));
    }
    let mut precision = vec![0.0; LEVELS];
    let mut recall = vec![0.0; LEVELS];
    for (m, g) in maps.iter().zip(gts) {
        let (p, r) = image_pr(m, g)?;
        for k in 0..LEVELS {
            precision[k] += p[k];
            recall[k] += r[k];
        }
    }
    let n = maps.len() as f64;
    precision.iter_mut().chain(recall.iter_mut()).for_each(|v| *v /= n);
    Ok(PrCurve { thresholds: (0..LEVELS).map(|k| k as f64 / 255.0).collect(), precision, recall })
}

/// F_β = (1 + β²)·P·R / (β²·P + R); 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64, beta2: f64) -> f64 {
    let den = beta2 * precision + recall;
    if den <= 0.0 {
        return 0.0;
    }
    ((1.0 + beta2) * precision * recall / den).clamp(0.0, 1.0)
}

/// F-measure at the adaptive threshold `min(2·mean, 1)`; pixels at or above it are foreground.
pub fn adaptive_f_measure(map: &PixelMap, gt: &PixelMap, beta2: f64) -> Result<f64> {
    let c = LevelCounts::new(map, gt)?;
    let total = (c.n_fg + c.n_bg).max(1) as f64;
    let mean = (0..LEVELS).map(|q| q as f64 * (c.fg[q] + c.bg[q]) as f64).sum::<f64>() / total / 255.0;
    let threshold = (2.0 * mean).min(1.0);
    let (mut tp, mut fp) = (0, 0);
    for q in 0..LEVELS {
        if q as f64 / 255.0 >= threshold {
            tp += c.fg[q];
            fp += c.bg[q];
        }
    }
    let (p, r) = precision_recall(tp, fp, c.n_fg);
    Ok(f_measure(p, r, beta2))
}

/// Area under the ROC curve traced by the 256 thresholds, with the (0,0) and
/// (1,1) endpoints always included; trapezoidal rule. Degenerate ground truth
/// (no foreground or no background) scores 0.5.
pub fn auc(map: &PixelMap, gt: &PixelMap) -> Result<f64> {
    let c = LevelCounts::new(map, gt)?;
    if c.n_fg == 0 || c.n_bg == 0 {
        return Ok(0.5);
    }
    let mut points: Vec<(f64, f64)> = c
        .positives()
        .into_iter()
        .map(|(tp, fp)| (fp as f64 / c.n_bg as f64, tp as f64 / c.n_fg as f64))
        .collect();
    points.push((0.0, 0.0));
    points.push((1.0, 1.0));
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points.dedup();
    let area: f64 = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    Ok(area.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub name: String,
    pub f_measure_max: f64,
    pub f_measure_adaptive: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Max over thresholds of F on the mean PR curve.
    pub f_measure_max: f64,
    /// Mean per-image adaptive-threshold F.
    pub f_measure_adaptive: f64,
    /// Mean per-image AUC.
    pub auc: f64,
    pub per_image: Vec<ImageMetrics>,
}

pub fn evaluate(names: &[String], maps: &[PixelMap], gts: &[PixelMap], beta2: f64) -> Result<(MetricReport, PrCurve)> {
    let curve = pr_curve(maps, gts)?;
    let mut per_image = Vec::with_capacity(maps.len());
    for ((name, m), g) in names.iter().zip(maps).zip(gts) {
        let (p, r) = image_pr(m, g)?;
        let fmax = p.iter().zip(&r).map(|(&p, &r)| f_measure(p, r, beta2)).fold(0.0, f64::max);
        per_image.push(ImageMetrics {
            name: name.clone(),
            f_measure_max: fmax,
            f_measure_adaptive: adaptive_f_measure(m, g, beta2)?,
            auc: auc(m, g)?,
        });
    }
    let n = per_image.len() as f64;
    let report = MetricReport {
        f_measure_max: curve.max_f_measure(beta2),
        f_measure_adaptive: per_image.iter().map(|m| m.f_measure_adaptive).sum::<f64>() / n,
        auc: per_image.iter().map(|m| m.auc).sum::<f64>() / n,
        per_image,
    };
    Ok((report, curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub metrics: MetricReport,
}

/// F-measure of one input method with and without the depth shape prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DspGainRow {
    pub method: String,
    pub f_without: f64,
    pub f_with: f64,
    /// (F_with − F_without) / F_without.
    pub gain: f64,
}

impl DspGainRow {
    pub fn new(method: impl Into<String>, f_without: f64, f_with: f64) -> Self {
        let gain = if f_without > 0.0 { (f_with - f_without) / f_without } else { 0.0 };
        Self { method: method.into(), f_without, f_with, gain }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub stages: Vec<StageReport>,
    pub dsp_gain: Vec<DspGainRow>,
}

fn ground_truths(group: &ImageGroup) -> Result<Vec<PixelMap>> {
    group
        .images
        .iter()
        .map(|i| {
            i.ground_truth
                .clone()
                .ok_or_else(|| Error::InvalidInput(format!("image {} has no ground truth", i.name)))
        })
        .collect()
}

/// Metrics for each stage of a run: initialization, addition, the first
/// addition + deletion pass, every iteration, and the final maps.
pub fn staged_reports(group: &ImageGroup, run: &crate::iteration::GroupRunResult, beta2: f64) -> Result<Vec<StageReport>> {
    let gts = ground_truths(group)?;
    let names = &run.names;
    let mut stages = Vec::new();
    let mut push = |stage: String, maps: Vec<PixelMap>| -> Result<()> {
        stages.push(StageReport { stage, metrics: evaluate(names, &maps, &gts, beta2)?.0 });
        Ok(())
    };
    push("initialization".into(), run.render(&run.stages.initial))?;
    push("addition".into(), run.render(&run.stages.addition))?;
    push("iter0".into(), run.iter0_maps())?;
    let max_t = run.iterations_used.iter().copied().max().unwrap_or(0);
    for t in 1..=max_t {
        push(format!("iter{t}"), run.maps_at(t))?;
    }
    push("final".into(), run.final_maps.clone())?;
    Ok(stages)
}

/// Max-F of each method's raw maps against the same maps after depth-shape-prior conversion.
pub fn dsp_gain(group: &ImageGroup, config: &PipelineConfig, methods: &[String]) -> Result<Vec<DspGainRow>> {
    let gts = ground_truths(group)?;
    let prepared = group.images.iter().map(|i| prepare_image(i, config)).collect::<Result<Vec<_>>>()?;
    methods
        .iter()
        .map(|method| {
            let mut without = Vec::new();
            let mut with = Vec::new();
            for (img, prep) in group.images.iter().zip(&prepared) {
                let set = img.saliency.only(method).ok_or_else(|| {
                    Error::InvalidInput(format!("image {} has no map for method '{method}'", img.name))
                })?;
                let map = &set.maps[0];
                with.push(dsp_convert(prep, map, config)?);
                without.push(map.clone());
            }
            let f_without = pr_curve(&without, &gts)?.max_f_measure(config.beta2);
            let f_with = pr_curve(&with, &gts)?.max_f_measure(config.beta2);
            Ok(DspGainRow::new(method.clone(), f_without, f_with))
        })
        .collect()
}

/// Staged metrics of a full run plus the per-method DSP gain table.
pub fn ablation_report(group: &ImageGroup, config: &PipelineConfig) -> Result<AblationReport> {
    let run = run_group(group, config)?;
    let stages = staged_reports(group, &run, config.beta2)?;
    let methods = group.images.first().map(|i| i.saliency.method_names.clone()).unwrap_or_default();
    Ok(AblationReport { stages, dsp_gain: dsp_gain(group, config, &methods)? })
}
