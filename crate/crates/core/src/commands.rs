//! Batch commands behind the `cosal` binary: run, dsp, eval and synth.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::dataset::{images_by_stem, list_groups, load_group, read_gray, read_mask, write_gray_png, write_text};
use crate::error::{Error, Result};
use crate::evaluation::{dsp_gain, evaluate, pr_curve, staged_reports, DspGainRow, MetricReport, StageReport};
use crate::image::PixelMap;
use crate::iteration::{dsp_convert, prepare_image, run_group, GroupRunResult, ImageGroup};
use crate::synth::{generate, write_synth, SynthSpec};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub config: PipelineConfig,
    /// Groups processed concurrently; 0 uses every core.
    pub jobs: usize,
    pub one_for_one: Option<String>,
    pub dump_stages: bool,
}

/// Outcome of a batch command. Failed groups do not stop the others.
#[derive(Debug, Default)]
pub struct BatchSummary {
    pub succeeded: Vec<String>,
    pub failed: Vec<(String, String)>,
}

impl BatchSummary {
    pub fn is_success(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Debug, Serialize)]
struct GroupMetrics<'a> {
    group: &'a str,
    images: &'a [String],
    iterations_used: &'a [usize],
    delta_trace: &'a [Vec<f64>],
    depth_confidence: &'a [f64],
    stages: &'a [StageReport],
}

#[derive(Debug, Serialize)]
struct GroupSummary {
    group: String,
    final_metrics: MetricReport,
}

#[derive(Debug, Serialize)]
struct RunMetrics<'a> {
    config: &'a PipelineConfig,
    overall: Option<MetricReport>,
    groups: Vec<GroupSummary>,
    failed_groups: Vec<String>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::Internal(e.to_string()))
}

fn group_name(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load(dir: &Path, opts: &RunOptions) -> Result<ImageGroup> {
    let group = load_group(dir, &opts.config)?.group;
    match &opts.one_for_one {
        Some(m) => group.one_for_one(m),
        None => Ok(group),
    }
}

fn write_maps(dir: &Path, names: &[String], maps: &[PixelMap]) -> Result<()> {
    for (name, map) in names.iter().zip(maps) {
        write_gray_png(&dir.join(format!("{name}.png")), map)?;
    }
    Ok(())
}

struct GroupOutcome {
    name: String,
    final_maps: Vec<PixelMap>,
    gts: Option<Vec<PixelMap>>,
    names: Vec<String>,
}

fn run_one(dir: &Path, opts: &RunOptions) -> Result<GroupOutcome> {
    let group = load(dir, opts)?;
    let run: GroupRunResult = run_group(&group, &opts.config)?;
    let out = opts.out.join(&group.name);
    write_maps(&out, &run.names, &run.final_maps)?;
    if opts.dump_stages {
        let stages = out.join("stages");
        write_maps(&stages.join("initialization"), &run.names, &run.render(&run.stages.initial))?;
        write_maps(&stages.join("addition"), &run.names, &run.render(&run.stages.addition))?;
        let max_t = run.iterations_used.iter().copied().max().unwrap_or(0);
        for t in 0..=max_t {
            write_maps(&stages.join(format!("iter{t}")), &run.names, &run.maps_at(t))?;
        }
    }
    let gts = if group.has_ground_truth() {
        let reports = staged_reports(&group, &run, opts.config.beta2)?;
        let metrics = GroupMetrics {
            group: &group.name,
            images: &run.names,
            iterations_used: &run.iterations_used,
            delta_trace: &run.delta_trace,
            depth_confidence: &run.lambdas,
            stages: &reports,
        };
        write_text(&out.join("metrics.json"), &to_json(&metrics)?)?;
        let gts: Vec<PixelMap> = group.images.iter().filter_map(|i| i.ground_truth.clone()).collect();
        write_text(&out.join("pr_curve.csv"), &pr_curve(&run.final_maps, &gts)?.to_csv())?;
        Some(gts)
    } else {
        log::info!("group {}: no ground truth, metrics skipped", group.name);
        None
    };
    Ok(GroupOutcome { name: group.name, final_maps: run.final_maps, gts, names: run.names })
}

/// Runs the co-saliency pipeline over every group of a dataset.
pub fn cmd_run(opts: &RunOptions) -> Result<BatchSummary> {
    opts.config.validate()?;
    let groups = list_groups(&opts.dataset)?;
    if groups.is_empty() {
        return Err(Error::InvalidInput(format!("no groups found under {}", opts.dataset.display())));
    }
    let results: Vec<(String, Result<GroupOutcome>)> =
        pool(opts.jobs)?.install(|| groups.par_iter().map(|d| (group_name(d), run_one(d, opts))).collect());

    let mut summary = BatchSummary::default();
    let mut all_names = Vec::new();
    let mut all_maps = Vec::new();
    let mut all_gts = Vec::new();
    let mut group_summaries = Vec::new();
    for (name, result) in results {
        match result {
            Ok(outcome) => {
                if let Some(gts) = outcome.gts {
                    let labelled: Vec<String> = outcome.names.iter().map(|n| format!("{}/{n}", outcome.name)).collect();
                    let (report, _) = evaluate(&labelled, &outcome.final_maps, &gts, opts.config.beta2)?;
                    group_summaries.push(GroupSummary { group: outcome.name.clone(), final_metrics: report });
                    all_names.extend(labelled);
                    all_maps.extend(outcome.final_maps);
                    all_gts.extend(gts);
                }
                summary.succeeded.push(outcome.name);
            }
            Err(e) => {
                log::error!("group {name} failed: {e}");
                summary.failed.push((name, e.to_string()));
            }
        }
    }
    let overall = if all_maps.is_empty() {
        None
    } else {
        let (report, curve) = evaluate(&all_names, &all_maps, &all_gts, opts.config.beta2)?;
        write_text(&opts.out.join("pr_curve.csv"), &curve.to_csv())?;
        Some(report)
    };
    let metrics = RunMetrics {
        config: &opts.config,
        overall,
        groups: group_summaries,
        failed_groups: summary.failed.iter().map(|(g, _)| g.clone()).collect(),
    };
    write_text(&opts.out.join("metrics.json"), &to_json(&metrics)?)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct DspGroupReport {
    group: String,
    rows: Vec<DspGainRow>,
}

#[derive(Debug, Serialize)]
struct DspReport {
    overall: Vec<DspGainRow>,
    groups: Vec<DspGroupReport>,
}

fn gain_table(rows: &[DspGainRow]) -> String {
    let mut out = String::from("method,f_without,f_with,gain_percent\n");
    for r in rows {
        out.push_str(&format!("{},{:.4},{:.4},{:.2}\n", r.method, r.f_without, r.f_with, r.gain * 100.0));
    }
    out
}

/// Standalone depth-shape-prior conversion of each method's maps, with a
/// with/without F-measure table wherever ground truth exists.
pub fn cmd_dsp(opts: &RunOptions, methods: &[String]) -> Result<BatchSummary> {
    opts.config.validate()?;
    let groups = list_groups(&opts.dataset)?;
    let work = |dir: &PathBuf| -> Result<(ImageGroup, Vec<String>)> {
        let group = load_group(dir, &opts.config)?.group;
        let methods: Vec<String> = if methods.is_empty() {
            group.images.first().map(|i| i.saliency.method_names.clone()).unwrap_or_default()
        } else {
            methods.to_vec()
        };
        let prepared = group.images.iter().map(|i| prepare_image(i, &opts.config)).collect::<Result<Vec<_>>>()?;
        for method in &methods {
            for (img, prep) in group.images.iter().zip(&prepared) {
                let set = img.saliency.only(method).ok_or_else(|| {
                    Error::InvalidInput(format!("image {} has no map for method '{method}'", img.name))
                })?;
                let converted = dsp_convert(prep, &set.maps[0], &opts.config)?;
                write_gray_png(&opts.out.join(&group.name).join(method).join(format!("{}.png", img.name)), &converted)?;
            }
        }
        Ok((group, methods))
    };
    let results: Vec<(String, Result<(ImageGroup, Vec<String>)>)> =
        pool(opts.jobs)?.install(|| groups.par_iter().map(|d| (group_name(d), work(d))).collect());

    let mut summary = BatchSummary::default();
    let mut report = DspReport { overall: Vec::new(), groups: Vec::new() };
    let mut pooled: Vec<(String, f64, f64, usize)> = Vec::new();
    for (name, result) in results {
        let (group, group_methods) = match result {
            Ok(v) => v,
            Err(e) => {
                log::error!("group {name} failed: {e}");
                summary.failed.push((name, e.to_string()));
                continue;
            }
        };
        if group.has_ground_truth() {
            match dsp_gain(&group, &opts.config, &group_methods) {
                Ok(rows) => {
                    for r in &rows {
                        match pooled.iter_mut().find(|p| p.0 == r.method) {
                            Some(p) => {
                                p.1 += r.f_without;
                                p.2 += r.f_with;
                                p.3 += 1;
                            }
                            None => pooled.push((r.method.clone(), r.f_without, r.f_with, 1)),
                        }
                    }
                    write_text(&opts.out.join(&group.name).join("dsp_gain.csv"), &gain_table(&rows))?;
                    report.groups.push(DspGroupReport { group: group.name.clone(), rows });
                }
                Err(e) => {
                    summary.failed.push((name, e.to_string()));
                    continue;
                }
            }
        }
        summary.succeeded.push(name);
    }
    // Dataset rows average the per-group F-measures.
    report.overall = pooled
        .into_iter()
        .map(|(m, fw, fd, n)| DspGainRow::new(m, fw / n as f64, fd / n as f64))
        .collect();
    write_text(&opts.out.join("dsp_gain.json"), &to_json(&report)?)?;
    write_text(&opts.out.join("dsp_gain.csv"), &gain_table(&report.overall))?;
    Ok(summary)
}

/// Evaluates externally produced maps against ground truth matched by file
/// stem. Either directory may hold group subdirectories mirroring the other.
pub fn cmd_eval(pred_dir: &Path, gt_dir: &Path, out: &Path, beta2: f64) -> Result<MetricReport> {
    let mut names = Vec::new();
    let mut maps = Vec::new();
    let mut gts = Vec::new();
    collect_pairs(pred_dir, gt_dir, "", &mut names, &mut maps, &mut gts)?;
    if maps.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no prediction in {} matches a ground truth in {}",
            pred_dir.display(),
            gt_dir.display()
        )));
    }
    let (report, curve) = evaluate(&names, &maps, &gts, beta2)?;
    write_text(&out.join("metrics.json"), &to_json(&report)?)?;
    write_text(&out.join("pr_curve.csv"), &curve.to_csv())?;
    Ok(report)
}

fn collect_pairs(
    pred_dir: &Path,
    gt_dir: &Path,
    prefix: &str,
    names: &mut Vec<String>,
    maps: &mut Vec<PixelMap>,
    gts: &mut Vec<PixelMap>,
) -> Result<()> {
    let preds = images_by_stem(pred_dir)?;
    let truths = images_by_stem(gt_dir)?;
    for (stem, p) in &preds {
        match truths.get(stem) {
            Some(g) => {
                names.push(format!("{prefix}{stem}"));
                maps.push(read_gray(p)?);
                gts.push(read_mask(g)?);
            }
            None => log::warn!("{}: no matching ground truth", p.display()),
        }
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(pred_dir)
        .map_err(|e| Error::io(pred_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        let name = group_name(&sub);
        let gt_sub = [gt_dir.join(&name).join("gt"), gt_dir.join(&name)].into_iter().find(|p| p.is_dir());
        if let Some(gt_sub) = gt_sub {
            collect_pairs(&sub, &gt_sub, &format!("{prefix}{name}/"), names, maps, gts)?;
        }
    }
    Ok(())
}

pub fn cmd_synth(out: &Path, spec: &SynthSpec) -> Result<()> {
    write_synth(out, &generate(spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SynthSpec {
        SynthSpec { groups: 2, images_per_group: 2, width: 64, height: 48, methods: 1, ..Default::default() }
    }

    fn options(dataset: &Path, out: &Path) -> RunOptions {
        RunOptions {
            dataset: dataset.to_owned(),
            out: out.to_owned(),
            config: PipelineConfig { n_superpixels: 40, i_max: 2, ..Default::default() },
            jobs: 2,
            one_for_one: None,
            dump_stages: true,
        }
    }

    #[test]
    fn run_writes_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        cmd_synth(&data, &tiny_spec()).unwrap();
        let out = tmp.path().join("out");
        let summary = cmd_run(&options(&data, &out)).unwrap();
        assert!(summary.is_success());
        for g in ["group00", "group01"] {
            assert!(out.join(g).join("img00.png").is_file());
            assert!(out.join(g).join("metrics.json").is_file());
            assert!(out.join(g).join("stages/initialization/img01.png").is_file());
            assert!(out.join(g).join("stages/iter0/img01.png").is_file());
        }
        assert!(out.join("metrics.json").is_file());
        // run output laid out per group evaluates against the dataset root
        let r = cmd_eval(&out, &data, &tmp.path().join("eval"), 0.3).unwrap();
        assert_eq!(r.per_image.len(), 4);
        assert_eq!(r.per_image[0].name, "group00/img00");
    }

    #[test]
    fn failing_group_does_not_stop_others() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        cmd_synth(&data, &tiny_spec()).unwrap();
        std::fs::write(data.join("group00/rgb/img00.png"), b"junk").unwrap();
        let out = tmp.path().join("out");
        let summary = cmd_run(&options(&data, &out)).unwrap();
        assert_eq!(summary.failed.len(), 1);
        assert_eq!(summary.succeeded, vec!["group01".to_string()]);
        assert!(out.join("group01/img00.png").is_file());
    }

    #[test]
    fn eval_of_ground_truth_is_perfect() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        cmd_synth(&data, &tiny_spec()).unwrap();
        let gt = data.join("group00/gt");
        let r = cmd_eval(&gt, &gt, &tmp.path().join("eval"), 0.3).unwrap();
        assert_eq!((r.f_measure_max, r.auc), (1.0, 1.0));
    }

    #[test]
    fn dsp_writes_gain_table() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        cmd_synth(&data, &tiny_spec()).unwrap();
        let out = tmp.path().join("dsp");
        let summary = cmd_dsp(&options(&data, &out), &[]).unwrap();
        assert!(summary.is_success());
        let csv = std::fs::read_to_string(out.join("dsp_gain.csv")).unwrap();
        assert!(csv.starts_with("method,f_without,f_with,gain_percent"));
        assert!(csv.contains("method1") && csv.contains("degraded"));
        assert!(out.join("group00/degraded/img00.png").is_file());
    }
}
