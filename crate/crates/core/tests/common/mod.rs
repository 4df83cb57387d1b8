#![allow(dead_code)]

//! Brute-force oracles and criterion checks shared by the integration tests
//! and the acceptance binary.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use cosal::addition::{addition_pass, compute_dsp, grow_dsp, AdditionParams, DspParams};
use cosal::deletion::{
    best_match, combined_similarity, common_probability, depth_contrast, group_common_probability, group_tables,
    normalized_depth_contrast, MatchCues, SimilarityTable,
};
use cosal::evaluation::{auc, dsp_gain, evaluate, f_measure, pr_curve};
use cosal::features::{Histograms, SuperpixelFeatures, COLOR_BINS, TEXTURE_BINS};
use cosal::field::{render_to_pixels, SaliencyField};
use cosal::iteration::{iteration_delta, prepare_image};
use cosal::synth::{generate, SynthSpec, DEGRADED_METHOD};
use cosal::{run_group, ImageGroup, PipelineConfig, PixelMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

// ---------------------------------------------------------------- oracles

pub fn oracle_grow(root: usize, d: &[f64], adj: &[Vec<usize>], t1: f64, t2: f64) -> Vec<f64> {
    let mut out = vec![0.0; d.len()];
    out[root] = 1.0;
    let mut children: HashSet<usize> = HashSet::from([root]);
    let mut previous: HashSet<usize> = HashSet::from([root]);
    loop {
        let mean = children.iter().map(|&c| d[c]).sum::<f64>() / children.len() as f64;
        let mut added = HashSet::new();
        for &c in &previous {
            for &q in &adj[c] {
                if children.contains(&q) {
                    continue;
                }
                let a = (d[q] - mean).abs();
                let b = (d[q] - d[root]).abs();
                if a <= t1 && b <= t2 {
                    added.insert(q);
                    out[q] = 1.0 - a.min(b);
                }
            }
        }
        if added.is_empty() {
            return out;
        }
        children.extend(&added);
        previous = added;
    }
}

fn oracle_chi(h: &[f64], g: &[f64]) -> f64 {
    0.5 * h.iter().zip(g).map(|(a, b)| (a - b).powi(2) / (a + b + 1e-10)).sum::<f64>()
}

pub fn oracle_depth_contrast(f: &SuperpixelFeatures, sigma2: f64) -> Vec<f64> {
    let n = f.len();
    let raw: Vec<f64> = (0..n)
        .map(|m| {
            let mut s = 0.0;
            for k in 0..n {
                if k == m {
                    continue;
                }
                let dx = f.centroid[m][0] - f.centroid[k][0];
                let dy = f.centroid[m][1] - f.centroid[k][1];
                s += (f.mean_depth[m] - f.mean_depth[k]).abs() * (-(dx * dx + dy * dy).sqrt() / sigma2).exp();
            }
            s
        })
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    raw.iter().map(|v| if max > 0.0 { v / max } else { 0.0 }).collect()
}

fn minmax(v: &mut [f64]) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        for x in v.iter_mut() {
            *x = (*x - lo) / (hi - lo);
        }
    }
}

/// Combined similarity of every superpixel pair, straight from the cue definitions.
pub fn oracle_table(a: &SuperpixelFeatures, sa: &[f64], b: &SuperpixelFeatures, sb: &[f64], sigma2: f64) -> Vec<Vec<f64>> {
    let (ca, cb) = (oracle_depth_contrast(a, sigma2), oracle_depth_contrast(b, sigma2));
    let (r, c) = (a.len(), b.len());
    let mut color = Vec::new();
    let mut depth = Vec::new();
    let mut sal = Vec::new();
    let floor = (-1.0f64).exp();
    for m in 0..r {
        for n in 0..c {
            let chi = oracle_chi(a.color_hist.row(m), b.color_hist.row(n)) + oracle_chi(a.texture_hist.row(m), b.texture_hist.row(n));
            color.push((1.0 - chi / 2.0).clamp(0.0, 1.0));
            let w = (a.mean_depth[m] - b.mean_depth[n]).abs() + (ca[m] - cb[n]).abs();
            depth.push((-w / sigma2).exp());
            sal.push((((-(sa[m] - sb[n]).abs()).exp() - floor) / (1.0 - floor)).clamp(0.0, 1.0));
        }
    }
    minmax(&mut color);
    minmax(&mut depth);
    minmax(&mut sal);
    (0..r).map(|m| (0..c).map(|n| (color[m * c + n] + depth[m * c + n] + sal[m * c + n]) / 3.0).collect()).collect()
}

pub fn oracle_best(row: &[f64]) -> usize {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row.iter().position(|&v| v == max).unwrap()
}

/// Per-pixel confusion counting at threshold k (level strictly above k).
pub fn oracle_pr(map: &PixelMap, gt: &PixelMap, k: usize) -> (f64, f64) {
    let (mut tp, mut fp, mut pos) = (0.0, 0.0, 0.0);
    for (v, g) in map.values().iter().zip(gt.values()) {
        let predicted = (v * 255.0).round() as usize > k;
        let actual = *g > 0.5;
        pos += actual as u8 as f64;
        tp += (predicted && actual) as u8 as f64;
        fp += (predicted && !actual) as u8 as f64;
    }
    (if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) }, if pos == 0.0 { 1.0 } else { tp / pos })
}

/// Mann-Whitney form of the ROC area on 8-bit levels, ties counting one half.
pub fn oracle_auc(map: &PixelMap, gt: &PixelMap) -> f64 {
    let level = |v: f64| (v * 255.0).round() as i32;
    let pos: Vec<i32> = map.values().iter().zip(gt.values()).filter(|(_, g)| **g > 0.5).map(|(v, _)| level(*v)).collect();
    let neg: Vec<i32> = map.values().iter().zip(gt.values()).filter(|(_, g)| **g <= 0.5).map(|(v, _)| level(*v)).collect();
    if pos.is_empty() || neg.is_empty() {
        return 0.5;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

// ---------------------------------------------------------------- instances

fn random_hist(rng: &mut ChaCha8Rng, bins: usize) -> Vec<f64> {
    let mut h: Vec<f64> = (0..bins).map(|_| if rng.gen_bool(0.1) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
    if h.iter().all(|&v| v == 0.0) {
        h[rng.gen_range(0..bins)] = 1.0;
    }
    let s: f64 = h.iter().sum();
    h.iter().map(|v| v / s).collect()
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize) -> SuperpixelFeatures {
    let color: Vec<Vec<f64>> = (0..n).map(|_| random_hist(rng, COLOR_BINS)).collect();
    let texture: Vec<Vec<f64>> = (0..n).map(|_| random_hist(rng, TEXTURE_BINS)).collect();
    SuperpixelFeatures {
        mean_lab: (0..n).map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)]).collect(),
        mean_depth: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
        centroid: (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect(),
        color_hist: Histograms::from_rows(COLOR_BINS, &color),
        texture_hist: Histograms::from_rows(TEXTURE_BINS, &texture),
    }
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    adj
}

fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> PixelMap {
    PixelMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0..=255) as f64 / 255.0).collect()).unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> PixelMap {
    PixelMap::new(w, h, (0..w * h).map(|_| if rng.gen_bool(0.35) { 1.0 } else { 0.0 }).collect()).unwrap()
}

// ---------------------------------------------------------------- criteria

fn worst(errors: &mut f64, a: f64, b: f64) {
    *errors = errors.max((a - b).abs());
}

/// Library routines against the oracles on ≤ 32 superpixels / ≤ 8x8 pixels.
pub fn check_oracles(trials: usize) -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut e_grow, mut e_dc, mut e_sim, mut e_pc, mut e_pr, mut e_auc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut best_mismatch = 0usize;
    let sigma2 = 0.1;
    for _ in 0..trials {
        let n = rng.gen_range(2..=32);
        let depths: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let adj = random_graph(&mut rng, n, 0.2);
        let root = rng.gen_range(0..n);
        let got = grow_dsp(root, &depths, &adj, &DspParams::default());
        for (g, w) in got.iter().zip(oracle_grow(root, &depths, &adj, 0.1, 0.2)) {
            worst(&mut e_grow, *g, w);
        }

        // a small group with per-image random features and saliency
        let k = rng.gen_range(2..=4);
        let feats: Vec<SuperpixelFeatures> = (0..k)
            .map(|_| {
                let n = rng.gen_range(2..=32);
                random_features(&mut rng, n)
            })
            .collect();
        let sal: Vec<Vec<f64>> = feats.iter().map(|f| (0..f.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        for f in &feats {
            let oracle = oracle_depth_contrast(f, sigma2);
            for (m, o) in normalized_depth_contrast(f, sigma2).iter().zip(&oracle) {
                worst(&mut e_dc, *m, *o);
            }
            let raw0 = depth_contrast(f, 0, sigma2);
            let max = (0..f.len()).map(|m| depth_contrast(f, m, sigma2)).fold(0.0, f64::max);
            if max > 0.0 {
                worst(&mut e_dc, raw0 / max, oracle[0]);
            }
        }
        let cues: Vec<MatchCues> = feats.iter().map(|f| MatchCues::new(f, sigma2)).collect();
        let sal_refs: Vec<&[f64]> = sal.iter().map(|s| s.as_slice()).collect();
        let mut oracle_pc = Vec::new();
        for i in 0..k {
            let mut best_scores = vec![0.0; feats[i].len()];
            for j in 0..k {
                if i == j {
                    continue;
                }
                let want = oracle_table(&feats[i], &sal[i], &feats[j], &sal[j], sigma2);
                let got: SimilarityTable = combined_similarity((i, &cues[i], &sal[i]), (j, &cues[j], &sal[j]), sigma2);
                for m in 0..feats[i].len() {
                    for n in 0..feats[j].len() {
                        worst(&mut e_sim, got.get(m, n), want[m][n]);
                    }
                    let b = oracle_best(&want[m]);
                    if best_match(&got, m) != b && (got.get(m, best_match(&got, m)) - want[m][b]).abs() > 1e-9 {
                        best_mismatch += 1;
                    }
                    best_scores[m] += want[m][b];
                }
            }
            oracle_pc.push(best_scores.iter().map(|s| s / (k - 1) as f64).collect::<Vec<f64>>());
        }
        let active = vec![true; k];
        let got_pc = group_common_probability(&cues, &sal_refs, &active, sigma2);
        for (g, w) in got_pc.iter().zip(&oracle_pc) {
            for (a, b) in g.as_ref().unwrap().values.iter().zip(w) {
                worst(&mut e_pc, *a, *b);
            }
        }
        // the per-image entry point agrees with the group one
        let tables = group_tables(&cues, &sal_refs, &active, sigma2);
        let mine: Vec<&SimilarityTable> = tables[0].iter().flatten().collect();
        for (a, b) in common_probability(&mine, feats[0].len()).values.iter().zip(&oracle_pc[0]) {
            worst(&mut e_pc, *a, *b);
        }

        // pixel metrics
        let (w, h) = (rng.gen_range(2..=8), rng.gen_range(2..=8));
        let maps: Vec<PixelMap> = (0..3).map(|_| random_map(&mut rng, w, h)).collect();
        let gts: Vec<PixelMap> = (0..3).map(|_| random_mask(&mut rng, w, h)).collect();
        let curve = pr_curve(&maps, &gts).map_err(|e| e.to_string())?;
        for kk in 0..256 {
            let (mut p, mut r) = (0.0, 0.0);
            for (m, g) in maps.iter().zip(&gts) {
                let (a, b) = oracle_pr(m, g, kk);
                p += a / 3.0;
                r += b / 3.0;
            }
            worst(&mut e_pr, curve.precision[kk], p);
            worst(&mut e_pr, curve.recall[kk], r);
        }
        for (m, g) in maps.iter().zip(&gts) {
            worst(&mut e_auc, auc(m, g).map_err(|e| e.to_string())?, oracle_auc(m, g));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let errs = [e_grow, e_dc, e_sim, e_pc, e_pr, e_auc];
    let detail = format!(
        "{trials} instances; max |err| grow_dsp {e_grow:.1e}, depth_contrast {e_dc:.1e}, combined_similarity {e_sim:.1e}, \
         common_probability {e_pc:.1e}, pr_curve {e_pr:.1e}, auc {e_auc:.1e}; best_match mismatches {best_mismatch}; {secs:.1}s"
    );
    if errs.iter().all(|&e| e <= 1e-9) && best_mismatch == 0 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn in_unit(v: &[f64]) -> bool {
    v.iter().all(|x| (0.0..=1.0).contains(x))
}

/// Fields, DSP maps, similarity scores, P_c, metrics and histograms of one run.
pub fn range_violations(group: &ImageGroup, config: &PipelineConfig) -> Result<Vec<String>, String> {
    let mut bad = Vec::new();
    let run = run_group(group, config).map_err(|e| e.to_string())?;
    let all_fields = run.stages.initial.iter().chain(&run.stages.addition).chain(run.stages.passes.iter().flatten());
    if !all_fields.clone().all(|f| in_unit(f.values())) {
        bad.push("saliency field".into());
    }
    if !run.final_maps.iter().all(|m| in_unit(m.values())) {
        bad.push("final map".into());
    }
    let prepared: Vec<_> = group.images.iter().map(|i| prepare_image(i, config).unwrap()).collect();
    let params = AdditionParams::from(config);
    for (p, init) in prepared.iter().zip(&run.stages.initial) {
        let dsp = compute_dsp(init, &p.features.mean_depth, p.segmentation.adjacency(), &params.dsp);
        if !in_unit(dsp.values()) {
            bad.push("dsp".into());
        }
        for hist in [&p.features.color_hist, &p.features.texture_hist] {
            for m in 0..hist.len() {
                let s: f64 = hist.row(m).iter().sum();
                if (s - 1.0).abs() > 1e-6 {
                    bad.push(format!("histogram sums to {s}"));
                }
            }
        }
        if !(0.0..=1.0).contains(&p.lambda.value()) {
            bad.push("depth confidence".into());
        }
    }
    if group.len() > 1 {
        let cues: Vec<MatchCues> = prepared.iter().map(|p| p.cues.clone()).collect();
        let sal: Vec<&[f64]> = run.stages.addition.iter().map(|f| f.values()).collect();
        let active = vec![true; group.len()];
        for row in group_tables(&cues, &sal, &active, config.sigma2) {
            if !row.iter().flatten().all(|t| in_unit(t.scores())) {
                bad.push("similarity".into());
            }
        }
        for pc in group_common_probability(&cues, &sal, &active, config.sigma2).into_iter().flatten() {
            if !in_unit(&pc.values) {
                bad.push("common probability".into());
            }
        }
    }
    if group.has_ground_truth() {
        let gts: Vec<PixelMap> = group.images.iter().map(|i| i.ground_truth.clone().unwrap()).collect();
        let (report, curve) = evaluate(&run.names, &run.final_maps, &gts, config.beta2).map_err(|e| e.to_string())?;
        let mut scalars = vec![report.f_measure_max, report.f_measure_adaptive, report.auc];
        for m in &report.per_image {
            scalars.extend([m.f_measure_max, m.f_measure_adaptive, m.auc]);
        }
        if !in_unit(&scalars) || !in_unit(&curve.precision) || !in_unit(&curve.recall) {
            bad.push("metric".into());
        }
    }
    Ok(bad)
}

pub fn small_config() -> PipelineConfig {
    PipelineConfig { n_superpixels: 40, ..PipelineConfig::default() }
}

pub fn check_ranges(runs: usize) -> Check {
    let mut failures = Vec::new();
    for r in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + r as u64);
        let spec = SynthSpec {
            groups: 1,
            images_per_group: rng.gen_range(1..=4),
            width: 64,
            height: 48,
            methods: rng.gen_range(1..=3),
            degraded: rng.gen_bool(0.5),
            seed: r as u64,
        };
        let mut group = generate(&spec).remove(0).group;
        if rng.gen_bool(0.25) {
            group.images[0].depth = None;
        }
        let config = PipelineConfig {
            n_superpixels: rng.gen_range(16..=120),
            i_max: rng.gen_range(0..=5),
            zeta: [0.1, 0.01, 1e-6][rng.gen_range(0..3)],
            row_normalize: rng.gen_bool(0.8),
            ..PipelineConfig::default()
        };
        match range_violations(&group, &config) {
            Ok(v) if v.is_empty() => {}
            Ok(v) => failures.push(format!("run {r}: {}", v.join(", "))),
            Err(e) => failures.push(format!("run {r}: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(format!("{runs} randomized synthetic runs, all values in [0,1], histograms sum to 1 ± 1e-6"))
    } else {
        Err(failures.join("; "))
    }
}

fn region_mean(map: &PixelMap, mask: &PixelMap) -> f64 {
    let (s, n) = map
        .values()
        .iter()
        .zip(mask.values())
        .filter(|(_, m)| **m > 0.5)
        .fold((0.0, 0.0), |(s, n), (v, _)| (s + v, n + 1.0));
    s / n
}

pub fn check_planted_object() -> Check {
    let start = Instant::now();
    let config = PipelineConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for sg in generate(&SynthSpec::default()) {
        let run = run_group(&sg.group, &config).map_err(|e| e.to_string())?;
        let gts: Vec<PixelMap> = sg.group.images.iter().map(|i| i.ground_truth.clone().unwrap()).collect();
        let f = pr_curve(&run.final_maps, &gts).map_err(|e| e.to_string())?.max_f_measure(config.beta2);
        let common: f64 = run.final_maps.iter().zip(&gts).map(|(m, g)| region_mean(m, g)).sum::<f64>() / gts.len() as f64;
        let distractor: f64 =
            run.final_maps.iter().zip(&sg.distractor_masks).map(|(m, d)| region_mean(m, d)).sum::<f64>() / gts.len() as f64;
        ok &= f >= 0.85 && distractor <= 0.5 * common;
        lines.push(format!("{} F={f:.3} dis/common={distractor:.3}/{common:.3}", sg.group.name));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    let detail = format!("{}; {secs:.1}s", lines.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn check_dsp_gain() -> Check {
    let config = PipelineConfig::default();
    let mut without = (0.0, 0.0);
    let mut per_group = Vec::new();
    for sg in generate(&SynthSpec::default()) {
        let rows = dsp_gain(&sg.group, &config, &[DEGRADED_METHOD.to_string()]).map_err(|e| e.to_string())?;
        without.0 += rows[0].f_without;
        without.1 += rows[0].f_with;
        per_group.push(format!("{:+.2}%", rows[0].gain * 100.0));
    }
    let gain = (without.1 - without.0) / without.0;
    let detail = format!(
        "degraded input: mean max-F {:.4} -> {:.4}, gain {:+.2}% (per group {})",
        without.0 / 5.0,
        without.1 / 5.0,
        gain * 100.0,
        per_group.join(" ")
    );
    if gain >= 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn check_iterations() -> Check {
    let default = PipelineConfig::default();
    let tight = PipelineConfig { zeta: 1e-4, ..PipelineConfig::default() };
    let iter0 = PipelineConfig { i_max: 0, ..PipelineConfig::default() };
    let (mut images, mut within_cap, mut monotone_tight, mut monotone_default, mut differ) = (0, 0, 0, 0, 0);
    let mut range_bad = Vec::new();
    for sg in generate(&SynthSpec::default()) {
        let a = run_group(&sg.group, &default).map_err(|e| e.to_string())?;
        let b = run_group(&sg.group, &tight).map_err(|e| e.to_string())?;
        let z = run_group(&sg.group, &iter0).map_err(|e| e.to_string())?;
        for i in 0..sg.group.len() {
            images += 1;
            within_cap += (a.iterations_used[i] <= 5 && b.iterations_used[i] <= 5) as usize;
            let d = &b.delta_trace[i];
            monotone_tight += (d.len() >= 2 && d[0] >= d[1]) as usize;
            let d = &a.delta_trace[i];
            monotone_default += (d.len() < 2 || d[0] >= d[1]) as usize;
            differ += (z.final_maps[i].to_gray8() != a.final_maps[i].to_gray8()) as usize;
        }
        for cfg in [&default, &iter0] {
            let v = range_violations(&sg.group, cfg)?;
            if !v.is_empty() {
                range_bad.push(format!("{}: {}", sg.group.name, v.join(",")));
            }
        }
    }
    let share = monotone_tight as f64 / images as f64;
    let detail = format!(
        "iterations_used <= 5 on {within_cap}/{images}; D1 >= D2 on {monotone_tight}/{images} with full traces \
         ({monotone_default}/{images} at default zeta); iter0 differs from final on {differ}/{images}; range issues {}",
        range_bad.len()
    );
    if within_cap == images && share >= 0.9 && monotone_default as f64 / images as f64 >= 0.9 && differ > 0 && range_bad.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Addition scheme alone, iterated under the same termination rule.
pub fn addition_only(group: &ImageGroup, config: &PipelineConfig) -> Vec<PixelMap> {
    let params = AdditionParams::from(config);
    group
        .images
        .iter()
        .map(|img| {
            let p = prepare_image(img, config).unwrap();
            let seg = &p.segmentation;
            let init = cosal::initialization::fuse_initial(&img.saliency, seg, 0).unwrap();
            let step = |s: &SaliencyField| addition_pass(s, &p.features, seg.adjacency(), p.lambda, &params).s_sp;
            let mut current = step(&init);
            let mut previous = render_to_pixels(&current, seg);
            for _ in 1..=config.i_max {
                current = step(&current);
                let rendered = render_to_pixels(&current, seg);
                let delta = iteration_delta(&previous, &rendered);
                previous = rendered;
                if delta <= config.zeta {
                    break;
                }
            }
            previous
        })
        .collect()
}

pub fn check_degradation() -> Check {
    let config = PipelineConfig::default();
    let groups = generate(&SynthSpec::default());
    // single-image groups
    let mut single_equal = 0;
    let mut singles = 0;
    for sg in &groups {
        for img in &sg.group.images {
            let group = ImageGroup { name: "single".into(), images: vec![img.clone()] };
            let run = run_group(&group, &config).map_err(|e| e.to_string())?;
            singles += 1;
            single_equal += (run.final_maps == addition_only(&group, &config)) as usize;
        }
    }
    // missing depth against an explicit flat depth map
    let mut missing = groups[0].group.clone();
    missing.images[1].depth = None;
    let mut flat = groups[0].group.clone();
    let (w, h) = (flat.images[1].rgb.width(), flat.images[1].rgb.height());
    flat.images[1].depth = Some(cosal::DepthMap::from_raw(w, h, &vec![1234.0; w * h]).unwrap());
    let a = run_group(&missing, &config).map_err(|e| e.to_string())?;
    let b = run_group(&flat, &config).map_err(|e| e.to_string())?;
    let same = a.final_maps == b.final_maps;
    let lambda = a.lambdas[1];
    let detail = format!(
        "N=1 equals addition-only on {single_equal}/{singles}; missing depth: lambda={lambda}, output equals constant-depth run: {same}"
    );
    if single_equal == singles && same && lambda == 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dir_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs the binary twice (different thread counts) and compares every output byte.
pub fn check_determinism(bin: &Path) -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let status = std::process::Command::new(bin).arg("synth").arg("--out").arg(&data).status().map_err(|e| e.to_string())?;
    if !status.success() {
        return Err("synth failed".into());
    }
    let mut outputs = Vec::new();
    for (k, jobs) in ["1", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("out{k}"));
        let status = std::process::Command::new(bin)
            .args(["run", "--dump-stages", "--jobs", jobs, "--dataset"])
            .arg(&data)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run {k} failed"));
        }
        outputs.push(dir_files(&out));
    }
    let pngs = outputs[0].iter().filter(|(n, _)| n.ends_with(".png")).count();
    let metrics = outputs[0].iter().filter(|(n, _)| n.ends_with("metrics.json")).count();
    let detail = format!("{} files ({pngs} PNG, {metrics} metrics.json) compared across --jobs 1 and --jobs 4", outputs[0].len());
    if outputs[0] == outputs[1] && pngs > 0 && metrics > 0 {
        Ok(detail)
    } else {
        Err(format!("outputs differ; {detail}"))
    }
}

pub fn check_f_measure() -> Check {
    let f = f_measure(0.8, 0.5, 0.3);
    let beta2 = PipelineConfig::default().beta2;
    let detail = format!("f_measure(0.8, 0.5, 0.3) = {f:.6}, default beta2 = {beta2}");
    if (f - 0.7027).abs() <= 1e-4 && beta2 == 0.3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}
