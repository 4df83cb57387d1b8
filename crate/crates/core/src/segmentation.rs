//! Superpixel label fields: SLIC segmentation, validation and region adjacency.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::image::{srgb_to_lab, RgbImage};

/// Lab-space compactness of the SLIC distance.
pub const SLIC_COMPACTNESS: f64 = 10.0;
pub const SLIC_ITERATIONS: usize = 10;

/// A pixel → superpixel label field together with its region adjacency graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

impl Segmentation {
    /// Validates a label field (gap-free labels `0..n`) and derives areas and adjacency.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::BufferLength { width, height, got: labels.len() });
        }
        let n = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut areas = vec![0usize; n];
        for &l in &labels {
            areas[l as usize] += 1;
        }
        if let Some(missing) = areas.iter().position(|&a| a == 0) {
            return Err(Error::InvalidInput(format!("label {missing} has no pixels")));
        }
        let adjacency = build_adjacency(width, height, &labels);
        Ok(Self { width, height, labels, areas, adjacency })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of superpixels.
    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    /// Pixel count per superpixel.
    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn neighbors(&self, region: usize) -> &[usize] {
        &self.adjacency[region]
    }

    /// True when every superpixel forms a single 4-connected pixel component.
    pub fn is_four_connected(&self) -> bool {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut components = vec![0usize; self.len()];
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if seen[start] {
                continue;
            }
            let label = self.labels[start];
            components[label as usize] += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                for q in four_neighbors(p, w, h) {
                    if !seen[q] && self.labels[q] == label {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        components.iter().all(|&c| c == 1)
    }
}

fn four_neighbors(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % w, p / w);
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < w).then(|| p + 1);
    let up = (y > 0).then(|| p - w);
    let down = (y + 1 < h).then(|| p + w);
    [left, right, up, down].into_iter().flatten()
}

/// Region adjacency from 4-neighbor pixel contacts. Symmetric and irreflexive.
pub fn build_adjacency(width: usize, height: usize, labels: &[u32]) -> Vec<Vec<usize>> {
    let n = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut link = |a: u32, b: u32| {
        if a != b {
            adj[a as usize].push(b as usize);
            adj[b as usize].push(a as usize);
        }
    };
    for y in 0..height {
        let row = y * width;
        for x in 0..width {
            let l = labels[row + x];
            if x + 1 < width {
                link(l, labels[row + x + 1]);
            }
            if y + 1 < height {
                link(l, labels[row + width + x]);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

#[derive(Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// SLIC superpixels over Lab color, followed by a pass that makes every
/// superpixel 4-connected.
pub fn segment_superpixels(rgb: &RgbImage, target_count: usize) -> Result<Segmentation> {
    let (w, h) = (rgb.width(), rgb.height());
    if target_count < 16 || target_count > w * h / 16 {
        return Err(Error::InvalidParameter(format!(
            "superpixel count {target_count} outside [16, {}]",
            w * h / 16
        )));
    }
    let lab: Vec<[f64; 3]> = rgb.pixels().iter().map(|&p| srgb_to_lab(p)).collect();
    let step = ((w * h) as f64 / target_count as f64).sqrt();
    let nx = ((w as f64 / step).round() as usize).max(1);
    let ny = ((h as f64 / step).round() as usize).max(1);

    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let fx = (i as f64 + 0.5) * w as f64 / nx as f64 - 0.5;
            let fy = (j as f64 + 0.5) * h as f64 / ny as f64 - 0.5;
            let (px, py) = ((fx.round() as usize).min(w - 1), (fy.round() as usize).min(h - 1));
            let (cx, cy) = lowest_gradient(&lab, w, h, px, py);
            // Stay on the sub-pixel grid position unless a flatter pixel is nearby.
            let (x, y) = if (cx, cy) == (px, py) { (fx, fy) } else { (cx as f64, cy as f64) };
            centers.push(Center { lab: lab[cy * w + cx], x, y });
        }
    }

    let spatial = (SLIC_COMPACTNESS / step).powi(2);
    let radius = step.ceil() as isize;
    let mut assign = vec![u32::MAX; w * h];
    let mut dist = vec![f64::INFINITY; w * h];
    for _ in 0..SLIC_ITERATIONS {
        dist.fill(f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let x0 = (c.x.round() as isize - radius).max(0) as usize;
            let x1 = ((c.x.round() as isize + radius) as usize).min(w - 1);
            let y0 = (c.y.round() as isize - radius).max(0) as usize;
            let y1 = ((c.y.round() as isize + radius) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let l = lab[p];
                    let dc = (l[0] - c.lab[0]).powi(2) + (l[1] - c.lab[1]).powi(2) + (l[2] - c.lab[2]).powi(2);
                    let ds = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = dc + ds * spatial;
                    if d < dist[p] {
                        dist[p] = d;
                        assign[p] = k as u32;
                    }
                }
            }
        }
        let mut acc = vec![([0.0f64; 3], 0.0f64, 0.0f64, 0usize); centers.len()];
        for (p, &k) in assign.iter().enumerate() {
            if k == u32::MAX {
                continue;
            }
            let a = &mut acc[k as usize];
            for c in 0..3 {
                a.0[c] += lab[p][c];
            }
            a.1 += (p % w) as f64;
            a.2 += (p / w) as f64;
            a.3 += 1;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a.3 > 0 {
                let n = a.3 as f64;
                *c = Center { lab: [a.0[0] / n, a.0[1] / n, a.0[2] / n], x: a.1 / n, y: a.2 / n };
            }
        }
    }

    // Pixels no window reached fall back to the nearest center in the image plane.
    for (p, k) in assign.iter_mut().enumerate() {
        if *k == u32::MAX {
            let (x, y) = ((p % w) as f64, (p / w) as f64);
            let nearest = centers
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1.x - x).powi(2) + (a.1.y - y).powi(2);
                    let db = (b.1.x - x).powi(2) + (b.1.y - y).powi(2);
                    da.total_cmp(&db)
                })
                .map_or(0, |(i, _)| i);
            *k = nearest as u32;
        }
    }

    let min_size = (w * h) / (target_count * 4);
    let labels = enforce_connectivity(&assign, &lab, w, h, min_size, target_count.div_ceil(2));
    Segmentation::from_labels(w, h, labels)
}

fn lowest_gradient(lab: &[[f64; 3]], w: usize, h: usize, cx: usize, cy: usize) -> (usize, usize) {
    let grad = |x: usize, y: usize| -> f64 {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return f64::INFINITY;
        }
        let d = |a: [f64; 3], b: [f64; 3]| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>();
        d(lab[y * w + x + 1], lab[y * w + x - 1]) + d(lab[(y + 1) * w + x], lab[(y - 1) * w + x])
    };
    let mut best = (cx, cy);
    let mut best_g = grad(cx, cy);
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            let (x, y) = (cx as isize + dx, cy as isize + dy);
            if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
                continue;
            }
            let g = grad(x as usize, y as usize);
            if g < best_g {
                best_g = g;
                best = (x as usize, y as usize);
            }
        }
    }
    best
}

/// Keeps the largest 4-connected component of each cluster when it exceeds
/// `min_size` pixels, topping up with the next-largest such components until at
/// least `min_keep` survive. Every other component is merged, in scan order and
/// over repeated sweeps, into the adjacent kept region with the closest mean
/// color. Labels are then assigned in scan order.
fn enforce_connectivity(
    assign: &[u32],
    lab: &[[f64; 3]],
    w: usize,
    h: usize,
    min_size: usize,
    min_keep: usize,
) -> Vec<u32> {
    const UNSET: u32 = u32::MAX;
    let n_clusters = assign.iter().max().map_or(0, |&m| m as usize + 1);
    let mut component_of = vec![UNSET; w * h];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if component_of[start] != UNSET {
            continue;
        }
        let id = members.len() as u32;
        let old = assign[start];
        let mut pixels = Vec::new();
        component_of[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            pixels.push(p);
            for q in four_neighbors(p, w, h) {
                if component_of[q] == UNSET && assign[q] == old {
                    component_of[q] = id;
                    queue.push_back(q);
                }
            }
        }
        members.push(pixels);
    }
    let n = members.len();
    let size = |c: usize| members[c].len();

    // Largest component per cluster; the first one found wins ties.
    let mut best: Vec<Option<usize>> = vec![None; n_clusters];
    for (c, pixels) in members.iter().enumerate() {
        let k = assign[pixels[0]] as usize;
        if best[k].map_or(true, |b| size(c) > size(b)) {
            best[k] = Some(c);
        }
    }
    let mut candidates: Vec<usize> = best.iter().flatten().copied().collect();
    candidates.sort_by_key(|&c| (std::cmp::Reverse(size(c)), c));
    let n_keep = candidates.iter().filter(|&&c| size(c) > min_size).count().max(min_keep.max(1));

    let mean: Vec<[f64; 3]> = members
        .iter()
        .map(|px| {
            let mut m = [0.0; 3];
            for &p in px {
                for c in 0..3 {
                    m[c] += lab[p][c];
                }
            }
            m.map(|v| v / px.len() as f64)
        })
        .collect();
    let mut owner = vec![UNSET; n];
    for &c in candidates.iter().take(n_keep) {
        owner[c] = c as u32;
    }
    loop {
        let mut pending = false;
        let mut progress = false;
        for c in 0..n {
            if owner[c] != UNSET {
                continue;
            }
            let mut choice: Option<(f64, u32)> = None;
            for &p in &members[c] {
                for q in four_neighbors(p, w, h) {
                    let o = owner[component_of[q] as usize];
                    if o == UNSET {
                        continue;
                    }
                    let m = mean[o as usize];
                    let d = (0..3).map(|i| (mean[c][i] - m[i]).powi(2)).sum::<f64>();
                    if choice.map_or(true, |(bd, bo)| d < bd || (d == bd && o < bo)) {
                        choice = Some((d, o));
                    }
                }
            }
            match choice {
                Some((_, o)) => {
                    owner[c] = o;
                    progress = true;
                }
                None => pending = true,
            }
        }
        if !pending || !progress {
            break;
        }
    }

    let mut relabel = vec![UNSET; n];
    let mut next = 0u32;
    component_of
        .iter()
        .map(|&c| {
            let o = owner[c as usize];
            let root = if o == UNSET { c } else { o } as usize;
            let slot = &mut relabel[root];
            if *slot == UNSET {
                *slot = next;
                next += 1;
            }
            *slot
        })
        .collect()
}
