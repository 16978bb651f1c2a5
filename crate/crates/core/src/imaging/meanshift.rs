//! Joint spatial-range mean-shift segmentation in `(x, y, L, a, b)`.
//!
//! Every pixel climbs to a density mode under a flat kernel covering the ellipsoid
//! `|dxy|^2 / hs^2 + |dLab|^2 / hr^2 < 1`. Neighbouring pixels whose modes lie within `hs`
//! spatially and `hr` in colour are joined, and components below the minimum area are folded
//! into the adjacent region with the closest mean mode colour.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImageRgb, RegionMap};
use crate::color::{image_to_lab, LabPixel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanShiftParams {
    /// Pixels.
    pub spatial_bandwidth: f64,
    /// Lab units.
    pub range_bandwidth: f64,
    /// Fraction of the image area.
    pub min_region_area: f64,
    pub max_iterations: usize,
    /// Mode shift (joint units) below which a trajectory stops.
    pub convergence: f64,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        MeanShiftParams {
            spatial_bandwidth: 7.0,
            range_bandwidth: 6.5,
            min_region_area: 0.01,
            max_iterations: 100,
            convergence: 0.01,
        }
    }
}

impl MeanShiftParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("spatial_bandwidth", self.spatial_bandwidth),
            ("range_bandwidth", self.range_bandwidth),
            ("min_region_area", self.min_region_area),
            ("convergence", self.convergence),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("mean-shift {name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("mean-shift max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Mode {
    x: f64,
    y: f64,
    lab: [f64; 3],
}

fn seek_mode(px: usize, py: usize, lab: &[[f64; 3]], width: usize, height: usize, p: &MeanShiftParams) -> Mode {
    let hs = p.spatial_bandwidth;
    let hr = p.range_bandwidth;
    let (inv_hs2, inv_hr2) = (1.0 / (hs * hs), 1.0 / (hr * hr));
    let mut cur = Mode {
        x: px as f64,
        y: py as f64,
        lab: lab[py * width + px],
    };
    for _ in 0..p.max_iterations {
        let x_lo = (cur.x - hs).ceil().max(0.0) as usize;
        let x_hi = ((cur.x + hs).floor() as isize).min(width as isize - 1);
        let y_lo = (cur.y - hs).ceil().max(0.0) as usize;
        let y_hi = ((cur.y + hs).floor() as isize).min(height as isize - 1);
        if x_hi < x_lo as isize || y_hi < y_lo as isize {
            break;
        }
        let (mut sx, mut sy, mut sl, mut sa, mut sb, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
        for v in y_lo..=y_hi as usize {
            let dy = v as f64 - cur.y;
            let row = v * width;
            for u in x_lo..=x_hi as usize {
                let dx = u as f64 - cur.x;
                let spatial = (dx * dx + dy * dy) * inv_hs2;
                if spatial >= 1.0 {
                    continue;
                }
                let c = &lab[row + u];
                let (dl, da, db) = (c[0] - cur.lab[0], c[1] - cur.lab[1], c[2] - cur.lab[2]);
                if spatial + (dl * dl + da * da + db * db) * inv_hr2 < 1.0 {
                    sx += u as f64;
                    sy += v as f64;
                    sl += c[0];
                    sa += c[1];
                    sb += c[2];
                    n += 1;
                }
            }
        }
        if n == 0 {
            break;
        }
        let k = 1.0 / n as f64;
        let next = Mode {
            x: sx * k,
            y: sy * k,
            lab: [sl * k, sa * k, sb * k],
        };
        let shift = ((next.x - cur.x).powi(2)
            + (next.y - cur.y).powi(2)
            + (next.lab[0] - cur.lab[0]).powi(2)
            + (next.lab[1] - cur.lab[1]).powi(2)
            + (next.lab[2] - cur.lab[2]).powi(2))
        .sqrt();
        cur = next;
        if shift < p.convergence {
            break;
        }
    }
    cur
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let g = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = g;
            a = g;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins, which keeps the result independent of union order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

struct RegionStats {
    area: usize,
    lab_sum: [f64; 3],
    neighbours: BTreeSet<u32>,
}

impl RegionStats {
    fn mean(&self) -> [f64; 3] {
        let k = 1.0 / self.area as f64;
        [self.lab_sum[0] * k, self.lab_sum[1] * k, self.lab_sum[2] * k]
    }
}

/// Folds regions smaller than `min_area` into their most similar neighbour, smallest first.
/// Returns a map from original region id to surviving id.
fn merge_small_regions(
    labels: &[u32],
    modes: &[Mode],
    width: usize,
    min_area: f64,
) -> BTreeMap<u32, u32> {
    let mut stats: BTreeMap<u32, RegionStats> = BTreeMap::new();
    for (i, &id) in labels.iter().enumerate() {
        let s = stats.entry(id).or_insert_with(|| RegionStats {
            area: 0,
            lab_sum: [0.0; 3],
            neighbours: BTreeSet::new(),
        });
        s.area += 1;
        for c in 0..3 {
            s.lab_sum[c] += modes[i].lab[c];
        }
    }
    let height = labels.len() / width;
    for y in 0..height {
        for x in 0..width {
            let a = labels[y * width + x];
            let mut link = |b: u32| {
                if a != b {
                    stats.get_mut(&a).unwrap().neighbours.insert(b);
                    stats.get_mut(&b).unwrap().neighbours.insert(a);
                }
            };
            if x + 1 < width {
                link(labels[y * width + x + 1]);
            }
            if y + 1 < height {
                link(labels[(y + 1) * width + x]);
            }
        }
    }

    let mut target: BTreeMap<u32, u32> = stats.keys().map(|&k| (k, k)).collect();
    let mut queue: BTreeSet<(usize, u32)> = stats
        .iter()
        .filter(|(_, s)| (s.area as f64) < min_area)
        .map(|(&id, s)| (s.area, id))
        .collect();

    while let Some((area, id)) = queue.pop_first() {
        if stats.len() <= 1 {
            break;
        }
        let small = stats.remove(&id).expect("queued region exists");
        debug_assert_eq!(small.area, area);
        let mean = small.mean();
        let into = small
            .neighbours
            .iter()
            .map(|&n| {
                let m = stats[&n].mean();
                let d = (0..3).map(|c| (m[c] - mean[c]).powi(2)).sum::<f64>();
                (d, n)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, n)| n);
        let Some(into) = into else {
            // Isolated region (only possible for a single region); keep it.
            stats.insert(id, small);
            break;
        };

        let old_area = stats[&into].area;
        let was_queued = (old_area as f64) < min_area;
        for &n in &small.neighbours {
            if n != into {
                let ns = stats.get_mut(&n).unwrap();
                ns.neighbours.remove(&id);
                ns.neighbours.insert(into);
            }
        }
        let dest = stats.get_mut(&into).unwrap();
        dest.area += small.area;
        for c in 0..3 {
            dest.lab_sum[c] += small.lab_sum[c];
        }
        dest.neighbours.remove(&id);
        dest.neighbours.extend(small.neighbours.iter().copied().filter(|&n| n != into));
        let new_area = dest.area;
        if was_queued {
            queue.remove(&(old_area, into));
        }
        if (new_area as f64) < min_area {
            queue.insert((new_area, into));
        }
        for t in target.values_mut() {
            if *t == id {
                *t = into;
            }
        }
    }
    target
}

/// Mean-shift segmentation; deterministic for a given image and parameters.
pub fn meanshift_segment(img: &ImageRgb, params: &MeanShiftParams) -> Result<RegionMap> {
    params.validate()?;
    let (w, h) = (img.width as usize, img.height as usize);
    let lab: Vec<[f64; 3]> = image_to_lab(&img.pixels)
        .into_iter()
        .map(|LabPixel { l, a, b }| [l, a, b])
        .collect();

    let modes: Vec<Mode> = (0..w * h)
        .into_par_iter()
        .map(|i| seek_mode(i % w, i / w, &lab, w, h, params))
        .collect();

    let hs2 = params.spatial_bandwidth * params.spatial_bandwidth;
    let hr2 = params.range_bandwidth * params.range_bandwidth;
    let close = |a: &Mode, b: &Mode| {
        let ds = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
        let dr = (0..3).map(|c| (a.lab[c] - b.lab[c]).powi(2)).sum::<f64>();
        ds < hs2 && dr < hr2
    };
    let mut uf = UnionFind::new(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && close(&modes[i], &modes[i + 1]) {
                uf.union(i as u32, (i + 1) as u32);
            }
            if y + 1 < h && close(&modes[i], &modes[i + w]) {
                uf.union(i as u32, (i + w) as u32);
            }
        }
    }
    let roots: Vec<u32> = (0..(w * h) as u32).map(|i| uf.find(i)).collect();

    let min_area = params.min_region_area * (w * h) as f64;
    let target = merge_small_regions(&roots, &modes, w, min_area);

    // Final ids follow raster order of each region's first pixel.
    let mut renumber: BTreeMap<u32, u32> = BTreeMap::new();
    let labels: Vec<u32> = roots
        .iter()
        .map(|r| {
            let t = target[r];
            let next = renumber.len() as u32 + 1;
            *renumber.entry(t).or_insert(next)
        })
        .collect();
    RegionMap::from_labels(img.width, img.height, labels)
}
