use std::collections::VecDeque;

use super::otsu::{gray_histogram, otsu_with_variance};
use super::{to_gray, GrayImage, ImageRgb};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LesionMask {
    pub width: u32,
    pub height: u32,
    pub inside: Vec<bool>,
    pub lesion_area: usize,
}

impl LesionMask {
    pub fn from_inside(width: u32, height: u32, inside: Vec<bool>) -> Result<LesionMask> {
        if inside.len() != width as usize * height as usize {
            return Err(Error::Dimension {
                expected: width as usize * height as usize,
                actual: inside.len(),
            });
        }
        let lesion_area = inside.iter().filter(|&&v| v).count();
        Ok(LesionMask {
            width,
            height,
            inside,
            lesion_area,
        })
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.inside[y as usize * self.width as usize + x as usize]
    }

    /// Bounding box `(x0, y0, x1, y1)` with exclusive upper corners, or `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let w = self.width as usize;
        let mut bbox: Option<(u32, u32, u32, u32)> = None;
        for (i, _) in self.inside.iter().enumerate().filter(|(_, &v)| v) {
            let (x, y) = ((i % w) as u32, (i / w) as u32);
            bbox = Some(match bbox {
                None => (x, y, x + 1, y + 1),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
            });
        }
        bbox
    }
}

/// Connected components of `on` pixels; returns per-pixel labels (0 = off) and component sizes
/// indexed by `label - 1`. Labels follow raster order of each component's first pixel.
pub(crate) fn label_components(on: &[bool], width: usize, height: usize, eight: bool) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; on.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..on.len() {
        if !on[start] || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = ((p % width) as i64, (p / width) as i64);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                        continue;
                    }
                    let q = ny as usize * width + nx as usize;
                    if on[q] && labels[q] == 0 {
                        labels[q] = id;
                        queue.push_back(q);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Fills every background pixel that cannot reach the border through 4-connected background.
pub(crate) fn fill_holes(mask: &mut [bool], width: usize, height: usize) {
    let mut outside = vec![false; mask.len()];
    let mut queue = VecDeque::new();
    for y in 0..height {
        for x in 0..width {
            if (x == 0 || y == 0 || x + 1 == width || y + 1 == height) && !mask[y * width + x] {
                outside[y * width + x] = true;
                queue.push_back(y * width + x);
            }
        }
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % width, p / width);
        let mut visit = |q: usize| {
            if !mask[q] && !outside[q] {
                outside[q] = true;
                queue.push_back(q);
            }
        };
        if x > 0 {
            visit(p - 1);
        }
        if x + 1 < width {
            visit(p + 1);
        }
        if y > 0 {
            visit(p - width);
        }
        if y + 1 < height {
            visit(p + width);
        }
    }
    for (m, o) in mask.iter_mut().zip(&outside) {
        if !*o {
            *m = true;
        }
    }
}

/// Lesion mask from a grey plane: Otsu's dark class, reduced to its largest 8-connected
/// component (ties go to the component met first in raster order) with holes filled.
pub fn lesion_mask_from_gray(gray: &GrayImage) -> Result<LesionMask> {
    let (t, variance) = otsu_with_variance(&gray_histogram(gray))?;
    if variance <= 0.0 {
        return Err(Error::EmptyLesion(
            "image has a single grey level, no dark/light split exists".into(),
        ));
    }
    let (w, h) = (gray.width as usize, gray.height as usize);
    let dark: Vec<bool> = gray.data.iter().map(|&v| v <= t).collect();
    let (labels, sizes) = label_components(&dark, w, h, true);
    let (best, _) = sizes
        .iter()
        .enumerate()
        .fold((0usize, 0usize), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    let keep = best as u32 + 1;
    let mut inside: Vec<bool> = labels.iter().map(|&l| l == keep).collect();
    fill_holes(&mut inside, w, h);
    LesionMask::from_inside(gray.width, gray.height, inside)
}

pub fn lesion_mask(img: &ImageRgb) -> Result<LesionMask> {
    lesion_mask_from_gray(&to_gray(img))
}

/// Exact Euclidean distance from every pixel to the nearest `inside` pixel (0 inside).
pub fn distance_to_mask(mask: &LesionMask) -> Vec<f64> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let big = ((w * w + h * h) as f64) * 4.0 + 1.0;
    let mut sq = vec![0.0f64; w * h];
    // Columns first, then rows, each with the 1-D lower-envelope transform.
    let mut f = vec![0.0; h.max(w)];
    let mut d = vec![0.0; h.max(w)];
    for x in 0..w {
        for y in 0..h {
            f[y] = if mask.inside[y * w + x] { 0.0 } else { big };
        }
        edt_1d(&f[..h], &mut d[..h]);
        for y in 0..h {
            sq[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&sq[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut d[..w]);
        sq[y * w..(y + 1) * w].copy_from_slice(&d[..w]);
    }
    sq.into_iter().map(f64::sqrt).collect()
}

fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let parabola = |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
        let mut s = parabola(v[k]);
        // z[0] is -inf and every f is finite, so this stops at k = 0 at the latest.
        while s <= z[k] {
            k -= 1;
            s = parabola(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}
