use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Side of the square filter support.
pub const MR8_SUPPORT: usize = 49;
pub const MR8_CHANNELS: usize = 8;

const HALF: usize = MR8_SUPPORT / 2;
const SCALES: [f64; 3] = [1.0, 2.0, 4.0];
const ORIENTATIONS: usize = 6;
const ISOTROPIC_SIGMA: f64 = 10.0;

/// Eight maximum-response planes: edge at three scales, bar at three scales, Gaussian, LoG.
#[derive(Debug, Clone, PartialEq)]
pub struct Mr8Responses {
    pub width: u32,
    pub height: u32,
    pub planes: Vec<Vec<f64>>,
    /// Set for a constant input image; all planes are zero.
    pub degenerate: bool,
}

fn gauss1d(sigma: f64, x: f64, order: u8) -> f64 {
    let var = sigma * sigma;
    let g = (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    match order {
        0 => g,
        1 => -g * x / var,
        _ => g * (x * x - var) / (var * var),
    }
}

fn zero_mean_unit_l1(mut k: Vec<f64>) -> Vec<f64> {
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    let l1: f64 = k.iter().map(|v| v.abs()).sum();
    k.iter_mut().for_each(|v| *v /= l1);
    k
}

/// Kernel sampled on the support grid; `f(x, y)` uses y pointing up.
fn sample(f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut k = Vec::with_capacity(MR8_SUPPORT * MR8_SUPPORT);
    for r in 0..MR8_SUPPORT {
        for c in 0..MR8_SUPPORT {
            k.push(f(c as f64 - HALF as f64, HALF as f64 - r as f64));
        }
    }
    k
}

fn oriented(scale: f64, orientation: usize, order: u8) -> Vec<f64> {
    let angle = PI * orientation as f64 / ORIENTATIONS as f64;
    let (s, c) = angle.sin_cos();
    zero_mean_unit_l1(sample(|x, y| {
        let (rx, ry) = (c * x - s * y, s * x + c * y);
        gauss1d(3.0 * scale, rx, 0) * gauss1d(scale, ry, order)
    }))
}

/// The 38 row-major 49x49 kernels: 18 edge (scale-major, six orientations each), 18 bar,
/// then the Gaussian (unit sum) and the Laplacian of Gaussian (zero mean, unit L1).
pub fn mr8_filter_bank() -> Vec<Vec<f64>> {
    let mut bank = Vec::with_capacity(38);
    for order in [1u8, 2] {
        for &scale in &SCALES {
            for o in 0..ORIENTATIONS {
                bank.push(oriented(scale, o, order));
            }
        }
    }
    let var = ISOTROPIC_SIGMA * ISOTROPIC_SIGMA;
    let gauss = sample(|x, y| (-(x * x + y * y) / (2.0 * var)).exp());
    let total: f64 = gauss.iter().sum();
    bank.push(gauss.iter().map(|v| v / total).collect());
    let log = sample(|x, y| {
        let r2 = x * x + y * y;
        (-r2 / (2.0 * var)).exp() * (r2 - 2.0 * var)
    });
    bank.push(zero_mean_unit_l1(log));
    bank
}

struct Fft2 {
    nx: usize,
    ny: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize, inverse: bool) -> Fft2 {
        let mut planner = FftPlanner::new();
        let (row, col) = if inverse {
            (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
        } else {
            (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
        };
        Fft2 { nx, ny, row, col }
    }

    fn run(&self, data: &mut [Complex64]) {
        self.row.process(data);
        let mut column = vec![Complex64::default(); self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                column[y] = data[y * self.nx + x];
            }
            self.col.process(&mut column);
            for y in 0..self.ny {
                data[y * self.nx + x] = column[y];
            }
        }
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

fn weber(r: f64, c: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * (1.0 + r.abs() / c).ln() / r.abs()
    }
}

/// MR8 responses of an intensity-normalized image. Convolution is circular over a reflect-padded
/// copy, so every output pixel sees the full 49x49 support.
pub fn mr8_responses(gray: &GrayImage, weber_constant: f64) -> Result<Mr8Responses> {
    let (w, h) = (gray.width as usize, gray.height as usize);
    if w < MR8_SUPPORT || h < MR8_SUPPORT {
        return Err(Error::ImageTooSmall {
            width: gray.width,
            height: gray.height,
            min: MR8_SUPPORT as u32,
        });
    }
    let n = (w * h) as f64;
    let mean = gray.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = gray.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Ok(Mr8Responses {
            width: gray.width,
            height: gray.height,
            planes: vec![vec![0.0; w * h]; MR8_CHANNELS],
            degenerate: true,
        });
    }
    let sd = var.sqrt();

    let (nx, ny) = (w + 2 * HALF, h + 2 * HALF);
    let forward = Fft2::new(nx, ny, false);
    let inverse = Fft2::new(nx, ny, true);
    let mut image = vec![Complex64::default(); nx * ny];
    for py in 0..ny {
        let sy = reflect(py as isize - HALF as isize, h);
        for px in 0..nx {
            let sx = reflect(px as isize - HALF as isize, w);
            image[py * nx + px] = Complex64::new((gray.data[sy * w + sx] as f64 - mean) / sd, 0.0);
        }
    }
    forward.run(&mut image);

    // Two real kernels share one complex transform: the real and imaginary parts of the result
    // are the two filter responses.
    let bank = mr8_filter_bank();
    let scale = 1.0 / (nx * ny) as f64;
    let offset = 2 * HALF;
    let responses: Vec<(Vec<f64>, Vec<f64>)> = bank
        .par_chunks(2)
        .map(|pair| {
            let mut k = vec![Complex64::default(); nx * ny];
            for r in 0..MR8_SUPPORT {
                for c in 0..MR8_SUPPORT {
                    let i = r * MR8_SUPPORT + c;
                    k[r * nx + c] = Complex64::new(pair[0][i], pair.get(1).map_or(0.0, |f| f[i]));
                }
            }
            forward.run(&mut k);
            k.iter_mut().zip(&image).for_each(|(kv, iv)| *kv *= iv);
            inverse.run(&mut k);
            let mut re = Vec::with_capacity(w * h);
            let mut im = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let v = k[(y + offset) * nx + x + offset] * scale;
                    re.push(v.re);
                    im.push(v.im);
                }
            }
            (re, im)
        })
        .collect();
    let filtered: Vec<Vec<f64>> = responses.into_iter().flat_map(|(a, b)| [a, b]).collect();

    let mut planes = Vec::with_capacity(MR8_CHANNELS);
    for (family, abs) in [(0usize, true), (1, false)] {
        for s in 0..SCALES.len() {
            let base = family * 18 + s * ORIENTATIONS;
            let plane = (0..w * h)
                .map(|i| {
                    let it = (base..base + ORIENTATIONS).map(|f| filtered[f][i]);
                    // Edge filters flip sign under a half-turn, so their polarity is dropped.
                    if abs {
                        it.map(f64::abs).fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        it.fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .collect();
            planes.push(plane);
        }
    }
    planes.push(filtered[36].clone());
    planes.push(filtered[37].clone());
    for plane in &mut planes {
        plane.iter_mut().for_each(|v| *v = weber(*v, weber_constant));
    }
    Ok(Mr8Responses {
        width: gray.width,
        height: gray.height,
        planes,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(width: u32, height: u32, mut f: impl FnMut(f64, f64) -> f64) -> GrayImage {
        let mut data = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x as f64, y as f64).round().clamp(0.0, 255.0) as u8);
            }
        }
        GrayImage { width, height, data }
    }

    #[test]
    fn bank_normalization() {
        let bank = mr8_filter_bank();
        assert_eq!(bank.len(), 38);
        for (i, k) in bank.iter().enumerate() {
            assert_eq!(k.len(), MR8_SUPPORT * MR8_SUPPORT);
            let sum: f64 = k.iter().sum();
            if i == 36 {
                assert!((sum - 1.0).abs() < 1e-12);
            } else {
                assert!(sum.abs() < 1e-12, "filter {i} sum {sum}");
                assert!((k.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn direct_convolution_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = gray(53, 50, |_, _| rng.gen_range(0.0..255.0));
        let r = mr8_responses(&g, 0.03).unwrap();
        let (w, h) = (53usize, 50usize);
        let n = (w * h) as f64;
        let mean = g.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let sd = (g.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
        let log = &mr8_filter_bank()[37];
        for &(x, y) in &[(0usize, 0usize), (26, 25), (52, 49), (3, 40)] {
            let mut acc = 0.0;
            for r in 0..MR8_SUPPORT {
                for c in 0..MR8_SUPPORT {
                    let sx = reflect(x as isize + HALF as isize - c as isize, w);
                    let sy = reflect(y as isize + HALF as isize - r as isize, h);
                    acc += log[r * MR8_SUPPORT + c] * (g.data[sy * w + sx] as f64 - mean) / sd;
                }
            }
            let got = r.planes[7][y * w + x];
            assert!((got - weber(acc, 0.03)).abs() < 1e-9, "({x},{y}): {got} vs {acc}");
        }
    }

    #[test]
    fn too_small_image_rejected() {
        let g = gray(48, 60, |_, _| 0.0);
        assert!(matches!(mr8_responses(&g, 0.03), Err(Error::ImageTooSmall { min: 49, .. })));
    }

    #[test]
    fn constant_image_is_degenerate() {
        let r = mr8_responses(&gray(50, 50, |_, _| 120.0), 0.03).unwrap();
        assert!(r.degenerate);
        assert!(r.planes.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_is_reproducible() {
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            gray(64, 64, |_, _| rng.gen_range(0.0..255.0))
        };
        assert_eq!(mr8_responses(&make(), 0.03).unwrap(), mr8_responses(&make(), 0.03).unwrap());
    }

    fn grating(angle: f64) -> GrayImage {
        let (s, c) = angle.sin_cos();
        gray(160, 160, |x, y| {
            let u = c * (x - 80.0) + s * (y - 80.0);
            128.0 + 100.0 * (2.0 * PI * u / 20.0).sin()
        })
    }

    #[test]
    fn responses_invariant_under_thirty_degree_rotations() {
        // Compare mean responses over a central disk; the histograms of a grid-aligned grating
        // are too spiky to compare bin by bin.
        let centre: Vec<usize> = (0..160usize * 160)
            .filter(|p| {
                let (x, y) = ((p % 160) as f64 - 80.0, (p / 160) as f64 - 80.0);
                x * x + y * y < 40.0 * 40.0
            })
            .collect();
        let means = |angle: f64| {
            let r = mr8_responses(&grating(angle), 0.03).unwrap();
            r.planes
                .iter()
                .map(|pl| centre.iter().map(|&p| pl[p]).sum::<f64>() / centre.len() as f64)
                .collect::<Vec<f64>>()
        };
        let base = means(0.0);
        for k in 1..6 {
            let m = means(k as f64 * PI / 6.0);
            for ch in 0..6 {
                let rel = (m[ch] - base[ch]).abs() / base[ch].abs().max(1e-9);
                assert!(rel <= 0.1, "rotation {k}, channel {ch}: {} vs {}", m[ch], base[ch]);
            }
        }
    }
}
