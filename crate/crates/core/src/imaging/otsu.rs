use super::GrayImage;
use crate::error::{Error, Result};

pub fn gray_histogram(gray: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in &gray.data {
        hist[v as usize] += 1;
    }
    hist
}

/// Otsu threshold and the between-class variance it attains.
///
/// Grey levels `<= t` form the dark class. Among maximizers the smallest `t` is returned; when
/// every candidate has zero between-class variance (a single occupied level) the result is
/// `(0, 0.0)`.
pub(crate) fn otsu_with_variance(hist: &[u64; 256]) -> Result<(u8, f64)> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::Contract("Otsu threshold of an empty histogram".into()));
    }
    let weighted_total: u64 = hist.iter().enumerate().map(|(i, &h)| i as u64 * h).sum();
    let n = total as f64;

    let mut best_t = 0u8;
    let mut best_var = 0.0f64;
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    for t in 0..256usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let w0 = n0 as f64 / n;
        let w1 = n1 as f64 / n;
        let mu0 = s0 as f64 / n0 as f64;
        let mu1 = (weighted_total - s0) as f64 / n1 as f64;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    Ok((best_t, best_var))
}

/// Grey-level threshold maximizing the between-class variance.
pub fn otsu_threshold(hist: &[u64; 256]) -> Result<u8> {
    otsu_with_variance(hist).map(|(t, _)| t)
}
