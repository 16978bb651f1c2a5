use super::{ChannelRange, FeatureConfig, LabPixel, Mr8Responses};
use crate::error::{Error, Result};

/// One normalized histogram block; `degenerate` blocks are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

impl Block {
    pub(crate) fn from_counts(counts: Vec<f64>) -> Block {
        let total: f64 = counts.iter().sum();
        if total > 0.0 {
            Block {
                values: counts.into_iter().map(|c| c / total).collect(),
                degenerate: false,
            }
        } else {
            Block {
                values: counts,
                degenerate: true,
            }
        }
    }
}

/// Bin of `v` in `[lo, hi]` with uniform width; values outside are clamped and the top edge
/// belongs to the last bin.
fn bin_index(v: f64, range: ChannelRange, width: f64, bins: usize) -> usize {
    let v = v.clamp(range.lo, range.hi);
    (((v - range.lo) / width).floor() as usize).min(bins - 1)
}

/// Three one-dimensional Lab histograms (L, a, b) concatenated, each summing to one.
pub fn lab_histogram(pixels: &[LabPixel], cfg: &FeatureConfig) -> Result<Vec<f64>> {
    if pixels.is_empty() {
        return Err(Error::Contract("Lab histogram of an empty region".into()));
    }
    let bins = cfg.lab_bins();
    let ranges = [cfg.lab_ranges.l, cfg.lab_ranges.a, cfg.lab_ranges.b];
    let mut out = Vec::with_capacity(bins.iter().sum());
    for c in 0..3 {
        let mut counts = vec![0.0; bins[c]];
        for p in pixels {
            let v = [p.l, p.a, p.b][c];
            counts[bin_index(v, ranges[c], cfg.lab_bin_size, bins[c])] += 1.0;
        }
        out.extend(Block::from_counts(counts).values);
    }
    Ok(out)
}

/// Per-channel histograms of MR8 responses over a region, clipped to `[-clip, clip]`.
pub fn mr8_histogram(responses: &Mr8Responses, region_pixels: &[u32], cfg: &FeatureConfig) -> Result<Vec<f64>> {
    if region_pixels.is_empty() {
        return Err(Error::Contract("MR8 histogram of an empty region".into()));
    }
    let bins = cfg.mr8_bins;
    let range = ChannelRange {
        lo: -cfg.mr8_clip,
        hi: cfg.mr8_clip,
    };
    let width = 2.0 * cfg.mr8_clip / bins as f64;
    let mut out = Vec::with_capacity(responses.planes.len() * bins);
    for plane in &responses.planes {
        let mut counts = vec![0.0; bins];
        for &p in region_pixels {
            counts[bin_index(plane[p as usize], range, width, bins)] += 1.0;
        }
        out.extend(Block::from_counts(counts).values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::MR8_CHANNELS;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_colour_lands_in_expected_bins() {
        let cfg = FeatureConfig::default();
        let h = lab_histogram(&[LabPixel::new(50.0, 0.0, 0.0); 17], &cfg).unwrap();
        assert_eq!(h.len(), 108);
        let ones: Vec<usize> = h.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| i).collect();
        // L bin 10; a bin 22 after 20 L bins; b bin 22 after 64 bins.
        assert_eq!(ones, vec![10, 20 + 22, 64 + 22]);
        assert_eq!(h.iter().filter(|&&v| v != 0.0).count(), 3);
    }

    #[test]
    fn range_edges_and_clamping() {
        let cfg = FeatureConfig::default();
        let h = lab_histogram(&[LabPixel::new(100.0, 110.0, -200.0)], &cfg).unwrap();
        assert_eq!(h[19], 1.0);
        assert_eq!(h[20 + 43], 1.0);
        assert_eq!(h[64], 1.0);
    }

    #[test]
    fn empty_region_rejected() {
        assert!(lab_histogram(&[], &FeatureConfig::default()).is_err());
    }

    #[test]
    fn channel_blocks_sum_to_one() {
        let cfg = FeatureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let px: Vec<LabPixel> = (0..313)
            .map(|_| LabPixel::new(rng.gen_range(0.0..100.0), rng.gen_range(-90.0..90.0), rng.gen_range(-120.0..120.0)))
            .collect();
        let h = lab_histogram(&px, &cfg).unwrap();
        for (lo, hi) in [(0, 20), (20, 64), (64, 108)] {
            assert!((h[lo..hi].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    fn responses_from(values: impl Fn(usize, usize) -> f64, n: usize) -> Mr8Responses {
        Mr8Responses {
            width: n as u32,
            height: 1,
            planes: (0..MR8_CHANNELS).map(|c| (0..n).map(|i| values(c, i)).collect()).collect(),
            degenerate: false,
        }
    }

    #[test]
    fn zero_responses_fill_the_middle_bin() {
        let cfg = FeatureConfig::default();
        let r = responses_from(|_, _| 0.0, 10);
        let pixels: Vec<u32> = (0..10).collect();
        let h = mr8_histogram(&r, &pixels, &cfg).unwrap();
        assert_eq!(h.len(), 64);
        for c in 0..MR8_CHANNELS {
            let block = &h[c * 8..(c + 1) * 8];
            assert_eq!(block[4], 1.0);
            assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_responses_give_flat_histogram() {
        let cfg = FeatureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4000;
        let draws: Vec<Vec<f64>> = (0..MR8_CHANNELS).map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let r = responses_from(|c, i| draws[c][i], n);
        let pixels: Vec<u32> = (0..n as u32).collect();
        let h = mr8_histogram(&r, &pixels, &cfg).unwrap();
        assert!(h.iter().all(|&v| v <= 0.25));
        for c in 0..MR8_CHANNELS {
            assert!((h[c * 8..(c + 1) * 8].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_mr8_region_rejected() {
        let r = responses_from(|_, _| 0.0, 4);
        assert!(mr8_histogram(&r, &[], &FeatureConfig::default()).is_err());
    }
}
