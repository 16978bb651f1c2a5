use super::{Block, FeatureConfig, LbpVariant};
use crate::imaging::GrayImage;

/// Rotation-invariant uniform code of a neighbour bit pattern: the number of set bits when the
/// circular pattern has at most two 0/1 transitions, `P + 1` otherwise.
pub fn riu2_code(bits: &[bool]) -> usize {
    let p = bits.len();
    let transitions = (0..p).filter(|&i| bits[i] != bits[(i + 1) % p]).count();
    if transitions <= 2 {
        bits.iter().filter(|&&b| b).count()
    } else {
        p + 1
    }
}

fn neighbour_offsets(v: LbpVariant) -> Vec<(f64, f64)> {
    let round5 = |x: f64| (x * 1e5).round() / 1e5;
    (0..v.points)
        .map(|p| {
            let theta = 2.0 * std::f64::consts::PI * p as f64 / v.points as f64;
            (round5(v.radius * theta.cos()), round5(-v.radius * theta.sin()))
        })
        .collect()
}

// Written as a + f (b - a) so equal corners reproduce their value exactly.
fn bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let w = img.width as usize;
    let (xi, yi) = (x0 as usize, y0 as usize);
    let at = |xx: usize, yy: usize| img.data[yy * w + xx] as f64;
    let x1 = if fx > 0.0 { xi + 1 } else { xi };
    let y1 = if fy > 0.0 { yi + 1 } else { yi };
    let top = at(xi, yi) + fx * (at(x1, yi) - at(xi, yi));
    let bottom = at(xi, y1) + fx * (at(x1, y1) - at(xi, y1));
    top + fy * (bottom - top)
}

fn variant_histogram(gray: &GrayImage, pixels: &[u32], v: LbpVariant) -> Block {
    let offsets = neighbour_offsets(v);
    let margin = v.radius.ceil() as u32;
    let (w, h) = (gray.width, gray.height);
    let mut counts = vec![0.0; v.points + 2];
    let mut bits = vec![false; v.points];
    for &p in pixels {
        let (x, y) = (p % w, p / w);
        if x < margin || y < margin || x + margin >= w || y + margin >= h {
            continue;
        }
        let center = gray.data[p as usize] as f64;
        for (bit, &(dx, dy)) in bits.iter_mut().zip(&offsets) {
            *bit = bilinear(gray, x as f64 + dx, y as f64 + dy) >= center;
        }
        counts[riu2_code(&bits)] += 1.0;
    }
    Block::from_counts(counts)
}

/// riu2 LBP histograms of each configured (P, R) variant over the region, concatenated.
/// Pixels whose sampling circle leaves the image are skipped; a variant with no usable pixel
/// yields an all-zero degenerate block.
pub fn lbp_histogram(gray: &GrayImage, region_pixels: &[u32], cfg: &FeatureConfig) -> Block {
    let mut values = Vec::with_capacity(cfg.lbp_dim());
    let mut degenerate = false;
    for &v in &cfg.lbp_variants {
        let block = variant_histogram(gray, region_pixels, v);
        degenerate |= block.degenerate;
        values.extend(block.values);
    }
    Block { values, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> GrayImage {
        let mut data = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    fn all_pixels(g: &GrayImage) -> Vec<u32> {
        (0..g.width * g.height).collect()
    }

    #[test]
    fn riu2_codes() {
        assert_eq!(riu2_code(&[true; 8]), 8);
        assert_eq!(riu2_code(&[false; 8]), 0);
        assert_eq!(riu2_code(&[true, true, true, false, false, false, true, true]), 5);
        assert_eq!(riu2_code(&[true, false, true, false, false, false, false, false]), 9);
    }

    #[test]
    fn constant_region_is_all_ones_pattern() {
        let g = gray(9, 9, |_, _| 77);
        let h = lbp_histogram(&g, &all_pixels(&g), &FeatureConfig::default());
        assert!(!h.degenerate);
        assert_eq!(h.values.len(), 28);
        assert_eq!(h.values[8], 1.0);
        assert_eq!(h.values[10 + 16], 1.0);
        assert_eq!(h.values.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn vertical_step_edge_by_hand() {
        // Interior columns x = 1, 2, 3. Column 1 (dark) and 3 (bright, flat) give code 8. Column 2
        // sits on the step: neighbours at angles -90..90 degrees are bright, the three on the dark
        // side are not, giving the uniform pattern 11100011 with five ones.
        let g = gray(5, 5, |x, _| if x < 2 { 0 } else { 200 });
        let cfg = FeatureConfig {
            lbp_variants: vec![LbpVariant { points: 8, radius: 1.0 }],
            ..FeatureConfig::default()
        };
        let h = lbp_histogram(&g, &all_pixels(&g), &cfg);
        assert!((h.values[8] - 6.0 / 9.0).abs() < 1e-12);
        assert!((h.values[5] - 3.0 / 9.0).abs() < 1e-12);
        assert_eq!(h.values[9], 0.0);
    }

    #[test]
    fn no_interior_pixel_is_degenerate() {
        let g = gray(3, 3, |x, y| (x * 10 + y) as u8);
        let h = lbp_histogram(&g, &[0, 1, 2], &FeatureConfig::default());
        assert!(h.degenerate);
        assert!(h.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variants_sum_to_one_on_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = gray(24, 24, |_, _| rng.gen());
        let h = lbp_histogram(&g, &all_pixels(&g), &FeatureConfig::default());
        assert!((h.values[..10].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((h.values[10..].iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
