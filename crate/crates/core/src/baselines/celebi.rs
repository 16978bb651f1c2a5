use super::DetectionMask;
use crate::error::{Error, Result};
use crate::imaging::{distance_to_mask, ImageRgb, LesionMask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinStats {
    pub mean_red: f64,
    pub healthy_pixel_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CelebiOutcome {
    pub detection: DetectionMask,
    /// `None` when no healthy skin was found and the detector abstained.
    pub skin: Option<SkinStats>,
}

pub fn is_healthy_skin([r, g, b]: [u8; 3]) -> bool {
    r > 90 && r > b && r > g
}

/// Thresholds on normalized blue `B/(R+G+B) >= 0.3` (evaluated as `10B >= 3(R+G+B)`) and relative
/// red `-194 <= R - mean_red < -51`.
pub fn celebi_classify([r, g, b]: [u8; 3], mean_red: f64) -> bool {
    let sum = r as u32 + g as u32 + b as u32;
    if sum == 0 || 10 * (b as u32) < 3 * sum {
        return false;
    }
    let rel = r as f64 - mean_red;
    (-194.0..-51.0).contains(&rel)
}

/// Smallest distance whose band `(lo, d]` collects at least `target` pixels, or the largest
/// available distance when the image runs out.
fn band_edge(sorted: &[f64], lo: f64, target: f64) -> f64 {
    let start = sorted.partition_point(|&d| d <= lo);
    let mut taken = 0usize;
    let mut i = start;
    while i < sorted.len() {
        let d = sorted[i];
        while i < sorted.len() && sorted[i] == d {
            taken += 1;
            i += 1;
        }
        if taken as f64 >= target {
            return d;
        }
    }
    sorted.last().copied().unwrap_or(lo)
}

/// The dilation ring (about 10% of the lesion area) and the skin band beyond it (about 20%),
/// both measured by Euclidean distance from the lesion.
pub fn skin_bands(mask: &LesionMask) -> (Vec<bool>, Vec<bool>) {
    let dist = distance_to_mask(mask);
    let mut outside: Vec<f64> = dist.iter().copied().filter(|&d| d > 0.0).collect();
    outside.sort_by(f64::total_cmp);
    let area = mask.lesion_area as f64;
    let r1 = band_edge(&outside, 0.0, 0.1 * area);
    let r2 = band_edge(&outside, r1, 0.2 * area);
    let ring = dist.iter().map(|&d| d > 0.0 && d <= r1).collect();
    let skin = dist.iter().map(|&d| d > r1 && d <= r2).collect();
    (ring, skin)
}

/// Mean red of the healthy-looking pixels in the skin band.
pub fn skin_stats(img: &ImageRgb, mask: &LesionMask) -> Result<Option<SkinStats>> {
    if img.width != mask.width || img.height != mask.height {
        return Err(Error::Dimension {
            expected: img.len(),
            actual: mask.inside.len(),
        });
    }
    let (_, band) = skin_bands(mask);
    let (mut sum, mut count) = (0u64, 0usize);
    for (px, _) in img.pixels.iter().zip(&band).filter(|(px, &b)| b && is_healthy_skin(**px)) {
        sum += px[0] as u64;
        count += 1;
    }
    Ok((count > 0).then(|| SkinStats {
        mean_red: sum as f64 / count as f64,
        healthy_pixel_count: count,
    }))
}

/// Classifies every pixel of the image; an image without healthy skin yields an empty mask.
pub fn celebi_detect(img: &ImageRgb, mask: &LesionMask) -> Result<CelebiOutcome> {
    let Some(skin) = skin_stats(img, mask)? else {
        log::warn!("no healthy skin pixels around the lesion; threshold detector abstains");
        return Ok(CelebiOutcome {
            detection: DetectionMask::empty(img.width, img.height),
            skin: None,
        });
    };
    let detected = img.pixels.iter().map(|&px| celebi_classify(px, skin.mean_red)).collect();
    Ok(CelebiOutcome {
        detection: DetectionMask {
            width: img.width,
            height: img.height,
            detected,
        },
        skin: Some(skin),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        assert!(celebi_classify([60, 70, 120], 200.0));
        assert!(!celebi_classify([200, 200, 200], 200.0));
        assert!(is_healthy_skin([100, 80, 70]));
        assert!(!is_healthy_skin([90, 80, 70]));
        assert!(!is_healthy_skin([100, 100, 70]));
        assert!(!celebi_classify([0, 0, 0], 100.0));
    }

    #[test]
    fn relative_red_bounds() {
        // nB = 90/150 >= 0.3 throughout; only R - mean decides.
        assert!(celebi_classify([30, 30, 90], 224.0));
        assert!(!celebi_classify([30, 30, 90], 224.5));
        assert!(!celebi_classify([30, 30, 90], 81.0));
        assert!(celebi_classify([30, 30, 90], 81.5));
    }

    #[test]
    fn normalized_blue_boundary_is_inclusive() {
        // 30 / 100 exactly.
        assert!(celebi_classify([40, 30, 30], 150.0));
        assert!(!celebi_classify([41, 30, 29], 150.0));
    }

    fn disk_image(skin: [u8; 3]) -> (ImageRgb, LesionMask) {
        let (w, h) = (80u32, 80u32);
        let mut img = ImageRgb::filled(w, h, skin);
        let mut inside = vec![false; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - 40.0, y as f64 - 40.0);
                if dx * dx + dy * dy < 15.0 * 15.0 {
                    inside[(y * w + x) as usize] = true;
                    img.set(x, y, [60, 70, 120]);
                }
            }
        }
        (img, LesionMask::from_inside(w, h, inside).unwrap())
    }

    #[test]
    fn bands_have_requested_mass() {
        let (_, mask) = disk_image([200, 150, 130]);
        let (ring, skin) = skin_bands(&mask);
        let area = mask.lesion_area as f64;
        let nr = ring.iter().filter(|&&b| b).count() as f64;
        let ns = skin.iter().filter(|&&b| b).count() as f64;
        assert!(nr >= 0.1 * area && nr < 0.1 * area + 2.0 * std::f64::consts::PI * 20.0, "{nr}");
        assert!(ns >= 0.2 * area && ns < 0.2 * area + 2.0 * std::f64::consts::PI * 25.0, "{ns}");
        assert!(ring.iter().zip(&skin).all(|(a, b)| !(a & b)));
        assert!(ring.iter().zip(&mask.inside).all(|(a, b)| !(a & b)));
    }

    #[test]
    fn detects_blue_lesion_on_skin() {
        let (img, mask) = disk_image([200, 150, 130]);
        let out = celebi_detect(&img, &mask).unwrap();
        assert_eq!(out.skin.unwrap().mean_red, 200.0);
        assert_eq!(out.detection.positive_pixel_count(), mask.lesion_area);
    }

    #[test]
    fn abstains_without_healthy_skin() {
        let (img, mask) = disk_image([80, 80, 80]);
        let out = celebi_detect(&img, &mask).unwrap();
        assert!(out.skin.is_none());
        assert_eq!(out.detection.positive_pixel_count(), 0);
        assert_eq!(out.detection.detected.len(), img.len());
    }
}
