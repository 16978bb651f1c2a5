//! sRGB to CIE L*a*b* (D65 reference white, 2 degree observer).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabPixel {
    #[serde(rename = "L")]
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabPixel {
    pub fn new(l: f64, a: f64, b: f64) -> Self {
        LabPixel { l, a, b }
    }

    pub fn distance(&self, other: &LabPixel) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &LabPixel) -> f64 {
        let (dl, da, db) = (self.l - other.l, self.a - other.a, self.b - other.b);
        dl * dl + da * da + db * db
    }
}

// D65 white point in XYZ, Y normalized to 1.
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn linearize(c: u8) -> f64 {
    let v = c as f64 / 255.0;
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn srgb_to_lab(r: u8, g: u8, b: u8) -> LabPixel {
    let (r, g, b) = (linearize(r), linearize(g), linearize(b));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    LabPixel {
        // The matrix row for Y sums to 1 + 1e-7; keep L inside its nominal range.
        l: (116.0 * fy - 16.0).clamp(0.0, 100.0),
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// Per-pixel conversion of a whole image.
pub fn image_to_lab(pixels: &[[u8; 3]]) -> Vec<LabPixel> {
    pixels.iter().map(|&[r, g, b]| srgb_to_lab(r, g, b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black() {
        let w = srgb_to_lab(255, 255, 255);
        assert!((w.l - 100.0).abs() < 0.01 && w.a.abs() < 0.01 && w.b.abs() < 0.01, "{w:?}");
        let k = srgb_to_lab(0, 0, 0);
        assert!(k.l.abs() < 0.01 && k.a.abs() < 0.01 && k.b.abs() < 0.01);
    }

    #[test]
    fn pure_blue() {
        let c = srgb_to_lab(0, 0, 255);
        assert!((c.l - 32.3).abs() < 0.5);
        assert!((c.a - 79.2).abs() < 0.5);
        assert!((c.b + 107.9).abs() < 0.5);
    }

    #[test]
    fn lightness_is_monotone_in_grey() {
        let mut prev = -1.0;
        for v in 0..=255u8 {
            let c = srgb_to_lab(v, v, v);
            assert!(c.l > prev);
            assert!((0.0..=100.0 + 1e-9).contains(&c.l));
            prev = c.l;
        }
    }
}
