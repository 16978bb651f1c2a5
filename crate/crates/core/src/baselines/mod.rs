//! Comparison detectors: fixed colour thresholds relative to healthy skin, and nearest-patch
//! matching against a Munsell colour palette.

mod celebi;
mod palette;

pub use celebi::{celebi_classify, celebi_detect, is_healthy_skin, skin_bands, skin_stats, CelebiOutcome, SkinStats};
pub use palette::{
    palette_build, palette_detect, read_palette, write_palette, MunsellPalette, MunsellPatch, MunsellTable,
    PALETTE_FILE_VERSION,
};

/// Per-pixel detector output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionMask {
    pub width: u32,
    pub height: u32,
    pub detected: Vec<bool>,
}

impl DetectionMask {
    pub fn empty(width: u32, height: u32) -> DetectionMask {
        DetectionMask {
            width,
            height,
            detected: vec![false; width as usize * height as usize],
        }
    }

    pub fn positive_pixel_count(&self) -> usize {
        self.detected.iter().filter(|&&d| d).count()
    }
}
