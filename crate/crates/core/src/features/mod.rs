//! Region descriptors: concatenated, per-block L1-normalized histograms of CIE Lab colour,
//! rotation-invariant uniform LBP codes and MR8 filter responses.

mod bag;
mod histogram;
mod lbp;
mod mr8;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use crate::color::{srgb_to_lab, LabPixel};
pub use bag::{
    bag_from_image, read_bag_file, write_bag_file, BagFile, ImageBag, ImageFeatures, SegmentationMode,
    BAG_FILE_VERSION,
};
pub use histogram::{lab_histogram, mr8_histogram, Block};
pub use lbp::{lbp_histogram, riu2_code};
pub use mr8::{mr8_filter_bank, mr8_responses, Mr8Responses, MR8_CHANNELS, MR8_SUPPORT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabRanges {
    #[serde(rename = "L")]
    pub l: ChannelRange,
    pub a: ChannelRange,
    pub b: ChannelRange,
}

impl Default for LabRanges {
    fn default() -> Self {
        LabRanges {
            l: ChannelRange { lo: 0.0, hi: 100.0 },
            a: ChannelRange { lo: -110.0, hi: 110.0 },
            b: ChannelRange { lo: -110.0, hi: 110.0 },
        }
    }
}

/// Circular LBP neighbourhood: `points` samples on a circle of `radius` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbpVariant {
    pub points: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub lab_bin_size: f64,
    pub lab_ranges: LabRanges,
    pub lbp_variants: Vec<LbpVariant>,
    pub mr8_bins: usize,
    pub mr8_clip: f64,
    /// Constant of the contrast normalization `r log(1 + |r|/c) / |r|`.
    pub mr8_weber: f64,
    pub include_color: bool,
    pub include_texture: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            lab_bin_size: 5.0,
            lab_ranges: LabRanges::default(),
            lbp_variants: vec![
                LbpVariant { points: 8, radius: 1.0 },
                LbpVariant { points: 16, radius: 2.0 },
            ],
            mr8_bins: 8,
            mr8_clip: 3.0,
            mr8_weber: 0.03,
            include_color: true,
            include_texture: true,
        }
    }
}

impl FeatureConfig {
    pub fn color_only() -> Self {
        FeatureConfig {
            include_texture: false,
            ..FeatureConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.include_color && !self.include_texture {
            return Err(Error::Config("at least one feature family must be enabled".into()));
        }
        if !(self.lab_bin_size > 0.0) {
            return Err(Error::Config("lab_bin_size must be positive".into()));
        }
        for r in [self.lab_ranges.l, self.lab_ranges.a, self.lab_ranges.b] {
            if !(r.hi > r.lo) {
                return Err(Error::Config(format!("empty Lab range [{}, {}]", r.lo, r.hi)));
            }
        }
        if self.include_texture {
            if self.mr8_bins == 0 || !(self.mr8_clip > 0.0) || !(self.mr8_weber > 0.0) {
                return Err(Error::Config("MR8 bins, clip and weber constant must be positive".into()));
            }
            for v in &self.lbp_variants {
                if v.points < 1 || v.points > 31 || !(v.radius > 0.0) {
                    return Err(Error::Config(format!(
                        "LBP variant ({}, {}) needs 1..=31 points and a positive radius",
                        v.points, v.radius
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bins per Lab channel, in L, a, b order.
    pub fn lab_bins(&self) -> [usize; 3] {
        let r = &self.lab_ranges;
        [r.l, r.a, r.b].map(|c| ((c.hi - c.lo) / self.lab_bin_size).ceil() as usize)
    }

    pub fn color_dim(&self) -> usize {
        self.lab_bins().iter().sum()
    }

    pub fn lbp_dim(&self) -> usize {
        self.lbp_variants.iter().map(|v| v.points + 2).sum()
    }

    pub fn mr8_dim(&self) -> usize {
        MR8_CHANNELS * self.mr8_bins
    }

    /// Length of a region feature vector.
    pub fn dim(&self) -> usize {
        let mut d = 0;
        if self.include_color {
            d += self.color_dim();
        }
        if self.include_texture {
            d += self.lbp_dim() + self.mr8_dim();
        }
        d
    }

    /// Stable hash of every field; models refuse features with a different fingerprint.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        format!("fc-{}", hex::encode(&digest[..8]))
    }
}
