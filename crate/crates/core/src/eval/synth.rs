use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::{palette_build, MunsellPalette, MunsellTable};
use crate::color::{srgb_to_lab, LabPixel};
use crate::error::{Error, Result};
use crate::imaging::ImageRgb;
use crate::mil::{Bag, Instance, Label};

pub const SKIN_RGB: [u8; 3] = [200, 150, 130];
pub const LESION_RGB: [u8; 3] = [110, 70, 50];
pub const BLOB_RGB: [u8; 3] = [90, 110, 150];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    VectorBags,
    Images,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Inclusive range of instances per vector bag.
    pub m_min: usize,
    pub m_max: usize,
    pub pos_mean: Vec<f64>,
    pub neg_mean: Vec<f64>,
    pub sigma: f64,
    pub image_size: u32,
    /// Uniform per-channel noise amplitude for images.
    pub noise: u8,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mode: SynthMode::VectorBags,
            n_pos: 100,
            n_neg: 100,
            m_min: 3,
            m_max: 8,
            pos_mean: vec![2.0, 0.0],
            neg_mean: vec![-2.0, 0.0],
            sigma: 0.3,
            image_size: 128,
            noise: 4,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pos < 1 || self.n_neg < 1 {
            return Err(Error::Config("synthetic sets need at least one bag of each class".into()));
        }
        match self.mode {
            SynthMode::VectorBags => {
                if self.m_min < 1 || self.m_max < self.m_min {
                    return Err(Error::Config(format!("bad instance range [{}, {}]", self.m_min, self.m_max)));
                }
                if !(self.sigma > 0.0) {
                    return Err(Error::Config("sigma must be positive".into()));
                }
                if self.pos_mean.is_empty() || self.pos_mean.len() != self.neg_mean.len() {
                    return Err(Error::Config("cluster means must share a non-zero dimension".into()));
                }
            }
            SynthMode::Images => {
                if self.image_size < 64 {
                    return Err(Error::Config("synthetic images must be at least 64 pixels wide".into()));
                }
            }
        }
        Ok(())
    }
}

/// A generated bag with the instance labels that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthBag {
    pub bag: Bag,
    pub truth: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub id: String,
    pub label: Label,
    pub image: ImageRgb,
    pub lesion: Vec<bool>,
    /// Pixels painted with the blue-whitish colour.
    pub blob: Vec<bool>,
}

/// Gaussian clusters: negative bags draw every instance from the negative cluster, positive bags
/// at least one from the positive cluster. Positive bags come first.
pub fn synth_vector_bags(cfg: &SynthConfig) -> Result<Vec<SynthBag>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(cfg.n_pos + cfg.n_neg);
    let labels = std::iter::repeat_n(Label::Positive, cfg.n_pos)
        .chain(std::iter::repeat_n(Label::Negative, cfg.n_neg));
    for (j, label) in labels.enumerate() {
        let m = rng.gen_range(cfg.m_min..=cfg.m_max);
        let n_pos = if label == Label::Positive { rng.gen_range(1..=m) } else { 0 };
        let mut truth: Vec<Label> = (0..m)
            .map(|i| if i < n_pos { Label::Positive } else { Label::Negative })
            .collect();
        truth.shuffle(&mut rng);
        let instances = truth
            .iter()
            .map(|&t| {
                let mean = if t == Label::Positive { &cfg.pos_mean } else { &cfg.neg_mean };
                Instance::new(mean.iter().map(|&mu| mu + noise.sample(&mut rng)).collect())
            })
            .collect();
        out.push(SynthBag {
            bag: Bag::new(format!("bag{j:04}"), instances, Some(label))?,
            truth,
        });
    }
    Ok(out)
}

fn jitter(rng: &mut ChaCha8Rng, c: [u8; 3], amp: u8) -> [u8; 3] {
    let a = amp as i16;
    c.map(|v| (v as i16 + rng.gen_range(-a..=a)).clamp(0, 255) as u8)
}

/// Light skin background with a brown lesion disk; positive images also carry a blue-grey disk
/// covering 16-30% of the lesion.
pub fn synth_images(cfg: &SynthConfig) -> Result<Vec<SynthImage>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let size = cfg.image_size;
    let s = size as f64;
    let labels = std::iter::repeat_n(Label::Positive, cfg.n_pos)
        .chain(std::iter::repeat_n(Label::Negative, cfg.n_neg));
    let mut out = Vec::with_capacity(cfg.n_pos + cfg.n_neg);
    for (j, label) in labels.enumerate() {
        let r = s * rng.gen_range(0.28..0.34);
        let (cx, cy) = (
            s / 2.0 + rng.gen_range(-s / 16.0..s / 16.0),
            s / 2.0 + rng.gen_range(-s / 16.0..s / 16.0),
        );
        let blob = (label == Label::Positive).then(|| {
            let rb = r * rng.gen_range(0.4..0.55);
            let reach = r - rb - 1.0;
            let (dist, angle) = (rng.gen_range(0.0..reach), rng.gen_range(0.0..std::f64::consts::TAU));
            (cx + dist * angle.cos(), cy + dist * angle.sin(), rb)
        });
        let mut image = ImageRgb::filled(size, size, SKIN_RGB);
        let n = (size * size) as usize;
        let (mut lesion, mut blob_px) = (vec![false; n], vec![false; n]);
        for y in 0..size {
            for x in 0..size {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let i = (y * size + x) as usize;
                let in_lesion = (px - cx).powi(2) + (py - cy).powi(2) < r * r;
                let in_blob = blob.is_some_and(|(bx, by, rb)| (px - bx).powi(2) + (py - by).powi(2) < rb * rb);
                let base = if in_blob {
                    BLOB_RGB
                } else if in_lesion {
                    LESION_RGB
                } else {
                    SKIN_RGB
                };
                lesion[i] = in_lesion;
                blob_px[i] = in_blob;
                image.set(x, y, jitter(&mut rng, base, cfg.noise));
            }
        }
        out.push(SynthImage {
            id: format!("img{j:04}"),
            label,
            image,
            lesion,
            blob: blob_px,
        });
    }
    Ok(out)
}

/// Regular Lab grid used as a stand-in patch lookup table for synthetic data.
pub fn lab_grid_table(step: f64) -> Result<MunsellTable> {
    let axis = |lo: f64, hi: f64| {
        let n = ((hi - lo) / step).floor() as usize;
        (0..=n).map(move |i| lo + i as f64 * step)
    };
    let mut rows = Vec::new();
    for l in axis(0.0, 100.0) {
        for a in axis(-110.0, 110.0) {
            for b in axis(-110.0, 110.0) {
                rows.push((format!("L{l}a{a}b{b}"), LabPixel::new(l, a, b)));
            }
        }
    }
    MunsellTable::new(rows)
}

/// Palette built from pixels sampled out of synthetic images: blob pixels are blue-whitish,
/// other lesion pixels are not.
pub fn synth_palette(images: &[SynthImage], seed: u64, per_image: usize, match_threshold: f64) -> Result<MunsellPalette> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut annotated = Vec::new();
    for img in images {
        let bws: Vec<usize> = (0..img.blob.len()).filter(|&i| img.blob[i]).collect();
        let other: Vec<usize> = (0..img.blob.len()).filter(|&i| img.lesion[i] && !img.blob[i]).collect();
        for (pool, is_bws) in [(bws, true), (other, false)] {
            for &i in pool.choose_multiple(&mut rng, per_image.min(pool.len())) {
                let [r, g, b] = img.image.pixels[i];
                annotated.push((srgb_to_lab(r, g, b), is_bws));
            }
        }
    }
    palette_build(&annotated, &lab_grid_table(5.0)?, match_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_bags_follow_the_generative_story() {
        let bags = synth_vector_bags(&SynthConfig::default()).unwrap();
        assert_eq!(bags.len(), 200);
        for b in &bags {
            assert!((3..=8).contains(&b.bag.len()));
            let k = b.truth.iter().filter(|&&t| t == Label::Positive).count();
            match b.bag.label.unwrap() {
                Label::Positive => assert!(k >= 1),
                Label::Negative => assert_eq!(k, 0),
            }
            for (inst, t) in b.bag.instances.iter().zip(&b.truth) {
                assert_eq!(inst.features[0] > 0.0, *t == Label::Positive);
            }
        }
        assert_eq!(bags, synth_vector_bags(&SynthConfig::default()).unwrap());
    }

    #[test]
    fn images_have_blobs_covering_a_tenth_of_the_lesion() {
        let cfg = SynthConfig {
            mode: SynthMode::Images,
            n_pos: 3,
            n_neg: 2,
            ..SynthConfig::default()
        };
        let imgs = synth_images(&cfg).unwrap();
        assert_eq!(imgs.len(), 5);
        for img in &imgs {
            let lesion = img.lesion.iter().filter(|&&b| b).count();
            let blob = img.blob.iter().filter(|&&b| b).count();
            assert!(img.blob.iter().zip(&img.lesion).all(|(b, l)| !b || *l));
            match img.label {
                Label::Positive => assert!(blob as f64 >= 0.1 * lesion as f64),
                Label::Negative => assert_eq!(blob, 0),
            }
        }
        assert_eq!(imgs, synth_images(&cfg).unwrap());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SynthConfig { n_pos: 0, ..SynthConfig::default() },
            SynthConfig { m_min: 5, m_max: 4, ..SynthConfig::default() },
            SynthConfig { sigma: 0.0, ..SynthConfig::default() },
            SynthConfig { neg_mean: vec![1.0], ..SynthConfig::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
