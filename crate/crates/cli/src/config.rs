use std::path::{Path, PathBuf};

use bws_core::eval::{EvalConfig, ExperimentConfig, SynthConfig};
use bws_core::features::{FeatureConfig, SegmentationMode};
use bws_core::mil::TrainConfig;
use bws_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub palette: Option<PathBuf>,
    /// Overrides the threshold stored in the palette file.
    pub match_threshold: Option<f64>,
}

/// Whole-program configuration; every section is optional in the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub features: FeatureConfig,
    pub segmentation: SegmentationMode,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub baseline: BaselineConfig,
    pub synth: SynthConfig,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<CliConfig, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: CliConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<CliConfig, Error> {
        let cfg: CliConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.features.validate()?;
        self.train.validate()?;
        if let SegmentationMode::MeanShift(p) = &self.segmentation {
            p.validate()?;
        }
        if !(0.0..=1.0).contains(&self.eval.min_fraction) {
            return Err(Error::Config("eval.min_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// A single seed flag drives every random choice.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.eval.seed = seed;
        self.synth.seed = seed;
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            features: self.features.clone(),
            segmentation: self.segmentation.clone(),
            train: self.train.clone(),
            eval: self.eval.clone(),
        }
    }
}
