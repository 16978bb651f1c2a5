//! Multi-instance Markov network: instance and cardinality potentials, exact inference and
//! max-margin training from bag-level labels.
//!
//! A bag `X` of `m` instances is scored jointly with instance labels `y` and a bag label `Y` by
//!
//! ```text
//! f_w(X, y, Y) = C(m+, m-, Y) + sum_i (w . x_i) y_i
//! ```
//!
//! where `C` is a [`CardinalityModel`]. Inference maximizes over `y` in `O(m log m)`; training
//! minimizes a regularized latent hinge loss with a concave-convex outer loop.

mod cardinality;
mod inference;
mod model_file;
mod score;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cardinality::{cardinality_potential, CardinalityFunctions, CardinalityKind, CardinalityModel};
pub use inference::{
    bag_score, infer_labeling, instance_potential, loss_augmented_score, objective, predict_bag,
    Inference, Prediction,
};
pub use model_file::{model_from_json, model_to_json, read_model, write_model, MODEL_FILE_VERSION};
pub use score::ExtScore;
pub use train::{train, train_with_model, InitStrategy, InnerSolver, StepDecay, TrainConfig, TrainOutcome, TraceEntry};

/// Binary label of a bag or of a single instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn from_i64(v: i64) -> Result<Label> {
        match v {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::Contract(format!("label must be +1 or -1, got {other}"))),
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::from_i64(v).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        match s.trim() {
            "+1" | "1" | "pos" | "positive" => Ok(Label::Positive),
            "-1" | "neg" | "negative" => Ok(Label::Negative),
            other => Err(Error::Contract(format!("unrecognized label `{other}`"))),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

/// One region's feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_id: Option<u32>,
}

impl Instance {
    pub fn new(features: Vec<f64>) -> Self {
        Instance {
            features,
            region_id: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// An image (or any other bag) as an ordered, non-empty set of instances sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    pub bag_id: String,
    pub instances: Vec<Instance>,
    pub label: Option<Label>,
}

impl Bag {
    pub fn new(bag_id: impl Into<String>, instances: Vec<Instance>, label: Option<Label>) -> Result<Bag> {
        let bag_id = bag_id.into();
        let Some(first) = instances.first() else {
            return Err(Error::EmptyBag(bag_id));
        };
        let dim = first.dim();
        for inst in &instances {
            if inst.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: inst.dim(),
                });
            }
            if inst.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Contract(format!("bag `{bag_id}` has a non-finite feature")));
            }
        }
        Ok(Bag {
            bag_id,
            instances,
            label,
        })
    }

    /// Convenience constructor from raw feature rows.
    pub fn from_rows(bag_id: impl Into<String>, rows: Vec<Vec<f64>>, label: Option<Label>) -> Result<Bag> {
        Bag::new(bag_id, rows.into_iter().map(Instance::new).collect(), label)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances[0].dim()
    }
}

/// Instance labels of one bag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceLabeling {
    pub labels: Vec<Label>,
}

impl InstanceLabeling {
    pub fn new(labels: Vec<Label>) -> Self {
        InstanceLabeling { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn m_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Positive).count()
    }

    pub fn m_neg(&self) -> usize {
        self.labels.len() - self.m_pos()
    }
}

/// Learned weights of the instance potential, tied to the feature configuration that produced
/// the training vectors.
///
/// With `bias_included`, `weights` carries one extra trailing entry acting on an implicit
/// constant-1 feature, so `weights.len() == dim() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub feature_fingerprint: String,
    pub bias_included: bool,
}

impl ModelWeights {
    pub fn new(
        weights: Vec<f64>,
        lambda: f64,
        feature_fingerprint: impl Into<String>,
        bias_included: bool,
    ) -> Result<ModelWeights> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("model weights contain a non-finite entry".into()));
        }
        if bias_included && weights.is_empty() {
            return Err(Error::Config("a biased model needs at least the bias weight".into()));
        }
        Ok(ModelWeights {
            weights,
            lambda,
            feature_fingerprint: feature_fingerprint.into(),
            bias_included,
        })
    }

    /// Plain weights without bias or fingerprint, mostly for tests and ad-hoc use.
    pub fn plain(weights: Vec<f64>) -> ModelWeights {
        ModelWeights {
            weights,
            lambda: 1.0,
            feature_fingerprint: String::new(),
            bias_included: false,
        }
    }

    pub fn zeros(dim: usize, bias_included: bool) -> ModelWeights {
        ModelWeights {
            weights: vec![0.0; dim + usize::from(bias_included)],
            lambda: 1.0,
            feature_fingerprint: String::new(),
            bias_included,
        }
    }

    /// Feature dimension the model expects (bias excluded).
    pub fn dim(&self) -> usize {
        self.weights.len() - usize::from(self.bias_included)
    }

    /// `w . x` (plus the bias weight when present).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let dot: f64 = self.weights[..d].iter().zip(x).map(|(w, v)| w * v).sum();
        if self.bias_included {
            dot + self.weights[d]
        } else {
            dot
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Refuses features produced under a different configuration.
    pub fn check_fingerprint(&self, features_fingerprint: &str) -> Result<()> {
        if self.feature_fingerprint != features_fingerprint {
            return Err(Error::FingerprintMismatch {
                model: self.feature_fingerprint.clone(),
                features: features_fingerprint.to_string(),
            });
        }
        Ok(())
    }
}
