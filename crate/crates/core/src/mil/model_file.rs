//! Versioned JSON model files.
//!
//! Weights are written in scientific notation with 17 significant digits so that every `f64`
//! survives a write/read cycle unchanged.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::ModelWeights;
use crate::error::{Error, Result};

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileOut<'a> {
    version: u32,
    #[serde(rename = "D")]
    dim: usize,
    lambda: Box<RawValue>,
    bias_included: bool,
    feature_fingerprint: &'a str,
    weights: Vec<Box<RawValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a serde_json::Value>,
}

#[derive(Deserialize)]
struct ModelFileIn {
    version: u32,
    #[serde(rename = "D")]
    dim: usize,
    lambda: f64,
    bias_included: bool,
    feature_fingerprint: String,
    weights: Vec<f64>,
    #[serde(default)]
    #[allow(dead_code)]
    config: Option<serde_json::Value>,
}

fn exact_number(v: f64) -> Box<RawValue> {
    RawValue::from_string(format!("{v:.16e}")).expect("formatted float is valid JSON")
}

/// Serializes a model; `config` is echoed verbatim for provenance.
pub fn model_to_json(model: &ModelWeights, config: Option<&serde_json::Value>) -> String {
    let out = ModelFileOut {
        version: MODEL_FILE_VERSION,
        dim: model.dim(),
        lambda: exact_number(model.lambda),
        bias_included: model.bias_included,
        feature_fingerprint: &model.feature_fingerprint,
        weights: model.weights.iter().map(|&w| exact_number(w)).collect(),
        config,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str, path: &Path) -> Result<ModelWeights> {
    let raw: ModelFileIn = serde_json::from_str(text).map_err(|e| Error::format(path, e))?;
    if raw.version != MODEL_FILE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported model version {} (expected {MODEL_FILE_VERSION})", raw.version),
        ));
    }
    let expected = raw.dim + usize::from(raw.bias_included);
    if raw.weights.len() != expected {
        return Err(Error::format(
            path,
            format!("D = {} implies {expected} weights, found {}", raw.dim, raw.weights.len()),
        ));
    }
    ModelWeights::new(raw.weights, raw.lambda, raw.feature_fingerprint, raw.bias_included)
}

pub fn write_model(path: &Path, model: &ModelWeights, config: Option<&serde_json::Value>) -> Result<()> {
    std::fs::write(path, model_to_json(model, config)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<ModelWeights> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn writes_seventeen_significant_digits() {
        let m = ModelWeights::new(vec![0.1, -2.0, 1.0 / 3.0], 1.0, "abc", true).unwrap();
        let json = model_to_json(&m, None);
        assert!(json.contains("1.0000000000000001e-1"), "{json}");
        assert!(json.contains("3.3333333333333331e-1"), "{json}");
        assert!(json.contains("\"D\": 2"));
    }

    #[test]
    fn rejects_wrong_version_and_length() {
        let p = Path::new("m.json");
        let bad_version = r#"{"version":9,"D":1,"lambda":1,"bias_included":false,"feature_fingerprint":"","weights":[1]}"#;
        assert!(matches!(model_from_json(bad_version, p), Err(Error::Format { .. })));
        let bad_len = r#"{"version":1,"D":2,"lambda":1,"bias_included":true,"feature_fingerprint":"","weights":[1,2]}"#;
        assert!(matches!(model_from_json(bad_len, p), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn weights_survive_serialization(ws in prop::collection::vec(-1e12f64..1e12, 1..20), bias in any::<bool>()) {
            let m = ModelWeights::new(ws, 0.37, "fp", bias).unwrap();
            let back = model_from_json(&model_to_json(&m, None), Path::new("x")).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
