//! Manifests, metrics, stratified folds, detection-to-label propagation, synthetic data and
//! experiment runners.

mod experiment;
mod kfold;
mod manifest;
mod metrics;
mod propagate;
pub mod synth;

pub use experiment::{
    baseline_predict, load_sample, load_samples, render_table, run_baseline, run_mimn_cross, run_mimn_kfold,
    EvalConfig, EvalReport, ExperimentConfig, ExperimentOutput, FoldReport, Method, PredictionRecord, Sample,
};
pub use kfold::kfold_split;
pub use manifest::{read_manifest, write_manifest, Manifest, ManifestEntry};
pub use metrics::{metrics, Confusion, Metrics};
pub use propagate::propagate_labels;
pub use synth::{synth_images, synth_palette, synth_vector_bags, SynthBag, SynthConfig, SynthImage, SynthMode};
