use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kfold_split, propagate_labels, Confusion, Manifest, ManifestEntry, Metrics};
use crate::baselines::{celebi_detect, palette_detect, MunsellPalette};
use crate::error::{Error, Result};
use crate::features::{bag_from_image, read_bag_file, FeatureConfig, ImageBag, SegmentationMode};
use crate::imaging::{
    filter_regions, grid_regions, lesion_mask, load_image, meanshift_segment, red_overlay, ImageRgb,
};
use crate::mil::{predict_bag, train, Bag, CardinalityModel, Label, ModelWeights, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mimn,
    Celebi,
    Palette,
}

impl Method {
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Mimn => "MIMN",
            Method::Celebi => "Celebi thresholds",
            Method::Palette => "Munsell palette",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "mimn" => Ok(Method::Mimn),
            "celebi" => Ok(Method::Celebi),
            "palette" => Ok(Method::Palette),
            other => Err(Error::Config(format!("unknown method {other:?}; expected mimn, celebi or palette"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    /// Fraction of the lesion that detected pixels must cover for a positive image.
    pub min_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 3,
            seed: 0,
            min_fraction: 0.0,
        }
    }
}

/// Everything an experiment needs besides its data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub features: FeatureConfig,
    pub segmentation: SegmentationMode,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

/// One manifest entry turned into a bag, keeping the image and segmentation when there is one.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub label: Label,
    pub bag: Bag,
    pub fingerprint: String,
    pub truth: Option<Vec<Label>>,
    pub image: Option<(ImageRgb, ImageBag)>,
}

fn entry_error(e: &ManifestEntry, err: Error) -> Error {
    match err {
        Error::EmptyBag(msg) => Error::EmptyBag(format!("{} ({})", e.id, msg)),
        other => other,
    }
}

pub fn load_sample(entry: &ManifestEntry, features: &FeatureConfig, segmentation: &SegmentationMode) -> Result<Sample> {
    if entry.is_bag_file() {
        let file = read_bag_file(&entry.path)?;
        let mut bag = file.to_bag()?;
        bag.bag_id = entry.id.clone();
        bag.label = Some(entry.label);
        return Ok(Sample {
            id: entry.id.clone(),
            label: entry.label,
            bag,
            fingerprint: file.fingerprint,
            truth: file.truth,
            image: None,
        });
    }
    let img = load_image(&entry.path)?;
    let ib = bag_from_image(&img, &entry.id, Some(entry.label), features, segmentation)
        .map_err(|e| entry_error(entry, e))?;
    Ok(Sample {
        id: entry.id.clone(),
        label: entry.label,
        bag: ib.bag.clone(),
        fingerprint: features.fingerprint(),
        truth: None,
        image: Some((img, ib)),
    })
}

/// Loads every entry in parallel; results keep manifest order. All samples must share one
/// feature fingerprint.
pub fn load_samples(manifest: &Manifest, features: &FeatureConfig, segmentation: &SegmentationMode) -> Result<Vec<Sample>> {
    let samples = manifest
        .entries
        .par_iter()
        .map(|e| load_sample(e, features, segmentation))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = samples.first() {
        if let Some(other) = samples.iter().find(|s| s.fingerprint != first.fingerprint) {
            return Err(Error::FingerprintMismatch {
                model: first.fingerprint.clone(),
                features: other.fingerprint.clone(),
            });
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub truth: Label,
    pub predicted: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    /// Positive instances (regions) or detected lesion pixels.
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_monotone: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub method: Method,
    pub protocol: String,
    pub n: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Agreement of predicted instance labels with known instance labels on positive bags.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_accuracy: Option<f64>,
    pub per_fold: Vec<FoldReport>,
    pub predictions: Vec<PredictionRecord>,
    pub config: serde_json::Value,
}

/// Report plus per-image overlays (manifest order) for samples that came from images.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    pub overlays: Vec<(String, ImageRgb)>,
}

struct Outcome {
    predicted: Label,
    positives: usize,
    instance_labels: Vec<Label>,
}

fn predict_samples(model: &ModelWeights, samples: &[&Sample]) -> Result<Vec<Outcome>> {
    let card = CardinalityModel::default();
    samples
        .par_iter()
        .map(|s| {
            let p = predict_bag(model, &card, &s.bag)?;
            Ok(Outcome {
                predicted: p.label,
                positives: p.labeling.m_pos(),
                instance_labels: p.labeling.labels,
            })
        })
        .collect()
}

fn trained_model(train_set: &[&Sample], cfg: &TrainConfig) -> Result<(ModelWeights, Vec<f64>, bool)> {
    let bags: Vec<Bag> = train_set.iter().map(|s| s.bag.clone()).collect();
    let outcome = train(&bags, cfg)?;
    let mut model = outcome.model;
    model.feature_fingerprint = train_set[0].fingerprint.clone();
    let objectives: Vec<f64> = outcome.trace.iter().map(|t| t.objective).collect();
    Ok((model, objectives, outcome.converged))
}

fn is_monotone(objectives: &[f64]) -> bool {
    objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9)
}

struct Collected {
    records: Vec<Option<PredictionRecord>>,
    overlays: Vec<Option<ImageRgb>>,
    instance_hits: usize,
    instance_total: usize,
}

impl Collected {
    fn new(n: usize) -> Collected {
        Collected {
            records: vec![None; n],
            overlays: vec![None; n],
            instance_hits: 0,
            instance_total: 0,
        }
    }

    fn record(&mut self, i: usize, s: &Sample, out: Outcome, fold: Option<usize>) {
        if let (Some(truth), Label::Positive) = (&s.truth, s.label) {
            self.instance_total += truth.len();
            self.instance_hits += truth.iter().zip(&out.instance_labels).filter(|(a, b)| a == b).count();
        }
        if let Some((img, ib)) = &s.image {
            self.overlays[i] = Some(red_overlay(img, &ib.positive_pixels(&out.instance_labels)));
        }
        self.records[i] = Some(PredictionRecord {
            id: s.id.clone(),
            truth: s.label,
            predicted: out.predicted,
            fold,
            positives: out.positives,
        });
    }

    fn finish(
        self,
        samples: &[Sample],
        dataset: &str,
        method: Method,
        protocol: String,
        per_fold: Vec<FoldReport>,
        config: serde_json::Value,
    ) -> Result<ExperimentOutput> {
        let records: Vec<PredictionRecord> = self.records.into_iter().flatten().collect();
        let preds: Vec<Label> = records.iter().map(|r| r.predicted).collect();
        let truths: Vec<Label> = records.iter().map(|r| r.truth).collect();
        let metrics = Metrics::from_confusion(Confusion::from_pairs(&preds, &truths)?);
        let overlays = samples
            .iter()
            .zip(self.overlays)
            .filter_map(|(s, o)| o.map(|img| (s.id.clone(), img)))
            .collect();
        Ok(ExperimentOutput {
            report: EvalReport {
                dataset: dataset.to_string(),
                method,
                protocol,
                n: records.len(),
                metrics,
                instance_accuracy: (self.instance_total > 0)
                    .then(|| 100.0 * self.instance_hits as f64 / self.instance_total as f64),
                per_fold,
                predictions: records,
                config,
            },
            overlays,
        })
    }
}

/// Stratified k-fold cross-validation of the MIL model.
pub fn run_mimn_kfold(samples: &[Sample], cfg: &ExperimentConfig, dataset: &str) -> Result<ExperimentOutput> {
    let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let folds = kfold_split(&labels, cfg.eval.folds, cfg.eval.seed)?;
    let mut collected = Collected::new(samples.len());
    let mut per_fold = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        if test.is_empty() {
            return Err(Error::Contract(format!("fold {} is empty", f + 1)));
        }
        let train_set: Vec<&Sample> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().map(|&i| &samples[i]))
            .collect();
        let test_set: Vec<&Sample> = test.iter().map(|&i| &samples[i]).collect();
        let (model, objectives, _) = trained_model(&train_set, &cfg.train)?;
        let outcomes = predict_samples(&model, &test_set)?;
        let preds: Vec<Label> = outcomes.iter().map(|o| o.predicted).collect();
        let truths: Vec<Label> = test_set.iter().map(|s| s.label).collect();
        per_fold.push(FoldReport {
            fold: f + 1,
            n_train: train_set.len(),
            n_test: test_set.len(),
            metrics: Metrics::from_confusion(Confusion::from_pairs(&preds, &truths)?),
            final_objective: objectives.last().copied(),
            outer_iterations: Some(objectives.len()),
            trace_monotone: Some(is_monotone(&objectives)),
        });
        for (&i, out) in test.iter().zip(outcomes) {
            collected.record(i, &samples[i], out, Some(f + 1));
        }
    }
    let echo = serde_json::to_value(cfg).expect("config serializes");
    collected.finish(samples, dataset, Method::Mimn, format!("{}-fold", folds.len()), per_fold, echo)
}

/// Train on one sample set, test on another.
pub fn run_mimn_cross(train_samples: &[Sample], test_samples: &[Sample], cfg: &ExperimentConfig, dataset: &str) -> Result<ExperimentOutput> {
    if let (Some(a), Some(b)) = (train_samples.first(), test_samples.first()) {
        if a.fingerprint != b.fingerprint {
            return Err(Error::FingerprintMismatch {
                model: a.fingerprint.clone(),
                features: b.fingerprint.clone(),
            });
        }
    }
    if test_samples.is_empty() {
        return Err(Error::Contract("test manifest is empty".into()));
    }
    let train_set: Vec<&Sample> = train_samples.iter().collect();
    let test_set: Vec<&Sample> = test_samples.iter().collect();
    let (model, objectives, _) = trained_model(&train_set, &cfg.train)?;
    let outcomes = predict_samples(&model, &test_set)?;
    let preds: Vec<Label> = outcomes.iter().map(|o| o.predicted).collect();
    let truths: Vec<Label> = test_set.iter().map(|s| s.label).collect();
    let fold = FoldReport {
        fold: 1,
        n_train: train_set.len(),
        n_test: test_set.len(),
        metrics: Metrics::from_confusion(Confusion::from_pairs(&preds, &truths)?),
        final_objective: objectives.last().copied(),
        outer_iterations: Some(objectives.len()),
        trace_monotone: Some(is_monotone(&objectives)),
    };
    let mut collected = Collected::new(test_samples.len());
    for (i, out) in outcomes.into_iter().enumerate() {
        collected.record(i, &test_samples[i], out, None);
    }
    let echo = serde_json::to_value(cfg).expect("config serializes");
    collected.finish(test_samples, dataset, Method::Mimn, "cross-manifest".into(), vec![fold], echo)
}

/// Runs a pixel or region detector on one image and propagates the detection to an image label.
pub fn baseline_predict(
    img: &ImageRgb,
    method: Method,
    palette: Option<&MunsellPalette>,
    cfg: &ExperimentConfig,
) -> Result<(Label, Vec<bool>)> {
    let mask = lesion_mask(img)?;
    let detection = match method {
        Method::Celebi => celebi_detect(img, &mask)?.detection,
        Method::Palette => {
            let palette = palette.ok_or_else(|| Error::Config("palette method needs a palette file".into()))?;
            let regions = match &cfg.segmentation {
                SegmentationMode::MeanShift(p) => meanshift_segment(img, p)?,
                SegmentationMode::Grid { cell } => grid_regions(img, &mask, *cell)?,
            };
            palette_detect(img, &filter_regions(&regions, &mask)?, palette)?
        }
        Method::Mimn => return Err(Error::Contract("the MIL model is not a fixed detector".into())),
    };
    let label = propagate_labels(&detection, &mask, cfg.eval.min_fraction)?;
    let inside: Vec<bool> = detection.detected.iter().zip(&mask.inside).map(|(&d, &l)| d && l).collect();
    Ok((label, inside))
}

/// Detector baselines need no training: every image is predicted directly.
pub fn run_baseline(
    manifest: &Manifest,
    method: Method,
    palette: Option<&MunsellPalette>,
    cfg: &ExperimentConfig,
    dataset: &str,
) -> Result<ExperimentOutput> {
    if method == Method::Palette && palette.is_none() {
        return Err(Error::Config("palette method needs a palette file".into()));
    }
    if let Some(e) = manifest.entries.iter().find(|e| e.is_bag_file()) {
        return Err(Error::Contract(format!("{}: detector baselines need images, not bag files", e.id)));
    }
    let results = manifest
        .entries
        .par_iter()
        .map(|e| {
            let img = load_image(&e.path)?;
            let (label, detected) = baseline_predict(&img, method, palette, cfg)?;
            Ok((img, label, detected))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(results.len());
    let mut overlays = Vec::with_capacity(results.len());
    for (e, (img, label, detected)) in manifest.entries.iter().zip(results) {
        records.push(PredictionRecord {
            id: e.id.clone(),
            truth: e.label,
            predicted: label,
            fold: None,
            positives: detected.iter().filter(|&&d| d).count(),
        });
        overlays.push((e.id.clone(), red_overlay(&img, &detected)));
    }
    let preds: Vec<Label> = records.iter().map(|r| r.predicted).collect();
    let truths: Vec<Label> = records.iter().map(|r| r.truth).collect();
    let mut echo = serde_json::to_value(cfg).expect("config serializes");
    if let (Some(p), Some(obj)) = (palette, echo.as_object_mut()) {
        obj.insert("palette".into(), serde_json::to_value(p).expect("palette serializes"));
    }
    Ok(ExperimentOutput {
        report: EvalReport {
            dataset: dataset.to_string(),
            method,
            protocol: "direct".into(),
            n: records.len(),
            metrics: Metrics::from_confusion(Confusion::from_pairs(&preds, &truths)?),
            instance_accuracy: None,
            per_fold: Vec::new(),
            predictions: records,
            config: echo,
        },
        overlays,
    })
}

/// Aligned text table with one row per report and per fold.
pub fn render_table(reports: &[EvalReport]) -> String {
    let header = ["Dataset", "Method", "Accuracy", "Precision", "Recall", "f-score", "Specificity"];
    let mut rows: Vec<[String; 7]> = Vec::new();
    let fmt = |d: String, m: String, x: &Metrics| {
        [
            d,
            m,
            format!("{:.2}", x.accuracy),
            format!("{:.2}", x.precision),
            format!("{:.2}", x.recall),
            format!("{:.2}", x.f_score),
            format!("{:.2}", x.specificity),
        ]
    };
    for r in reports {
        rows.push(fmt(r.dataset.clone(), r.method.display_name().to_string(), &r.metrics));
        if r.per_fold.len() > 1 {
            for f in &r.per_fold {
                rows.push(fmt(format!("  fold {}", f.fold), String::new(), &f.metrics));
            }
        }
    }
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i < 2 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let mut out = line(header.to_vec()) + "\n";
    out += &widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-|-");
    out.push('\n');
    for row in &rows {
        out += &line(row.iter().map(String::as_str).collect());
        out.push('\n');
    }
    out
}
