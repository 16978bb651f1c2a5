//! The `bws` command line: feature extraction, training, prediction, baseline detectors,
//! evaluation and synthetic data generation.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use bws_core::baselines::{read_palette, write_palette, MunsellPalette};
use bws_core::eval::{
    load_sample, load_samples, read_manifest, render_table, run_baseline, run_mimn_cross, run_mimn_kfold,
    synth_images, synth_palette, synth_vector_bags, write_manifest, EvalReport, ExperimentOutput, Manifest,
    ManifestEntry, Method, SynthMode,
};
use bws_core::features::{bag_from_image, read_bag_file, write_bag_file, BagFile};
use bws_core::imaging::{load_image, red_overlay, save_png, ImageRgb};
use bws_core::mil::{predict_bag, read_model, train, write_model, Bag, CardinalityModel, Label};
use bws_core::{Error, ErrorKind};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{BaselineConfig, CliConfig};

/// Fingerprint recorded in bag files of synthetic vector data.
pub const SYNTHETIC_FINGERPRINT: &str = "synthetic-vector";

#[derive(Debug, Parser)]
#[command(name = "bws", version, about = "Blue-whitish structure detection with multi-instance Markov networks")]
pub struct Cli {
    /// TOML configuration file; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for training initialization, fold assignment and synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for red-tinted detection overlays.
    #[arg(long, global = true)]
    pub overlay_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mimn,
    Celebi,
    Palette,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Mimn => Method::Mimn,
            MethodArg::Celebi => Method::Celebi,
            MethodArg::Palette => Method::Palette,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Celebi,
    Palette,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthModeArg {
    VectorBags,
    Images,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn every image of a manifest into a bag file.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on labelled bags.
    Train {
        #[arg(long, required_unless_present = "bags", conflicts_with = "bags")]
        manifest: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        bags: Vec<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        /// Objective trace CSV; defaults to the model path with a `.trace.csv` suffix.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Predict the bag label and region labels of one image or bag file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required_unless_present = "bag", conflicts_with = "bag")]
        image: Option<PathBuf>,
        #[arg(long)]
        bag: Option<PathBuf>,
        /// Write a PNG with positive regions tinted red.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Run a fixed detector over a manifest of images.
    Baseline {
        #[arg(long, value_enum)]
        method: BaselineArg,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        palette: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Cross-validate (or train on one manifest and test on another) and report metrics.
    Eval {
        #[arg(long, value_enum, default_value_t = MethodArg::Mimn)]
        method: MethodArg,
        #[arg(long, required_unless_present = "test_manifest", conflicts_with = "test_manifest")]
        manifest: Option<PathBuf>,
        #[arg(long, requires = "test_manifest")]
        train_manifest: Option<PathBuf>,
        #[arg(long)]
        test_manifest: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        palette: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic data set with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<SynthModeArg>,
        #[arg(long)]
        n_pos: Option<usize>,
        #[arg(long)]
        n_neg: Option<usize>,
        #[arg(long)]
        image_size: Option<u32>,
    },
}

/// A failed command: message for stderr and the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError {
            code: exit_code(e.kind()),
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command, writing results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> CliResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}").map_err(|e| io_error(Path::new("<stdout>"), e))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::usage(e.render().to_string())),
    };
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    match cli.threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(e.to_string()))?;
            let mut buf = Vec::new();
            let result = pool.install(|| dispatch(&cli, cfg, &mut buf));
            emit(out, &String::from_utf8_lossy(&buf))?;
            result
        }
        None => dispatch(&cli, cfg, out),
    }
}

fn dispatch(cli: &Cli, cfg: CliConfig, out: &mut dyn Write) -> CliResult {
    let ctx = Context { cli, cfg };
    match &cli.command {
        Command::Extract { manifest, out: dir } => ctx.extract(manifest, dir, out),
        Command::Train {
            manifest,
            bags,
            model_out,
            trace,
        } => ctx.train(manifest.as_deref(), bags, model_out, trace.as_deref(), out),
        Command::Predict {
            model,
            image,
            bag,
            overlay,
        } => ctx.predict(model, image.as_deref(), bag.as_deref(), overlay.as_deref(), out),
        Command::Baseline {
            method,
            manifest,
            palette,
            report,
        } => {
            let method = match method {
                BaselineArg::Celebi => Method::Celebi,
                BaselineArg::Palette => Method::Palette,
            };
            ctx.baseline(method, manifest, palette.as_deref(), report.as_deref(), out)
        }
        Command::Eval {
            method,
            manifest,
            train_manifest,
            test_manifest,
            folds,
            palette,
            report,
        } => ctx.eval(
            (*method).into(),
            manifest.as_deref(),
            train_manifest.as_deref(),
            test_manifest.as_deref(),
            *folds,
            palette.as_deref(),
            report.as_deref(),
            out,
        ),
        Command::Synth {
            out: dir,
            mode,
            n_pos,
            n_neg,
            image_size,
        } => ctx.synth(dir, *mode, *n_pos, *n_neg, *image_size, out),
    }
}

/// File-name-safe form of an entry id.
pub fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
}

#[derive(Serialize)]
struct ExtractLogEntry {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct ExtractLog<'a> {
    fingerprint: String,
    config: &'a CliConfig,
    extracted: usize,
    failed: usize,
    entries: Vec<ExtractLogEntry>,
}

#[derive(Serialize)]
struct TrainSummary {
    model: PathBuf,
    trace: PathBuf,
    bags: usize,
    positive: usize,
    negative: usize,
    outer_iterations: usize,
    final_objective: f64,
    training_errors: usize,
    converged: bool,
    fingerprint: String,
}

#[derive(Serialize)]
struct RegionLabel {
    #[serde(skip_serializing_if = "Option::is_none")]
    region_id: Option<u32>,
    label: Label,
}

#[derive(Serialize)]
struct PredictOutput {
    id: String,
    label: Label,
    value_pos: Option<f64>,
    value_neg: Option<f64>,
    fingerprint: String,
    instances: Vec<RegionLabel>,
}

#[derive(Serialize)]
struct SynthSummary {
    mode: SynthMode,
    manifest: PathBuf,
    positive: usize,
    negative: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    palette: Option<PathBuf>,
}

struct Context<'a> {
    cli: &'a Cli,
    cfg: CliConfig,
}

impl Context<'_> {
    fn config_echo(&self) -> serde_json::Value {
        serde_json::to_value(&self.cfg).expect("config serializes")
    }

    fn write_overlays(&self, overlays: &[(String, ImageRgb)]) -> CliResult {
        let Some(dir) = &self.cli.overlay_dir else {
            return Ok(());
        };
        create_dir(dir)?;
        for (id, img) in overlays {
            save_png(&dir.join(format!("{}.png", file_stem_for(id))), img)?;
        }
        Ok(())
    }

    fn emit_report(&self, output: &ExperimentOutput, report_path: Option<&Path>, out: &mut dyn Write) -> CliResult {
        let json = to_json(&output.report);
        if let Some(path) = report_path {
            write_text(path, &json)?;
        }
        self.write_overlays(&output.overlays)?;
        match self.cli.format {
            Format::Json => emit(out, &json),
            Format::Text => emit(out, &render_table(std::slice::from_ref(&output.report))),
        }
    }

    fn extract(&self, manifest_path: &Path, dir: &Path, out: &mut dyn Write) -> CliResult {
        let manifest = read_manifest(manifest_path)?;
        create_dir(dir)?;
        let results: Vec<_> = manifest
            .entries
            .par_iter()
            .map(|e| load_sample(e, &self.cfg.features, &self.cfg.segmentation))
            .collect();
        let mut entries = Vec::new();
        let mut log_entries = Vec::new();
        for (e, r) in manifest.entries.iter().zip(results) {
            match r {
                Ok(sample) => {
                    let path = dir.join(format!("{}.json", file_stem_for(&e.id)));
                    let mut file = BagFile::new(&sample.bag, &sample.fingerprint);
                    file.truth = sample.truth.clone();
                    write_bag_file(&path, &file)?;
                    entries.push(ManifestEntry {
                        id: e.id.clone(),
                        path,
                        label: e.label,
                    });
                    log_entries.push(ExtractLogEntry {
                        id: e.id.clone(),
                        m: Some(sample.bag.len()),
                        error: None,
                    });
                }
                Err(err) => {
                    log::error!("{}: {err}", e.id);
                    log_entries.push(ExtractLogEntry {
                        id: e.id.clone(),
                        m: None,
                        error: Some(err.to_string()),
                    });
                }
            }
        }
        let failed = manifest.len() - entries.len();
        let log = ExtractLog {
            fingerprint: self.cfg.features.fingerprint(),
            config: &self.cfg,
            extracted: entries.len(),
            failed,
            entries: log_entries,
        };
        write_text(&dir.join("extract_log.json"), &to_json(&log))?;
        if !entries.is_empty() {
            write_manifest(&dir.join("manifest.csv"), &Manifest { entries }, dir)?;
        }
        match self.cli.format {
            Format::Json => emit(out, &to_json(&log))?,
            Format::Text => {
                let mut text = String::new();
                for e in &log.entries {
                    match (&e.m, &e.error) {
                        (Some(m), _) => text += &format!("{}\tm={m}\n", e.id),
                        (_, Some(err)) => text += &format!("{}\tFAILED: {err}\n", e.id),
                        _ => {}
                    }
                }
                text += &format!("extracted {} of {} entries into {}\n", log.extracted, manifest.len(), dir.display());
                emit(out, &text)?;
            }
        }
        if failed > 0 {
            return Err(CliError {
                code: 2,
                message: format!("{failed} of {} entries failed; see {}", manifest.len(), dir.join("extract_log.json").display()),
            });
        }
        Ok(())
    }

    fn load_training_bags(&self, manifest: Option<&Path>, bag_paths: &[PathBuf]) -> CliResult<(Vec<Bag>, String)> {
        if let Some(path) = manifest {
            let samples = load_samples(&read_manifest(path)?, &self.cfg.features, &self.cfg.segmentation)?;
            let fp = samples.first().map(|s| s.fingerprint.clone()).unwrap_or_default();
            return Ok((samples.into_iter().map(|s| s.bag).collect(), fp));
        }
        let mut bags = Vec::with_capacity(bag_paths.len());
        let mut fingerprint: Option<String> = None;
        for path in bag_paths {
            let file = read_bag_file(path)?;
            if file.label.is_none() {
                return Err(Error::Contract(format!("bag {} ({}) has no label", file.bag_id, path.display())).into());
            }
            match &fingerprint {
                Some(fp) if *fp != file.fingerprint => {
                    return Err(Error::FingerprintMismatch {
                        model: fp.clone(),
                        features: file.fingerprint.clone(),
                    }
                    .into())
                }
                Some(_) => {}
                None => fingerprint = Some(file.fingerprint.clone()),
            }
            bags.push(file.to_bag()?);
        }
        Ok((bags, fingerprint.unwrap_or_default()))
    }

    fn train(&self, manifest: Option<&Path>, bag_paths: &[PathBuf], model_out: &Path, trace: Option<&Path>, out: &mut dyn Write) -> CliResult {
        let (bags, fingerprint) = self.load_training_bags(manifest, bag_paths)?;
        let outcome = train(&bags, &self.cfg.train)?;
        let mut model = outcome.model;
        model.feature_fingerprint = fingerprint.clone();
        write_model(model_out, &model, Some(&self.config_echo()))?;
        let trace_path = trace.map(Path::to_path_buf).unwrap_or_else(|| {
            let mut s = model_out.as_os_str().to_owned();
            s.push(".trace.csv");
            PathBuf::from(s)
        });
        let mut csv = String::from("outer_iter,objective,inner_iters,training_errors\n");
        for t in &outcome.trace {
            csv += &format!("{},{:.17e},{},{}\n", t.outer_iter, t.objective, t.inner_iters, t.training_errors);
        }
        write_text(&trace_path, &csv)?;
        let last = outcome.trace.last();
        let positive = bags.iter().filter(|b| b.label == Some(Label::Positive)).count();
        let summary = TrainSummary {
            model: model_out.to_path_buf(),
            trace: trace_path,
            bags: bags.len(),
            positive,
            negative: bags.len() - positive,
            outer_iterations: outcome.trace.len(),
            final_objective: last.map_or(f64::NAN, |t| t.objective),
            training_errors: last.map_or(0, |t| t.training_errors),
            converged: outcome.converged,
            fingerprint,
        };
        match self.cli.format {
            Format::Json => emit(out, &to_json(&summary)),
            Format::Text => emit(
                out,
                &format!(
                    "trained on {} bags ({} positive, {} negative)\nouter iterations: {}{}\nfinal objective: {:.6}\ntraining errors: {}\nmodel: {}\ntrace: {}\n",
                    summary.bags,
                    summary.positive,
                    summary.negative,
                    summary.outer_iterations,
                    if summary.converged { " (converged)" } else { "" },
                    summary.final_objective,
                    summary.training_errors,
                    summary.model.display(),
                    summary.trace.display()
                ),
            ),
        }
    }

    fn predict(&self, model_path: &Path, image: Option<&Path>, bag: Option<&Path>, overlay: Option<&Path>, out: &mut dyn Write) -> CliResult {
        let model = read_model(model_path)?;
        let (bag, fingerprint, source) = match (image, bag) {
            (Some(path), _) => {
                let fp = self.cfg.features.fingerprint();
                model.check_fingerprint(&fp)?;
                let img = load_image(path)?;
                let ib = bag_from_image(&img, &dataset_name(path), None, &self.cfg.features, &self.cfg.segmentation)?;
                (ib.bag.clone(), fp, Some((img, ib)))
            }
            (None, Some(path)) => {
                let file = read_bag_file(path)?;
                model.check_fingerprint(&file.fingerprint)?;
                (file.to_bag()?, file.fingerprint, None)
            }
            (None, None) => return Err(CliError::usage("predict needs --image or --bag")),
        };
        let wants_overlay = overlay.is_some() || self.cli.overlay_dir.is_some();
        if wants_overlay && source.is_none() {
            return Err(CliError::usage("overlays need an --image input"));
        }
        let pred = predict_bag(&model, &CardinalityModel::default(), &bag)?;
        if let Some((img, ib)) = &source {
            let tinted = red_overlay(img, &ib.positive_pixels(&pred.labeling.labels));
            if let Some(path) = overlay {
                save_png(path, &tinted)?;
            }
            self.write_overlays(&[(bag.bag_id.clone(), tinted)])?;
        }
        let result = PredictOutput {
            id: bag.bag_id.clone(),
            label: pred.label,
            value_pos: pred.value_pos,
            value_neg: pred.value_neg,
            fingerprint,
            instances: bag
                .instances
                .iter()
                .zip(&pred.labeling.labels)
                .map(|(inst, &label)| RegionLabel {
                    region_id: inst.region_id,
                    label,
                })
                .collect(),
        };
        match self.cli.format {
            Format::Json => emit(out, &to_json(&result)),
            Format::Text => {
                let mut text = format!("{}: {}\n", result.id, result.label);
                for (i, r) in result.instances.iter().enumerate() {
                    match r.region_id {
                        Some(id) => text += &format!("  region {id}: {}\n", r.label),
                        None => text += &format!("  instance {i}: {}\n", r.label),
                    }
                }
                emit(out, &text)
            }
        }
    }

    fn palette(&self, flag: Option<&Path>) -> CliResult<MunsellPalette> {
        let path = flag
            .map(Path::to_path_buf)
            .or_else(|| self.cfg.baseline.palette.clone())
            .ok_or_else(|| CliError::from(Error::Config("palette method needs --palette or baseline.palette".into())))?;
        let mut palette = read_palette(&path)?;
        if let Some(t) = self.cfg.baseline.match_threshold {
            palette.match_threshold = t;
            palette.validate()?;
        }
        Ok(palette)
    }

    fn baseline(&self, method: Method, manifest: &Path, palette: Option<&Path>, report: Option<&Path>, out: &mut dyn Write) -> CliResult {
        let palette = match method {
            Method::Palette => Some(self.palette(palette)?),
            _ => None,
        };
        let m = read_manifest(manifest)?;
        let output = run_baseline(&m, method, palette.as_ref(), &self.cfg.experiment(), &dataset_name(manifest))?;
        self.emit_report(&output, report, out)
    }

    #[allow(clippy::too_many_arguments)]
    fn eval(
        &self,
        method: Method,
        manifest: Option<&Path>,
        train_manifest: Option<&Path>,
        test_manifest: Option<&Path>,
        folds: Option<usize>,
        palette: Option<&Path>,
        report: Option<&Path>,
        out: &mut dyn Write,
    ) -> CliResult {
        let mut exp = self.cfg.experiment();
        if let Some(k) = folds {
            exp.eval.folds = k;
        }
        let output = match (method, manifest, test_manifest) {
            (Method::Mimn, Some(path), _) => {
                let samples = load_samples(&read_manifest(path)?, &exp.features, &exp.segmentation)?;
                run_mimn_kfold(&samples, &exp, &dataset_name(path))?
            }
            (Method::Mimn, None, Some(test)) => {
                let train_path =
                    train_manifest.ok_or_else(|| CliError::usage("cross-manifest evaluation needs --train-manifest"))?;
                let train = load_samples(&read_manifest(train_path)?, &exp.features, &exp.segmentation)?;
                let test_samples = load_samples(&read_manifest(test)?, &exp.features, &exp.segmentation)?;
                let name = format!("{} -> {}", dataset_name(train_path), dataset_name(test));
                run_mimn_cross(&train, &test_samples, &exp, &name)?
            }
            (baseline, Some(path), _) | (baseline, None, Some(path)) => {
                let palette = match baseline {
                    Method::Palette => Some(self.palette(palette)?),
                    _ => None,
                };
                run_baseline(&read_manifest(path)?, baseline, palette.as_ref(), &exp, &dataset_name(path))?
            }
            (_, None, None) => return Err(CliError::usage("eval needs --manifest or --test-manifest")),
        };
        self.emit_report(&output, report, out)
    }

    fn synth(
        &self,
        dir: &Path,
        mode: Option<SynthModeArg>,
        n_pos: Option<usize>,
        n_neg: Option<usize>,
        image_size: Option<u32>,
        out: &mut dyn Write,
    ) -> CliResult {
        let mut sc = self.cfg.synth.clone();
        if let Some(m) = mode {
            sc.mode = match m {
                SynthModeArg::VectorBags => SynthMode::VectorBags,
                SynthModeArg::Images => SynthMode::Images,
            };
        }
        sc.n_pos = n_pos.unwrap_or(sc.n_pos);
        sc.n_neg = n_neg.unwrap_or(sc.n_neg);
        sc.image_size = image_size.unwrap_or(sc.image_size);
        create_dir(dir)?;
        let mut entries = Vec::new();
        let mut palette_path = None;
        match sc.mode {
            SynthMode::VectorBags => {
                let bag_dir = dir.join("bags");
                create_dir(&bag_dir)?;
                for sb in synth_vector_bags(&sc)? {
                    let path = bag_dir.join(format!("{}.json", sb.bag.bag_id));
                    let mut file = BagFile::new(&sb.bag, SYNTHETIC_FINGERPRINT);
                    file.truth = Some(sb.truth);
                    write_bag_file(&path, &file)?;
                    entries.push(ManifestEntry {
                        id: sb.bag.bag_id.clone(),
                        path,
                        label: sb.bag.label.expect("synthetic bags are labelled"),
                    });
                }
            }
            SynthMode::Images => {
                let img_dir = dir.join("images");
                create_dir(&img_dir)?;
                let images = synth_images(&sc)?;
                for s in &images {
                    let path = img_dir.join(format!("{}.png", s.id));
                    save_png(&path, &s.image)?;
                    entries.push(ManifestEntry {
                        id: s.id.clone(),
                        path,
                        label: s.label,
                    });
                }
                let palette = synth_palette(&images, sc.seed, 64, 10.0)?;
                let path = dir.join("palette.json");
                write_palette(&path, &palette)?;
                palette_path = Some(path);
            }
        }
        let manifest_path = dir.join("manifest.csv");
        write_manifest(&manifest_path, &Manifest::new(entries)?, dir)?;
        let summary = SynthSummary {
            mode: sc.mode,
            manifest: manifest_path,
            positive: sc.n_pos,
            negative: sc.n_neg,
            palette: palette_path,
        };
        match self.cli.format {
            Format::Json => emit(out, &to_json(&summary)),
            Format::Text => emit(
                out,
                &format!(
                    "wrote {} positive and {} negative samples; manifest {}\n",
                    summary.positive,
                    summary.negative,
                    summary.manifest.display()
                ),
            ),
        }
    }
}

/// Reads the JSON report written by `eval` or `baseline`.
pub fn read_report(path: &Path) -> CliResult<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}
