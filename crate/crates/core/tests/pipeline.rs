use std::path::Path;

use bws_core::eval::{
    load_samples, run_baseline, run_mimn_kfold, synth_images, synth_palette, write_manifest, ExperimentConfig, Manifest,
    ManifestEntry, Method, SynthConfig, SynthImage, SynthMode,
};
use bws_core::imaging::save_png;
use bws_core::mil::Label;

fn image_set(n: usize, seed: u64) -> Vec<SynthImage> {
    synth_images(&SynthConfig {
        mode: SynthMode::Images,
        n_pos: n,
        n_neg: n,
        image_size: 96,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn write_set(dir: &Path, images: &[SynthImage]) -> Manifest {
    let entries = images
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.png", s.id));
            save_png(&path, &s.image).unwrap();
            ManifestEntry {
                id: s.id.clone(),
                path,
                label: s.label,
            }
        })
        .collect();
    let m = Manifest::new(entries).unwrap();
    write_manifest(&dir.join("manifest.csv"), &m, dir).unwrap();
    m
}

#[test]
fn celebi_finds_every_planted_blob() {
    let dir = tempfile::tempdir().unwrap();
    let images = image_set(5, 3);
    let manifest = write_set(dir.path(), &images);
    let out = run_baseline(&manifest, Method::Celebi, None, &ExperimentConfig::default(), "synthetic").unwrap();
    let r = &out.report;
    assert_eq!(r.metrics.recall, 100.0);
    assert_eq!(r.metrics.specificity, 100.0);
    assert_eq!(out.overlays.len(), 10);
    assert_eq!(out.overlays[0].1.width, 96);
}

#[test]
fn palette_built_from_annotations_detects_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let images = image_set(4, 5);
    let palette = synth_palette(&images, 1, 64, 10.0).unwrap();
    assert!(palette.patches.iter().all(|p| p.is_bws));
    let manifest = write_set(dir.path(), &images);
    let out = run_baseline(&manifest, Method::Palette, Some(&palette), &ExperimentConfig::default(), "synthetic").unwrap();
    assert_eq!(out.report.metrics.accuracy, 100.0, "{:?}", out.report.predictions);
}

#[test]
fn palette_baseline_requires_palette() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_set(dir.path(), &image_set(1, 1));
    assert!(run_baseline(&manifest, Method::Palette, None, &ExperimentConfig::default(), "x").is_err());
}

#[test]
fn mimn_on_synthetic_images() {
    let dir = tempfile::tempdir().unwrap();
    let images = image_set(6, 11);
    let manifest = write_set(dir.path(), &images);
    let cfg = ExperimentConfig::default();
    let samples = load_samples(&manifest, &cfg.features, &cfg.segmentation).unwrap();
    for s in &samples {
        assert_eq!(s.bag.dim(), 200);
        if s.label == Label::Positive {
            assert!(s.bag.len() >= 2, "{} has {} regions", s.id, s.bag.len());
        }
    }
    let out = run_mimn_kfold(&samples, &cfg, "synthetic").unwrap();
    assert_eq!(out.report.n, 12);
    assert_eq!(out.overlays.len(), 12);
    assert!(out.report.metrics.accuracy >= 75.0, "{:?}", out.report.metrics);
}
