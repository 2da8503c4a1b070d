use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::ClassifierParams;
use super::patches::{Patch, PatchSet, Region};
use super::split::{split_patches, SplitSpec, SplitSummary};
use super::train::{predict_all, train_classifier, EpochStats, Examples, TrainConfig, TrainedClassifier};
use crate::error::GapError;
use crate::rng::RngStream;

/// `2 (1 - (err_s + err_t))`, clamped to `[0, 2]`.
pub fn divergence_from_errors(err_source: f64, err_target: f64) -> f64 {
    (2.0 * (1.0 - (err_source + err_target))).clamp(0.0, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub d: f64,
    pub err_source: f64,
    pub err_target: f64,
}

/// Error rate of predicting `label` over a set of patches.
pub fn error_rate(params: &ClassifierParams<f32>, patches: &[Patch], label: usize) -> f64 {
    let inputs: Vec<Vec<f32>> = patches.par_iter().map(Patch::to_tensor).collect();
    let wrong = predict_all(params, &inputs).iter().filter(|&&p| p != label).count();
    wrong as f64 / patches.len() as f64
}

/// H-divergence estimate from a trained domain classifier on held-out patches.
pub fn h_divergence(params: &ClassifierParams<f32>, test_source: &[Patch], test_target: &[Patch]) -> Result<DivergenceEstimate, GapError> {
    if test_source.is_empty() || test_target.is_empty() {
        return Err(GapError::EmptyTestSet);
    }
    let err_source = error_rate(params, test_source, 0);
    let err_target = error_rate(params, test_target, 1);
    Ok(DivergenceEstimate { d: divergence_from_errors(err_source, err_target), err_source, err_target })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapOptions {
    pub split: SplitSpec,
    pub train: TrainConfig,
}

/// Measurement of one region (foreground or background).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub region: Region,
    pub d: f64,
    pub err_source: f64,
    pub err_target: f64,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
    pub split: SplitSummary,
    pub history: Vec<EpochStats>,
}

/// A region report together with the classifier that produced it.
#[derive(Debug, Clone)]
pub struct RegionMeasurement {
    pub report: RegionReport,
    pub classifier: TrainedClassifier,
}

/// Split, train on source-vs-target labels, and evaluate on the test split.
pub fn measure_region(source: &PatchSet, target: &PatchSet, opts: &GapOptions, rng: &mut RngStream) -> Result<RegionMeasurement, GapError> {
    let splits = split_patches(source, target, &opts.split, rng)?;
    let train = Examples::from_domains(&splits.train.source, &splits.train.target);
    let val = Examples::from_domains(&splits.val.source, &splits.val.target);
    let classifier = train_classifier(&train, &val, &opts.train, rng);
    let est = h_divergence(&classifier.params, &splits.test.source, &splits.test.target)?;
    let report = RegionReport {
        region: source.region,
        d: est.d,
        err_source: est.err_source,
        err_target: est.err_target,
        best_val_accuracy: classifier.best_val_accuracy,
        best_epoch: classifier.best_epoch,
        split: splits.summary(opts.split.scene_disjoint),
        history: classifier.history.clone(),
    };
    log::info!("{} divergence {:.3} (err_s {:.3}, err_t {:.3})", source.region.as_str(), est.d, est.err_source, est.err_target);
    Ok(RegionMeasurement { report, classifier })
}

/// Headline numbers of one measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub fg: f64,
    pub bg: f64,
    pub gap: f64,
}

impl GapRow {
    pub fn new(fg: f64, bg: f64) -> Self {
        GapRow { fg, bg, gap: (fg - bg).abs() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub fg: f64,
    pub bg: f64,
    pub gap: f64,
    pub foreground: RegionReport,
    pub background: RegionReport,
    pub options: GapOptions,
    pub seed: u64,
}

impl DivergenceReport {
    pub fn row(&self) -> GapRow {
        GapRow { fg: self.fg, bg: self.bg, gap: self.gap }
    }
}

/// Two measurements side by side; `gap_delta = after.gap - before.gap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeforeAfter {
    pub before: GapRow,
    pub after: GapRow,
    pub gap_delta: f64,
    pub details: BeforeAfterDetails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeforeAfterDetails {
    pub before: DivergenceReport,
    pub after: DivergenceReport,
}

impl BeforeAfter {
    pub fn new(before: DivergenceReport, after: DivergenceReport) -> Self {
        let (b, a) = (before.row(), after.row());
        BeforeAfter { before: b, after: a, gap_delta: a.gap - b.gap, details: BeforeAfterDetails { before, after } }
    }
}

/// Full report plus both classifiers (for feature dumps).
#[derive(Debug, Clone)]
pub struct GapMeasurement {
    pub report: DivergenceReport,
    pub foreground: TrainedClassifier,
    pub background: TrainedClassifier,
}

/// Measures foreground and background divergences independently.
pub fn gap_report(
    fg_source: &PatchSet,
    fg_target: &PatchSet,
    bg_source: &PatchSet,
    bg_target: &PatchSet,
    opts: &GapOptions,
    rng: &mut RngStream,
) -> Result<GapMeasurement, GapError> {
    let fg = measure_region(fg_source, fg_target, opts, rng)?;
    let bg = measure_region(bg_source, bg_target, opts, rng)?;
    let row = GapRow::new(fg.report.d, bg.report.d);
    let report = DivergenceReport {
        fg: row.fg,
        bg: row.bg,
        gap: row.gap,
        foreground: fg.report,
        background: bg.report,
        options: *opts,
        seed: rng.global_seed(),
    };
    Ok(GapMeasurement { report, foreground: fg.classifier, background: bg.classifier })
}

/// Writes penultimate-layer activations as CSV rows
/// `patch_id,domain,region,f0..f83`, where `patch_id` is the index in its set.
pub fn write_features<W: Write>(out: &mut W, params: &ClassifierParams<f32>, sets: &[&PatchSet], header: bool) -> std::io::Result<()> {
    if header {
        write!(out, "patch_id,domain,region")?;
        for i in 0..super::network::FEATURES {
            write!(out, ",f{i}")?;
        }
        writeln!(out)?;
    }
    for set in sets {
        let feats: Vec<Vec<f32>> = set.patches.par_iter().map(|p| params.features(&p.to_tensor())).collect();
        for (i, f) in feats.iter().enumerate() {
            write!(out, "{i},{},{}", set.domain.as_str(), set.region.as_str())?;
            for v in f {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
