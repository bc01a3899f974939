use serde::{Deserialize, Serialize};

use super::features::extract_features;
use super::metrics::{evaluate, Metrics};
use super::threshold::{calibrate_thresholds, classify, ThresholdConfig, Thresholds, Verdict};
use crate::autoencoders::{fit_baseline, fit_detector, fit_extractor, ExtractorSpec, ModelBundle, TrainConfig};
use crate::par::ExecMode;
use crate::sim::{series_of, DatasetSplit, Label, LabeledSample, SubsetKind};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub extractor: ExtractorSpec,
    pub subset: SubsetKind,
    pub thresholds: ThresholdConfig,
    /// Detector (or baseline) training; its seed drives initialisation and
    /// shuffling.
    pub detector: TrainConfig,
}

/// Outcome of one detector training and test-set evaluation.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub metrics: Metrics,
    pub thresholds: Thresholds,
    pub verdicts: Vec<Verdict>,
    pub detector: ModelBundle,
}

impl ExperimentResult {
    pub fn loss_trace(&self) -> &[f64] {
        &self.detector.header.loss_trace
    }
}

/// Trains an extractor on the unlabeled pre-training part of the split.
pub fn train_extractor(split: &DatasetSplit, spec: &ExtractorSpec, config: &TrainConfig) -> Result<ModelBundle> {
    fit_extractor(spec, &series_of(&split.extractor_train), config)
}

/// Mean reconstruction MSE over the normal samples of the unseen test products.
pub fn extractor_test_loss(extractor: &ModelBundle, split: &DatasetSplit, mode: ExecMode) -> Result<f64> {
    normal_test_loss(extractor, &split.test, mode)
}

/// Mean reconstruction MSE over the normal members of `samples`.
pub fn normal_test_loss(extractor: &ModelBundle, samples: &[LabeledSample], mode: ExecMode) -> Result<f64> {
    let normals: Vec<&[f64]> = samples
        .iter()
        .filter(|s| s.label == Label::Normal)
        .map(|s| s.series.as_slice())
        .collect();
    if normals.is_empty() {
        return Err(Error::invalid("test samples contain no normal events"));
    }
    let e = extractor.reconstruction_errors(&normals, mode)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

fn normal_rows<'a>(rows: &'a [Vec<f64>], labels: &[Label]) -> Vec<&'a [f64]> {
    rows.iter()
        .zip(labels)
        .filter(|(_, &l)| l == Label::Normal)
        .map(|(r, _)| r.as_slice())
        .collect()
}

pub fn labels_of(samples: &[LabeledSample]) -> Vec<Label> {
    samples.iter().map(|s| s.label).collect()
}

/// Trains a detector on `train_rows` and calibrates τ on its errors over the
/// normal training rows.
pub fn fit_calibrated(
    train_rows: &[Vec<f64>],
    train_labels: &[Label],
    fit: impl FnOnce(&[Vec<f64>]) -> Result<ModelBundle>,
    thresholds: &ThresholdConfig,
    mode: ExecMode,
) -> Result<(ModelBundle, Thresholds)> {
    if train_rows.len() != train_labels.len() {
        return Err(Error::shape("every row needs exactly one label"));
    }
    let detector = fit(train_rows)?;
    let calib = detector.reconstruction_errors(&normal_rows(train_rows, train_labels), mode)?;
    let t = calibrate_thresholds(&calib, thresholds)?;
    Ok((detector, t))
}

pub fn classify_rows(detector: &ModelBundle, t: &Thresholds, rows: &[Vec<f64>], mode: ExecMode) -> Result<Vec<Verdict>> {
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Ok(detector
        .reconstruction_errors(&refs, mode)?
        .into_iter()
        .map(|e| classify(e, t))
        .collect())
}

/// [`fit_calibrated`], then classifies `test_rows` and scores the verdicts.
pub fn fit_and_evaluate(
    train_rows: &[Vec<f64>],
    train_labels: &[Label],
    test_rows: &[Vec<f64>],
    test_labels: &[Label],
    fit: impl FnOnce(&[Vec<f64>]) -> Result<ModelBundle>,
    thresholds: &ThresholdConfig,
    mode: ExecMode,
) -> Result<ExperimentResult> {
    if test_rows.len() != test_labels.len() {
        return Err(Error::shape("every row needs exactly one label"));
    }
    let (detector, t) = fit_calibrated(train_rows, train_labels, fit, thresholds, mode)?;
    let verdicts = classify_rows(&detector, &t, test_rows, mode)?;
    let predicted: Vec<Label> = verdicts.iter().map(|v| v.label).collect();
    Ok(ExperimentResult {
        metrics: evaluate(&predicted, test_labels)?,
        thresholds: t,
        verdicts,
        detector,
    })
}

/// Frozen extractor + freshly trained detector on one training subset,
/// evaluated on the unseen-product test split.
pub fn run_modular_experiment(
    extractor: &ModelBundle,
    split: &DatasetSplit,
    config: &ExperimentConfig,
    mode: ExecMode,
) -> Result<ExperimentResult> {
    if extractor.code_size() != config.extractor.code_size {
        return Err(Error::config(format!(
            "extractor bundle has code size {}, experiment expects {}",
            extractor.code_size(),
            config.extractor.code_size
        )));
    }
    let train = split.subset(config.subset);
    run_modular_on(extractor, &train, &split.test, &config.detector, &config.thresholds, mode)
}

/// Modular pipeline on explicit training and test samples.
pub fn run_modular_on(
    extractor: &ModelBundle,
    train: &[LabeledSample],
    test: &[LabeledSample],
    detector: &TrainConfig,
    thresholds: &ThresholdConfig,
    mode: ExecMode,
) -> Result<ExperimentResult> {
    let train_f = extract_features(extractor, train, mode)?;
    let test_f = extract_features(extractor, test, mode)?;
    fit_and_evaluate(
        &train_f,
        &labels_of(train),
        &test_f,
        &labels_of(test),
        |rows| fit_detector(rows, detector),
        thresholds,
        mode,
    )
}

/// Conventional full-length autoencoder trained directly on the series.
pub fn run_baseline_experiment(
    layers: usize,
    subset: SubsetKind,
    split: &DatasetSplit,
    train_config: &TrainConfig,
    thresholds: &ThresholdConfig,
    mode: ExecMode,
) -> Result<ExperimentResult> {
    if subset == SubsetKind::Mixed {
        return Err(Error::config("baselines are trained on the normal or normal_x5 subset only"));
    }
    run_baseline_on(layers, &split.subset(subset), &split.test, train_config, thresholds, mode)
}

pub fn run_baseline_on(
    layers: usize,
    train: &[LabeledSample],
    test: &[LabeledSample],
    train_config: &TrainConfig,
    thresholds: &ThresholdConfig,
    mode: ExecMode,
) -> Result<ExperimentResult> {
    let rows: Vec<Vec<f64>> = train.iter().map(|s| s.series.clone()).collect();
    let test_rows: Vec<Vec<f64>> = test.iter().map(|s| s.series.clone()).collect();
    fit_and_evaluate(
        &rows,
        &labels_of(train),
        &test_rows,
        &labels_of(test),
        |r| fit_baseline(layers, r, None, train_config),
        thresholds,
        mode,
    )
}
