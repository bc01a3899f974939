use rand::seq::SliceRandom;

use crate::nn::{AdamConfig, AdamState};
use crate::{Error, Result, Tensor};

use super::bundle::{BundleHeader, ModelBundle, ModelKind};
use super::model::{build_baseline, build_detector, build_extractor, Autoencoder};
use super::spec::{BaselineSpec, DetectorSpec, ExtractorSpec, TrainConfig};
use crate::sim::{FeatureStats, NormStats, Scaling};

/// Mean training loss per epoch, weighted by batch size.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_trace: Vec<f64>,
}

/// Mini-batch Adam on reconstruction MSE. Samples are reshuffled every epoch
/// from a stream derived from `config.seed`; the final partial batch is kept.
pub fn train_autoencoder<R: AsRef<[f64]>>(
    model: &mut Autoencoder,
    data: &[R],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let width = model.input_width();
    if let Some((i, r)) = data.iter().enumerate().find(|(_, r)| r.as_ref().len() != width) {
        return Err(Error::shape(format!(
            "sample {i} has length {}, model expects {width}",
            r.as_ref().len()
        )));
    }
    let mut adam = AdamState::new(AdamConfig::with_learning_rate(config.learning_rate), model.params());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let shuffle_seed = config.seed.derive_named("shuffle");
    let mut trace = Vec::with_capacity(config.max_epochs);

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_seed.derive(epoch as u64).rng());
        let mut total = 0.0;
        for (bi, idx) in order.chunks(config.batch_size).enumerate() {
            let mut shape = vec![idx.len()];
            shape.extend_from_slice(model.input_shape());
            let mut buf = Vec::with_capacity(idx.len() * width);
            for &i in idx {
                buf.extend_from_slice(data[i].as_ref());
            }
            let batch = Tensor::new(shape, buf)?;
            let loss = model.train_step(&batch, &mut adam).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("epoch {}, batch {bi}: {msg}", epoch + 1)),
                other => other,
            })?;
            total += loss * idx.len() as f64;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("epoch {} mean loss {mean}", epoch + 1)));
        }
        trace.push(mean);
    }
    Ok(TrainReport { loss_trace: trace })
}

fn fit_bundle<R: AsRef<[f64]>>(
    mut model: Autoencoder,
    header: BundleHeader,
    rows: &[R],
    config: &TrainConfig,
) -> Result<ModelBundle> {
    let norm: Vec<Vec<f64>> = rows.iter().map(|r| header.normalization.apply(r.as_ref())).collect();
    let report = train_autoencoder(&mut model, &norm, config)?;
    model.encoder.zero_grad();
    model.decoder.zero_grad();
    Ok(ModelBundle {
        header: BundleHeader {
            loss_trace: report.loss_trace,
            encoder: model.encoder.specs(),
            decoder: model.decoder.specs(),
            ..header
        },
        model,
    })
}

fn header(kind: ModelKind, model: &Autoencoder, normalization: Scaling, config: &TrainConfig) -> BundleHeader {
    BundleHeader {
        kind,
        extractor: None,
        baseline_layers: None,
        input_shape: model.input_shape().to_vec(),
        code_size: model.code_size(),
        encoder: vec![],
        decoder: vec![],
        normalization,
        train: *config,
        loss_trace: vec![],
    }
}

fn fit_stats<R: AsRef<[f64]>>(rows: &[R], stats: Option<NormStats>) -> Result<NormStats> {
    match stats {
        Some(s) => s.validate().map(|_| s),
        None => NormStats::fit(rows.iter().map(|r| r.as_ref())),
    }
}

/// Trains a feature extractor on raw series, normalising with min/max fitted
/// on those same series.
pub fn fit_extractor<R: AsRef<[f64]>>(spec: &ExtractorSpec, rows: &[R], config: &TrainConfig) -> Result<ModelBundle> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let stats = fit_stats(rows, None)?;
    let model = build_extractor(spec, config.seed.derive_named("init"))?;
    let h = BundleHeader {
        extractor: Some(*spec),
        ..header(ModelKind::Extractor, &model, Scaling::Global(stats), config)
    };
    fit_bundle(model, h, rows, config)
}

/// Trains a detector on raw feature vectors, scaling each feature dimension
/// by its own min/max over `features`.
pub fn fit_detector<R: AsRef<[f64]>>(features: &[R], config: &TrainConfig) -> Result<ModelBundle> {
    let Some(first) = features.first() else {
        return Err(Error::invalid("cannot train on an empty dataset"));
    };
    let spec = DetectorSpec::new(first.as_ref().len())?;
    let stats = FeatureStats::fit(features)?;
    let model = build_detector(&spec, config.seed.derive_named("init"))?;
    let h = header(ModelKind::Detector, &model, Scaling::PerFeature(stats), config);
    fit_bundle(model, h, features, config)
}

/// Trains a conventional full-length autoencoder. `stats` lets the caller
/// reuse dataset-wide normalisation; `None` fits it on `rows`.
pub fn fit_baseline<R: AsRef<[f64]>>(
    layers: usize,
    rows: &[R],
    stats: Option<NormStats>,
    config: &TrainConfig,
) -> Result<ModelBundle> {
    let Some(first) = rows.first() else {
        return Err(Error::invalid("cannot train on an empty dataset"));
    };
    let spec = BaselineSpec::new(layers, first.as_ref().len())?;
    let stats = fit_stats(rows, stats)?;
    let model = build_baseline(&spec, config.seed.derive_named("init"))?;
    let h = BundleHeader {
        baseline_layers: Some(layers),
        ..header(ModelKind::Baseline, &model, Scaling::Global(stats), config)
    };
    fit_bundle(model, h, rows, config)
}
