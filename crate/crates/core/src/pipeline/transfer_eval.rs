use serde::{Deserialize, Serialize};

use super::experiment::{fit_and_evaluate, labels_of, ExperimentResult};
use super::features::extract_features;
use super::threshold::ThresholdConfig;
use crate::autoencoders::{fit_detector, ModelBundle, TrainConfig};
use crate::par::ExecMode;
use crate::sim::{Label, LabeledSample};
use crate::transfer::{compose_training_set, select_characteristic, MixPolicy, RepresentationDb, RepresentationRecord};
use crate::Result;

pub const DEFAULT_SENSOR: &str = "pressure";

/// Encodes `samples` and files them under their product id.
pub fn build_feature_db(
    extractor: &ModelBundle,
    samples: &[LabeledSample],
    sensor: &str,
    mode: ExecMode,
) -> Result<RepresentationDb> {
    let mut db = RepresentationDb::new();
    insert_samples(&mut db, extractor, samples, sensor, mode)?;
    Ok(db)
}

pub fn insert_samples(
    db: &mut RepresentationDb,
    extractor: &ModelBundle,
    samples: &[LabeledSample],
    sensor: &str,
    mode: ExecMode,
) -> Result<()> {
    for (s, vector) in samples.iter().zip(extract_features(extractor, samples, mode)?) {
        db.insert(RepresentationRecord {
            task_id: s.product_id.clone(),
            label: s.label,
            sensor: sensor.to_string(),
            timestamp: s.timestamp,
            vector,
        })?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub policy: MixPolicy,
    /// Retention budget applied to every stored task first; `None` keeps all.
    pub budget: Option<usize>,
    pub seed: crate::RngSeed,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            policy: MixPolicy::default(),
            budget: None,
            seed: crate::RngSeed(0),
        }
    }
}

pub struct TransferOutcome {
    /// Detector trained on the new product's own samples only.
    pub alone: ExperimentResult,
    /// Detector trained on the composed set.
    pub composed: ExperimentResult,
    pub donors: Vec<(String, f64)>,
    pub borrowed: usize,
    pub requested: usize,
}

/// Trains two detectors for a new task, one on its few normal samples and
/// one on those samples mixed with normals borrowed from `db`, and tests both
/// on the task's test events.
#[allow(clippy::too_many_arguments)]
pub fn run_transfer_experiment(
    extractor: &ModelBundle,
    mut db: RepresentationDb,
    task_id: &str,
    train: &[LabeledSample],
    test: &[LabeledSample],
    config: &TransferConfig,
    detector: &TrainConfig,
    thresholds: &ThresholdConfig,
    mode: ExecMode,
) -> Result<TransferOutcome> {
    if let Some(b) = config.budget {
        let ids: Vec<String> = db.task_ids().map(str::to_string).collect();
        for id in ids {
            select_characteristic(&mut db, &id, b)?;
        }
    }
    let new = extract_features(extractor, train, mode)?;
    let test_labels = labels_of(test);
    let test = extract_features(extractor, test, mode)?;
    let composition = compose_training_set(&db, task_id, &new, &config.policy, config.seed)?;
    let fit = |rows: &[Vec<f64>]| fit_detector(rows, detector);

    let alone = fit_and_evaluate(&new, &labels_of(train), &test, &test_labels, fit, thresholds, mode)?;
    let composed_labels = vec![Label::Normal; composition.vectors.len()];
    let composed = fit_and_evaluate(&composition.vectors, &composed_labels, &test, &test_labels, fit, thresholds, mode)?;
    Ok(TransferOutcome {
        alone,
        composed,
        borrowed: composition.borrowed,
        requested: composition.requested,
        donors: composition.donors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoders::{fit_extractor, Architecture, ExtractorSpec};
    use crate::sim::{make_dataset, new_product, series_of, DatasetSpec};

    #[test]
    fn composed_detector_uses_borrowed_normals() {
        let mut spec = DatasetSpec {
            extractor_samples: 60,
            normal_samples: 40,
            mixed_samples: 40,
            test_samples: 30,
            ..DatasetSpec::default()
        };
        spec.event.length = 60;
        let split = make_dataset(&spec, ExecMode::Sequential).unwrap();
        let ex = fit_extractor(
            &ExtractorSpec::new(Architecture::Fc, 60, 6),
            &series_of(&split.extractor_train),
            &TrainConfig { max_epochs: 1, ..TrainConfig::default() },
        )
        .unwrap();
        let db = build_feature_db(&ex, &split.normal, DEFAULT_SENSOR, ExecMode::Sequential).unwrap();
        assert_eq!(db.task_count(), spec.train_products);
        let product = new_product(&spec, 12, ExecMode::Sequential).unwrap();
        assert_eq!(product.profile.product_id, "P12");
        assert!(product.train.iter().all(|s| s.label == Label::Normal && s.product_id == "P12"));
        let cfg = TransferConfig { budget: Some(4), ..TransferConfig::default() };
        let tc = TrainConfig { max_epochs: 1, ..TrainConfig::default() };
        let out = run_transfer_experiment(
            &ex,
            db,
            &product.profile.product_id,
            &product.train,
            &product.test,
            &cfg,
            &tc,
            &ThresholdConfig::default(),
            ExecMode::Sequential,
        )
        .unwrap();
        // one donor task retained 4 records, all normal
        assert_eq!((out.requested, out.borrowed, out.donors.len()), (12, 4, 1));
        assert_eq!(out.alone.metrics.total, product.test.len());
        assert_eq!(out.composed.metrics.total, product.test.len());
    }
}
