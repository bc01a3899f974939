//! The modular detector: frozen extractor features feed a small detector
//! autoencoder whose reconstruction error is turned into a three-class
//! verdict by two calibrated thresholds.

pub mod experiment;
pub mod features;
pub mod metrics;
pub mod threshold;
pub mod transfer_eval;

pub use experiment::{
    classify_rows, extractor_test_loss, fit_and_evaluate, fit_calibrated, labels_of, normal_test_loss, run_baseline_on, run_baseline_experiment, run_modular_experiment, run_modular_on,
    train_extractor, ExperimentConfig, ExperimentResult,
};
pub use features::{extract_features, multihead_concat};
pub use metrics::{evaluate, Metrics};
pub use threshold::{calibrate_thresholds, classify, nearest_rank, ThresholdConfig, Thresholds, Verdict};
pub use transfer_eval::{build_feature_db, insert_samples, run_transfer_experiment, TransferConfig, TransferOutcome, DEFAULT_SENSOR};
