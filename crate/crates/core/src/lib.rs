//! Modular anomaly detection for industrial pressure time series.
//!
//! The crate is organised the way the detector is used in production:
//!
//! - [`nn`]: a small deterministic layer engine (dense, 1-D convolution and
//!   its transpose, LSTM, activations, MSE, Adam) with a finite-difference
//!   gradient checker.
//! - [`autoencoders`]: the frozen feature-extractor autoencoders (LSTM, CNN,
//!   FC), the small detector autoencoder, conventional full-length baselines,
//!   training and the on-disk model bundle.
//! - [`sim`]: a hydraulic-press event simulator with eight pumps sharing one
//!   reservoir, defect-pump exclusion, per-event averaging, normalisation and
//!   CSV ingestion.
//! - [`pipeline`]: the extractor + detector composition, threshold
//!   calibration, three-class verdicts, metrics and experiment runners.
//! - [`transfer`]: the representation database, characteristic-vector
//!   retention, task similarity, training-set composition and the exchange
//!   file format.
//! - [`cli`]: the `modad` command-line surface and its run configuration.
//!
//! Data-parallel loops (event generation, per-sample feature extraction,
//! independent sweep jobs) go through [`par`]; with the `parallel` feature
//! disabled they run sequentially and produce identical results.

pub mod autoencoders;
pub mod cli;
pub mod error;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod tensor;
pub mod transfer;

pub use error::{Error, Result};
pub use rng::RngSeed;
pub use tensor::Tensor;
