//! Extractor, detector and baseline autoencoders: construction, training and
//! the on-disk bundle.

pub mod bundle;
pub mod model;
pub mod spec;
pub mod train;

pub use bundle::{BundleHeader, ModelBundle, ModelKind};
pub use model::{build_baseline, build_detector, build_extractor, Autoencoder};
pub use spec::*;
pub use train::{fit_baseline, fit_detector, fit_extractor, train_autoencoder, TrainReport};
