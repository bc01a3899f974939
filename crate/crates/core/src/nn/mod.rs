//! Deterministic layer engine: forward/backward passes, MSE, Adam and a
//! finite-difference gradient checker.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod dense;
pub(crate) mod gemm;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod lstm;
pub mod network;
pub mod param;

pub use activation::Activation;
pub use adam::{AdamConfig, AdamState};
pub use conv::{conv_output_length, Conv1d, Conv1dTranspose};
pub use dense::Dense;
pub use gradcheck::{finite_diff_gradcheck, finite_diff_gradcheck_with, GradcheckOptions, GradcheckReport, LayerKind};
pub use layer::{Layer, LayerCache, LayerSpec};
pub use loss::{mse, mse_loss};
pub use lstm::Lstm;
pub use network::Sequential;
pub use param::Param;
