//! Mixed renewal processes: model construction from a kernel family and a
//! mixing measure, path simulation, exact finite-dimensional probabilities
//! by quadrature, and statistical verification of the resulting processes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod construction;
pub mod counting;
pub mod error;
pub mod exact;
pub mod kernels;
pub mod model_file;
pub mod quadrature;
pub mod report;
pub mod special;
pub mod stats;

pub use construction::{build_model, sample_conditional_path, sample_path, simulate_ensemble, Ensemble, MrpModel, MrpPath};
pub use error::{Error, Result};
pub use kernels::{kernel_cdf, kernel_sample, mixing_density, mixing_sample, Density1d, Family, KernelSpec, MixingMeasure};
pub use quadrature::{Estimate, QuadratureConfig};
pub use report::VerificationReport;
