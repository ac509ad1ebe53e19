//! Statistical verification of simulated ensembles.

pub mod conditional;
pub mod exchangeability;
pub mod gof;
pub mod mc;
pub mod poisson;

pub use conditional::conditional_iid_test;
pub use exchangeability::{exchangeability_test, exchangeability_test_rows, ExchangeabilityOptions};
pub use mc::{box_frequency, mc_vs_exact};
pub use poisson::{mixed_poisson_check, MixedPoissonOptions};
