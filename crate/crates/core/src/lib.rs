//! # modalmr-core
//!
//! Regularized modal regression (RMR) over sample-dependent kernel hypothesis
//! spaces, trained on observations whose covariates follow a finite-state
//! Markov chain.
//!
//! The crate is `no_std` (it needs `alloc`) and has no IO. File formats, the
//! command-line front end and threaded experiment drivers live in the
//! `modalmr` crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernels`] | representing functions `phi`, hypothesis kernels `K`, Gram matrices |
//! | [`markov`] | transition kernels, stationary laws, spectral gaps, sampling |
//! | [`solver`] | the RMR objective, Half-Quadratic and gradient solvers, prediction |
//! | [`risk`] | noise models, synthetic tasks, empirical / surrogate / true modal risk |
//! | [`robustness`] | breakdown quantity `N`, its integer bracket, contamination runs |
//! | [`harness`] | data generation, learning curves, gap sweeps, robustness comparison |

#![no_std]
// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod harness;
pub mod kernels;
pub mod markov;
pub mod risk;
pub mod robustness;
pub mod solver;
pub mod stats;

mod error;

pub use error::Error;
pub use kernels::{
    gram_matrix, CalibrationReport, HypothesisKernel, KernelFunction, PhiKind,
    RepresentingFunction,
};
pub use markov::{ChainDiagnostics, ChainFamily, Start, TransitionKernel};
pub use risk::{NoiseModel, SyntheticTask, TargetFunction};
pub use robustness::BreakdownReport;
pub use solver::{Penalty, RmrConfig, RmrModel};

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
