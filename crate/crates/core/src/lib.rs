//! Early stopping by the discrepancy principle for untrained two-layer
//! convolutional generators applied to linear ill-posed problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`generator`]: the generator `G(C) = ReLU(UC)v`, its Jacobian operators
//!   and the population covariance `Σ(U)`;
//! - [`problems`]: synthetic forward operators, truths and noise;
//! - [`dynamics`]: nonlinear and linearised gradient descent plus the
//!   stopping rules;
//! - [`theory`]: numerical checks of the linearisation bounds, error
//!   decomposition, parameter formulas and auxiliary spectral lemmas;
//! - [`experiments`]: the synthetic benchmark grid, summary tables and
//!   convergence-rate regression;
//! - [`cli`]: configuration and orchestration used by the `untrained-prior`
//!   binary.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod generator;
pub mod linalg;
pub mod problems;
pub mod theory;

pub use dynamics::{discrepancy_stop, gradient_step, run_gd, run_linearized, tau_min, GdConfig, LinearizedRun, Trajectory};
pub use error::{Error, Result};
pub use generator::{reference_jacobian, sigma_closed_form, ConvGenerator, CovarianceModel, WeightMatrix};
pub use problems::{build_forward, make_truth, LinearInverseProblem, NoiseModel, SourceElement, SpectralDesign};
