//! Pointwise nonparametric regression in high dimension by selecting the
//! relevant coordinates first and smoothing only along them.
//!
//! The selection stage solves an ℓ1-penalized local linear fit around the
//! query point and keeps the coordinates whose slope survives the penalty
//! ([`selection`]). The estimation stage fits a local polynomial of degree
//! `⌊β⌋` in the selected coordinates only ([`lpe`]). Supporting modules
//! build the localized linear model ([`design`]), solve and certify the
//! penalized problem ([`lasso`]), and provide validated kernels
//! ([`kernels`]).
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod design;
pub mod error;
pub mod kernels;
pub mod lasso;
pub mod linalg;
pub mod lpe;
pub mod monomial;
pub mod quadrature;
pub mod selection;

pub use design::{
    bias_vector, build_localized_design, omega01_indicator, psi_matrix, Dataset, LocalizedDesign,
    Omega01Report, ProblemConstants, RegressionFn, TruthSpec,
};
pub use error::{Error, Result};
pub use kernels::{
    ball_uniform_kernel, gaussian_trunc_kernel, moment_matrix, uniform_kernel,
    validate_estimation_kernel, validate_selection_kernel, EstimationKernelReport, KernelFamily,
    KernelSpec, SelectionKernelReport, Stage,
};
pub use lasso::{
    brute_force_oracle, check_kkt, solve, solve_from, KktReport, LassoProblem, LassoSolution,
    SolveOptions, SweepRecord,
};
pub use linalg::Matrix;
pub use lpe::{
    estimate_f, fit_local_polynomial, two_stage_estimate, EstimationOptions, FitNote, LpeConfig,
    PolyFit, TwoStageEstimate,
};
pub use selection::{
    bandwidth_bound, choose_parameters, select, select_plain, select_translated, theorem_lambda,
    Compliance, Procedure, SelectionConfig, SelectionOutcome,
};
