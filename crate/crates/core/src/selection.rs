//! Coordinate selection by an ℓ1-penalized local linear fit.
//!
//! The plain procedure fits the localized LASSO to the raw responses. The
//! translated procedure first shifts every response by `f_max + C·h`, which
//! keeps the intercept bounded away from zero whenever `|f(x)| ≤ f_max` and
//! leaves the partial derivatives (hence the target support) unchanged.
//! In both cases the selected set is the support of the slope coordinates
//! `1..=d`; the intercept never enters it.

use alloc::format;
use alloc::vec::Vec;

use crate::design::{build_localized_design, Dataset, LocalizedDesign, ProblemConstants};
use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::lasso::{solve, LassoProblem, LassoSolution, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Procedure {
    Plain,
    Translated,
}

impl Procedure {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "plain" => Some(Self::Plain),
            "translated" => Some(Self::Translated),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::Translated => "translated",
        }
    }
}

/// The admissible bandwidth range `0 < h < bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthBound {
    pub bound: f64,
    /// True when `L_μ = 0` made the density term infinite and `η` alone
    /// determines the bound.
    pub eta_only: bool,
}

/// `min(μ_m / (32 (d₀+1) L_μ M_K), η)`.
pub fn bandwidth_bound(c: &ProblemConstants) -> Result<BandwidthBound> {
    let density_term = if c.mu_lipschitz > 0.0 {
        c.mu_min / (32.0 * (c.d0 as f64 + 1.0) * c.mu_lipschitz * c.kernel_bound)
    } else {
        f64::INFINITY
    };
    let bound = density_term.min(c.eta);
    if !bound.is_finite() {
        return Err(invalid(
            "h",
            "L_mu = 0 and eta = inf leave the bandwidth unbounded; pass an explicit h",
        ));
    }
    Ok(BandwidthBound {
        bound,
        eta_only: !density_term.is_finite(),
    })
}

/// `λ = 8 √(3 M_K μ_M) L h`.
pub fn theorem_lambda(c: &ProblemConstants, h: f64) -> f64 {
    8.0 * libm::sqrt(3.0 * c.kernel_bound * c.mu_max) * c.lipschitz * h
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub bandwidth: f64,
    pub lambda: f64,
    pub procedure: Procedure,
    pub constants: Option<ProblemConstants>,
    /// Coordinates with `|θ̄_j|` at or below this are not selected.
    pub zero_tol: f64,
    pub solver: SolveOptions,
    /// Built from the constants with the bandwidth bound and `λ` formula enforced.
    pub strict: bool,
    pub eta_only_bound: bool,
}

impl SelectionConfig {
    /// Arbitrary `(h, λ)`; the outcome is marked non-compliant. The
    /// translated procedure still needs `f_max` and `C` from `constants`.
    pub fn exploratory(
        bandwidth: f64,
        lambda: f64,
        procedure: Procedure,
        constants: Option<ProblemConstants>,
    ) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(invalid("h", "bandwidth must be positive and finite"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid("lambda", "must be finite and nonnegative"));
        }
        if procedure == Procedure::Translated && constants.is_none() {
            return Err(invalid(
                "constants",
                "the translated procedure needs f_max and C",
            ));
        }
        let solver = SolveOptions::default();
        Ok(Self {
            bandwidth,
            lambda,
            procedure,
            constants,
            zero_tol: solver.zero_tol,
            solver,
            strict: false,
            eta_only_bound: false,
        })
    }

    /// Strict configuration for a caller-chosen `h`, which must satisfy the
    /// bandwidth bound; `λ` follows from the constants.
    pub fn strict_with_bandwidth(constants: ProblemConstants, h: f64, procedure: Procedure) -> Result<Self> {
        constants.validate()?;
        let b = bandwidth_bound(&constants)?;
        if !(h > 0.0 && h < b.bound) {
            return Err(invalid(
                "h",
                format!(
                    "h = {h} violates 0 < h < min(mu_m/(32 (d0+1) L_mu M_K), eta) = {}",
                    b.bound
                ),
            ));
        }
        let solver = SolveOptions::default();
        Ok(Self {
            bandwidth: h,
            lambda: theorem_lambda(&constants, h),
            procedure,
            constants: Some(constants),
            zero_tol: solver.zero_tol,
            solver,
            strict: true,
            eta_only_bound: b.eta_only,
        })
    }

    /// Amount added to every response before fitting.
    pub fn translation(&self) -> f64 {
        match (self.procedure, &self.constants) {
            (Procedure::Translated, Some(c)) => c.f_max + c.separation * self.bandwidth,
            _ => 0.0,
        }
    }

    /// Whether `(h, λ)` satisfy the bandwidth bound and the `λ` formula and
    /// the constants satisfy the separation requirement.
    pub fn compliance(&self) -> Compliance {
        let Some(c) = &self.constants else {
            return Compliance::default();
        };
        let bandwidth_ok = bandwidth_bound(c).is_ok_and(|b| self.bandwidth > 0.0 && self.bandwidth < b.bound);
        let target = theorem_lambda(c, self.bandwidth);
        let lambda_ok = (self.lambda - target).abs() <= 1e-12 * target.abs().max(f64::MIN_POSITIVE);
        Compliance {
            bandwidth_ok,
            lambda_ok,
            separation_ok: c.separation_compliant(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Compliance {
    pub bandwidth_ok: bool,
    pub lambda_ok: bool,
    pub separation_ok: bool,
}

impl Compliance {
    pub fn all(&self) -> bool {
        self.bandwidth_ok && self.lambda_ok && self.separation_ok
    }
}

/// `h = h_fraction · bandwidth_bound(constants)` with the matching `λ`.
/// The bound is an open interval, so `h_fraction` must lie in `(0, 1)`.
pub fn choose_parameters(constants: &ProblemConstants, h_fraction: f64, procedure: Procedure) -> Result<SelectionConfig> {
    if !(h_fraction > 0.0 && h_fraction < 1.0) {
        return Err(invalid(
            "h_fraction",
            "must lie strictly between 0 and 1 (the bandwidth bound is excluded)",
        ));
    }
    constants.validate()?;
    let b = bandwidth_bound(constants)?;
    SelectionConfig::strict_with_bandwidth(*constants, h_fraction * b.bound, procedure)
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    /// Selected coordinates, one-based, ascending.
    pub selected: Vec<usize>,
    /// Full `(d+1)`-vector, intercept first.
    pub theta_bar: Vec<f64>,
    pub solution: LassoSolution,
    pub config: SelectionConfig,
    pub compliant: bool,
    /// Number of observations inside the kernel window.
    pub window_size: usize,
}

impl SelectionOutcome {
    pub fn converged(&self) -> bool {
        self.solution.converged
    }
}

/// Plain procedure: the localized LASSO on the raw responses.
pub fn select_plain(data: &Dataset, x: &[f64], cfg: &SelectionConfig, k: &KernelSpec) -> Result<SelectionOutcome> {
    if cfg.procedure != Procedure::Plain {
        return Err(invalid("procedure", "select_plain needs the plain procedure"));
    }
    run(data, x, cfg, k)
}

/// Translated procedure: responses shifted by `f_max + C·h` first.
pub fn select_translated(data: &Dataset, x: &[f64], cfg: &SelectionConfig, k: &KernelSpec) -> Result<SelectionOutcome> {
    if cfg.procedure != Procedure::Translated {
        return Err(invalid(
            "procedure",
            "select_translated needs the translated procedure",
        ));
    }
    run(data, x, cfg, k)
}

/// Dispatches on `cfg.procedure`.
pub fn select(data: &Dataset, x: &[f64], cfg: &SelectionConfig, k: &KernelSpec) -> Result<SelectionOutcome> {
    run(data, x, cfg, k)
}

/// Localized design with the procedure's response translation applied.
pub fn selection_design(data: &Dataset, x: &[f64], cfg: &SelectionConfig, k: &KernelSpec) -> Result<LocalizedDesign> {
    let ld = build_localized_design(data, x, cfg.bandwidth, k)?;
    Ok(ld.translated(cfg.translation()))
}

/// The LASSO problem solved by the selection step.
pub fn selection_problem(ld: &LocalizedDesign, cfg: &SelectionConfig) -> Result<LassoProblem> {
    if ld.is_empty() {
        return Err(Error::EmptyWindow);
    }
    LassoProblem::new(ld.z().to_vec(), ld.a().clone(), cfg.lambda)
}

fn run(data: &Dataset, x: &[f64], cfg: &SelectionConfig, k: &KernelSpec) -> Result<SelectionOutcome> {
    let ld = selection_design(data, x, cfg, k)?;
    let problem = selection_problem(&ld, cfg)?;
    let solution = solve(&problem, &cfg.solver);
    let selected = support_of(&solution.theta, cfg.zero_tol);
    Ok(SelectionOutcome {
        selected,
        theta_bar: solution.theta.clone(),
        compliant: cfg.strict && cfg.compliance().all(),
        window_size: ld.active_rows().len(),
        solution,
        config: cfg.clone(),
    })
}

/// One-based indices `j ∈ 1..=d` with `|θ_j| > zero_tol`.
pub fn support_of(theta_bar: &[f64], zero_tol: f64) -> Vec<usize> {
    theta_bar
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, t)| t.abs() > zero_tol)
        .map(|(j, _)| j)
        .collect()
}
