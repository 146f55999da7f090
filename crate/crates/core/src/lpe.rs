//! Second stage: a kernel-weighted local polynomial fit restricted to the
//! selected coordinates, evaluated at the query point and clamped to
//! `[-f_max, f_max]`.

use alloc::vec::Vec;

use crate::design::Dataset;
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, Stage};
use crate::linalg::{least_squares_qr, symmetric_eigenvalues, Matrix};
use crate::monomial::{basis_size, evaluate, multi_indices, total_degree};
use crate::selection::{select, SelectionConfig, SelectionOutcome};

/// Normal matrices with a larger condition number count as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest integer strictly smaller than `beta`.
pub fn degree_for(beta: f64) -> u32 {
    (libm::ceil(beta) - 1.0) as u32
}

/// `n^{-1/(2β + d̂)}`.
pub fn default_bandwidth(n: usize, beta: f64, selected: usize) -> f64 {
    libm::pow(n as f64, -1.0 / (2.0 * beta + selected as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpeConfig {
    pub beta: f64,
    /// One-based selected coordinates.
    pub selected: Vec<usize>,
    /// Overrides the default `n^{-1/(2β+d̂)}`.
    pub bandwidth: Option<f64>,
    pub kernel: KernelFamily,
    pub f_max: f64,
}

impl LpeConfig {
    pub fn new(beta: f64, selected: Vec<usize>, kernel: KernelFamily, f_max: f64) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(invalid("beta", "smoothness must be finite and exceed 1"));
        }
        if !(f_max > 0.0) {
            return Err(invalid("f_max", "must be positive"));
        }
        if kernel.stage() != Stage::Estimation {
            return Err(Error::WrongStage {
                expected: Stage::Estimation,
                found: kernel.stage(),
            });
        }
        Ok(Self {
            beta,
            selected,
            bandwidth: None,
            kernel,
            f_max,
        })
    }

    pub fn degree(&self) -> u32 {
        degree_for(self.beta)
    }

    pub fn bandwidth_for(&self, n: usize) -> f64 {
        self.bandwidth
            .unwrap_or_else(|| default_bandwidth(n, self.beta, self.selected.len()))
    }
}

/// Why a fit ended up non-unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitNote {
    /// No observation has positive weight under the estimation kernel.
    NoActivePoints,
    /// Fewer weighted observations than basis monomials.
    TooFewPoints { active: usize, basis: usize },
    /// Normal matrix condition number above [`MAX_CONDITION`].
    IllConditioned { condition: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Multi-indices over the selected coordinates, graded lexicographic.
    pub exponents: Vec<Vec<u32>>,
    /// Coefficients in the unscaled variables `p(X_i − x)`.
    pub coefficients: Vec<f64>,
    pub unique: bool,
    pub value_at_zero: f64,
    pub bandwidth: f64,
    pub active_points: usize,
    pub condition_number: f64,
    pub note: Option<FitNote>,
}

impl PolyFit {
    fn degenerate(exponents: Vec<Vec<u32>>, bandwidth: f64, active: usize, condition: f64, note: FitNote) -> Self {
        let m = exponents.len();
        Self {
            exponents,
            coefficients: alloc::vec![0.0; m],
            unique: false,
            value_at_zero: 0.0,
            bandwidth,
            active_points: active,
            condition_number: condition,
            note: Some(note),
        }
    }
}

/// Weighted least squares over the monomials of degree `≤ ⌊β⌋` in the
/// selected coordinates of `X_i − x`, with weights `K*(p(X_i − x)/h*)`.
///
/// Columns are built in the rescaled variables `p(X_i − x)/h*` (the fitted
/// value at zero does not depend on this scaling) and solved by Householder
/// QR. With no selected coordinate the fit is the kernel-weighted mean.
pub fn fit_local_polynomial(data: &Dataset, x: &[f64], cfg: &LpeConfig) -> Result<PolyFit> {
    let d = data.d();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            what: "query point",
            expected: d,
            found: x.len(),
        });
    }
    validate_selection(&cfg.selected, d)?;
    let dsel = cfg.selected.len();
    let kernel: KernelSpec = cfg.kernel.build(dsel)?;
    let h = cfg.bandwidth_for(data.n());
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid("bandwidth", "must be positive and finite"));
    }
    let degree = cfg.degree();
    let exponents = multi_indices(dsel, degree);
    let m = exponents.len();
    debug_assert_eq!(m, basis_size(dsel, degree));

    let mut rows: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut v = alloc::vec![0.0; dsel];
    for i in 0..data.n() {
        let p = data.point(i);
        for (vj, &j) in v.iter_mut().zip(&cfg.selected) {
            *vj = (p[j - 1] - x[j - 1]) / h;
        }
        let w = kernel.evaluate(&v);
        if w < 0.0 {
            return Err(Error::NegativeKernel { row: i, value: w });
        }
        if w == 0.0 {
            continue;
        }
        let sw = libm::sqrt(w);
        rows.extend(exponents.iter().map(|s| sw * evaluate(s, &v)));
        rhs.push(sw * data.responses()[i]);
    }
    let active = rhs.len();
    if active == 0 {
        return Ok(PolyFit::degenerate(exponents, h, 0, f64::INFINITY, FitNote::NoActivePoints));
    }
    if active < m {
        return Ok(PolyFit::degenerate(
            exponents,
            h,
            active,
            f64::INFINITY,
            FitNote::TooFewPoints { active, basis: m },
        ));
    }
    let b = Matrix::from_row_slice(active, m, &rows);
    let ev = symmetric_eigenvalues(&b.gram());
    let (lo, hi) = (ev[0], ev[m - 1]);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Ok(PolyFit::degenerate(exponents, h, active, condition, FitNote::IllConditioned { condition }));
    }
    let Some(scaled) = least_squares_qr(&b, &rhs) else {
        return Ok(PolyFit::degenerate(exponents, h, active, f64::INFINITY, FitNote::IllConditioned { condition }));
    };
    let coefficients: Vec<f64> = exponents
        .iter()
        .zip(&scaled)
        .map(|(s, c)| c / libm::pow(h, total_degree(s) as f64))
        .collect();
    Ok(PolyFit {
        value_at_zero: coefficients[0],
        exponents,
        coefficients,
        unique: true,
        bandwidth: h,
        active_points: active,
        condition_number: condition,
        note: None,
    })
}

fn validate_selection(selected: &[usize], d: usize) -> Result<()> {
    for (k, &j) in selected.iter().enumerate() {
        if j == 0 || j > d {
            return Err(invalid("selected", alloc::format!("coordinate {j} outside 1..={d}")));
        }
        if selected[..k].contains(&j) {
            return Err(invalid("selected", alloc::format!("coordinate {j} listed twice")));
        }
    }
    Ok(())
}

/// `clamp(value_at_zero, −f_max, f_max)`; a non-unique fit gives 0.
pub fn estimate_f(fit: &PolyFit, f_max: f64) -> f64 {
    let v = if fit.unique { fit.value_at_zero } else { 0.0 };
    v.clamp(-f_max, f_max)
}

#[derive(Debug, Clone)]
pub struct TwoStageEstimate {
    pub fhat: f64,
    pub selected: Vec<usize>,
    pub fit: PolyFit,
    pub selection: SelectionOutcome,
    pub bandwidth_star: f64,
}

/// Options of the estimation stage; the selected set is filled in from
/// the selection stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationOptions {
    pub beta: f64,
    pub kernel: KernelFamily,
    pub f_max: f64,
    pub bandwidth: Option<f64>,
}

/// Selection (normally the translated procedure) followed by the local
/// polynomial fit on the selected coordinates.
pub fn two_stage_estimate(
    data: &Dataset,
    x: &[f64],
    sel_cfg: &SelectionConfig,
    selection_kernel: &KernelSpec,
    est: &EstimationOptions,
) -> Result<TwoStageEstimate> {
    let selection = select(data, x, sel_cfg, selection_kernel)?;
    let mut cfg = LpeConfig::new(est.beta, selection.selected.clone(), est.kernel, est.f_max)?;
    cfg.bandwidth = est.bandwidth;
    let fit = fit_local_polynomial(data, x, &cfg)?;
    Ok(TwoStageEstimate {
        fhat: estimate_f(&fit, est.f_max),
        selected: selection.selected.clone(),
        bandwidth_star: fit.bandwidth,
        fit,
        selection,
    })
}
