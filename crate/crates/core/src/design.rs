//! The localized linear-model view of the selection problem.
//!
//! Around a query point `x` with bandwidth `h`, each observation becomes a
//! row of a linear model: weight `α_i = (n h^d)^{-1/2} K((X_i − x)/h)^{1/2}`,
//! response `Z_i = α_i Y_i` and design row `A_i = α_i U((X_i − x)/h)` with
//! `U(v) = (1, v₁, …, v_d)`. The weighted penalized least-squares criterion
//! then reads `‖Z − Aθ‖² + 2λ‖θ‖₁`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelSpec, Stage};
use crate::linalg::{dot, symmetric_eigenvalues, Matrix};

/// Design points (`n × d`, row-major) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() == 0 {
            return Err(invalid("dataset", "at least one observation is required"));
        }
        if x.cols() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                what: "responses",
                expected: x.rows(),
                found: y.len(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("design points"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        Ok(Self { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("dataset", "at least one observation is required"));
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "design row",
                expected: d,
                found: rows[bad].len(),
            });
        }
        Self::new(Matrix::from_rows(rows), y)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn points(&self) -> &Matrix {
        &self.x
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Same design with responses replaced by `map(i, y_i)`.
    pub fn with_responses<F: FnMut(usize, f64) -> f64>(&self, mut map: F) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.iter().enumerate().map(|(i, &v)| map(i, v)).collect(),
        }
    }
}

/// Constants of the regularity, density, kernel and separation conditions
/// the selection guarantee is stated under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// Hölder-type constant of the first-order Taylor remainder.
    pub lipschitz: f64,
    /// Smoothness `β > 1`.
    pub beta: f64,
    /// Lower density bound on the neighbourhood.
    pub mu_min: f64,
    /// Upper density bound (at least 1).
    pub mu_max: f64,
    /// Lipschitz constant of the density around `x`.
    pub mu_lipschitz: f64,
    /// Sup-norm radius of the neighbourhood where the density bounds hold.
    pub eta: f64,
    /// Kernel bound `M_K ≥ 1`.
    pub kernel_bound: f64,
    /// Lower bound on the relevant partial derivatives at `x`.
    pub separation: f64,
    /// Known upper bound `d₀` on the number of relevant coordinates.
    pub d0: usize,
    /// Noise standard deviation.
    pub sigma: f64,
    /// Known bound on `|f(x)|`.
    pub f_max: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, bool, &str); 10] = [
            ("L", self.lipschitz > 0.0, "must be positive"),
            ("beta", self.beta > 1.0, "must exceed 1"),
            ("mu_m", self.mu_min > 0.0, "must be positive"),
            ("mu_M", self.mu_max >= self.mu_min && self.mu_max >= 1.0, "must be at least max(mu_m, 1)"),
            ("L_mu", self.mu_lipschitz >= 0.0, "must be nonnegative"),
            ("eta", self.eta > 0.0, "must be positive"),
            ("M_K", self.kernel_bound >= 1.0, "must be at least 1"),
            ("C", self.separation > 0.0, "must be positive"),
            ("sigma", self.sigma >= 0.0, "must be nonnegative"),
            ("f_max", self.f_max > 0.0, "must be positive"),
        ];
        for (name, ok, reason) in checks {
            if !ok {
                return Err(invalid(name, reason));
            }
        }
        if self.d0 == 0 {
            return Err(invalid("d0", "must be at least 1"));
        }
        Ok(())
    }

    /// `72 (μ_M/μ_m) L M_K √d₀`, the smallest separation the guarantee allows.
    pub fn required_separation(&self) -> f64 {
        72.0 * (self.mu_max / self.mu_min) * self.lipschitz * self.kernel_bound * libm::sqrt(self.d0 as f64)
    }

    /// Whether `C` meets [`required_separation`](Self::required_separation).
    pub fn separation_compliant(&self) -> bool {
        self.separation >= self.required_separation()
    }
}

/// The regression function, exposed for simulation diagnostics only.
pub type RegressionFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Ground truth of a synthetic problem.
#[derive(Clone)]
pub struct TruthSpec {
    pub f: RegressionFn,
    pub f_at_x: f64,
    /// `∂_j f(x)` for `j = 1..d` (zero-based storage).
    pub gradient_at_x: Vec<f64>,
    /// Relevant coordinates, one-based.
    pub support: Vec<usize>,
}

impl fmt::Debug for TruthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruthSpec")
            .field("f_at_x", &self.f_at_x)
            .field("gradient_at_x", &self.gradient_at_x)
            .field("support", &self.support)
            .finish()
    }
}

impl TruthSpec {
    /// Checks that the gradient vanishes off the support.
    pub fn validate(&self) -> Result<()> {
        for (j, g) in self.gradient_at_x.iter().enumerate() {
            if *g != 0.0 && !self.support.contains(&(j + 1)) {
                return Err(invalid("gradient_at_x", "nonzero derivative outside the support"));
            }
        }
        Ok(())
    }

    /// `θ* = (f(x), h∂₁f(x), …, h∂_d f(x))`.
    pub fn theta_star(&self, h: f64) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.gradient_at_x.len() + 1);
        t.push(self.f_at_x);
        t.extend(self.gradient_at_x.iter().map(|g| h * g));
        t
    }
}

/// `(Z, A, α)` for one query point, bandwidth and kernel.
#[derive(Debug, Clone)]
pub struct LocalizedDesign {
    alpha: Vec<f64>,
    z: Vec<f64>,
    a: Matrix,
    query_point: Vec<f64>,
    bandwidth: f64,
    kernel: KernelSpec,
    active_rows: Vec<usize>,
}

/// Builds the localized design. Rows whose kernel weight is zero stay in
/// place as all-zero rows so indices align with the dataset.
pub fn build_localized_design(
    data: &Dataset,
    x: &[f64],
    h: f64,
    kernel: &KernelSpec,
) -> Result<LocalizedDesign> {
    if kernel.stage() != Stage::Selection {
        return Err(Error::WrongStage {
            expected: Stage::Selection,
            found: kernel.stage(),
        });
    }
    let (n, d) = (data.n(), data.d());
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            what: "query point",
            expected: d,
            found: x.len(),
        });
    }
    if kernel.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "kernel dimension",
            expected: d,
            found: kernel.dim(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query point"));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid("h", "bandwidth must be positive and finite"));
    }

    // 1/(n h^d), in log space when h^d would lose precision
    let hd = libm::pow(h, d as f64);
    let log_scale = -(libm::log(n as f64) + d as f64 * libm::log(h));
    let direct = hd.is_normal() && hd > 1e-280 && hd < 1e280;
    let inv_nhd = 1.0 / (n as f64 * hd);

    let p = d + 1;
    let mut a = Matrix::zeros(n, p);
    let mut z = vec![0.0; n];
    let mut alpha = vec![0.0; n];
    let mut active_rows = Vec::new();
    let mut v = vec![0.0; d];
    for i in 0..n {
        for ((vj, xij), xj) in v.iter_mut().zip(data.point(i)).zip(x) {
            *vj = (xij - xj) / h;
        }
        let kv = kernel.evaluate(&v);
        if kv < 0.0 {
            return Err(Error::NegativeKernel { row: i, value: kv });
        }
        if kv == 0.0 {
            continue;
        }
        let ai = if direct {
            libm::sqrt(kv * inv_nhd)
        } else {
            libm::exp(0.5 * (libm::log(kv) + log_scale))
        };
        if !ai.is_finite() {
            return Err(Error::Overflow("kernel weights"));
        }
        alpha[i] = ai;
        z[i] = ai * data.responses()[i];
        let row = a.row_mut(i);
        row[0] = ai;
        for (r, vj) in row[1..].iter_mut().zip(&v) {
            *r = ai * vj;
        }
        active_rows.push(i);
    }
    Ok(LocalizedDesign {
        alpha,
        z,
        a,
        query_point: x.to_vec(),
        bandwidth: h,
        kernel: kernel.clone(),
        active_rows,
    })
}

impl LocalizedDesign {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn query_point(&self) -> &[f64] {
        &self.query_point
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn active_rows(&self) -> &[usize] {
        &self.active_rows
    }

    /// True when no observation falls in the kernel window; such a design
    /// is rejected by every consumer.
    pub fn is_empty(&self) -> bool {
        self.active_rows.is_empty()
    }

    /// Columns `p = d + 1`.
    pub fn p(&self) -> usize {
        self.a.cols()
    }

    /// Copy with the responses shifted by `shift` (so `Z_i` becomes
    /// `α_i (Y_i + shift)`), leaving `A` untouched.
    pub fn translated(&self, shift: f64) -> Self {
        let mut out = self.clone();
        if shift != 0.0 {
            for (zi, ai) in out.z.iter_mut().zip(&self.alpha) {
                *zi += ai * shift;
            }
        }
        out
    }
}

/// `Ψ = AᵗA`, exactly symmetric.
pub fn psi_matrix(ld: &LocalizedDesign) -> Result<Matrix> {
    let g = ld.a().gram();
    if !g.is_finite() {
        return Err(Error::Overflow("Psi matrix"));
    }
    Ok(g)
}

/// Extreme singular values of `A` and whether they lie in the window
/// `[(1/2)√(μ_m/2), 2√(3μ_M/2)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Omega01Report {
    pub min_singular: f64,
    pub max_singular: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn omega01_indicator(ld: &LocalizedDesign, constants: &ProblemConstants) -> Omega01Report {
    let ev = symmetric_eigenvalues(&ld.a().gram());
    let min_singular = libm::sqrt(ev.first().copied().unwrap_or(0.0).max(0.0));
    let max_singular = libm::sqrt(ev.last().copied().unwrap_or(0.0).max(0.0));
    let lower = 0.5 * libm::sqrt(constants.mu_min / 2.0);
    let upper = 2.0 * libm::sqrt(3.0 * constants.mu_max / 2.0);
    Omega01Report {
        min_singular,
        max_singular,
        lower,
        upper,
        holds: min_singular >= lower && max_singular <= upper,
    }
}

/// `Δ_i = α_i f(X_i) − ⟨A_i, θ*⟩`, the localized Taylor remainder.
pub fn bias_vector(ld: &LocalizedDesign, data: &Dataset, truth: &TruthSpec) -> Result<Vec<f64>> {
    let d = ld.p() - 1;
    if truth.gradient_at_x.len() != d {
        return Err(Error::DimensionMismatch {
            what: "truth gradient",
            expected: d,
            found: truth.gradient_at_x.len(),
        });
    }
    if data.n() != ld.alpha().len() {
        return Err(Error::DimensionMismatch {
            what: "dataset rows",
            expected: ld.alpha().len(),
            found: data.n(),
        });
    }
    let theta = truth.theta_star(ld.bandwidth());
    let mut delta = vec![0.0; data.n()];
    for &i in ld.active_rows() {
        let fi = (truth.f)(data.point(i));
        delta[i] = ld.alpha()[i] * fi - dot(ld.a().row(i), &theta);
    }
    Ok(delta)
}
