//! Kernels for the two stages of the procedure.
//!
//! Selection kernels are even, vanish outside the unit sup-norm ball and
//! carry a bound `M_K` on a fixed list of sup/integral quantities.
//! Estimation kernels are unit-mass, lower-capped near the origin and have
//! finite polynomially weighted moments. Both families come with numerical
//! validators built on deterministic tensor Gauss–Legendre quadrature.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::quadrature::{adaptive_tensor_integral, radial_integral, unit_ball_volume};

/// Largest dimension for which quadrature-based validation runs.
pub const MAX_VALIDATION_DIM: usize = 6;

const QUADRATURE_BUDGET: usize = 4_000_000;

/// Which stage of the two-stage procedure a kernel serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Selection,
    Estimation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Selection => "selection",
            Stage::Estimation => "estimation",
        })
    }
}

/// Named kernel families that can be built in any dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `2^{-d}` on the closed unit sup-norm ball (selection).
    Uniform,
    /// Standard Gaussian density cut off at Euclidean radius 10 (estimation).
    GaussianTrunc,
    /// Constant `1/vol(B₂)` on the Euclidean unit ball (estimation).
    BallUniform,
}

impl KernelFamily {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(Self::Uniform),
            "gaussian_trunc" => Some(Self::GaussianTrunc),
            "ball_uniform" => Some(Self::BallUniform),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::GaussianTrunc => "gaussian_trunc",
            Self::BallUniform => "ball_uniform",
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            Self::Uniform => Stage::Selection,
            Self::GaussianTrunc | Self::BallUniform => Stage::Estimation,
        }
    }

    pub fn build(self, d: usize) -> Result<KernelSpec> {
        match self {
            Self::Uniform => uniform_kernel(d),
            Self::GaussianTrunc => Ok(gaussian_trunc_kernel(d)),
            Self::BallUniform => Ok(ball_uniform_kernel(d)),
        }
    }
}

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    UniformBox,
    TruncatedGaussian { radius: f64 },
    UniformBall,
    Custom {
        eval: PointFn,
        radial: Option<RadialFn>,
    },
}

/// A multivariate kernel together with its stage and validated constants.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    dim: usize,
    stage: Stage,
    support_radius: f64,
    moment_bound: Option<f64>,
    shape: Shape,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("stage", &self.stage)
            .field("support_radius", &self.support_radius)
            .field("moment_bound", &self.moment_bound)
            .finish()
    }
}

/// `K(u) = 2^{-d}·1{‖u‖∞ ≤ 1}`.
pub fn uniform_kernel(d: usize) -> Result<KernelSpec> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    Ok(KernelSpec {
        name: "uniform".to_string(),
        dim: d,
        stage: Stage::Selection,
        support_radius: 1.0,
        moment_bound: Some(uniform_moment_bound(d)),
        shape: Shape::UniformBox,
    })
}

/// Standard normal density in `R^d`, set to zero beyond Euclidean radius 10.
pub fn gaussian_trunc_kernel(d: usize) -> KernelSpec {
    KernelSpec {
        name: "gaussian_trunc".to_string(),
        dim: d,
        stage: Stage::Estimation,
        support_radius: 10.0,
        moment_bound: None,
        shape: Shape::TruncatedGaussian { radius: 10.0 },
    }
}

/// Normalized indicator of the Euclidean unit ball in `R^d`.
pub fn ball_uniform_kernel(d: usize) -> KernelSpec {
    KernelSpec {
        name: "ball_uniform".to_string(),
        dim: d,
        stage: Stage::Estimation,
        support_radius: 1.0,
        moment_bound: None,
        shape: Shape::UniformBall,
    }
}

/// The seven quantities bounded by `M_K`, in closed form for the uniform
/// kernel: sup|K|, sup K², sup|K|‖u‖₁², sup|K|‖u‖₂², ∫K²(1+‖y‖₂²),
/// ∫K²‖u‖₁⁴ and max_{i,j} ∫K²(U_iU_j)².
pub fn uniform_moment_quantities(d: usize) -> [f64; 7] {
    let df = d as f64;
    let base = libm::pow(0.5, df);
    // E[S⁴] for S a sum of d independent U(0,1), from its cumulants
    let s4 = df * df * df * df / 16.0 + df * df * df / 8.0 + df * df / 48.0 - df / 120.0;
    [
        base,
        base * base,
        base * df * df,
        base * df,
        base * (1.0 + df / 3.0),
        base * s4,
        base,
    ]
}

/// `max(1, uniform_moment_quantities(d))`.
pub fn uniform_moment_bound(d: usize) -> f64 {
    uniform_moment_quantities(d)
        .iter()
        .fold(1.0f64, |m, &q| m.max(q))
}

impl KernelSpec {
    /// A user-supplied selection kernel. `moment_bound` is the claimed `M_K`.
    pub fn custom_selection<F>(name: &str, dim: usize, moment_bound: f64, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(moment_bound >= 1.0) {
            return Err(invalid("moment_bound", "M_K must be at least 1"));
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            stage: Stage::Selection,
            support_radius: 1.0,
            moment_bound: Some(moment_bound),
            shape: Shape::Custom {
                eval: Arc::new(eval),
                radial: None,
            },
        })
    }

    /// A user-supplied rotation-invariant estimation kernel given by its
    /// radial profile `r ↦ K(u)` for `‖u‖₂ = r`.
    pub fn custom_radial_estimation<G>(name: &str, dim: usize, support_radius: f64, profile: G) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let profile: RadialFn = Arc::new(profile);
        let p2 = profile.clone();
        Self {
            name: name.to_string(),
            dim,
            stage: Stage::Estimation,
            support_radius,
            moment_bound: None,
            shape: Shape::Custom {
                eval: Arc::new(move |u: &[f64]| p2(euclidean(u))),
                radial: Some(profile),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Sup-norm radius (selection) or Euclidean radius (estimation) outside
    /// which the kernel is zero; may be infinite for estimation kernels.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// The stored bound `M_K` (selection kernels only).
    pub fn moment_bound(&self) -> Option<f64> {
        self.moment_bound
    }

    pub fn evaluate(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        match &self.shape {
            Shape::UniformBox => {
                if u.iter().all(|t| t.abs() <= 1.0) {
                    libm::pow(0.5, self.dim as f64)
                } else {
                    0.0
                }
            }
            Shape::TruncatedGaussian { .. } | Shape::UniformBall => {
                self.radial_value(euclidean(u)).unwrap_or(0.0)
            }
            Shape::Custom { eval, .. } => eval(u),
        }
    }

    /// Value of a rotation-invariant kernel at Euclidean radius `r`.
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        match &self.shape {
            Shape::TruncatedGaussian { radius } => Some(if r <= *radius {
                libm::exp(-0.5 * r * r) / libm::pow(2.0 * core::f64::consts::PI, 0.5 * self.dim as f64)
            } else {
                0.0
            }),
            Shape::UniformBall => Some(if r <= 1.0 {
                1.0 / unit_ball_volume(self.dim)
            } else {
                0.0
            }),
            Shape::Custom {
                radial: Some(g), ..
            } => Some(g(r)),
            _ => None,
        }
    }

    fn is_radial(&self) -> bool {
        self.radial_value(0.0).is_some()
    }

    fn require_stage(&self, stage: Stage) -> Result<()> {
        if self.stage == stage {
            Ok(())
        } else {
            Err(Error::WrongStage {
                expected: stage,
                found: self.stage,
            })
        }
    }
}

fn euclidean(u: &[f64]) -> f64 {
    libm::sqrt(u.iter().map(|t| t * t).sum())
}

/// Matrix `(∫ K(y) U_i(y) U_j(y) dy)_{i,j=0..d}` with `U₀ = 1`, `U_i = y_i`.
///
/// Computed by composite tensor Gauss–Legendre on `[-1,1]^d` with panels
/// split at the origin; the order is doubled until successive results agree
/// within `tol`.
pub fn moment_matrix(k: &KernelSpec, tol: f64) -> Result<Matrix> {
    k.require_stage(Stage::Selection)?;
    let d = k.dim();
    if d > MAX_VALIDATION_DIM {
        return Err(Error::ValidationUnavailable {
            dim: d,
            max_dim: MAX_VALIDATION_DIM,
        });
    }
    let p = d + 1;
    let flat = adaptive_tensor_integral(d, &[-1.0, 0.0, 1.0], p * p, tol, QUADRATURE_BUDGET, |y, out| {
        let kv = k.evaluate(y);
        if kv == 0.0 {
            return;
        }
        for i in 0..p {
            let ui = if i == 0 { 1.0 } else { y[i - 1] };
            for j in i..p {
                let uj = if j == 0 { 1.0 } else { y[j - 1] };
                out[i * p + j] = kv * ui * uj;
            }
        }
    })?;
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            m[(i, j)] = flat[i * p + j];
            m[(j, i)] = flat[i * p + j];
        }
    }
    Ok(m)
}

/// Numerical check of the selection-kernel requirements.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionKernelReport {
    /// The seven quantities `M_K` must dominate (see [`uniform_moment_quantities`]).
    pub quantities: [f64; 7],
    pub moment_bound: f64,
    pub bound_holds: bool,
    /// Largest absolute off-diagonal entry of the moment matrix.
    pub max_off_diagonal: f64,
    pub diagonal: Vec<f64>,
    pub symmetric: bool,
    pub support_ok: bool,
    pub passes: bool,
}

/// Validates evenness, support, diagonal moments and the `M_K` bound.
///
/// Sup quantities are taken over a uniform lattice of `[-1,1]^d` that
/// contains the corners; integrals use the same quadrature as
/// [`moment_matrix`].
pub fn validate_selection_kernel(k: &KernelSpec, tol: f64) -> Result<SelectionKernelReport> {
    k.require_stage(Stage::Selection)?;
    let d = k.dim();
    let moments = moment_matrix(k, tol)?;
    let p = d + 1;
    let mut max_off = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                max_off = max_off.max(moments[(i, j)].abs());
            }
        }
    }
    let diagonal: Vec<f64> = (0..p).map(|i| moments[(i, i)]).collect();

    // sup quantities on a lattice including ±1 and points just outside
    let per_axis = match d {
        1 | 2 => 41,
        3 => 21,
        4 => 11,
        _ => 7,
    };
    let lattice: Vec<f64> = (0..per_axis)
        .map(|i| -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64)
        .collect();
    let weights = vec![1.0; lattice.len()];
    let mut sups = [0.0f64; 4];
    let mut symmetric = true;
    let mut neg = vec![0.0; d];
    crate::quadrature::for_each_tensor_node(d, &lattice, &weights, |u, _| {
        let kv = k.evaluate(u);
        for (n, x) in neg.iter_mut().zip(u) {
            *n = -x;
        }
        if k.evaluate(&neg) != kv {
            symmetric = false;
        }
        let l1: f64 = u.iter().map(|t| t.abs()).sum();
        let l2sq: f64 = u.iter().map(|t| t * t).sum();
        sups[0] = sups[0].max(kv.abs());
        sups[1] = sups[1].max(kv * kv);
        sups[2] = sups[2].max(kv.abs() * l1 * l1);
        sups[3] = sups[3].max(kv.abs() * l2sq);
    });
    let outside = [1.0 + 1e-9, 1.5, 3.0];
    let mut support_ok = true;
    for axis in 0..d {
        for &r in &outside {
            for sign in [-1.0, 1.0] {
                let mut u = vec![0.0; d];
                u[axis] = sign * r;
                if k.evaluate(&u) != 0.0 {
                    support_ok = false;
                }
            }
        }
    }

    let pairs = p * (p + 1) / 2;
    let ints = adaptive_tensor_integral(d, &[-1.0, 0.0, 1.0], 2 + pairs, tol, QUADRATURE_BUDGET, |y, out| {
        let kv = k.evaluate(y);
        if kv == 0.0 {
            return;
        }
        let k2 = kv * kv;
        let l1: f64 = y.iter().map(|t| t.abs()).sum();
        let l2sq: f64 = y.iter().map(|t| t * t).sum();
        out[0] = k2 * (1.0 + l2sq);
        out[1] = k2 * l1 * l1 * l1 * l1;
        let mut idx = 2;
        for i in 0..p {
            let ui = if i == 0 { 1.0 } else { y[i - 1] };
            for j in i..p {
                let uj = if j == 0 { 1.0 } else { y[j - 1] };
                let prod = ui * uj;
                out[idx] = k2 * prod * prod;
                idx += 1;
            }
        }
    })?;
    let max_pair = ints[2..].iter().fold(0.0f64, |m, v| m.max(*v));
    let quantities = [sups[0], sups[1], sups[2], sups[3], ints[0], ints[1], max_pair];
    let moment_bound = k.moment_bound().unwrap_or(f64::NAN);
    let bound_holds = moment_bound >= 1.0 && quantities.iter().all(|q| *q <= moment_bound + tol);
    let diagonal_positive = diagonal.iter().all(|v| *v > 0.0);
    let passes = bound_holds && symmetric && support_ok && max_off <= tol && diagonal_positive;
    Ok(SelectionKernelReport {
        quantities,
        moment_bound,
        bound_holds,
        max_off_diagonal: max_off,
        diagonal,
        symmetric,
        support_ok,
        passes,
    })
}

/// Outcome of the estimation-kernel check.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationKernelReport {
    /// Largest `c` with `K*(u) ≥ c` on `‖u‖₂ ≤ c` (0 when none exists).
    pub cap_constant: f64,
    pub mass: f64,
    /// `∫ (1 + ‖u‖₂^{4β}) K*(u)² du`, infinite when the truncated integrals diverge.
    pub weighted_square_integral: f64,
    /// `sup (1 + ‖u‖₂^{2β}) K*(u)` over the sampled radii.
    pub weighted_sup: f64,
    /// Change of the weighted integral under the last radius doubling; zero
    /// for compactly supported kernels.
    pub tail_bound: f64,
    pub failures: Vec<&'static str>,
    pub passes: bool,
}

/// Numerical check of the estimation-kernel requirements for smoothness `beta`.
///
/// Rotation-invariant kernels reduce to radial integrals. Kernels with
/// infinite support are integrated on growing balls; if the weighted
/// integrals keep growing the report fails instead of erroring.
pub fn validate_estimation_kernel(k: &KernelSpec, beta: f64, tol: f64) -> Result<EstimationKernelReport> {
    k.require_stage(Stage::Estimation)?;
    if !(beta > 1.0) {
        return Err(invalid("beta", "smoothness must exceed 1"));
    }
    if !k.is_radial() {
        return validate_estimation_box(k, beta, tol);
    }
    let d = k.dim();
    let g = |r: f64| k.radial_value(r).unwrap_or(0.0);
    let integrate = |radius: f64, panels: usize| {
        let mass = radial_integral(d, radius, panels, 16, g);
        let wsq = radial_integral(d, radius, panels, 16, |r| {
            let v = g(r);
            (1.0 + libm::pow(r, 4.0 * beta)) * v * v
        });
        (mass, wsq)
    };

    let mut failures = Vec::new();
    let (mass, wsq, tail) = if k.support_radius().is_finite() {
        let r = k.support_radius();
        let (m1, w1) = integrate(r, 64);
        let (m2, w2) = integrate(r, 128);
        let change = (m2 - m1).abs().max((w2 - w1).abs() / w2.abs().max(1.0));
        if change > tol {
            failures.push("quadrature did not settle on the support");
        }
        (m2, w2, 0.0)
    } else {
        let mut radius = 10.0;
        let (mut m_prev, mut w_prev) = integrate(radius, 256);
        let mut settled = false;
        let mut change = f64::INFINITY;
        while radius < 1e4 {
            radius *= 2.0;
            let (m, w) = integrate(radius, 256);
            change = (m - m_prev).abs().max((w - w_prev).abs() / w.abs().max(1.0));
            m_prev = m;
            w_prev = w;
            if change <= tol {
                settled = true;
                break;
            }
        }
        if !settled {
            failures.push("weighted integrals do not converge");
            (m_prev, f64::INFINITY, change)
        } else {
            (m_prev, w_prev, change)
        }
    };

    let sup_radius = if k.support_radius().is_finite() {
        k.support_radius()
    } else {
        1e4
    };
    let samples = 20_000;
    let mut weighted_sup = 0.0f64;
    for i in 0..=samples {
        let r = sup_radius * i as f64 / samples as f64;
        weighted_sup = weighted_sup.max((1.0 + libm::pow(r, 2.0 * beta)) * g(r).abs());
    }
    if !weighted_sup.is_finite() {
        failures.push("weighted sup is infinite");
    }

    let cap_constant = radial_cap_constant(&g, if d == 0 { 0.0 } else { 1.0 });
    if !(cap_constant > 0.0) {
        failures.push("no positive lower cap near the origin");
    }
    if (mass - 1.0).abs() > tol {
        failures.push("kernel does not integrate to one");
    }
    if !wsq.is_finite() && !failures.contains(&"weighted integrals do not converge") {
        failures.push("weighted square integral is infinite");
    }
    Ok(EstimationKernelReport {
        cap_constant,
        mass,
        weighted_square_integral: wsq,
        weighted_sup,
        tail_bound: tail,
        passes: failures.is_empty(),
        failures,
    })
}

/// Largest `c` such that `min_{r ≤ c} g(r) ≥ c`, found by bisection on a
/// sampled minimum. `scale` is 0 in dimension zero where only `r = 0` exists.
fn radial_cap_constant<G: Fn(f64) -> f64>(g: &G, scale: f64) -> f64 {
    let g0 = g(0.0);
    if !(g0 > 0.0) {
        return 0.0;
    }
    if scale == 0.0 {
        return g0;
    }
    let feasible = |c: f64| {
        let n = 400;
        (0..=n).all(|i| g(c * i as f64 / n as f64) >= c)
    };
    if feasible(g0) {
        return g0;
    }
    let (mut lo, mut hi) = (0.0, g0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn validate_estimation_box(k: &KernelSpec, beta: f64, tol: f64) -> Result<EstimationKernelReport> {
    let d = k.dim();
    if d > MAX_VALIDATION_DIM {
        return Err(Error::ValidationUnavailable {
            dim: d,
            max_dim: MAX_VALIDATION_DIM,
        });
    }
    let r = k.support_radius();
    if !r.is_finite() {
        return Err(invalid(
            "kernel",
            "non-radial estimation kernels need finite support for validation",
        ));
    }
    let breaks = [-r, 0.0, r];
    let ints = adaptive_tensor_integral(d, &breaks, 2, tol, QUADRATURE_BUDGET, |u, out| {
        let v = k.evaluate(u);
        let n2: f64 = u.iter().map(|t| t * t).sum();
        out[0] = v;
        out[1] = (1.0 + libm::pow(n2, 2.0 * beta)) * v * v;
    })?;
    let mut failures = Vec::new();
    let per_axis = 21;
    let lattice: Vec<f64> = (0..per_axis)
        .map(|i| -r + 2.0 * r * i as f64 / (per_axis - 1) as f64)
        .collect();
    let ones = vec![1.0; per_axis];
    let mut weighted_sup = 0.0f64;
    crate::quadrature::for_each_tensor_node(d, &lattice, &ones, |u, _| {
        let n2: f64 = u.iter().map(|t| t * t).sum();
        weighted_sup = weighted_sup.max((1.0 + libm::pow(n2, beta)) * k.evaluate(u).abs());
    });
    // cap constant along the coordinate axes and diagonals
    let probe = |rad: f64| -> f64 {
        let mut m = k.evaluate(&vec![0.0; d]);
        for axis in 0..d {
            for s in [-1.0, 1.0] {
                let mut u = vec![0.0; d];
                u[axis] = s * rad;
                m = m.min(k.evaluate(&u));
            }
        }
        let diag = vec![rad / libm::sqrt(d.max(1) as f64); d];
        m.min(k.evaluate(&diag))
    };
    let cap_constant = radial_cap_constant(&probe, if d == 0 { 0.0 } else { 1.0 });
    if !(cap_constant > 0.0) {
        failures.push("no positive lower cap near the origin");
    }
    if (ints[0] - 1.0).abs() > tol {
        failures.push("kernel does not integrate to one");
    }
    Ok(EstimationKernelReport {
        cap_constant,
        mass: ints[0],
        weighted_square_integral: ints[1],
        weighted_sup,
        tail_bound: 0.0,
        passes: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    #[test]
    fn uniform_kernel_values() {
        assert_eq!(uniform_kernel(1).unwrap().evaluate(&[0.0]), 0.5);
        assert_eq!(uniform_kernel(3).unwrap().evaluate(&[2.0, 0.0, 0.0]), 0.0);
        assert_eq!(uniform_kernel(2).unwrap().evaluate(&[0.5, -0.5]), 0.25);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert_eq!(uniform_kernel(0).unwrap_err(), Error::InvalidDimension(0));
        assert!(KernelSpec::custom_selection("k", 0, 1.0, |_| 0.0).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for fam in [KernelFamily::Uniform, KernelFamily::GaussianTrunc, KernelFamily::BallUniform] {
            assert_eq!(KernelFamily::from_name(fam.name()), Some(fam));
            assert_eq!(fam.build(2).unwrap().stage(), fam.stage());
        }
        assert_eq!(KernelFamily::from_name("epanechnikov"), None);
    }

    #[test]
    fn uniform_moment_matrix_d2() {
        let m = moment_matrix(&uniform_kernel(2).unwrap(), 1e-10).unwrap();
        let expected = [1.0, 1.0 / 3.0, 1.0 / 3.0];
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert_relative_eq!(m[(i, i)], expected[i], epsilon = 1e-12);
                } else {
                    assert!(m[(i, j)].abs() < 1e-14);
                }
            }
        }
        let m1 = moment_matrix(&uniform_kernel(1).unwrap(), 1e-10).unwrap();
        assert_relative_eq!(m1[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn moment_matrix_needs_selection_kernel() {
        let err = moment_matrix(&gaussian_trunc_kernel(2), 1e-8).unwrap_err();
        assert!(matches!(err, Error::WrongStage { .. }));
    }

    #[test]
    fn moment_matrix_unavailable_above_six() {
        let err = moment_matrix(&uniform_kernel(7).unwrap(), 1e-8).unwrap_err();
        assert_eq!(err, Error::ValidationUnavailable { dim: 7, max_dim: 6 });
    }

    #[test]
    fn uniform_bound_matches_numerical_quantities() {
        for d in 1..=5 {
            let k = uniform_kernel(d).unwrap();
            let report = validate_selection_kernel(&k, 1e-9).unwrap();
            let closed = uniform_moment_quantities(d);
            for (a, b) in report.quantities.iter().zip(closed) {
                assert_relative_eq!(*a, b, epsilon = 1e-10);
            }
            assert!(report.passes, "d={d}: {report:?}");
        }
    }

    #[test]
    fn uniform_bound_is_one_only_where_it_can_be() {
        // d = 1, 2 and d ≥ 9 keep every quantity at or below 1
        assert_eq!(uniform_moment_bound(1), 1.0);
        assert_eq!(uniform_moment_bound(2), 1.0);
        assert_eq!(uniform_moment_bound(10), 1.0);
        // d = 3: sup |K|‖u‖₁² = 9/8
        assert_relative_eq!(uniform_moment_bound(3), 9.0 / 8.0, epsilon = 1e-15);
        // the worst case over all d stays below 2
        let worst = (1..200).map(uniform_moment_bound).fold(0.0, f64::max);
        assert!(worst < 2.0);
    }

    #[test]
    fn custom_selection_kernel_with_odd_part_fails() {
        let k = KernelSpec::custom_selection("skew", 1, 1.0, |u| {
            if u[0].abs() <= 1.0 {
                0.5 + 0.25 * u[0]
            } else {
                0.0
            }
        })
        .unwrap();
        let r = validate_selection_kernel(&k, 1e-9).unwrap();
        assert!(!r.symmetric);
        assert!(r.max_off_diagonal > 0.1);
        assert!(!r.passes);
    }

    #[test]
    fn gaussian_passes_against_closed_form_moments() {
        // d = 1, β = 2: ∫(1+u⁸)φ(u)² du = (1 + 105/16) / (2√π)
        let r = validate_estimation_kernel(&gaussian_trunc_kernel(1), 2.0, 1e-9).unwrap();
        assert!(r.passes, "{r:?}");
        assert_relative_eq!(r.mass, 1.0, epsilon = 1e-12);
        let expected = (1.0 + 105.0 / 16.0) / (2.0 * libm::sqrt(PI));
        assert_relative_eq!(r.weighted_square_integral, expected, epsilon = 1e-10);
        // cap: φ(c) = c
        let c = r.cap_constant;
        assert_relative_eq!(libm::exp(-0.5 * c * c) / libm::sqrt(2.0 * PI), c, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_higher_dimension() {
        // d = 2, β = 2: ∫(1+‖u‖⁸)φ² = (1/(4π)) (1 + Γ(5)·... ) via polar coordinates:
        // ∫ φ² = 1/(4π); ∫‖u‖⁸ φ² = (1/(4π²)) · 2π ∫ r⁹ e^{-r²} dr = (1/(2π)) · Γ(5)/2
        let r = validate_estimation_kernel(&gaussian_trunc_kernel(2), 2.0, 1e-9).unwrap();
        let expected = 1.0 / (4.0 * PI) + 24.0 / (4.0 * PI);
        assert_relative_eq!(r.weighted_square_integral, expected, epsilon = 1e-9);
        assert!(r.passes);
    }

    #[test]
    fn ball_uniform_cap_is_min_of_constant_and_one() {
        for d in 1..=3 {
            let k = ball_uniform_kernel(d);
            let r = validate_estimation_kernel(&k, 2.0, 1e-9).unwrap();
            let constant = 1.0 / unit_ball_volume(d);
            assert!(r.passes, "{r:?}");
            assert_relative_eq!(r.cap_constant, constant.min(1.0), epsilon = 1e-12);
            assert_relative_eq!(r.mass, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_kernel_fails_mass() {
        let k = KernelSpec::custom_radial_estimation("zero", 2, 1.0, |_| 0.0);
        let r = validate_estimation_kernel(&k, 2.0, 1e-8).unwrap();
        assert!(!r.passes);
        assert!(r.failures.contains(&"kernel does not integrate to one"));
    }

    #[test]
    fn heavy_tailed_kernel_fails_instead_of_erroring() {
        // Cauchy density in 1-D: unit mass but ∫u⁸K² diverges
        let k = KernelSpec::custom_radial_estimation("cauchy", 1, f64::INFINITY, |r| {
            1.0 / (PI * (1.0 + r * r))
        });
        let r = validate_estimation_kernel(&k, 2.0, 1e-8).unwrap();
        assert!(!r.passes);
        assert!(!r.weighted_square_integral.is_finite());
    }

    #[test]
    fn estimation_validator_rejects_selection_kernel() {
        let err = validate_estimation_kernel(&uniform_kernel(1).unwrap(), 2.0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::WrongStage { .. }));
    }

    #[test]
    fn zero_dimension_estimation_kernel_is_constant_one() {
        for k in [gaussian_trunc_kernel(0), ball_uniform_kernel(0)] {
            assert_eq!(k.evaluate(&[]), 1.0);
        }
    }
}
