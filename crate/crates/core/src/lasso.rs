//! Minimization of `φ(θ) = ‖Z − Aθ‖² + 2λ‖θ‖₁` by cyclic coordinate
//! descent, with an independent optimality certificate and a brute-force
//! sign-pattern oracle for small problems.
//!
//! A vector minimizes `φ` exactly when, for every column `j`,
//! `A_jᵗ(Z − Aθ) = λ·sign(θ_j)` if `θ_j ≠ 0` and `|A_jᵗ(Z − Aθ)| ≤ λ`
//! otherwise. The solver stops on that condition rather than on objective
//! decrease. Every coordinate, including the constant column, is penalized.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, solve as solve_linear, Matrix};

/// Largest `p` accepted by [`brute_force_oracle`].
pub const ORACLE_MAX_COORDINATES: usize = 8;

/// `(Z, A, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    z: Vec<f64>,
    a: Matrix,
    lambda: f64,
}

impl LassoProblem {
    pub fn new(z: Vec<f64>, a: Matrix, lambda: f64) -> Result<Self> {
        if a.cols() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if z.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                what: "response vector",
                expected: a.rows(),
                found: z.len(),
            });
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("design matrix"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid("lambda", "must be finite and nonnegative"));
        }
        Ok(Self { z, a, lambda })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> usize {
        self.a.cols()
    }

    /// `φ(θ)` from scratch.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let fit = self.a.mul_vec(theta);
        let rss: f64 = self.z.iter().zip(&fit).map(|(z, f)| (z - f) * (z - f)).sum();
        rss + 2.0 * self.lambda * theta.iter().map(|t| t.abs()).sum::<f64>()
    }

    /// `‖AᵗZ‖∞`; for `λ` at or above this value the zero vector is optimal.
    pub fn lambda_max(&self) -> f64 {
        self.a
            .t_mul_vec(&self.z)
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn fitted(&self, theta: &[f64]) -> Vec<f64> {
        self.a.mul_vec(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Maximum number of full sweeps over the coordinates.
    pub max_iter: usize,
    pub kkt_tol: f64,
    /// `|θ_j|` at or below this counts as inactive in the reported active set.
    pub zero_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            kkt_tol: 1e-8,
            zero_tol: 1e-10,
        }
    }
}

/// State after one sweep, handed to the trace callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub theta: Vec<f64>,
    /// `Aθ`; shared by every minimizer of the same problem.
    pub fitted: Vec<f64>,
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// False when some sweep increased `φ` beyond round-off.
    pub monotone: bool,
}

/// Solves from the zero vector.
pub fn solve(problem: &LassoProblem, opts: &SolveOptions) -> LassoSolution {
    solve_from(problem, opts, &vec![0.0; problem.p()], |_| {})
}

/// Cyclic coordinate descent from `start`, calling `trace` after each sweep.
///
/// Each coordinate update is the exact univariate minimizer
/// `θ_j ← S(A_jᵗr + ‖A_j‖²θ_j, λ)/‖A_j‖²` with soft threshold
/// `S(c, λ) = sign(c)·max(|c| − λ, 0)`; a coordinate at zero stays there
/// unless its correlation strictly exceeds `λ`. Zero columns stay at zero.
pub fn solve_from<F>(problem: &LassoProblem, opts: &SolveOptions, start: &[f64], mut trace: F) -> LassoSolution
where
    F: FnMut(&SweepRecord),
{
    let p = problem.p();
    let n = problem.a.rows();
    assert_eq!(start.len(), p, "start vector length");
    let lambda = problem.lambda;
    let a = &problem.a;

    // column-major copy for cache-friendly coordinate updates
    let cols: Vec<Vec<f64>> = (0..p).map(|j| a.column(j)).collect();
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();

    let mut theta = start.to_vec();
    for (t, &nj) in theta.iter_mut().zip(&norms) {
        if nj == 0.0 {
            *t = 0.0;
        }
    }
    let mut resid: Vec<f64> = {
        let fit = a.mul_vec(&theta);
        problem.z.iter().zip(&fit).map(|(z, f)| z - f).collect()
    };

    let mut objective = problem.objective(&theta);
    let mut kkt = kkt_residual_from(&cols, &resid, &theta, lambda);
    let mut iterations = 0;
    let mut monotone = true;
    let mut converged = kkt <= opts.kkt_tol;

    while !converged && iterations < opts.max_iter {
        for j in 0..p {
            let nj = norms[j];
            if nj == 0.0 {
                continue;
            }
            let col = &cols[j];
            let old = theta[j];
            let c = dot(col, &resid) + nj * old;
            let new = soft_threshold(c, lambda) / nj;
            if new != old {
                let delta = new - old;
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= delta * a;
                }
                theta[j] = new;
            }
        }
        iterations += 1;

        // refresh the residual to keep drift out of the certificate
        if iterations % 64 == 0 {
            let fit = a.mul_vec(&theta);
            for i in 0..n {
                resid[i] = problem.z[i] - fit[i];
            }
        }
        let new_objective = objective_from(&resid, &theta, lambda);
        if new_objective > objective + 1e-12 * objective.abs().max(1.0) {
            monotone = false;
        }
        objective = new_objective;
        kkt = kkt_residual_from(&cols, &resid, &theta, lambda);
        if kkt <= opts.kkt_tol {
            let fit = a.mul_vec(&theta);
            for i in 0..n {
                resid[i] = problem.z[i] - fit[i];
            }
            kkt = kkt_residual_from(&cols, &resid, &theta, lambda);
        }
        trace(&SweepRecord {
            sweep: iterations,
            objective,
            kkt_residual: kkt,
        });
        converged = kkt <= opts.kkt_tol;
    }

    // final certificate on a fresh residual
    let fitted = a.mul_vec(&theta);
    let cert = check_kkt(&theta, problem, opts.kkt_tol);
    let converged = cert.holds;
    let active_set = theta
        .iter()
        .enumerate()
        .filter(|(_, t)| t.abs() > opts.zero_tol)
        .map(|(j, _)| j)
        .collect();
    LassoSolution {
        objective_value: problem.objective(&theta),
        kkt_residual: cert.residual,
        theta,
        fitted,
        active_set,
        iterations,
        converged,
        monotone,
    }
}

#[inline]
fn soft_threshold(c: f64, lambda: f64) -> f64 {
    if c > lambda {
        c - lambda
    } else if c < -lambda {
        c + lambda
    } else {
        0.0
    }
}

fn objective_from(resid: &[f64], theta: &[f64], lambda: f64) -> f64 {
    dot(resid, resid) + 2.0 * lambda * theta.iter().map(|t| t.abs()).sum::<f64>()
}

fn coordinate_violation(corr: f64, theta_j: f64, lambda: f64) -> f64 {
    if theta_j > 0.0 {
        (corr - lambda).abs()
    } else if theta_j < 0.0 {
        (corr + lambda).abs()
    } else {
        (corr.abs() - lambda).max(0.0)
    }
}

fn kkt_residual_from(cols: &[Vec<f64>], resid: &[f64], theta: &[f64], lambda: f64) -> f64 {
    cols.iter()
        .zip(theta)
        .map(|(c, &t)| coordinate_violation(dot(c, resid), t, lambda))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub holds: bool,
    /// Largest per-coordinate violation.
    pub residual: f64,
    pub per_coordinate: Vec<f64>,
}

/// Optimality certificate: per coordinate, `|A_jᵗr − λ sign θ_j|` when
/// `θ_j ≠ 0` and `max(|A_jᵗr| − λ, 0)` when `θ_j = 0`, with `r = Z − Aθ`.
pub fn check_kkt(theta: &[f64], problem: &LassoProblem, tol: f64) -> KktReport {
    assert_eq!(theta.len(), problem.p(), "theta length");
    let fit = problem.a.mul_vec(theta);
    let resid: Vec<f64> = problem.z.iter().zip(&fit).map(|(z, f)| z - f).collect();
    let corr = problem.a.t_mul_vec(&resid);
    let per_coordinate: Vec<f64> = corr
        .iter()
        .zip(theta)
        .map(|(&c, &t)| coordinate_violation(c, t, problem.lambda))
        .collect();
    let residual = per_coordinate.iter().copied().fold(0.0, f64::max);
    KktReport {
        holds: residual <= tol,
        residual,
        per_coordinate,
    }
}

/// Global minimizer by enumeration of all `3^p` sign patterns.
///
/// For a pattern `s` with support `S`, the candidate solves
/// `A_SᵗA_S θ_S = A_SᵗZ − λ s_S`; it is kept when its signs match `s` and
/// every inactive correlation satisfies `|A_jᵗr| ≤ λ`. Patterns with a
/// singular restricted system are skipped. Among feasible candidates the one
/// of least `φ` is returned.
pub fn brute_force_oracle(problem: &LassoProblem) -> Result<Vec<f64>> {
    let p = problem.p();
    if p > ORACLE_MAX_COORDINATES {
        return Err(Error::TooManyCoordinates {
            p,
            max: ORACLE_MAX_COORDINATES,
        });
    }
    let gram = problem.a.gram();
    let corr = problem.a.t_mul_vec(&problem.z);
    let lambda = problem.lambda;
    let scale = 1.0 + corr.iter().fold(0.0f64, |m, c| m.max(c.abs())) + gram.max_abs();
    let feas_tol = 1e-9 * scale;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(p as u32);
    let mut signs = vec![0i8; p];
    for code in 0..total {
        let mut c = code;
        for s in signs.iter_mut() {
            *s = (c % 3) as i8 - 1;
            c /= 3;
        }
        let support: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let mut theta = vec![0.0; p];
        if !support.is_empty() {
            let k = support.len();
            let mut g = Matrix::zeros(k, k);
            let mut rhs = vec![0.0; k];
            for (a, &ja) in support.iter().enumerate() {
                rhs[a] = corr[ja] - lambda * f64::from(signs[ja]);
                for (b, &jb) in support.iter().enumerate() {
                    g[(a, b)] = gram[(ja, jb)];
                }
            }
            let Some(sol) = solve_linear(&g, &rhs) else {
                continue;
            };
            if support
                .iter()
                .zip(&sol)
                .any(|(&j, &v)| f64::from(signs[j]) * v <= 0.0)
            {
                continue;
            }
            for (&j, v) in support.iter().zip(sol) {
                theta[j] = v;
            }
        }
        // inactive coordinates: |A_jᵗZ − (A_jᵗA)θ| ≤ λ
        let feasible = (0..p).filter(|&j| signs[j] == 0).all(|j| {
            let cj = corr[j] - (0..p).map(|k| gram[(j, k)] * theta[k]).sum::<f64>();
            cj.abs() <= lambda + feas_tol
        });
        if !feasible {
            continue;
        }
        let phi = problem.objective(&theta);
        if best.as_ref().is_none_or(|(b, _)| phi < *b) {
            best = Some((phi, theta));
        }
    }
    best.map(|(_, t)| t).ok_or(Error::NoFeasiblePattern)
}
