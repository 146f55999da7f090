//! Synthetic regression problems with a known sparse support.

use std::sync::Arc;

use locasso_core::{Dataset, Matrix, RegressionFn, TruthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Design distribution of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    /// Independent uniform coordinates on `[lo, hi]^d`.
    UniformBox { lo: f64, hi: f64 },
}

/// One monomial of a polynomial target, in the centred support variables
/// `t_{J_k} − x_{J_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

/// Regression functions depending only on the support coordinates. All
/// forms are written around the query point so value and gradient there
/// are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionFamily {
    /// `a + Σ_k b_k (t_{J_k} − x_{J_k})`.
    Affine { intercept: f64, slopes: Vec<f64> },
    /// `a + Σ_k b_k u_k + Σ_k c_k u_k²` with `u_k = t_{J_k} − x_{J_k}`.
    QuadraticAffine {
        intercept: f64,
        slopes: Vec<f64>,
        curvature: Vec<f64>,
    },
    /// General polynomial in the centred support variables.
    Polynomial { terms: Vec<PolyTerm> },
}

impl FunctionFamily {
    fn check(&self, d_star: usize) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::Spec(format!("{what} must have one entry per support coordinate ({d_star})")));
        match self {
            FunctionFamily::Affine { slopes, .. } if slopes.len() != d_star => bad("slopes"),
            FunctionFamily::QuadraticAffine { slopes, curvature, .. }
                if slopes.len() != d_star || curvature.len() != d_star =>
            {
                bad("slopes and curvature")
            }
            FunctionFamily::Polynomial { terms } if terms.iter().any(|t| t.exponents.len() != d_star) => {
                bad("term exponents")
            }
            _ => Ok(()),
        }
    }

    /// Value at the centred support vector `u`.
    fn value(&self, u: &[f64]) -> f64 {
        match self {
            FunctionFamily::Affine { intercept, slopes } => {
                intercept + slopes.iter().zip(u).map(|(b, v)| b * v).sum::<f64>()
            }
            FunctionFamily::QuadraticAffine {
                intercept,
                slopes,
                curvature,
            } => {
                intercept
                    + slopes
                        .iter()
                        .zip(curvature)
                        .zip(u)
                        .map(|((b, c), v)| b * v + c * v * v)
                        .sum::<f64>()
            }
            FunctionFamily::Polynomial { terms } => terms
                .iter()
                .map(|t| {
                    t.coefficient
                        * t.exponents
                            .iter()
                            .zip(u)
                            .map(|(&e, &v)| v.powi(e as i32))
                            .product::<f64>()
                })
                .sum(),
        }
    }

    /// Partial derivatives at `u = 0`, one per support coordinate.
    fn gradient_at_origin(&self, d_star: usize) -> Vec<f64> {
        match self {
            FunctionFamily::Affine { slopes, .. } | FunctionFamily::QuadraticAffine { slopes, .. } => slopes.clone(),
            FunctionFamily::Polynomial { terms } => {
                let mut g = vec![0.0; d_star];
                for t in terms {
                    let degree: u32 = t.exponents.iter().sum();
                    if degree == 1 {
                        let k = t.exponents.iter().position(|&e| e == 1).unwrap();
                        g[k] += t.coefficient;
                    }
                }
                g
            }
        }
    }

    /// A constant `L` with `|f(t) − P₁f(t)| ≤ L‖t − x‖₁²`, when one is
    /// available in closed form (`None` for affine targets, where any
    /// positive `L` works).
    pub fn quadratic_remainder_constant(&self) -> Option<f64> {
        match self {
            FunctionFamily::Affine { .. } => None,
            FunctionFamily::QuadraticAffine { curvature, .. } => {
                Some(curvature.iter().fold(0.0f64, |m, c| m.max(c.abs())))
            }
            FunctionFamily::Polynomial { .. } => None,
        }
    }
}

/// Everything needed to draw one synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n: usize,
    pub d: usize,
    /// One-based relevant coordinates.
    pub support: Vec<usize>,
    pub design: Design,
    pub function: FunctionFamily,
    pub sigma: f64,
    pub seed: u64,
    pub x_query: Vec<f64>,
}

/// Density-related constants implied by the design around the query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignConstants {
    pub mu_min: f64,
    /// `max(1, 1/volume)`: the density bound, raised to 1 when needed.
    pub mu_max: f64,
    pub mu_lipschitz: f64,
    /// Sup-norm distance from the query point to the box boundary.
    pub eta: f64,
}

impl GeneratorSpec {
    pub fn d_star(&self) -> usize {
        self.support.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::Spec("n must be positive".into()));
        }
        if self.d == 0 {
            return Err(SimError::Spec("d must be positive".into()));
        }
        if self.x_query.len() != self.d {
            return Err(SimError::Spec(format!(
                "x_query has {} entries, expected d = {}",
                self.x_query.len(),
                self.d
            )));
        }
        let mut seen = vec![false; self.d + 1];
        for &j in &self.support {
            if j == 0 || j > self.d {
                return Err(SimError::Spec(format!("support index {j} outside 1..={}", self.d)));
            }
            if seen[j] {
                return Err(SimError::Spec(format!("support index {j} repeated")));
            }
            seen[j] = true;
        }
        if !(self.sigma >= 0.0) {
            return Err(SimError::Spec("sigma must be nonnegative".into()));
        }
        let Design::UniformBox { lo, hi } = self.design;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SimError::Spec("box needs finite lo < hi".into()));
        }
        self.function.check(self.d_star())
    }

    pub fn design_constants(&self) -> DesignConstants {
        let Design::UniformBox { lo, hi } = self.design;
        let log_volume = self.d as f64 * (hi - lo).ln();
        let density = (-log_volume).exp();
        let eta = self
            .x_query
            .iter()
            .map(|&x| (x - lo).min(hi - x))
            .fold(f64::INFINITY, f64::min);
        DesignConstants {
            mu_min: density,
            mu_max: density.max(1.0),
            mu_lipschitz: 0.0,
            eta,
        }
    }

    /// Copy with another size and seed.
    pub fn with_n_seed(&self, n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            ..self.clone()
        }
    }

    fn regression_fn(&self) -> RegressionFn {
        let support: Vec<usize> = self.support.clone();
        let centre: Vec<f64> = support.iter().map(|&j| self.x_query[j - 1]).collect();
        let family = self.function.clone();
        Arc::new(move |t: &[f64]| {
            let u: Vec<f64> = support
                .iter()
                .zip(&centre)
                .map(|(&j, c)| t[j - 1] - c)
                .collect();
            family.value(&u)
        })
    }

    pub fn truth(&self) -> TruthSpec {
        let f = self.regression_fn();
        let mut gradient = vec![0.0; self.d];
        for (&j, g) in self.support.iter().zip(self.function.gradient_at_origin(self.d_star())) {
            gradient[j - 1] = g;
        }
        let mut support = self.support.clone();
        support.sort_unstable();
        TruthSpec {
            f_at_x: f(&self.x_query),
            f,
            gradient_at_x: gradient,
            support,
        }
    }
}

/// Draws `n` design points and responses `Y_i = f(X_i) + σ ε_i` with
/// standard normal `ε_i`. Deterministic in `spec.seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<(Dataset, TruthSpec), SimError> {
    spec.validate()?;
    let truth = spec.truth();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let Design::UniformBox { lo, hi } = spec.design;
    let mut points = Vec::with_capacity(spec.n * spec.d);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = points.len();
        for _ in 0..spec.d {
            points.push(rng.gen_range(lo..hi));
        }
        let fx = (truth.f)(&points[start..]);
        let noise: f64 = if spec.sigma > 0.0 {
            spec.sigma * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        y.push(fx + noise);
    }
    let data = Dataset::new(Matrix::from_row_slice(spec.n, spec.d, &points), y)?;
    Ok((data, truth))
}
