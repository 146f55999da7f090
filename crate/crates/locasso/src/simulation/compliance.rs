//! Which hypotheses of the selection guarantee a configured experiment
//! actually meets. Failures are reported, never enforced.

use locasso_core::{build_localized_design, omega01_indicator, KernelSpec, SelectionConfig};
use serde::Serialize;

use super::generator::{generate, GeneratorSpec};
use crate::error::SimError;

/// An inequality `lhs < rhs` (or `≤`) with both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub lhs: f64,
    /// `None` when the right side is undefined (`h ≥ 1`).
    pub rhs: Option<f64>,
    pub holds: bool,
}

/// `d + 2 < ln n / (−ln h)`, the regime where the selection guarantee
/// has nontrivial probability. Fails for `h ≥ 1`.
pub fn dimension_regime(n: usize, d: usize, h: f64) -> Check {
    ratio_check(n, d, -h.ln(), |l, r| l < r)
}

/// `d + 2 ≤ ln n / (−2 ln h)`, the stronger regime the rate result needs.
pub fn rate_regime(n: usize, d: usize, h: f64) -> Check {
    ratio_check(n, d, -2.0 * h.ln(), |l, r| l <= r)
}

fn ratio_check(n: usize, d: usize, denom: f64, cmp: fn(f64, f64) -> bool) -> Check {
    let lhs = d as f64 + 2.0;
    if !(denom > 0.0) {
        return Check {
            lhs,
            rhs: None,
            holds: false,
        };
    }
    let rhs = (n as f64).ln() / denom;
    Check {
        lhs,
        rhs: Some(rhs),
        holds: cmp(lhs, rhs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub n: usize,
    pub d: usize,
    pub bandwidth: f64,
    pub lambda: f64,
    pub dimension_regime: Check,
    pub rate_regime: Check,
    pub bandwidth_ok: bool,
    pub lambda_ok: bool,
    pub separation_ok: bool,
    /// `min_{j∈J} |∂_j f(x)| ≥ C`; `None` without constants.
    pub derivative_separation: Option<bool>,
    /// `|J| ≤ d₀`; `None` without constants.
    pub sparsity_ok: Option<bool>,
    /// Whether the singular values of the localized design fall in the
    /// well-conditioned window, on one draw at the template seed.
    pub design_conditioned: Option<bool>,
}

pub fn compliance_report(
    spec: &GeneratorSpec,
    cfg: &SelectionConfig,
    kernel: &KernelSpec,
) -> Result<ComplianceReport, SimError> {
    let c = cfg.compliance();
    let truth = spec.truth();
    let (derivative_separation, sparsity_ok, design_conditioned) = match &cfg.constants {
        Some(k) => {
            let min_grad = truth
                .support
                .iter()
                .map(|&j| truth.gradient_at_x[j - 1].abs())
                .fold(f64::INFINITY, f64::min);
            let (data, _) = generate(spec)?;
            let ld = build_localized_design(&data, &spec.x_query, cfg.bandwidth, kernel)?;
            (
                Some(min_grad >= k.separation),
                Some(truth.support.len() <= k.d0),
                Some(omega01_indicator(&ld, k).holds),
            )
        }
        None => (None, None, None),
    };
    Ok(ComplianceReport {
        n: spec.n,
        d: spec.d,
        bandwidth: cfg.bandwidth,
        lambda: cfg.lambda,
        dimension_regime: dimension_regime(spec.n, spec.d, cfg.bandwidth),
        rate_regime: rate_regime(spec.n, spec.d, cfg.bandwidth),
        bandwidth_ok: c.bandwidth_ok,
        lambda_ok: c.lambda_ok,
        separation_ok: c.separation_ok,
        derivative_separation,
        sparsity_ok,
        design_conditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_n_meets_one_regime_but_not_the_other() {
        let a = dimension_regime(1_000_000, 10, 0.5);
        assert!(a.holds);
        assert!((a.rhs.unwrap() - 19.931568569324174).abs() < 1e-9);
        let b = rate_regime(1_000_000, 10, 0.5);
        assert!(!b.holds);
        assert!((b.rhs.unwrap() - 9.965784284662087).abs() < 1e-9);
    }

    #[test]
    fn bandwidth_at_least_one_fails() {
        for h in [1.0, 2.0] {
            assert!(!dimension_regime(10_000, 1, h).holds);
            assert!(!rate_regime(10_000, 1, h).holds);
            assert_eq!(dimension_regime(10_000, 1, h).rhs, None);
        }
    }
}
