//! Seeded Monte Carlo runs of the selection and two-stage procedures.

use locasso_core::{
    select, two_stage_estimate, EstimationOptions, KernelFamily, SelectionConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use super::generator::{generate, GeneratorSpec};
use crate::error::SimError;

/// A grid of sample sizes with a fixed number of replicates each.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Template problem; its `seed` is the master seed and its `n` is
    /// replaced by each grid value.
    pub template: GeneratorSpec,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub selection: SelectionConfig,
    pub selection_kernel: KernelFamily,
    /// Runs the estimation stage too when present.
    pub estimation: Option<EstimationOptions>,
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub grid_index: usize,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub selected: Vec<usize>,
    pub exact_recovery: bool,
    pub kkt_residual: f64,
    pub converged: bool,
    pub window_size: usize,
    pub fhat: Option<f64>,
    pub f_true: f64,
    pub squared_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateErrors {
    /// One-based coordinate.
    pub coordinate: usize,
    /// Replicates where this relevant coordinate was dropped.
    pub misses: usize,
    /// Replicates where this irrelevant coordinate was selected.
    pub false_includes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub n: usize,
    pub replicates: usize,
    pub recovery_rate: f64,
    pub nonconverged: usize,
    pub coordinate_errors: Vec<CoordinateErrors>,
    pub mse: Option<f64>,
}

/// Least-squares slope of `log MSE` against `log n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub points_used: usize,
    /// Grid sizes dropped because their MSE was zero.
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub master_seed: u64,
    pub grid: Vec<GridSummary>,
    pub rate: Option<RateFit>,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

/// Seed of replicate `rep` at grid point `grid`; a fixed function of the
/// master seed so runs are reproducible under any thread count.
pub fn child_seed(master: u64, grid: usize, rep: usize) -> u64 {
    let mut z = splitmix64(master);
    z = splitmix64(z ^ splitmix64(grid as u64).rotate_left(17));
    splitmix64(z ^ splitmix64((rep as u64).wrapping_add(0xA076_1D64_78BD_642F)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Experiment {
    fn check(&self) -> Result<(), SimError> {
        self.template.validate()?;
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(SimError::Spec("n_grid needs at least one positive size".into()));
        }
        if self.replicates == 0 {
            return Err(SimError::Spec("replicates must be positive".into()));
        }
        Ok(())
    }

    fn run_one(&self, grid_index: usize, replicate: usize) -> Result<ReplicateRecord, SimError> {
        let n = self.n_grid[grid_index];
        let seed = child_seed(self.template.seed, grid_index, replicate);
        let spec = self.template.with_n_seed(n, seed);
        let wrap = |source| SimError::Replicate {
            grid_index,
            replicate,
            seed,
            source,
        };
        let (data, truth) = generate(&spec)?;
        let kernel = self.selection_kernel.build(spec.d).map_err(wrap)?;
        let x = &spec.x_query;
        let (selection, fhat) = match &self.estimation {
            Some(est) => {
                let out = two_stage_estimate(&data, x, &self.selection, &kernel, est).map_err(wrap)?;
                (out.selection, Some(out.fhat))
            }
            None => (select(&data, x, &self.selection, &kernel).map_err(wrap)?, None),
        };
        Ok(ReplicateRecord {
            grid_index,
            n,
            replicate,
            seed,
            exact_recovery: selection.selected == truth.support,
            kkt_residual: selection.solution.kkt_residual,
            converged: selection.converged(),
            window_size: selection.window_size,
            selected: selection.selected,
            fhat,
            f_true: truth.f_at_x,
            squared_error: fhat.map(|v| (v - truth.f_at_x) * (v - truth.f_at_x)),
        })
    }

    /// Runs every replicate on the current rayon pool. Records come back in
    /// grid-then-replicate order whatever the scheduling.
    pub fn run(&self) -> Result<ExperimentSummary, SimError> {
        self.check()?;
        let jobs: Vec<(usize, usize)> = (0..self.n_grid.len())
            .flat_map(|g| (0..self.replicates).map(move |r| (g, r)))
            .collect();
        let records = jobs
            .par_iter()
            .map(|&(g, r)| self.run_one(g, r))
            .collect::<Result<Vec<_>, _>>()?;
        let mut truth_support = self.template.support.clone();
        truth_support.sort_unstable();
        let grid = self
            .n_grid
            .iter()
            .enumerate()
            .map(|(g, &n)| {
                let rows = &records[g * self.replicates..(g + 1) * self.replicates];
                summarize(n, rows, self.template.d, &truth_support)
            })
            .collect();
        Ok(ExperimentSummary {
            master_seed: self.template.seed,
            grid,
            rate: None,
            records,
        })
    }
}

fn summarize(n: usize, rows: &[ReplicateRecord], d: usize, support: &[usize]) -> GridSummary {
    let reps = rows.len();
    let hits = rows.iter().filter(|r| r.exact_recovery).count();
    let coordinate_errors = (1..=d)
        .map(|j| {
            let relevant = support.contains(&j);
            let chosen = rows.iter().filter(|r| r.selected.contains(&j)).count();
            CoordinateErrors {
                coordinate: j,
                misses: if relevant { reps - chosen } else { 0 },
                false_includes: if relevant { 0 } else { chosen },
            }
        })
        .collect();
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.squared_error).collect();
    GridSummary {
        n,
        replicates: reps,
        recovery_rate: hits as f64 / reps as f64,
        nonconverged: rows.iter().filter(|r| !r.converged).count(),
        coordinate_errors,
        mse: (errors.len() == reps).then(|| errors.iter().sum::<f64>() / reps as f64),
    }
}

/// Selection-only experiment.
pub fn run_selection_experiment(exp: &Experiment) -> Result<ExperimentSummary, SimError> {
    let exp = Experiment {
        estimation: None,
        ..exp.clone()
    };
    exp.run()
}

/// Two-stage experiment over an increasing grid, with the fitted rate.
pub fn run_rate_experiment(exp: &Experiment) -> Result<ExperimentSummary, SimError> {
    if exp.estimation.is_none() {
        return Err(SimError::Spec("the rate experiment needs estimation options".into()));
    }
    if exp.n_grid.len() < 3 || exp.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::Spec(
            "n_grid must be strictly increasing with at least 3 sizes".into(),
        ));
    }
    let mut summary = exp.run()?;
    let ns: Vec<usize> = summary.grid.iter().map(|g| g.n).collect();
    let mses: Vec<f64> = summary.grid.iter().map(|g| g.mse.unwrap_or(0.0)).collect();
    summary.rate = Some(fit_rate(&ns, &mses)?);
    Ok(summary)
}

/// Ordinary least squares of `ln mse` on `ln n`. Points with zero MSE are
/// dropped with a warning.
pub fn fit_rate(ns: &[usize], mses: &[f64]) -> Result<RateFit, SimError> {
    assert_eq!(ns.len(), mses.len());
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (&n, &m) in ns.iter().zip(mses) {
        if m > 0.0 {
            pts.push(((n as f64).ln(), m.ln()));
        } else {
            log::warn!("MSE is zero at n = {n}; dropped from the rate fit");
            excluded.push(n);
        }
    }
    let k = pts.len();
    if k < 3 {
        return Err(SimError::TooFewRatePoints { remaining: k });
    }
    let kf = k as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / kf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / kf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - intercept - slope * p.0;
            e * e
        })
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        std_error: (rss / (kf - 2.0) / sxx).sqrt(),
        points_used: k,
        excluded,
    })
}
