use thiserror::Error;

/// Failures of the simulation harness.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] locasso_core::Error),
    #[error("replicate {replicate} at grid point {grid_index} (seed {seed}) failed: {source}")]
    Replicate {
        grid_index: usize,
        replicate: usize,
        seed: u64,
        #[source]
        source: locasso_core::Error,
    },
    #[error("only {remaining} grid points have a positive MSE; the rate fit needs at least 3")]
    TooFewRatePoints { remaining: usize },
}
