//! Policy evaluation from a single sample path.
//!
//! Every estimator here consumes `(X_t, R_t)` observations one at a time and
//! never sees the model that generated them.

mod harness;
mod loop_est;
mod model_based;
mod td;

pub use harness::{
    run_comparison, ComparisonRow, ComparisonTable, EstimatorKind, SummaryRow, CHECKPOINT_COUNT,
    FIRST_CHECKPOINT,
};
pub use loop_est::{LoopEstimator, LoopEstimatorAll};
pub use model_based::ModelBasedEstimator;
pub use td::TdEstimator;

use crate::mdp::MdpError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("no loop through state {state} has completed yet")]
    NoCompletedLoops { state: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Streaming value estimator over all states.
pub trait ValueEstimator: Send {
    fn observe(&mut self, state: usize, reward: f64);
    /// Current estimate for every state.
    fn values(&self) -> Vec<f64>;
}

pub(crate) fn check_gamma(gamma: f64) -> Result<(), EstimatorError> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(EstimatorError::InvalidParameter(format!(
            "discount {gamma} must lie in [0, 1)"
        )))
    }
}
