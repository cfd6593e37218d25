//! Optimism-based online learners for average-reward MDPs.

mod extended;
mod learner;
mod run;

pub use extended::{
    descending_order, evi, evi_spans, evi_step, evi_with, optimistic_row, optimistic_row_box,
    EviConfig, EviResult, ExtendedMdp,
};
pub use learner::{ConfidenceBound, FixedPolicyLearner, Learner, Ucrl2, Ucrl2Config};
pub use run::{
    initial_state, optimal_subchain, regret_report, reset_raises_initial_gain, run_learning,
    LearnerTrace, RegretReport,
};

use crate::mdp::MdpError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OfuError {
    #[error("extended value iteration did not converge in {iterations} iterations (last span {last_span})")]
    NoConvergence { iterations: usize, last_span: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}
