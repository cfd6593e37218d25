//! Multi-objective planning on shared dynamics: exact gains and gradients,
//! common-ascent directions and direct-cone policy optimization.

mod cone;
mod gain;
pub mod lp;

pub use cone::{
    common_ascent_direction, direct_cone_optimize, sample_gain_cloud, steer, Ascent, ConeConfig,
    ConeRun, GainCloud, ParetoIterate, SteerPhase, Termination, BOUNDARY_TOL, INIT_FLOOR,
    MARGIN_TOL, MAX_DETERMINISTIC, POLICY_FLOOR,
};
pub use gain::{gain_determinant, MultiRewardMdp, DEGENERATE_DET_TOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParetoError {
    #[error("chain has no unique stationary distribution (determinant {determinant:e})")]
    DegenerateChain { determinant: f64 },
    #[error("linear program failed: {0}")]
    LpNumericalFailure(String),
    #[error("active objective set is empty")]
    EmptyActiveSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
