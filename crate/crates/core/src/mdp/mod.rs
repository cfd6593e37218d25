//! Finite MDPs, MRPs and Markov chains, plus the exact solvers the rest of
//! the crate leans on as oracles.

mod envs;
pub mod io;
mod mrp;
mod policy;
mod solve;
mod structure;
mod trajectory;

pub use envs::{
    make_final_visit_mrps, make_mk_chain, make_multireward_toy, make_racetrack, make_random_chain,
    make_random_mdp, make_random_mrp, make_riverswim_mdp, make_riverswim_mrp, make_shaping_toy,
    FinalVisitMrps, RacetrackLayout, RIVERSWIM_SMALL_REWARD,
};
pub use mrp::{induce_mrp, MarkovChain, Mrp};
pub use policy::{DeterministicPolicies, StochasticPolicy};
pub use solve::{
    chain_gains_per_state, is_recoverable, optimal_gain, policy_gains_per_state,
    relative_value_iteration, solve_discounted_values, solve_gain_bias, stationary_distribution,
    stationary_distribution_iterative, GainBias, RviSolution, RECOVERABLE_TOL,
};
pub use structure::{
    can_reach, end_components, end_components_within, strongly_connected_components,
    subchain_decomposition, EndComponent, SubchainDecomposition, SupportGraph,
};
pub use trajectory::{sample_mdp_path, sample_path, Step, Trajectory};

use crate::linalg::SingularMatrix;
use rand::Rng;

/// Row sums must be within this of one for in-memory constructors.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Slack allowed when checking reward outcomes against `[0, r_max]`.
pub const REWARD_BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{context}: row does not sum to one (sum = {sum})")]
    RowNotStochastic { context: String, sum: f64 },
    #[error("{context}: probability {value} outside [0, 1]")]
    InvalidProbability { context: String, value: f64 },
    #[error("reward outcome {value} at (s={state}, a={action}, s'={next}) outside [0, {r_max}]")]
    RewardOutOfRange {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
        r_max: f64,
    },
    #[error("invalid reset specification: {0}")]
    InvalidReset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("chain has more than one stationary distribution")]
    NonUniqueStationary,
    #[error("chain has {classes} recurrent classes; decompose before solving for gain and bias")]
    MultichainInput { classes: usize },
    #[error(transparent)]
    Singular(#[from] SingularMatrix),
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("model file: {0}")]
    Format(String),
}

/// Distribution of a single reward draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardDist {
    PointMass(f64),
    /// `high` with probability `p`, otherwise zero.
    Bernoulli {
        p: f64,
        high: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl RewardDist {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardDist::PointMass(v) => v,
            RewardDist::Bernoulli { p, high } => p * high,
            RewardDist::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// Smallest and largest possible outcome.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            RewardDist::PointMass(v) => (v, v),
            RewardDist::Bernoulli { p, high } => {
                if p <= 0.0 {
                    (0.0, 0.0)
                } else if p >= 1.0 {
                    (high, high)
                } else {
                    (0.0_f64.min(high), 0.0_f64.max(high))
                }
            }
            RewardDist::Uniform { lo, hi } => (lo, hi),
        }
    }

    /// Point masses consume no randomness; the other kinds draw one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardDist::PointMass(v) => v,
            RewardDist::Bernoulli { p, high } => {
                if rng.random::<f64>() < p {
                    high
                } else {
                    0.0
                }
            }
            RewardDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    fn validate(&self) -> Result<(), MdpError> {
        let ok = match *self {
            RewardDist::PointMass(v) => v.is_finite(),
            RewardDist::Bernoulli { p, high } => (0.0..=1.0).contains(&p) && high.is_finite(),
            RewardDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(MdpError::InvalidParameter(format!(
                "malformed reward distribution {self:?}"
            )))
        }
    }
}

/// A designated reset action that always returns to `initial` with zero reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResetSpec {
    pub action: usize,
    pub initial: usize,
}

/// A finite MDP with per-(state, action) reward distributions.
///
/// Rewards may additionally carry a shift that depends on the realized next
/// state (`reward_offsets[s][a][s']`). Plain models keep these at zero;
/// potential-based shaping writes `φ(s') − φ(s)` into them so that sampled
/// shaped rewards match the per-transition definition exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<RewardDist>,
    reward_offsets: Vec<f64>,
    r_max: f64,
    reset: Option<ResetSpec>,
}

impl FiniteMdp {
    /// Validates and builds a model from flat row-major tables:
    /// `transitions` is S·A·S, `rewards` is S·A and `reward_offsets` (if
    /// given) is S·A·S.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<RewardDist>,
        reward_offsets: Option<Vec<f64>>,
        r_max: f64,
        reset: Option<ResetSpec>,
    ) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::InvalidParameter(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if !(r_max.is_finite() && r_max >= 0.0) {
            return Err(MdpError::InvalidParameter(format!("r_max = {r_max}")));
        }
        let sas = n_states * n_actions * n_states;
        check_len("transitions", sas, transitions.len())?;
        check_len("rewards", n_states * n_actions, rewards.len())?;
        let reward_offsets = reward_offsets.unwrap_or_else(|| vec![0.0; sas]);
        check_len("reward offsets", sas, reward_offsets.len())?;

        let mdp = Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            reward_offsets,
            r_max,
            reset,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn builder(n_states: usize, n_actions: usize, r_max: f64) -> MdpBuilder {
        MdpBuilder {
            n_states,
            n_actions,
            r_max,
            transitions: vec![0.0; n_states * n_actions * n_states],
            rewards: vec![RewardDist::PointMass(0.0); n_states * n_actions],
            reset: None,
        }
    }

    fn validate(&self) -> Result<(), MdpError> {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        for s in 0..s_n {
            for a in 0..a_n {
                let row = self.p(s, a);
                check_row(row, || format!("transitions[{s}, {a}]"))?;
                let dist = self.rewards[s * a_n + a];
                dist.validate()?;
                let (lo, hi) = dist.support();
                for (next, &p) in row.iter().enumerate() {
                    if p <= 0.0 {
                        continue;
                    }
                    let off = self.offset(s, a, next);
                    for value in [lo + off, hi + off] {
                        if !(value.is_finite()
                            && value >= -REWARD_BOUND_TOL
                            && value <= self.r_max + REWARD_BOUND_TOL)
                        {
                            return Err(MdpError::RewardOutOfRange {
                                state: s,
                                action: a,
                                next,
                                value,
                                r_max: self.r_max,
                            });
                        }
                    }
                }
            }
        }
        if let Some(reset) = self.reset {
            if reset.action >= a_n || reset.initial >= s_n {
                return Err(MdpError::InvalidReset(format!(
                    "reset {reset:?} out of range for S={s_n}, A={a_n}"
                )));
            }
            for s in 0..s_n {
                if self.prob(s, reset.action, reset.initial) != 1.0 {
                    return Err(MdpError::InvalidReset(format!(
                        "reset from state {s} does not land on {} with probability one",
                        reset.initial
                    )));
                }
                let zero_reward = self.reward(s, reset.action) == RewardDist::PointMass(0.0)
                    && self.offsets(s, reset.action).iter().all(|&o| o == 0.0);
                if !zero_reward {
                    return Err(MdpError::InvalidReset(format!(
                        "reset from state {s} must pay exactly zero"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn reset(&self) -> Option<ResetSpec> {
        self.reset
    }

    /// Transition row `p(· | s, a)`.
    pub fn p(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        let start = (s * self.n_actions + a) * n;
        &self.transitions[start..start + n]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.p(s, a)[next]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn reward(&self, s: usize, a: usize) -> RewardDist {
        self.rewards[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[RewardDist] {
        &self.rewards
    }

    pub fn offsets(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        let start = (s * self.n_actions + a) * n;
        &self.reward_offsets[start..start + n]
    }

    pub fn offset(&self, s: usize, a: usize, next: usize) -> f64 {
        self.offsets(s, a)[next]
    }

    pub fn reward_offsets(&self) -> &[f64] {
        &self.reward_offsets
    }

    /// `r̄(s, a)`, including the expected next-state shift.
    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        let shift: f64 = self
            .p(s, a)
            .iter()
            .zip(self.offsets(s, a))
            .map(|(p, o)| p * o)
            .sum();
        self.reward(s, a).mean() + shift
    }

    /// Mean rewards as a flat S·A table.
    pub fn mean_rewards(&self) -> Vec<f64> {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .map(|(s, a)| self.mean_reward(s, a))
            .collect()
    }

    /// One environment step: the next state is drawn first, then the reward
    /// (whose shift may depend on that next state).
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (f64, usize) {
        let next = crate::rng::categorical(rng, self.p(s, a));
        let reward = self.reward(s, a).sample(rng) + self.offset(s, a, next);
        (reward, next)
    }

    /// Same model with different reward distributions and offsets.
    pub fn with_rewards(
        &self,
        rewards: Vec<RewardDist>,
        reward_offsets: Vec<f64>,
        r_max: f64,
    ) -> Result<Self, MdpError> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transitions.clone(),
            rewards,
            Some(reward_offsets),
            r_max,
            self.reset,
        )
    }

    /// The reset-restricted model: the reset action is removed and later
    /// action indices shift down by one. Models without reset are returned
    /// unchanged.
    pub fn restrict_reset(&self) -> Result<Self, MdpError> {
        let Some(reset) = self.reset else {
            return Ok(self.clone());
        };
        if self.n_actions == 1 {
            return Err(MdpError::InvalidReset(
                "cannot remove the only action".into(),
            ));
        }
        let keep: Vec<usize> = (0..self.n_actions).filter(|&a| a != reset.action).collect();
        self.select_actions(&keep, None)
    }

    /// The model with only the listed actions, in the given order.
    pub fn select_actions(
        &self,
        actions: &[usize],
        reset: Option<ResetSpec>,
    ) -> Result<Self, MdpError> {
        let n = self.n_states;
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        let mut offsets = Vec::new();
        for s in 0..n {
            for &a in actions {
                transitions.extend_from_slice(self.p(s, a));
                rewards.push(self.reward(s, a));
                offsets.extend_from_slice(self.offsets(s, a));
            }
        }
        Self::new(
            n,
            actions.len(),
            transitions,
            rewards,
            Some(offsets),
            self.r_max,
            reset,
        )
    }

    /// Whether `s'` has positive probability under some action from `s`.
    pub fn has_edge(&self, s: usize, next: usize) -> bool {
        (0..self.n_actions).any(|a| self.prob(s, a, next) > 0.0)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), MdpError> {
    if expected == got {
        Ok(())
    } else {
        Err(MdpError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn check_row(row: &[f64], context: impl Fn() -> String) -> Result<(), MdpError> {
    for &p in row {
        if !(0.0..=1.0).contains(&p) {
            return Err(MdpError::InvalidProbability {
                context: context(),
                value: p,
            });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(MdpError::RowNotStochastic {
            context: context(),
            sum,
        });
    }
    Ok(())
}

/// Incremental construction of a [`FiniteMdp`].
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    n_states: usize,
    n_actions: usize,
    r_max: f64,
    transitions: Vec<f64>,
    rewards: Vec<RewardDist>,
    reset: Option<ResetSpec>,
}

impl MdpBuilder {
    pub fn transition(mut self, s: usize, a: usize, next: usize, p: f64) -> Self {
        let n = self.n_states;
        self.transitions[(s * self.n_actions + a) * n + next] += p;
        self
    }

    pub fn row(mut self, s: usize, a: usize, row: &[f64]) -> Self {
        let n = self.n_states;
        let start = (s * self.n_actions + a) * n;
        self.transitions[start..start + n].copy_from_slice(row);
        self
    }

    pub fn reward(mut self, s: usize, a: usize, dist: RewardDist) -> Self {
        self.rewards[s * self.n_actions + a] = dist;
        self
    }

    pub fn reward_mean(self, s: usize, a: usize, value: f64) -> Self {
        self.reward(s, a, RewardDist::PointMass(value))
    }

    pub fn reset(mut self, action: usize, initial: usize) -> Self {
        self.reset = Some(ResetSpec { action, initial });
        self
    }

    pub fn build(self) -> Result<FiniteMdp, MdpError> {
        FiniteMdp::new(
            self.n_states,
            self.n_actions,
            self.transitions,
            self.rewards,
            None,
            self.r_max,
            self.reset,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> MdpBuilder {
        FiniteMdp::builder(2, 1, 1.0)
            .transition(0, 0, 1, 1.0)
            .transition(1, 0, 0, 1.0)
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = FiniteMdp::builder(2, 1, 1.0)
            .transition(0, 0, 1, 0.9)
            .transition(1, 0, 0, 1.0)
            .build()
            .unwrap_err();
        assert!(matches!(err, MdpError::RowNotStochastic { .. }));
    }

    #[test]
    fn rejects_rewards_above_r_max() {
        let err = two_state()
            .reward(0, 0, RewardDist::Uniform { lo: 0.5, hi: 1.5 })
            .build()
            .unwrap_err();
        assert!(matches!(err, MdpError::RewardOutOfRange { .. }));
    }

    #[test]
    fn reset_must_be_deterministic_and_free() {
        let bad = FiniteMdp::builder(2, 2, 1.0)
            .transition(0, 0, 0, 1.0)
            .transition(1, 0, 1, 1.0)
            .transition(0, 1, 0, 1.0)
            .transition(1, 1, 0, 1.0)
            .reward_mean(1, 1, 0.5)
            .reset(1, 0)
            .build();
        assert!(matches!(bad, Err(MdpError::InvalidReset(_))));
    }

    #[test]
    fn mean_reward_includes_next_state_shift() {
        let mdp = FiniteMdp::new(
            2,
            1,
            vec![0.5, 0.5, 0.0, 1.0],
            vec![RewardDist::PointMass(0.2), RewardDist::PointMass(0.0)],
            Some(vec![0.0, 0.4, 0.0, 0.0]),
            1.0,
            None,
        )
        .unwrap();
        assert!((mdp.mean_reward(0, 0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn restrict_reset_drops_the_action() {
        let mdp = make_racetrack(4, 2, 0.2).unwrap();
        let restricted = mdp.restrict_reset().unwrap();
        assert_eq!(restricted.n_actions(), mdp.n_actions() - 1);
        assert!(restricted.reset().is_none());
    }

    #[test]
    fn reward_dist_moments() {
        assert_eq!(RewardDist::Bernoulli { p: 0.25, high: 2.0 }.mean(), 0.5);
        assert_eq!(
            RewardDist::Uniform { lo: 0.2, hi: 0.6 }.support(),
            (0.2, 0.6)
        );
        assert_eq!(
            RewardDist::Bernoulli { p: 1.0, high: 1.0 }.support(),
            (1.0, 1.0)
        );
    }
}
