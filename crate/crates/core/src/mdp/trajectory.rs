use super::{FiniteMdp, MdpError, Mrp, StochasticPolicy};
use crate::rng::seeded;

/// One record `(t, X_t, A_t, R_t)`. `action` is `None` on MRP paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: usize,
    pub state: usize,
    pub action: Option<usize>,
    pub reward: f64,
}

/// A sample path together with the seed that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    seed: u64,
    records: Vec<Step>,
}

impl Trajectory {
    /// Wraps externally produced records; `t` must run 0, 1, 2, ...
    pub fn from_records(seed: u64, records: Vec<Step>) -> Result<Self, MdpError> {
        if let Some((i, step)) = records.iter().enumerate().find(|(i, s)| s.t != *i) {
            return Err(MdpError::InvalidParameter(format!(
                "record {i} has t = {}",
                step.t
            )));
        }
        Ok(Self { seed, records })
    }

    /// Builds an MRP-style path from parallel state and reward sequences.
    pub fn from_states_rewards(states: &[usize], rewards: &[f64]) -> Self {
        assert_eq!(states.len(), rewards.len());
        let records = states
            .iter()
            .zip(rewards)
            .enumerate()
            .map(|(t, (&state, &reward))| Step {
                t,
                state,
                action: None,
                reward,
            })
            .collect();
        Self { seed: 0, records }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn records(&self) -> &[Step] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.state)
    }

    /// `(X_t, R_t)` pairs in order.
    pub fn observations(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.records.iter().map(|r| (r.state, r.reward))
    }
}

fn check_start(n_states: usize, start: usize, horizon: usize) -> Result<(), MdpError> {
    if start >= n_states {
        return Err(MdpError::InvalidParameter(format!(
            "start state {start} out of range for {n_states} states"
        )));
    }
    if horizon == 0 {
        return Err(MdpError::InvalidParameter(
            "horizon must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Samples `(X_t, R_t)` for `0 ≤ t < horizon` from `start`.
pub fn sample_path(
    mrp: &Mrp,
    start: usize,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory, MdpError> {
    check_start(mrp.n_states(), start, horizon)?;
    let mut rng = seeded(seed);
    let mut records = Vec::with_capacity(horizon);
    let mut state = start;
    for t in 0..horizon {
        let (reward, next) = mrp.step(state, &mut rng);
        records.push(Step {
            t,
            state,
            action: None,
            reward,
        });
        state = next;
    }
    Ok(Trajectory { seed, records })
}

/// Samples `(X_t, A_t, R_t)` for `0 ≤ t < horizon` under `policy`.
pub fn sample_mdp_path(
    mdp: &FiniteMdp,
    policy: &StochasticPolicy,
    start: usize,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory, MdpError> {
    check_start(mdp.n_states(), start, horizon)?;
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(MdpError::DimensionMismatch {
            what: "policy shape (S·A)",
            expected: mdp.n_states() * mdp.n_actions(),
            got: policy.n_states() * policy.n_actions(),
        });
    }
    let mut rng = seeded(seed);
    let mut records = Vec::with_capacity(horizon);
    let mut state = start;
    for t in 0..horizon {
        let action = policy.sample(state, &mut rng);
        let (reward, next) = mdp.step(state, action, &mut rng);
        records.push(Step {
            t,
            state,
            action: Some(action),
            reward,
        });
        state = next;
    }
    Ok(Trajectory { seed, records })
}
