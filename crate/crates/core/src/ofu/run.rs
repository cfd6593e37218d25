use serde::Serialize;

use super::{Learner, OfuError};
use crate::mdp::{optimal_gain, strongly_connected_components, FiniteMdp, SupportGraph};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerTrace {
    pub seed: u64,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub episodes: Vec<usize>,
    pub reset_action: Option<usize>,
}

impl LearnerTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn is_reset(&self, t: usize) -> bool {
        Some(self.actions[t]) == self.reset_action
    }

    pub fn total_resets(&self) -> usize {
        (0..self.len()).filter(|&t| self.is_reset(t)).count()
    }

    /// Reset count per state the reset was issued from.
    pub fn resets_per_state(&self, n_states: usize) -> Vec<usize> {
        let mut out = vec![0; n_states];
        for t in (0..self.len()).filter(|&t| self.is_reset(t)) {
            out[self.states[t]] += 1;
        }
        out
    }
}

/// Starting state of an experiment: the reset target when there is one.
pub fn initial_state(env: &FiniteMdp) -> usize {
    env.reset().map_or(0, |r| r.initial)
}

/// Runs `learner` on `env` for `horizon` steps from [`initial_state`].
pub fn run_learning<L: Learner + ?Sized>(
    env: &FiniteMdp,
    learner: &mut L,
    horizon: usize,
    seed: u64,
) -> LearnerTrace {
    let mut rng = seeded(seed);
    let mut trace = LearnerTrace {
        seed,
        states: Vec::with_capacity(horizon),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        episodes: Vec::with_capacity(horizon),
        reset_action: env.reset().map(|r| r.action),
    };
    let mut state = initial_state(env);
    for _ in 0..horizon {
        let action = learner.act(state);
        let (reward, next) = env.step(state, action, &mut rng);
        learner.observe(state, action, reward, next);
        trace.states.push(state);
        trace.actions.push(action);
        trace.rewards.push(reward);
        trace.episodes.push(learner.episode());
        state = next;
    }
    trace
}

/// States of the strongly connected component containing the initial state
/// once the reset action is removed.
pub fn optimal_subchain(env: &FiniteMdp) -> Result<Vec<usize>, OfuError> {
    let restricted = env.restrict_reset()?;
    let succ: Vec<Vec<usize>> = (0..restricted.n_states())
        .map(|s| restricted.successors(s))
        .collect();
    let start = initial_state(env);
    Ok(strongly_connected_components(&succ)
        .into_iter()
        .find(|c| c.contains(&start))
        .expect("every state lies in some component"))
}

/// Curves indexed by step `t = 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub rho_star: f64,
    pub optimal_subchain: Vec<usize>,
    /// `t ρ* − Σ_{u<t} R_u`.
    pub regret: Vec<f64>,
    pub cumulative_resets: Vec<usize>,
    pub running_average_resets: Vec<f64>,
    pub running_average_reward: Vec<f64>,
    /// Cumulative resets issued from states of the optimal subchain.
    pub subchain_resets: Vec<usize>,
}

impl RegretReport {
    pub fn final_regret(&self) -> f64 {
        self.regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_resets(&self) -> usize {
        self.cumulative_resets.last().copied().unwrap_or(0)
    }

    pub fn final_subchain_resets(&self) -> usize {
        self.subchain_resets.last().copied().unwrap_or(0)
    }

    pub fn final_average_reward(&self) -> f64 {
        self.running_average_reward.last().copied().unwrap_or(0.0)
    }
}

pub fn regret_report(trace: &LearnerTrace, env: &FiniteMdp) -> Result<RegretReport, OfuError> {
    let rho_star = optimal_gain(env)?[initial_state(env)];
    let subchain = optimal_subchain(env)?;
    let mut in_subchain = vec![false; env.n_states()];
    for &s in &subchain {
        in_subchain[s] = true;
    }
    let n = trace.len();
    let mut report = RegretReport {
        rho_star,
        optimal_subchain: subchain,
        regret: Vec::with_capacity(n),
        cumulative_resets: Vec::with_capacity(n),
        running_average_resets: Vec::with_capacity(n),
        running_average_reward: Vec::with_capacity(n),
        subchain_resets: Vec::with_capacity(n),
    };
    let (mut reward, mut resets, mut sub) = (0.0, 0, 0);
    for t in 0..n {
        reward += trace.rewards[t];
        if trace.is_reset(t) {
            resets += 1;
            if in_subchain[trace.states[t]] {
                sub += 1;
            }
        }
        let steps = (t + 1) as f64;
        report.regret.push(steps * rho_star - reward);
        report.cumulative_resets.push(resets);
        report.running_average_resets.push(resets as f64 / steps);
        report.running_average_reward.push(reward / steps);
        report.subchain_resets.push(sub);
    }
    Ok(report)
}

/// Whether adding the reset action raises the optimal gain of the initial
/// state above what the reset-free model achieves there.
pub fn reset_raises_initial_gain(env: &FiniteMdp) -> Result<bool, OfuError> {
    let s = initial_state(env);
    let with = optimal_gain(env)?[s];
    let without = optimal_gain(&env.restrict_reset()?)?[s];
    Ok(with > without + 1e-9)
}
