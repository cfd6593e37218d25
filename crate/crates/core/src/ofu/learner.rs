use serde::{Deserialize, Serialize};

use super::extended::{evi, EviConfig, ExtendedMdp};
use crate::mdp::ResetSpec;

/// An agent stepped in closed loop: `act` on the current state, then
/// `observe` the outcome.
pub trait Learner {
    fn act(&mut self, state: usize) -> usize;
    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize);
    /// Index of the current episode; 0 for agents without episodes.
    fn episode(&self) -> usize {
        0
    }
}

/// Plays a fixed deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPolicyLearner {
    policy: Vec<usize>,
}

impl FixedPolicyLearner {
    pub fn new(policy: Vec<usize>) -> Self {
        Self { policy }
    }
}

impl Learner for FixedPolicyLearner {
    fn act(&mut self, state: usize) -> usize {
        self.policy[state]
    }

    fn observe(&mut self, _: usize, _: usize, _: f64, _: usize) {}
}

/// Family of confidence sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceBound {
    /// Hoeffding reward intervals and an ℓ1 ball on transition rows.
    Hoeffding,
    /// Empirical Bernstein (Maurer and Pontil) intervals on the reward and
    /// on every transition probability separately.
    EmpiricalBernstein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ucrl2Config {
    pub delta: f64,
    pub bound: ConfidenceBound,
    /// Reset semantics handed to the learner: the reset action then gets
    /// zero-width confidence sets. `None` is plain UCRL2.
    pub known_reset: Option<ResetSpec>,
    /// Aperiodicity weight for extended value iteration.
    pub aperiodicity: f64,
}

impl Ucrl2Config {
    pub fn ucrl2(delta: f64) -> Self {
        Self {
            delta,
            bound: ConfidenceBound::Hoeffding,
            known_reset: None,
            aperiodicity: 0.9,
        }
    }

    pub fn ucrl2_bernstein(delta: f64) -> Self {
        Self {
            bound: ConfidenceBound::EmpiricalBernstein,
            ..Self::ucrl2(delta)
        }
    }

    pub fn reset_ucrl(delta: f64, reset: ResetSpec) -> Self {
        Self {
            known_reset: Some(reset),
            ..Self::ucrl2(delta)
        }
    }
}

/// UCRL2 with the doubling episode rule; Reset-UCRL when the config carries
/// reset semantics.
#[derive(Debug, Clone)]
pub struct Ucrl2 {
    n_states: usize,
    n_actions: usize,
    r_max: f64,
    config: Ucrl2Config,
    /// Visits before the current episode.
    counts: Vec<u64>,
    /// Visits within the current episode.
    episode_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    reward_sq_sums: Vec<f64>,
    transition_counts: Vec<u64>,
    policy: Option<Vec<usize>>,
    t: u64,
    episode: usize,
    evi_failures: usize,
    ext: ExtendedMdp,
}

impl Ucrl2 {
    pub fn new(n_states: usize, n_actions: usize, r_max: f64, config: Ucrl2Config) -> Self {
        let sa = n_states * n_actions;
        let mut ext = ExtendedMdp::new(n_states, n_actions, r_max);
        if let Some(reset) = config.known_reset {
            let mut row = vec![0.0; n_states];
            row[reset.initial] = 1.0;
            for s in 0..n_states {
                ext.mark_known_exact(s, reset.action, 0.0, &row);
            }
        }
        Self {
            n_states,
            n_actions,
            r_max,
            config,
            counts: vec![0; sa],
            episode_counts: vec![0; sa],
            reward_sums: vec![0.0; sa],
            reward_sq_sums: vec![0.0; sa],
            transition_counts: vec![0; sa * n_states],
            policy: None,
            t: 1,
            episode: 0,
            evi_failures: 0,
            ext,
        }
    }

    pub fn config(&self) -> &Ucrl2Config {
        &self.config
    }

    pub fn extended_mdp(&self) -> &ExtendedMdp {
        &self.ext
    }

    /// Episodes in which value iteration hit its cap and the previous
    /// policy was kept.
    pub fn evi_failures(&self) -> usize {
        self.evi_failures
    }

    fn log_term(&self, numerator: f64) -> f64 {
        (numerator * self.t as f64 / self.config.delta).ln()
    }

    pub fn reward_radius(&self, i: usize) -> f64 {
        let (s, a) = (self.n_states as f64, self.n_actions as f64);
        let n = self.counts[i];
        let nf = n.max(1) as f64;
        let log = self.log_term(2.0 * s * a);
        let hoeffding = self.r_max * (7.0 * log / (2.0 * nf)).sqrt();
        match self.config.bound {
            ConfidenceBound::Hoeffding => hoeffding,
            ConfidenceBound::EmpiricalBernstein if n < 2 => hoeffding,
            ConfidenceBound::EmpiricalBernstein => {
                let nf = n as f64;
                let mean = self.reward_sums[i] / nf;
                let var = ((self.reward_sq_sums[i] / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
                let bern =
                    (2.0 * var * log / nf).sqrt() + 7.0 * self.r_max * log / (3.0 * (nf - 1.0));
                bern.min(hoeffding)
            }
        }
    }

    /// Per-entry radii for the Bernstein sets.
    pub fn transition_entry_radii(&self, i: usize) -> Vec<f64> {
        let n = self.counts[i];
        let ns = self.n_states;
        if n < 2 {
            return vec![1.0; ns];
        }
        let nf = n as f64;
        let log = self.log_term(2.0 * (ns * ns * self.n_actions) as f64);
        self.transition_counts[i * ns..(i + 1) * ns]
            .iter()
            .map(|&c| {
                let p = c as f64 / nf;
                let var = p * (1.0 - p) * nf / (nf - 1.0);
                ((2.0 * var * log / nf).sqrt() + 7.0 * log / (3.0 * (nf - 1.0))).min(1.0)
            })
            .collect()
    }

    pub fn transition_radius(&self, i: usize) -> f64 {
        let nf = self.counts[i].max(1) as f64;
        let log = self.log_term(2.0 * self.n_actions as f64);
        (14.0 * self.n_states as f64 * log / nf).sqrt()
    }

    fn start_episode(&mut self) {
        for (n, nu) in self.counts.iter_mut().zip(&mut self.episode_counts) {
            *n += *nu;
            *nu = 0;
        }
        let n_states = self.n_states;
        for s in 0..n_states {
            for a in 0..self.n_actions {
                let i = s * self.n_actions + a;
                let n = self.counts[i];
                let (r_hat, p_hat) = if n == 0 {
                    (0.0, vec![1.0 / n_states as f64; n_states])
                } else {
                    let nf = n as f64;
                    let row = self.transition_counts[i * n_states..(i + 1) * n_states]
                        .iter()
                        .map(|&c| c as f64 / nf)
                        .collect();
                    (self.reward_sums[i] / nf, row)
                };
                let rr = self.reward_radius(i);
                self.ext.set_count(s, a, n);
                match self.config.bound {
                    ConfidenceBound::Hoeffding => {
                        let pr = self.transition_radius(i);
                        self.ext.set_entry(s, a, r_hat, rr, &p_hat, pr);
                    }
                    ConfidenceBound::EmpiricalBernstein => {
                        let radii = self.transition_entry_radii(i);
                        self.ext.set_entry_box(s, a, r_hat, rr, &p_hat, &radii);
                    }
                }
            }
        }
        let cfg = EviConfig {
            tolerance: self.r_max / (self.t as f64).sqrt(),
            max_iterations: 10_000_000,
            aperiodicity: self.config.aperiodicity,
        };
        match evi(&self.ext, cfg) {
            Ok(res) => self.policy = Some(res.policy),
            Err(_) => {
                self.evi_failures += 1;
                if self.policy.is_none() {
                    self.policy = Some(vec![0; n_states]);
                }
            }
        }
        self.episode += 1;
    }
}

impl Learner for Ucrl2 {
    fn act(&mut self, state: usize) -> usize {
        let need_new = match &self.policy {
            None => true,
            Some(pi) => {
                let i = state * self.n_actions + pi[state];
                self.episode_counts[i] >= self.counts[i].max(1)
            }
        };
        if need_new {
            self.start_episode();
        }
        self.policy.as_ref().expect("policy set")[state]
    }

    fn observe(&mut self, state: usize, action: usize, reward: f64, next: usize) {
        let i = state * self.n_actions + action;
        self.episode_counts[i] += 1;
        self.reward_sums[i] += reward;
        self.reward_sq_sums[i] += reward * reward;
        self.transition_counts[i * self.n_states + next] += 1;
        self.t += 1;
    }

    fn episode(&self) -> usize {
        self.episode
    }
}
