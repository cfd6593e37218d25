use super::{check_row, MdpError};
use crate::rng::{categorical, flat_dirichlet};
use rand::Rng;

/// A stationary Markov policy: one action distribution per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    /// `probs` is a flat S·A table whose rows must each sum to one.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if probs.len() != n_states * n_actions {
            return Err(MdpError::DimensionMismatch {
                what: "policy table",
                expected: n_states * n_actions,
                got: probs.len(),
            });
        }
        for s in 0..n_states {
            check_row(&probs[s * n_actions..(s + 1) * n_actions], || {
                format!("policy row {s}")
            })?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self, MdpError> {
        let n_states = actions.len();
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(MdpError::InvalidParameter(format!(
                    "action {a} at state {s} but only {n_actions} actions"
                )));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Each row drawn from the flat Dirichlet distribution.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> Self {
        let probs = (0..n_states)
            .flat_map(|_| flat_dirichlet(rng, n_actions))
            .collect();
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    /// Every deterministic policy, in lexicographic order of the action
    /// vector (state 0 varies slowest).
    pub fn enumerate_deterministic(n_states: usize, n_actions: usize) -> DeterministicPolicies {
        DeterministicPolicies {
            n_actions,
            next: Some(vec![0; n_states]),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.n_states).all(|s| self.row(s).iter().all(|&p| p == 0.0 || p == 1.0))
    }

    /// The action chosen at `s` if the row is a point mass.
    pub fn action_at(&self, s: usize) -> Option<usize> {
        let row = self.row(s);
        row.iter().position(|&p| p == 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        categorical(rng, self.row(s))
    }
}

/// Iterator over all `A^S` deterministic policies.
#[derive(Debug, Clone)]
pub struct DeterministicPolicies {
    n_actions: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for DeterministicPolicies {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.n_actions {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}
