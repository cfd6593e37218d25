use super::{check_gamma, EstimatorError, ValueEstimator};
use std::collections::VecDeque;

/// k-step temporal difference with learning rate `η = 1 / N(X_t)^d`.
///
/// The update for step `t` needs `R_t..R_{t+k}` and `X_{t+k+1}`, so it is
/// applied when record `t + k + 1` arrives. The last `k + 1` records of a
/// path therefore never produce an update.
#[derive(Debug, Clone, PartialEq)]
pub struct TdEstimator {
    k: usize,
    d: f64,
    gamma: f64,
    values: Vec<f64>,
    visits: Vec<u64>,
    /// `(state, reward, learning rate)` for records awaiting their update.
    window: VecDeque<(usize, f64, f64)>,
}

impl TdEstimator {
    /// `d` must lie in `[1/2, 1]`.
    pub fn new(n_states: usize, gamma: f64, k: usize, d: f64) -> Result<Self, EstimatorError> {
        check_gamma(gamma)?;
        if !(0.5..=1.0).contains(&d) {
            return Err(EstimatorError::InvalidParameter(format!(
                "learning-rate exponent {d} must lie in [0.5, 1]"
            )));
        }
        Ok(Self {
            k,
            d,
            gamma,
            values: vec![0.0; n_states],
            visits: vec![0; n_states],
            window: VecDeque::with_capacity(k + 2),
        })
    }

    pub fn update(&mut self, state: usize, reward: f64) {
        self.visits[state] += 1;
        let eta = (self.visits[state] as f64).powf(-self.d);
        self.window.push_back((state, reward, eta));
        if self.window.len() < self.k + 2 {
            return;
        }
        let mut target = 0.0;
        let mut disc = 1.0;
        for &(_, r, _) in self.window.iter().take(self.k + 1) {
            target += disc * r;
            disc *= self.gamma;
        }
        target += disc * self.values[state];
        let (s, _, eta) = self.window.pop_front().unwrap();
        self.values[s] = (1.0 - eta) * self.values[s] + eta * target;
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}

impl ValueEstimator for TdEstimator {
    fn observe(&mut self, state: usize, reward: f64) {
        self.update(state, reward);
    }

    fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}
