use super::{check_gamma, EstimatorError, ValueEstimator};
use crate::linalg::Matrix;

/// Plug-in estimator with add-one smoothing.
///
/// `P̂[s][s'] = (1/S + N(s→s')) / (1 + N_out(s))` and
/// `r̂[s] = Σ R_t 1[X_t = s] / (1 + N(s))`, where `N_out(s)` counts observed
/// transitions out of `s`, so each row of `P̂` sums to one exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBasedEstimator {
    n_states: usize,
    gamma: f64,
    transitions: Vec<u64>,
    out_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    visits: Vec<u64>,
    prev: Option<usize>,
}

impl ModelBasedEstimator {
    pub fn new(n_states: usize, gamma: f64) -> Result<Self, EstimatorError> {
        check_gamma(gamma)?;
        if n_states == 0 {
            return Err(EstimatorError::InvalidParameter("no states".into()));
        }
        Ok(Self {
            n_states,
            gamma,
            transitions: vec![0; n_states * n_states],
            out_counts: vec![0; n_states],
            reward_sums: vec![0.0; n_states],
            visits: vec![0; n_states],
            prev: None,
        })
    }

    pub fn update(&mut self, state: usize, reward: f64) {
        if let Some(p) = self.prev {
            self.transitions[p * self.n_states + state] += 1;
            self.out_counts[p] += 1;
        }
        self.visits[state] += 1;
        self.reward_sums[state] += reward;
        self.prev = Some(state);
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    pub fn transition_estimate(&self) -> Matrix {
        let n = self.n_states;
        let mut p = Matrix::zeros(n, n);
        for s in 0..n {
            let denom = 1.0 + self.out_counts[s] as f64;
            for t in 0..n {
                p[(s, t)] = (1.0 / n as f64 + self.transitions[s * n + t] as f64) / denom;
            }
        }
        p
    }

    pub fn reward_estimate(&self) -> Vec<f64> {
        self.reward_sums
            .iter()
            .zip(&self.visits)
            .map(|(r, &n)| r / (1.0 + n as f64))
            .collect()
    }

    /// `(I − γ P̂)^{-1} r̂`.
    pub fn estimate(&self) -> Vec<f64> {
        let n = self.n_states;
        let p = self.transition_estimate();
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= self.gamma * p[(i, j)];
            }
        }
        a.solve(&self.reward_estimate())
            .expect("I − γP̂ is invertible for γ < 1")
    }
}

impl ValueEstimator for ModelBasedEstimator {
    fn observe(&mut self, state: usize, reward: f64) {
        self.update(state, reward);
    }

    fn values(&self) -> Vec<f64> {
        self.estimate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_data_is_pure_smoothing() {
        let est = ModelBasedEstimator::new(2, 0.9).unwrap();
        let p = est.transition_estimate();
        assert_eq!(p.as_slice(), &[0.5; 4]);
        assert_eq!(est.estimate(), vec![0.0, 0.0]);
    }

    #[test]
    fn rows_sum_to_one() {
        let mut est = ModelBasedEstimator::new(3, 0.9).unwrap();
        for (s, r) in [(0, 0.1), (1, 0.0), (1, 0.5), (2, 1.0), (0, 0.0)] {
            est.update(s, r);
        }
        let p = est.transition_estimate();
        for s in 0..3 {
            assert!((p.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_cycle_converges() {
        let mut est = ModelBasedEstimator::new(2, 0.5).unwrap();
        for t in 0..100 {
            est.update(t % 2, if t % 2 == 0 { 1.0 } else { 0.0 });
        }
        let v = est.estimate();
        assert!((v[0] - 4.0 / 3.0).abs() < 0.05);
        assert!((v[1] - 2.0 / 3.0).abs() < 0.05);
    }
}
