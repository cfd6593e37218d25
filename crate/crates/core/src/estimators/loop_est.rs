use super::{check_gamma, EstimatorError, ValueEstimator};

/// Loop estimator for one state, as an online fold.
///
/// A loop is the segment between consecutive visits to `target`. For loop
/// `i` with length `I_i` and discounted reward `G_i`, the estimator keeps the
/// running means `α̂ = mean γ^{I_i}` and `β̂ = mean G_i` and reports
/// `β̂ / (1 − α̂)`. Records before the first visit are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopEstimator {
    target: usize,
    gamma: f64,
    n_loops: u64,
    alpha_hat: f64,
    beta_hat: f64,
    in_loop: bool,
    /// `γ^u` where `u` is the number of steps taken in the current loop.
    discount: f64,
    /// Discounted reward collected in the current loop so far.
    partial: f64,
}

impl LoopEstimator {
    pub fn new(target: usize, gamma: f64) -> Result<Self, EstimatorError> {
        check_gamma(gamma)?;
        Ok(Self {
            target,
            gamma,
            n_loops: 0,
            alpha_hat: 0.0,
            beta_hat: 0.0,
            in_loop: false,
            discount: 1.0,
            partial: 0.0,
        })
    }

    pub fn update(&mut self, state: usize, reward: f64) {
        if state == self.target {
            if self.in_loop {
                self.n_loops += 1;
                let w = 1.0 / self.n_loops as f64;
                self.alpha_hat = w * self.discount + (1.0 - w) * self.alpha_hat;
                self.beta_hat = w * self.partial + (1.0 - w) * self.beta_hat;
            }
            self.in_loop = true;
            self.discount = 1.0;
            self.partial = 0.0;
        }
        if self.in_loop {
            self.partial += self.discount * reward;
            self.discount *= self.gamma;
        }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn n_loops(&self) -> u64 {
        self.n_loops
    }

    pub fn alpha_hat(&self) -> f64 {
        self.alpha_hat
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn estimate(&self) -> Result<f64, EstimatorError> {
        if self.n_loops == 0 {
            return Err(EstimatorError::NoCompletedLoops { state: self.target });
        }
        Ok(self.beta_hat / (1.0 - self.alpha_hat))
    }
}

/// One [`LoopEstimator`] per state. States with no completed loop report 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopEstimatorAll {
    per_state: Vec<LoopEstimator>,
}

impl LoopEstimatorAll {
    pub fn new(n_states: usize, gamma: f64) -> Result<Self, EstimatorError> {
        let per_state = (0..n_states)
            .map(|s| LoopEstimator::new(s, gamma))
            .collect::<Result<_, _>>()?;
        Ok(Self { per_state })
    }

    pub fn estimator(&self, s: usize) -> &LoopEstimator {
        &self.per_state[s]
    }
}

impl ValueEstimator for LoopEstimatorAll {
    fn observe(&mut self, state: usize, reward: f64) {
        for est in &mut self.per_state {
            est.update(state, reward);
        }
    }

    fn values(&self) -> Vec<f64> {
        self.per_state
            .iter()
            .map(|e| e.estimate().unwrap_or(0.0))
            .collect()
    }
}
