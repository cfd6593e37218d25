use super::OfuError;
use crate::linalg::span;
use crate::mdp::FiniteMdp;

/// Plausible-MDP set around empirical estimates.
///
/// Each `(s, a)` carries an empirical mean reward and transition row plus
/// radii: rewards range over `[r̂ − b, r̂ + b] ∩ [0, r_max]`, rows over the ℓ1
/// ball of the given radius around `p̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMdp {
    n_states: usize,
    n_actions: usize,
    r_max: f64,
    counts: Vec<u64>,
    r_hat: Vec<f64>,
    p_hat: Vec<f64>,
    r_radius: Vec<f64>,
    p_radius: Vec<f64>,
    /// Per-entry radii (S·A·S), used instead of the ℓ1 radius where
    /// `uses_box` is set.
    box_radius: Vec<f64>,
    uses_box: Vec<bool>,
    known_exact: Vec<bool>,
}

impl ExtendedMdp {
    /// No data: zero rewards, uniform rows, unbounded radii.
    pub fn new(n_states: usize, n_actions: usize, r_max: f64) -> Self {
        let sa = n_states * n_actions;
        Self {
            n_states,
            n_actions,
            r_max,
            counts: vec![0; sa],
            r_hat: vec![0.0; sa],
            p_hat: vec![1.0 / n_states as f64; sa * n_states],
            r_radius: vec![r_max; sa],
            p_radius: vec![2.0; sa],
            box_radius: vec![0.0; sa * n_states],
            uses_box: vec![false; sa],
            known_exact: vec![false; sa],
        }
    }

    /// Zero-width sets around the true mean rewards and transitions.
    pub fn from_truth(mdp: &FiniteMdp) -> Self {
        let mut ext = Self::new(mdp.n_states(), mdp.n_actions(), mdp.r_max());
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                ext.set_entry(s, a, mdp.mean_reward(s, a), 0.0, mdp.p(s, a), 0.0);
            }
        }
        ext
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

    fn idx(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Overwrites the estimates for `(s, a)`. Ignored for known-exact pairs.
    pub fn set_entry(
        &mut self,
        s: usize,
        a: usize,
        r_hat: f64,
        r_radius: f64,
        p_hat: &[f64],
        p_radius: f64,
    ) {
        let i = self.idx(s, a);
        if self.known_exact[i] {
            return;
        }
        debug_assert!(r_radius >= 0.0 && p_radius >= 0.0);
        self.r_hat[i] = r_hat;
        self.r_radius[i] = r_radius;
        self.p_radius[i] = p_radius;
        self.uses_box[i] = false;
        let n = self.n_states;
        self.p_hat[i * n..(i + 1) * n].copy_from_slice(p_hat);
    }

    /// Like [`set_entry`](Self::set_entry) but with a separate radius for
    /// every next-state probability.
    pub fn set_entry_box(
        &mut self,
        s: usize,
        a: usize,
        r_hat: f64,
        r_radius: f64,
        p_hat: &[f64],
        p_radii: &[f64],
    ) {
        let i = self.idx(s, a);
        if self.known_exact[i] {
            return;
        }
        let l1: f64 = p_radii.iter().sum();
        self.set_entry(s, a, r_hat, r_radius, p_hat, l1);
        let n = self.n_states;
        self.box_radius[i * n..(i + 1) * n].copy_from_slice(p_radii);
        self.uses_box[i] = true;
    }

    pub fn set_count(&mut self, s: usize, a: usize, n: u64) {
        let i = self.idx(s, a);
        self.counts[i] = n;
    }

    /// Pins `(s, a)` to a known reward and row with zero radii; later
    /// [`set_entry`](Self::set_entry) calls leave it unchanged.
    pub fn mark_known_exact(&mut self, s: usize, a: usize, reward: f64, row: &[f64]) {
        let i = self.idx(s, a);
        self.known_exact[i] = false;
        self.set_entry(s, a, reward, 0.0, row, 0.0);
        self.known_exact[i] = true;
    }

    pub fn is_known_exact(&self, s: usize, a: usize) -> bool {
        self.known_exact[self.idx(s, a)]
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[self.idx(s, a)]
    }

    pub fn r_hat(&self, s: usize, a: usize) -> f64 {
        self.r_hat[self.idx(s, a)]
    }

    pub fn p_hat(&self, s: usize, a: usize) -> &[f64] {
        let i = self.idx(s, a);
        &self.p_hat[i * self.n_states..(i + 1) * self.n_states]
    }

    pub fn reward_radius(&self, s: usize, a: usize) -> f64 {
        self.r_radius[self.idx(s, a)]
    }

    pub fn transition_radius(&self, s: usize, a: usize) -> f64 {
        self.p_radius[self.idx(s, a)]
    }

    pub fn optimistic_reward(&self, s: usize, a: usize) -> f64 {
        let i = self.idx(s, a);
        (self.r_hat[i] + self.r_radius[i]).min(self.r_max)
    }
}

/// States sorted by descending `u`, ties by ascending index.
pub fn descending_order(u: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&x, &y| u[y].total_cmp(&u[x]).then(x.cmp(&y)));
    order
}

/// Maximizes `p · u` over distributions with `|p(s) − p_hat(s)| ≤ radii[s]`.
///
/// Every entry starts at its lower bound; the leftover mass is poured into
/// states in `order` up to their upper bounds.
pub fn optimistic_row_box(p_hat: &[f64], radii: &[f64], order: &[usize]) -> Vec<f64> {
    let mut p: Vec<f64> = p_hat
        .iter()
        .zip(radii)
        .map(|(q, r)| (q - r).max(0.0))
        .collect();
    let mut left = 1.0 - p.iter().sum::<f64>();
    for &s in order {
        if left <= 0.0 {
            break;
        }
        let add = left.min((p_hat[s] + radii[s]).min(1.0) - p[s]);
        p[s] += add;
        left -= add;
    }
    p
}

/// Maximizes `p · u` over the ℓ1 ball of `radius` around `p_hat`.
///
/// `order` must list states by descending `u`. Mass `radius / 2` is moved
/// onto the best state and taken from the worst states first.
pub fn optimistic_row(p_hat: &[f64], radius: f64, order: &[usize]) -> Vec<f64> {
    let mut p = p_hat.to_vec();
    let best = order[0];
    p[best] = (p_hat[best] + radius / 2.0).min(1.0);
    let mut excess: f64 = p.iter().sum::<f64>() - 1.0;
    for &worst in order.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        if worst == best {
            continue;
        }
        let take = excess.min(p[worst]);
        p[worst] -= take;
        excess -= take;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EviConfig {
    /// Stop once `span(u_{i+1} − u_i)` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Weight `τ` in `u_{i+1} = (1 − τ) u_i + τ T u_i`; 1 disables the
    /// transform.
    pub aperiodicity: f64,
}

impl Default for EviConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 10_000_000,
            aperiodicity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EviResult {
    /// Greedy action per state for the final iterate.
    pub policy: Vec<usize>,
    pub values: Vec<f64>,
    /// Midpoint of the last increment range, rescaled by the transform.
    pub gain: f64,
    pub iterations: usize,
}

/// One Bellman step of the optimistic operator. Returns `(T u, greedy)`.
pub fn evi_step(ext: &ExtendedMdp, u: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let order = descending_order(u);
    let mut next = vec![0.0; ext.n_states];
    let mut greedy = vec![0; ext.n_states];
    for s in 0..ext.n_states {
        let mut best = f64::NEG_INFINITY;
        for a in 0..ext.n_actions {
            let i = ext.idx(s, a);
            let n = ext.n_states;
            let p = if ext.p_radius[i] == 0.0 {
                ext.p_hat(s, a).to_vec()
            } else if ext.uses_box[i] {
                optimistic_row_box(ext.p_hat(s, a), &ext.box_radius[i * n..(i + 1) * n], &order)
            } else {
                optimistic_row(ext.p_hat(s, a), ext.p_radius[i], &order)
            };
            let q = ext.optimistic_reward(s, a) + p.iter().zip(u).map(|(p, v)| p * v).sum::<f64>();
            if q > best {
                best = q;
                greedy[s] = a;
            }
        }
        next[s] = best;
    }
    (next, greedy)
}

/// Extended value iteration from `u_0 = 0`. `observe` sees every iterate
/// `u_1, u_2, …`.
pub fn evi_with(
    ext: &ExtendedMdp,
    config: EviConfig,
    mut observe: impl FnMut(&[f64]),
) -> Result<EviResult, OfuError> {
    let tau = config.aperiodicity;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(OfuError::InvalidParameter(format!(
            "aperiodicity {tau} must lie in (0, 1]"
        )));
    }
    let mut u = vec![0.0; ext.n_states];
    let mut last_span = f64::INFINITY;
    for it in 1..=config.max_iterations {
        let (tu, greedy) = evi_step(ext, &u);
        let next: Vec<f64> = tu
            .iter()
            .zip(&u)
            .map(|(t, v)| (1.0 - tau) * v + tau * t)
            .collect();
        observe(&next);
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        last_span = span(&diff);
        u = next;
        if last_span < config.tolerance {
            let hi = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = diff.iter().cloned().fold(f64::INFINITY, f64::min);
            return Ok(EviResult {
                policy: greedy,
                values: u,
                gain: (hi + lo) / 2.0 / tau,
                iterations: it,
            });
        }
    }
    Err(OfuError::NoConvergence {
        iterations: config.max_iterations,
        last_span,
    })
}

pub fn evi(ext: &ExtendedMdp, config: EviConfig) -> Result<EviResult, OfuError> {
    evi_with(ext, config, |_| {})
}

/// Spans of the first `iterations` plain EVI iterates `u_1, …`.
pub fn evi_spans(ext: &ExtendedMdp, iterations: usize) -> Vec<f64> {
    let mut u = vec![0.0; ext.n_states];
    (0..iterations)
        .map(|_| {
            u = evi_step(ext, &u).0;
            span(&u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_riverswim_mdp, make_shaping_toy, optimal_gain};

    #[test]
    fn inner_max_two_states() {
        let p = optimistic_row(&[0.5, 0.5], 0.2, &descending_order(&[0.0, 1.0]));
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn box_inner_max() {
        let p = optimistic_row_box(&[0.5, 0.5], &[0.1, 0.1], &descending_order(&[0.0, 1.0]));
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15);
        let q = optimistic_row_box(&[1.0, 0.0, 0.0], &[0.05, 0.3, 0.3], &[2, 1, 0]);
        assert!((q[0] - 0.95).abs() < 1e-15 && (q[2] - 0.05).abs() < 1e-15 && q[1] == 0.0);
    }

    #[test]
    fn inner_max_saturates() {
        let p = optimistic_row(&[0.3, 0.2, 0.5], 3.0, &descending_order(&[0.0, 2.0, 1.0]));
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_width_matches_optimal_gain() {
        let mdp = make_riverswim_mdp();
        let res = evi(&ExtendedMdp::from_truth(&mdp), EviConfig::default()).unwrap();
        let g = optimal_gain(&mdp).unwrap();
        assert!((res.gain - g[0]).abs() < 1e-8);
    }

    #[test]
    fn toy_greedy_policy() {
        let mdp = make_shaping_toy(0.11, 0.1, 0.05).unwrap();
        let res = evi(&ExtendedMdp::from_truth(&mdp), EviConfig::default()).unwrap();
        assert_eq!(res.policy, vec![1, 0]);
    }

    #[test]
    fn known_exact_is_sticky() {
        let mut ext = ExtendedMdp::new(2, 2, 1.0);
        ext.mark_known_exact(0, 1, 0.0, &[1.0, 0.0]);
        ext.set_entry(0, 1, 0.7, 0.3, &[0.5, 0.5], 1.0);
        assert_eq!(ext.r_hat(0, 1), 0.0);
        assert_eq!(ext.p_hat(0, 1), &[1.0, 0.0]);
        assert_eq!(ext.transition_radius(0, 1), 0.0);
    }

    #[test]
    fn aperiodicity_preserves_gain() {
        let mdp = make_riverswim_mdp();
        let cfg = EviConfig {
            aperiodicity: 0.5,
            ..EviConfig::default()
        };
        let a = evi(&ExtendedMdp::from_truth(&mdp), cfg).unwrap();
        let b = evi(&ExtendedMdp::from_truth(&mdp), EviConfig::default()).unwrap();
        assert!((a.gain - b.gain).abs() < 1e-8);
        assert_eq!(a.policy, b.policy);
    }
}
