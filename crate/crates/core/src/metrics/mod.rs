//! Structural constants of chains and MDPs: hitting and recurrence times,
//! loop constants, diameter and maximum expected hitting cost.

mod sampling;
mod ssp;

pub use sampling::{
    cover_time_bound, return_time_tail_check, sample_cover_times, sample_return_times, TailCheck,
};
pub use ssp::{
    almost_sure_reach, diameter, hitting_cost_matrix, hitting_time_matrix, mehc, ssp_min_cost,
    SspSolution, ZERO_COST_TOL,
};

use crate::linalg::{Matrix, SingularMatrix};
use crate::mdp::{solve_discounted_values, subchain_decomposition, MarkovChain, MdpError, Mrp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("state {state} is not positive recurrent")]
    TransientState { state: usize },
    #[error("maximal expected hitting time of state {state} is infinite")]
    InfiniteTau { state: usize },
    #[error("some expected hitting time is infinite")]
    InfiniteEntries,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Singular(#[from] SingularMatrix),
}

/// Expected first-passage times into one target state.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingProfile {
    pub target: usize,
    /// `E_{s'}[H⁺]` for every start `s'`; at the target itself this is the
    /// expected return time. `+∞` where the target may never be reached.
    pub expected_hit_from: Vec<f64>,
    /// `ρ_s = E_s[H_s⁺]`.
    pub recurrence_time: f64,
    /// `τ_s`, the maximum over all start states.
    pub max_expected_hitting_time: f64,
    /// The maximum over the closed class containing the target, when the
    /// target is recurrent.
    pub class_max_expected_hitting_time: Option<f64>,
}

/// States from which `target` is hit with probability one, ignoring what
/// happens after the hit.
fn sure_hitters(chain: &MarkovChain, target: usize) -> Vec<bool> {
    let n = chain.n_states();
    // Backward reachability into the target.
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if !reach[s] && chain.row(s).iter().zip(&reach).any(|(&p, &r)| p > 0.0 && r) {
                reach[s] = true;
                changed = true;
            }
        }
    }
    // Anything that can slip (before the hit) into a state that cannot
    // reach the target misses it with positive probability.
    let mut ok = reach;
    changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if s != target
                && ok[s]
                && chain
                    .row(s)
                    .iter()
                    .enumerate()
                    .any(|(t, &p)| p > 0.0 && !ok[t])
            {
                ok[s] = false;
                changed = true;
            }
        }
    }
    ok
}

/// First-step analysis: `h(s') = 1 + Σ_{s''≠s} P[s'][s''] h(s'')`.
pub fn expected_hitting_times(
    chain: &MarkovChain,
    target: usize,
) -> Result<HittingProfile, MetricsError> {
    let n = chain.n_states();
    if target >= n {
        return Err(MetricsError::InvalidParameter(format!(
            "target {target} out of range"
        )));
    }
    let ok = sure_hitters(chain, target);
    let idx: Vec<usize> = (0..n).filter(|&s| s != target && ok[s]).collect();
    let mut h = vec![f64::INFINITY; n];
    if !idx.is_empty() {
        let m = idx.len();
        let mut a = Matrix::identity(m);
        for (i, &s) in idx.iter().enumerate() {
            for (j, &t) in idx.iter().enumerate() {
                a[(i, j)] -= chain.row(s)[t];
            }
        }
        for (&s, v) in idx.iter().zip(a.solve(&vec![1.0; m])?) {
            h[s] = v;
        }
    }
    // Return time from the target uses the same hitting times.
    let row = chain.row(target);
    let rho = if row
        .iter()
        .enumerate()
        .any(|(t, &p)| p > 0.0 && t != target && !ok[t])
    {
        f64::INFINITY
    } else {
        1.0 + row
            .iter()
            .enumerate()
            .filter(|&(t, &p)| t != target && p > 0.0)
            .map(|(t, &p)| p * h[t])
            .sum::<f64>()
    };
    h[target] = rho;
    let tau = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let decomp = subchain_decomposition(chain);
    let class_tau = decomp.class_of(target).map(|c| {
        decomp.classes[c]
            .iter()
            .map(|&s| h[s])
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(HittingProfile {
        target,
        expected_hit_from: h,
        recurrence_time: rho,
        max_expected_hitting_time: tau,
        class_max_expected_hitting_time: class_tau,
    })
}

/// `τ_s` for every state.
pub fn max_expected_hitting_times(chain: &MarkovChain) -> Result<Vec<f64>, MetricsError> {
    (0..chain.n_states())
        .map(|s| Ok(expected_hitting_times(chain, s)?.max_expected_hitting_time))
        .collect()
}

/// Constants of one loop at `s`: `α = E_s[γ^{H⁺}]` and `β`, the expected
/// discounted reward collected before the first return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConstants {
    pub alpha: f64,
    pub beta: f64,
}

impl LoopConstants {
    /// `v(s) = β / (1 − α)`.
    pub fn value(&self) -> f64 {
        self.beta / (1.0 - self.alpha)
    }
}

/// Exact loop constants from two linear systems over the states other
/// than `s`.
pub fn loop_constants(mrp: &Mrp, s: usize, gamma: f64) -> Result<LoopConstants, MetricsError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(MetricsError::InvalidParameter(format!(
            "discount {gamma} must lie in [0, 1)"
        )));
    }
    let chain = mrp.chain();
    if !expected_hitting_times(chain, s)?
        .recurrence_time
        .is_finite()
    {
        return Err(MetricsError::TransientState { state: s });
    }
    let n = mrp.n_states();
    let p = mrp.transition_matrix();
    let r = mrp.mean_rewards();
    let others: Vec<usize> = (0..n).filter(|&t| t != s).collect();
    let m = others.len();

    // f(t) = E_t[γ^{H_s}],  b(t) = E_t[Σ_{u < H_s} γ^u R_u]  for t ≠ s.
    let (f, b) = if m == 0 {
        (Vec::new(), Vec::new())
    } else {
        let mut a = Matrix::identity(m);
        let mut rhs_f = vec![0.0; m];
        let mut rhs_b = vec![0.0; m];
        for (i, &t) in others.iter().enumerate() {
            for (j, &u) in others.iter().enumerate() {
                a[(i, j)] -= gamma * p[(t, u)];
            }
            rhs_f[i] = gamma * p[(t, s)];
            rhs_b[i] = r[t];
        }
        let lu = a.lu()?;
        (lu.solve(&rhs_f), lu.solve(&rhs_b))
    };
    let mut alpha = gamma * p[(s, s)];
    let mut beta = r[s];
    for (i, &t) in others.iter().enumerate() {
        alpha += gamma * p[(s, t)] * f[i];
        beta += gamma * p[(s, t)] * b[i];
    }
    Ok(LoopConstants { alpha, beta })
}

/// Largest violation of the loop Bellman identity `v(s) = β(s)/(1 − α(s))`
/// over the recurrent states of `mrp`.
pub fn loop_bellman_residual(mrp: &Mrp, gamma: f64) -> Result<f64, MetricsError> {
    let v = solve_discounted_values(mrp, gamma)?;
    let decomp = subchain_decomposition(mrp);
    let mut worst = 0.0_f64;
    for &s in decomp.classes.iter().flatten() {
        let lc = loop_constants(mrp, s, gamma)?;
        worst = worst.max((lc.value() - v[s]).abs());
    }
    Ok(worst)
}

/// `Y[i][j] = E_i[H_j⁺]` for all pairs.
pub fn return_time_matrix(chain: &MarkovChain) -> Result<Matrix, MetricsError> {
    let n = chain.n_states();
    let mut y = Matrix::zeros(n, n);
    for j in 0..n {
        let prof = expected_hitting_times(chain, j)?;
        for i in 0..n {
            y[(i, j)] = prof.expected_hit_from[i];
        }
    }
    Ok(y)
}

/// `max |Y − P(Y − diag Y + E)|` where `E` is the all-ones matrix.
pub fn return_time_transition_identity(chain: &MarkovChain) -> Result<f64, MetricsError> {
    let y = return_time_matrix(chain)?;
    if y.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::InfiniteEntries);
    }
    let n = chain.n_states();
    let mut inner = y.clone();
    for i in 0..n {
        for j in 0..n {
            inner[(i, j)] += 1.0;
        }
        inner[(i, i)] -= y[(i, i)];
    }
    let rhs = chain.matrix().matmul(&inner);
    Ok(y.as_slice()
        .iter()
        .zip(rhs.as_slice())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_final_visit_mrps, make_mk_chain, make_riverswim_mrp};

    fn cycle2() -> Mrp {
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        Mrp::with_point_rewards(p, &[1.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn mk_chain_recurrence() {
        for k in [3, 5, 10, 20] {
            let prof = expected_hitting_times(&make_mk_chain(k).unwrap(), 0).unwrap();
            assert!((prof.recurrence_time - 2.0).abs() < 1e-10);
            assert!((prof.max_expected_hitting_time - (k - 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn self_loop() {
        let chain = MarkovChain::new(Matrix::identity(1)).unwrap();
        let prof = expected_hitting_times(&chain, 0).unwrap();
        assert_eq!(prof.recurrence_time, 1.0);
        assert_eq!(prof.max_expected_hitting_time, 1.0);
    }

    #[test]
    fn unreachable_targets_are_infinite() {
        let mrps = make_final_visit_mrps();
        let prof = expected_hitting_times(mrps.middle.chain(), 1).unwrap();
        // from s1 the chain may drift into s3 instead
        assert_eq!(prof.expected_hit_from[0], f64::INFINITY);
        assert_eq!(prof.expected_hit_from[2], f64::INFINITY);
        assert_eq!(prof.recurrence_time, 1.0);
        assert_eq!(prof.class_max_expected_hitting_time, Some(1.0));
        let transient = expected_hitting_times(mrps.middle.chain(), 0).unwrap();
        assert_eq!(transient.recurrence_time, f64::INFINITY);
    }

    #[test]
    fn riverswim_taus_are_integers_near_the_published_ones() {
        let taus = max_expected_hitting_times(make_riverswim_mrp().chain()).unwrap();
        let published = [752.0, 237.0, 68.0, 15.0, 17.0, 22.0];
        for (t, p) in taus.iter().zip(published) {
            assert!((t - p).abs() <= 1.0, "{t} vs {p}");
        }
    }

    #[test]
    fn loop_constants_on_two_cycle() {
        let lc = loop_constants(&cycle2(), 0, 0.5).unwrap();
        assert!((lc.alpha - 0.25).abs() < 1e-15);
        assert!((lc.beta - 1.0).abs() < 1e-15);
        assert!((lc.value() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn loop_constants_tiny_discount() {
        let mrp = make_riverswim_mrp();
        let lc = loop_constants(&mrp, 5, 1e-12).unwrap();
        assert!((lc.beta - 1.0).abs() < 1e-11);
        assert!((lc.value() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn transient_loop_is_an_error() {
        let mrp = make_final_visit_mrps().middle;
        assert_eq!(
            loop_constants(&mrp, 0, 0.9),
            Err(MetricsError::TransientState { state: 0 })
        );
    }

    #[test]
    fn y_identity_two_cycle() {
        let c = cycle2();
        let y = return_time_matrix(c.chain()).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(return_time_transition_identity(c.chain()).unwrap(), 0.0);
    }
}
