//! Monte-Carlo companions to the return-time tail bound and the cover-time
//! bound.

use super::{expected_hitting_times, max_expected_hitting_times, MetricsError};
use crate::mdp::MarkovChain;
use crate::rng::{seeded, seeded_stream};
use rayon::prelude::*;
use std::f64::consts::E;

/// Empirical `P[H⁺ ≥ t]` against the bound `e · exp(−t / (e τ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    pub tau: f64,
    pub t: Vec<usize>,
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bound: Vec<f64>,
    /// The `t` where the empirical tail exceeds the bound by more than three
    /// standard errors.
    pub flagged: Vec<usize>,
}

impl TailCheck {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Draws `n_samples` first return times to `s`, censoring at `cap` (a
/// censored draw is reported as `cap + 1`).
pub fn sample_return_times(
    chain: &MarkovChain,
    s: usize,
    n_samples: usize,
    cap: usize,
    seed: u64,
) -> Vec<usize> {
    let mut rng = seeded(seed);
    (0..n_samples)
        .map(|_| {
            let mut state = s;
            for t in 1..=cap {
                state = chain.step(state, &mut rng);
                if state == s {
                    return t;
                }
            }
            cap + 1
        })
        .collect()
}

/// Compares the empirical return-time tail at `t = 1..=horizon` with the
/// exponential bound built from `τ_s`.
pub fn return_time_tail_check(
    chain: &MarkovChain,
    s: usize,
    horizon: usize,
    n_samples: usize,
    seed: u64,
) -> Result<TailCheck, MetricsError> {
    let tau = expected_hitting_times(chain, s)?.max_expected_hitting_time;
    if !tau.is_finite() {
        return Err(MetricsError::InfiniteTau { state: s });
    }
    if n_samples == 0 || horizon == 0 {
        return Err(MetricsError::InvalidParameter(
            "need at least one sample and a positive horizon".into(),
        ));
    }
    let draws = sample_return_times(chain, s, n_samples, horizon, seed);
    // at_least[t] = #{H ≥ t}
    let mut hist = vec![0usize; horizon + 2];
    for h in draws {
        hist[h] += 1;
    }
    let mut at_least = vec![0usize; horizon + 2];
    let mut acc = 0;
    for t in (1..=horizon + 1).rev() {
        acc += hist[t];
        at_least[t] = acc;
    }
    let n = n_samples as f64;
    let mut out = TailCheck {
        tau,
        t: Vec::with_capacity(horizon),
        empirical: Vec::with_capacity(horizon),
        stderr: Vec::with_capacity(horizon),
        bound: Vec::with_capacity(horizon),
        flagged: Vec::new(),
    };
    for (t, &hits) in at_least.iter().enumerate().take(horizon + 1).skip(1) {
        let p = hits as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        let bound = E * (-(t as f64) / (E * tau)).exp();
        if p - 3.0 * se > bound {
            out.flagged.push(t);
        }
        out.t.push(t);
        out.empirical.push(p);
        out.stderr.push(se);
        out.bound.push(bound);
    }
    Ok(out)
}

/// With probability at least `1 − δ` the cover time is at most
/// `e · max_s τ_s · ln(e S / δ)`.
pub fn cover_time_bound(chain: &MarkovChain, delta: f64) -> Result<f64, MetricsError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MetricsError::InvalidParameter(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let taus = max_expected_hitting_times(chain)?;
    let (worst, tau) =
        taus.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (s, t)| {
                if t > best.1 {
                    (s, t)
                } else {
                    best
                }
            });
    if !tau.is_finite() {
        return Err(MetricsError::InfiniteTau { state: worst });
    }
    let n = chain.n_states() as f64;
    Ok(E * tau * (E * n / delta).ln())
}

/// Cover times `inf{t : {X_0..X_t} = S}` of `n_runs` independent runs from
/// `start`. Run `i` uses stream `i` of `seed`.
pub fn sample_cover_times(
    chain: &MarkovChain,
    start: usize,
    n_runs: usize,
    seed: u64,
) -> Vec<usize> {
    let n = chain.n_states();
    (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = seeded_stream(seed, run as u64);
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut remaining = n - 1;
            let mut state = start;
            let mut t = 0;
            while remaining > 0 {
                state = chain.step(state, &mut rng);
                t += 1;
                if !seen[state] {
                    seen[state] = true;
                    remaining -= 1;
                }
            }
            t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::mdp::make_mk_chain;

    #[test]
    fn self_loop_returns_immediately() {
        let chain = MarkovChain::new(Matrix::identity(1)).unwrap();
        let check = return_time_tail_check(&chain, 0, 5, 100, 1).unwrap();
        assert_eq!(check.empirical[0], 1.0);
        assert_eq!(check.empirical[1], 0.0);
        assert!(check.passed());
        assert_eq!(sample_cover_times(&chain, 0, 3, 0), vec![0, 0, 0]);
    }

    #[test]
    fn mk_return_times_take_two_values() {
        let chain = make_mk_chain(5).unwrap();
        let draws = sample_return_times(&chain, 0, 2000, 100, 3);
        assert!(draws.iter().all(|&h| h == 1 || h == 5));
        let mean = draws.iter().sum::<usize>() as f64 / draws.len() as f64;
        assert!((mean - 2.0).abs() < 0.2);
    }

    #[test]
    fn cover_times_are_reproducible() {
        let chain = make_mk_chain(5).unwrap();
        assert_eq!(
            sample_cover_times(&chain, 0, 50, 11),
            sample_cover_times(&chain, 0, 50, 11)
        );
    }
}
