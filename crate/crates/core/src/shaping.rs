//! Potential-based reward shaping and its effect on hitting costs.
//!
//! Shaping with a potential `φ` pays `r − φ(s) + φ(s')` on the transition
//! `s → s'`. The shift is stored in the MDP's per-transition reward
//! offsets, so sampled rewards depend on the realized next state.

use rand::Rng;
use serde::Serialize;

use crate::mdp::{
    optimal_gain, policy_gains_per_state, FiniteMdp, MdpError, StochasticPolicy, REWARD_BOUND_TOL,
};
use crate::metrics::mehc;
use crate::ofu::{evi_spans, ExtendedMdp};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapingError {
    #[error("shaped reward {value} on ({state}, {action}) → {next} leaves [0, r_max]")]
    BoundednessViolated {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    #[error("potential has {got} entries for {expected} states")]
    PotentialLength { expected: usize, got: usize },
    #[error("potential entry {0} is not finite")]
    NonFinitePotential(usize),
    #[error("models differ in {0}")]
    StructureMismatch(String),
    #[error("factor-two hypotheses fail ({reason}); κ = {kappa}, κ^φ = {kappa_shaped}")]
    PreconditionFailed {
        reason: String,
        kappa: f64,
        kappa_shaped: f64,
    },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

fn check_potential(mdp: &FiniteMdp, phi: &[f64]) -> Result<(), ShapingError> {
    if phi.len() != mdp.n_states() {
        return Err(ShapingError::PotentialLength {
            expected: mdp.n_states(),
            got: phi.len(),
        });
    }
    if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
        return Err(ShapingError::NonFinitePotential(i));
    }
    Ok(())
}

/// The shaped MDP `M^φ`. Transitions and reward distributions are kept; the
/// offsets gain `φ(s') − φ(s)`.
pub fn shape(mdp: &FiniteMdp, phi: &[f64]) -> Result<FiniteMdp, ShapingError> {
    check_potential(mdp, phi)?;
    let (n, n_a) = (mdp.n_states(), mdp.n_actions());
    let mut offsets = mdp.reward_offsets().to_vec();
    for s in 0..n {
        for a in 0..n_a {
            let (lo, hi) = mdp.reward(s, a).support();
            for t in 0..n {
                let i = (s * n_a + a) * n + t;
                offsets[i] += phi[t] - phi[s];
                if mdp.prob(s, a, t) <= 0.0 {
                    continue;
                }
                for value in [lo + offsets[i], hi + offsets[i]] {
                    if value < -REWARD_BOUND_TOL || value > mdp.r_max() + REWARD_BOUND_TOL {
                        return Err(ShapingError::BoundednessViolated {
                            state: s,
                            action: a,
                            next: t,
                            value,
                        });
                    }
                }
            }
        }
    }
    // A shaped reset pays φ(initial) − φ(s), so unless φ is constant the
    // reset action loses its zero-reward semantics.
    let reset = mdp
        .reset()
        .filter(|r| phi.iter().all(|&p| p == phi[r.initial]));
    Ok(FiniteMdp::new(
        n,
        n_a,
        mdp.transitions().to_vec(),
        mdp.rewards().to_vec(),
        Some(offsets),
        mdp.r_max(),
        reset,
    )?)
}

/// Largest gap in per-state gain between two models with the same
/// dynamics, over `n_policies` random stochastic policies plus every
/// deterministic policy when `S·A ≤ 12`.
pub fn check_pi_equivalence(
    m1: &FiniteMdp,
    m2: &FiniteMdp,
    n_policies: usize,
    seed: u64,
) -> Result<f64, ShapingError> {
    if m1.n_states() != m2.n_states() || m1.n_actions() != m2.n_actions() {
        return Err(ShapingError::StructureMismatch(
            "state or action count".into(),
        ));
    }
    let same_p = m1
        .transitions()
        .iter()
        .zip(m2.transitions())
        .all(|(a, b)| (a - b).abs() <= 1e-12);
    if !same_p {
        return Err(ShapingError::StructureMismatch("transition kernel".into()));
    }
    let (n, n_a) = (m1.n_states(), m1.n_actions());
    let mut policies = Vec::new();
    if n * n_a <= 12 {
        policies.extend(
            StochasticPolicy::enumerate_deterministic(n, n_a)
                .map(|d| StochasticPolicy::deterministic(n_a, &d).expect("valid actions")),
        );
    }
    let mut rng = seeded(seed);
    policies.extend((0..n_policies).map(|_| StochasticPolicy::random(&mut rng, n, n_a)));
    let mut gap = 0.0_f64;
    for pi in &policies {
        let g1 = policy_gains_per_state(m1, pi)?;
        let g2 = policy_gains_per_state(m2, pi)?;
        for (a, b) in g1.iter().zip(&g2) {
            gap = gap.max((a - b).abs());
        }
    }
    Ok(gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MehcShapingReport {
    pub kappa: f64,
    pub kappa_shaped: f64,
    pub ratio: f64,
}

impl MehcShapingReport {
    pub fn within_factor_two(&self) -> bool {
        (0.5..=2.0).contains(&self.ratio)
    }
}

/// MEHC before and after shaping. Fails with `PreconditionFailed` when
/// `κ = ∞` or the optimal gain reaches `r_max` somewhere; the error still
/// carries both values.
pub fn mehc_shaping_report(
    mdp: &FiniteMdp,
    phi: &[f64],
) -> Result<MehcShapingReport, ShapingError> {
    let shaped = shape(mdp, phi)?;
    let kappa = mehc(mdp);
    let kappa_shaped = mehc(&shaped);
    let g_max = optimal_gain(mdp)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let reason = if !kappa.is_finite() {
        Some("κ is infinite".to_string())
    } else if g_max >= mdp.r_max() - 1e-9 {
        Some(format!("optimal gain {g_max} is saturated"))
    } else {
        None
    };
    if let Some(reason) = reason {
        return Err(ShapingError::PreconditionFailed {
            reason,
            kappa,
            kappa_shaped,
        });
    }
    let ratio = if kappa == 0.0 {
        if kappa_shaped == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        kappa_shaped / kappa
    };
    Ok(MehcShapingReport {
        kappa,
        kappa_shaped,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanLemmaReport {
    pub kappa: f64,
    /// `span(u_i)` for `i = 1..=i_max`.
    pub spans: Vec<f64>,
    pub max_span: f64,
}

impl SpanLemmaReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.max_span <= self.kappa + slack
    }
}

/// Spans of extended value iteration on zero-width sets around `mdp`.
pub fn span_lemma_check(mdp: &FiniteMdp, i_max: usize) -> SpanLemmaReport {
    span_lemma_check_extended(&ExtendedMdp::from_truth(mdp), mehc(mdp), i_max)
}

/// Spans of extended value iteration on `ext`, compared with `kappa`.
/// The caller is responsible for `ext` containing the true model.
pub fn span_lemma_check_extended(ext: &ExtendedMdp, kappa: f64, i_max: usize) -> SpanLemmaReport {
    let spans = evi_spans(ext, i_max);
    let max_span = spans.iter().cloned().fold(0.0, f64::max);
    SpanLemmaReport {
        kappa,
        spans,
        max_span,
    }
}

/// Draws a potential under which `mdp` stays within `[0, r_max]`.
///
/// Starts from `φ` uniform on `[0, r_max/2]^S` and shrinks it toward its
/// mean by `0.9^k` for `k = 0..100`, returning the first admissible one.
pub fn sample_admissible_potential<R: Rng + ?Sized>(
    rng: &mut R,
    mdp: &FiniteMdp,
) -> Option<Vec<f64>> {
    let raw: Vec<f64> = (0..mdp.n_states())
        .map(|_| rng.random::<f64>() * mdp.r_max() / 2.0)
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let mut lambda = 1.0;
    for _ in 0..100 {
        let phi: Vec<f64> = raw.iter().map(|p| mean + lambda * (p - mean)).collect();
        if shape(mdp, &phi).is_ok() {
            return Some(phi);
        }
        lambda *= 0.9;
    }
    None
}

/// The potential from the shaping toy example: `φ(s1) = 0`,
/// `φ(s2) = (α − β) / (2ε)`.
pub fn toy_potential(alpha: f64, beta: f64, epsilon: f64) -> Vec<f64> {
    vec![0.0, (alpha - beta) / (2.0 * epsilon)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_racetrack, make_riverswim_mdp, make_shaping_toy};

    fn toy() -> FiniteMdp {
        make_shaping_toy(0.11, 0.1, 0.05).unwrap()
    }

    #[test]
    fn zero_potential_is_identity() {
        let m = toy();
        assert_eq!(shape(&m, &[0.0, 0.0]).unwrap(), m);
    }

    #[test]
    fn toy_shaped_mean_reward() {
        let m = shape(&toy(), &toy_potential(0.11, 0.1, 0.05)).unwrap();
        assert!((m.mean_reward(0, 1) - 0.895).abs() < 1e-12);
    }

    #[test]
    fn shaping_inverts() {
        let m = toy();
        let phi = toy_potential(0.11, 0.1, 0.05);
        let neg: Vec<f64> = phi.iter().map(|p| -p).collect();
        let back = shape(&shape(&m, &phi).unwrap(), &neg).unwrap();
        for (a, b) in back.mean_rewards().iter().zip(m.mean_rewards()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(back.transitions(), m.transitions());
    }

    #[test]
    fn violation_is_reported() {
        let err = shape(&toy(), &[0.0, 0.5]).unwrap_err();
        assert!(matches!(
            err,
            ShapingError::BoundednessViolated {
                state: 0,
                action: 1,
                next: 1,
                ..
            }
        ));
    }

    #[test]
    fn toy_mehc_report() {
        let rep = mehc_shaping_report(&toy(), &toy_potential(0.11, 0.1, 0.05)).unwrap();
        assert!((rep.kappa - 2.2).abs() < 1e-9);
        assert!((rep.kappa_shaped - 2.1).abs() < 1e-9);
    }

    #[test]
    fn constant_potential_keeps_kappa() {
        let rep = mehc_shaping_report(&toy(), &[0.05, 0.05]).unwrap();
        assert_eq!(rep.kappa, rep.kappa_shaped);
    }

    #[test]
    fn pi_equivalence_gaps() {
        let m = toy();
        let shaped = shape(&m, &toy_potential(0.11, 0.1, 0.05)).unwrap();
        assert!(check_pi_equivalence(&m, &shaped, 20, 1).unwrap() <= 1e-9);
        assert_eq!(check_pi_equivalence(&m, &m, 20, 1).unwrap(), 0.0);
        let halved = m
            .with_rewards(
                m.rewards()
                    .iter()
                    .map(|r| crate::mdp::RewardDist::PointMass(r.mean() / 2.0))
                    .collect(),
                m.reward_offsets().to_vec(),
                m.r_max(),
            )
            .unwrap();
        assert!(check_pi_equivalence(&m, &halved, 5, 1).unwrap() > 0.4);
    }

    #[test]
    fn mismatch_is_rejected() {
        let err = check_pi_equivalence(&toy(), &make_riverswim_mdp(), 1, 0).unwrap_err();
        assert!(matches!(err, ShapingError::StructureMismatch(_)));
    }

    #[test]
    fn toy_spans_bounded() {
        let rep = span_lemma_check(&toy(), 200);
        assert!(rep.holds(1e-9), "{} > {}", rep.max_span, rep.kappa);
    }

    #[test]
    fn riverswim_spans_bounded() {
        let rep = span_lemma_check(&make_riverswim_mdp(), 500);
        assert!(rep.holds(1e-9), "{} > {}", rep.max_span, rep.kappa);
    }

    #[test]
    fn reset_semantics_survive_constant_potentials() {
        let m = make_racetrack(4, 2, 0.2).unwrap();
        assert_eq!(shape(&m, &[0.3; 8]).unwrap().reset(), m.reset());
        let toy_reset = FiniteMdp::builder(2, 2, 1.0)
            .row(0, 0, &[0.5, 0.5])
            .row(1, 0, &[0.5, 0.5])
            .transition(0, 1, 0, 1.0)
            .transition(1, 1, 0, 1.0)
            .reward_mean(0, 0, 0.5)
            .reward_mean(1, 0, 0.5)
            .reset(1, 0)
            .build()
            .unwrap();
        assert_eq!(shape(&toy_reset, &[0.1, 0.0]).unwrap().reset(), None);
    }

    #[test]
    fn sampler_returns_admissible_potentials() {
        let mut rng = seeded(5);
        let m = toy();
        for _ in 0..20 {
            let phi = sample_admissible_potential(&mut rng, &m).unwrap();
            assert!(shape(&m, &phi).is_ok());
        }
    }
}
