//! Catalog of small benchmark environments.

use rand::Rng;

use super::{FiniteMdp, MarkovChain, MdpError, Mrp, RewardDist};
use crate::linalg::Matrix;
use crate::rng::flat_dirichlet;

fn riverswim_upstream_rows() -> Vec<Vec<f64>> {
    let n = 6;
    (0..n)
        .map(|s| {
            let mut row = vec![0.0; n];
            match s {
                0 => {
                    row[0] = 0.7;
                    row[1] = 0.3;
                }
                5 => {
                    row[4] = 0.7;
                    row[5] = 0.3;
                }
                _ => {
                    row[s - 1] = 0.1;
                    row[s] = 0.6;
                    row[s + 1] = 0.3;
                }
            }
            row
        })
        .collect()
}

/// RiverSwim closed under "always swim upstream": six states, reward 1 at
/// the last state and 0 elsewhere.
pub fn make_riverswim_mrp() -> Mrp {
    let mut rewards = vec![0.0; 6];
    rewards[5] = 1.0;
    Mrp::with_point_rewards(Matrix::from_rows(&riverswim_upstream_rows()), &rewards, 1.0)
        .expect("RiverSwim tables are valid")
}

/// Reward for swimming downstream at the first state.
pub const RIVERSWIM_SMALL_REWARD: f64 = 0.005;

/// RiverSwim with both actions. Action 0 swims downstream and always
/// succeeds (paying a small reward at the first state); action 1 swims
/// upstream with the dynamics of [`make_riverswim_mrp`] and pays 1 at the
/// last state.
pub fn make_riverswim_mdp() -> FiniteMdp {
    let up = riverswim_upstream_rows();
    let mut b = FiniteMdp::builder(6, 2, 1.0);
    for (s, row) in up.iter().enumerate() {
        b = b.transition(s, 0, s.saturating_sub(1), 1.0).row(s, 1, row);
    }
    b.reward_mean(0, 0, RIVERSWIM_SMALL_REWARD)
        .reward_mean(5, 1, 1.0)
        .build()
        .expect("RiverSwim tables are valid")
}

/// Two states, two actions. `a1` (index 0) stays put; `a2` (index 1) moves
/// to the other state with probability `epsilon`. Both actions pay
/// `1 − alpha` at `s1` and `1 − beta` at `s2`; `r_max = 1`.
pub fn make_shaping_toy(alpha: f64, beta: f64, epsilon: f64) -> Result<FiniteMdp, MdpError> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("epsilon", epsilon)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(MdpError::InvalidParameter(format!(
                "{name} = {v} must lie in [0, 1]"
            )));
        }
    }
    FiniteMdp::builder(2, 2, 1.0)
        .transition(0, 0, 0, 1.0)
        .row(0, 1, &[1.0 - epsilon, epsilon])
        .transition(1, 0, 1, 1.0)
        .row(1, 1, &[epsilon, 1.0 - epsilon])
        .reward_mean(0, 0, 1.0 - alpha)
        .reward_mean(0, 1, 1.0 - alpha)
        .reward_mean(1, 0, 1.0 - beta)
        .reward_mean(1, 1, 1.0 - beta)
        .build()
}

/// Index layout of the race-track MDP.
///
/// Track positions are states `0..l`, their crashed counterparts are
/// `l..2l`. Action 0 is the good action, actions `1..=k` always crash, and
/// action `k + 1` resets to the first track position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RacetrackLayout {
    pub l: usize,
    pub k: usize,
}

impl RacetrackLayout {
    pub fn n_states(&self) -> usize {
        2 * self.l
    }

    pub fn n_actions(&self) -> usize {
        self.k + 2
    }

    pub fn track(&self, i: usize) -> usize {
        i
    }

    pub fn crashed(&self, i: usize) -> usize {
        self.l + i
    }

    pub fn good_action(&self) -> usize {
        0
    }

    pub fn reset_action(&self) -> usize {
        self.k + 1
    }

    pub fn is_track(&self, s: usize) -> bool {
        s < self.l
    }
}

/// Race-track MDP with a reset action.
///
/// The good action advances around the track with probability `1 − delta`
/// and crashes otherwise; the other `k` actions crash. Crashed states are
/// absorbing except for reset. Completing a lap pays 1: every non-reset
/// action taken at the last track position yields reward 1.
pub fn make_racetrack(l: usize, k: usize, delta: f64) -> Result<FiniteMdp, MdpError> {
    if l < 2 {
        return Err(MdpError::InvalidParameter(format!(
            "track length {l} must be at least 2"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(MdpError::InvalidParameter(format!(
            "crash probability {delta} must lie in [0, 1]"
        )));
    }
    let lay = RacetrackLayout { l, k };
    let reset = lay.reset_action();
    let mut b = FiniteMdp::builder(lay.n_states(), lay.n_actions(), 1.0);
    for i in 0..l {
        let (here, crash) = (lay.track(i), lay.crashed(i));
        b = b
            .transition(here, 0, lay.track((i + 1) % l), 1.0 - delta)
            .transition(here, 0, crash, delta);
        for a in 1..=k {
            b = b.transition(here, a, crash, 1.0);
        }
        for a in 0..reset {
            b = b.transition(crash, a, crash, 1.0);
        }
        for s in [here, crash] {
            b = b.transition(s, reset, lay.track(0), 1.0);
        }
        if i == l - 1 {
            for a in 0..reset {
                b = b.reward(here, a, RewardDist::PointMass(1.0));
            }
        }
    }
    b.reset(reset, lay.track(0)).build()
}

/// Two states, two actions, two reward tables.
///
/// `a1` (index 0) switches state with probability `1 − epsilon`; `a2`
/// (index 1) stays with probability `1 − epsilon`. The first table pays 1
/// for staying at `s1`, the second for staying at `s2`. Returns the MDP
/// (with zero rewards) and the two flat S·A mean-reward tables.
pub fn make_multireward_toy(epsilon: f64) -> Result<(FiniteMdp, Vec<Vec<f64>>), MdpError> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(MdpError::InvalidParameter(format!(
            "epsilon = {epsilon} must lie in [0, 1]"
        )));
    }
    let mdp = FiniteMdp::builder(2, 2, 1.0)
        .row(0, 0, &[epsilon, 1.0 - epsilon])
        .row(0, 1, &[1.0 - epsilon, epsilon])
        .row(1, 0, &[1.0 - epsilon, epsilon])
        .row(1, 1, &[epsilon, 1.0 - epsilon])
        .build()?;
    let reward1 = vec![0.0, 1.0, 0.0, 0.0];
    let reward2 = vec![0.0, 0.0, 0.0, 1.0];
    Ok((mdp, vec![reward1, reward2]))
}

/// The chain `M_k`: `s1` keeps itself with probability `1 − 1/(k−1)`,
/// otherwise enters the deterministic cycle `s2 → … → sk → s1`.
pub fn make_mk_chain(k: usize) -> Result<MarkovChain, MdpError> {
    if k < 3 {
        return Err(MdpError::InvalidParameter(format!(
            "k = {k} must be at least 3"
        )));
    }
    let mut p = Matrix::zeros(k, k);
    let leave = 1.0 / (k - 1) as f64;
    p[(0, 0)] = 1.0 - leave;
    p[(0, 1)] = leave;
    for s in 1..k {
        p[(s, (s + 1) % k)] = 1.0;
    }
    MarkovChain::new(p)
}

/// Three MRPs whose first state is visited exactly once. Reward is 1 at
/// `s2` and 0 elsewhere.
#[derive(Debug, Clone)]
pub struct FinalVisitMrps {
    /// `s1' → s2`, `s2` absorbing. States: `[s1', s2]`.
    pub top: Mrp,
    /// `s1 → s2` or `s3` with probability ½ each. States: `[s1, s2, s3]`.
    pub middle: Mrp,
    /// `s1'' → s3`, `s3` absorbing. States: `[s1'', s3]`.
    pub bottom: Mrp,
}

pub fn make_final_visit_mrps() -> FinalVisitMrps {
    let top = Mrp::with_point_rewards(
        Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]),
        &[0.0, 1.0],
        1.0,
    );
    let middle = Mrp::with_point_rewards(
        Matrix::from_rows(&[
            vec![0.0, 0.5, 0.5],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]),
        &[0.0, 1.0, 0.0],
        1.0,
    );
    let bottom = Mrp::with_point_rewards(
        Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]),
        &[0.0, 0.0],
        1.0,
    );
    FinalVisitMrps {
        top: top.expect("valid"),
        middle: middle.expect("valid"),
        bottom: bottom.expect("valid"),
    }
}

/// Random row: each state joins the support with probability `density`,
/// `forced` always does, and weights are flat Dirichlet on the support.
fn random_row<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64, forced: usize) -> Vec<f64> {
    let support: Vec<usize> = (0..n)
        .filter(|&t| t == forced || rng.random::<f64>() < density)
        .collect();
    let w = flat_dirichlet(rng, support.len());
    let mut row = vec![0.0; n];
    for (t, p) in support.into_iter().zip(w) {
        row[t] = p;
    }
    row
}

/// Random irreducible chain: every row contains the edge `s → s + 1 (mod n)`
/// plus a random support of the given density.
pub fn make_random_chain<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> MarkovChain {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|s| random_row(rng, n, density, (s + 1) % n))
        .collect();
    MarkovChain::from_rows(&rows).expect("random rows are stochastic")
}

/// [`make_random_chain`] with point rewards uniform on `[0, 1]`, `r_max = 1`.
pub fn make_random_mrp<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> Mrp {
    let chain = make_random_chain(rng, n, density);
    let rewards: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    Mrp::with_point_rewards(chain.matrix().clone(), &rewards, 1.0).expect("rewards in [0, 1]")
}

/// Random communicating MDP with `r_max = 1`.
///
/// Action 0 always includes the cycle edge `s → s + 1 (mod n)`; other
/// actions get one forced random successor. Point rewards are uniform on
/// `[reward_lo, reward_hi]`.
pub fn make_random_mdp<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
    density: f64,
    reward_lo: f64,
    reward_hi: f64,
) -> FiniteMdp {
    let mut b = FiniteMdp::builder(n_states, n_actions, 1.0);
    for s in 0..n_states {
        for a in 0..n_actions {
            let forced = if a == 0 {
                (s + 1) % n_states
            } else {
                rng.random_range(0..n_states)
            };
            b = b.row(s, a, &random_row(rng, n_states, density, forced));
            let r = reward_lo + (reward_hi - reward_lo) * rng.random::<f64>();
            b = b.reward_mean(s, a, r);
        }
    }
    b.build().expect("random tables are valid")
}
