use super::{check_row, FiniteMdp, MdpError, RewardDist, StochasticPolicy, REWARD_BOUND_TOL};
use crate::linalg::Matrix;
use crate::rng::categorical;
use rand::Rng;

/// A finite Markov chain given by a row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    p: Matrix,
}

impl MarkovChain {
    pub fn new(p: Matrix) -> Result<Self, MdpError> {
        if !p.is_square() || p.rows() == 0 {
            return Err(MdpError::DimensionMismatch {
                what: "transition matrix columns",
                expected: p.rows(),
                got: p.cols(),
            });
        }
        for s in 0..p.rows() {
            check_row(p.row(s), || format!("chain row {s}"))?;
        }
        Ok(Self { p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MdpError> {
        Self::new(Matrix::from_rows(rows))
    }

    pub fn n_states(&self) -> usize {
        self.p.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.p.row(s)
    }

    pub fn step<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        categorical(rng, self.p.row(s))
    }
}

/// One way a state can emit its reward: taken with probability `weight`,
/// it moves according to `row` and pays `reward` plus `offsets[next]`.
#[derive(Debug, Clone, PartialEq)]
struct Branch {
    weight: f64,
    row: Vec<f64>,
    reward: RewardDist,
    offsets: Option<Vec<f64>>,
}

/// A Markov reward process.
///
/// Each state carries a small mixture of branches so that an MRP induced by
/// a stochastic policy samples the action first, then the next state, then
/// the (possibly next-state-dependent) reward, exactly as the MDP would.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrp {
    chain: MarkovChain,
    mean_rewards: Vec<f64>,
    branches: Vec<Vec<Branch>>,
    r_max: f64,
}

impl Mrp {
    /// An MRP with one reward distribution per state.
    pub fn new(p: Matrix, rewards: Vec<RewardDist>, r_max: f64) -> Result<Self, MdpError> {
        let chain = MarkovChain::new(p)?;
        let n = chain.n_states();
        if rewards.len() != n {
            return Err(MdpError::DimensionMismatch {
                what: "state rewards",
                expected: n,
                got: rewards.len(),
            });
        }
        let branches = rewards
            .iter()
            .enumerate()
            .map(|(s, &reward)| {
                vec![Branch {
                    weight: 1.0,
                    row: chain.row(s).to_vec(),
                    reward,
                    offsets: None,
                }]
            })
            .collect();
        Self::assemble(chain, branches, r_max)
    }

    /// An MRP with deterministic per-state rewards.
    pub fn with_point_rewards(p: Matrix, rewards: &[f64], r_max: f64) -> Result<Self, MdpError> {
        Self::new(
            p,
            rewards.iter().map(|&r| RewardDist::PointMass(r)).collect(),
            r_max,
        )
    }

    fn assemble(
        chain: MarkovChain,
        branches: Vec<Vec<Branch>>,
        r_max: f64,
    ) -> Result<Self, MdpError> {
        if !(r_max.is_finite() && r_max >= 0.0) {
            return Err(MdpError::InvalidParameter(format!("r_max = {r_max}")));
        }
        let mean_rewards: Vec<f64> = branches
            .iter()
            .map(|bs| {
                bs.iter()
                    .map(|b| {
                        let shift = b
                            .offsets
                            .as_ref()
                            .map_or(0.0, |o| b.row.iter().zip(o).map(|(p, o)| p * o).sum());
                        b.weight * (b.reward.mean() + shift)
                    })
                    .sum()
            })
            .collect();
        for (s, &r) in mean_rewards.iter().enumerate() {
            if !(r >= -REWARD_BOUND_TOL && r <= r_max + REWARD_BOUND_TOL) {
                return Err(MdpError::RewardOutOfRange {
                    state: s,
                    action: 0,
                    next: s,
                    value: r,
                    r_max,
                });
            }
        }
        Ok(Self {
            chain,
            mean_rewards,
            branches,
            r_max,
        })
    }

    pub fn n_states(&self) -> usize {
        self.chain.n_states()
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn transition_matrix(&self) -> &Matrix {
        self.chain.matrix()
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_rewards
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Draws `(reward, next state)` from state `s`.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (f64, usize) {
        let bs = &self.branches[s];
        let b = if bs.len() == 1 {
            &bs[0]
        } else {
            let weights: Vec<f64> = bs.iter().map(|b| b.weight).collect();
            &bs[categorical(rng, &weights)]
        };
        let next = categorical(rng, &b.row);
        let shift = b.offsets.as_ref().map_or(0.0, |o| o[next]);
        (b.reward.sample(rng) + shift, next)
    }
}

/// Closes `mdp` under `policy`:
/// `P^π[s][s'] = Σ_a π(a|s) P[s,a,s']` and `r̄^π[s] = Σ_a π(a|s) r̄(s,a)`.
pub fn induce_mrp(mdp: &FiniteMdp, policy: &StochasticPolicy) -> Result<Mrp, MdpError> {
    let (n, n_a) = (mdp.n_states(), mdp.n_actions());
    if policy.n_states() != n || policy.n_actions() != n_a {
        return Err(MdpError::DimensionMismatch {
            what: "policy shape (S·A)",
            expected: n * n_a,
            got: policy.n_states() * policy.n_actions(),
        });
    }
    let mut p = Matrix::zeros(n, n);
    let mut branches = Vec::with_capacity(n);
    for s in 0..n {
        let mut bs = Vec::new();
        for a in 0..n_a {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            let row = mdp.p(s, a);
            for (dst, &q) in p.row_mut(s).iter_mut().zip(row) {
                *dst += w * q;
            }
            let offsets = mdp.offsets(s, a);
            bs.push(Branch {
                weight: w,
                row: row.to_vec(),
                reward: mdp.reward(s, a),
                offsets: offsets.iter().any(|&o| o != 0.0).then(|| offsets.to_vec()),
            });
        }
        // Mixing rows can leave the sum a few ulps from one.
        let sum: f64 = p.row(s).iter().sum();
        for x in p.row_mut(s) {
            *x /= sum;
        }
        branches.push(bs);
    }
    let chain = MarkovChain::new(p)?;
    Mrp::assemble(chain, branches, mdp.r_max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::make_shaping_toy;
    use crate::rng::seeded;

    #[test]
    fn toy_deterministic_policy() {
        let (alpha, beta, eps) = (0.11, 0.1, 0.05);
        let mdp = make_shaping_toy(alpha, beta, eps).unwrap();
        // a2 at s1 (index 1), a1 at s2 (index 0)
        let pi = StochasticPolicy::deterministic(2, &[1, 0]).unwrap();
        let mrp = induce_mrp(&mdp, &pi).unwrap();
        let p = mrp.transition_matrix();
        assert!((p[(0, 0)] - (1.0 - eps)).abs() < 1e-15);
        assert!((p[(0, 1)] - eps).abs() < 1e-15);
        assert_eq!(p.row(1), &[0.0, 1.0]);
        assert!((mrp.mean_rewards()[0] - (1.0 - alpha)).abs() < 1e-15);
        assert!((mrp.mean_rewards()[1] - (1.0 - beta)).abs() < 1e-15);
    }

    #[test]
    fn identical_actions_mix_to_same_row() {
        let mdp = FiniteMdp::builder(2, 2, 1.0)
            .row(0, 0, &[0.3, 0.7])
            .row(0, 1, &[0.3, 0.7])
            .row(1, 0, &[1.0, 0.0])
            .row(1, 1, &[1.0, 0.0])
            .build()
            .unwrap();
        let mrp = induce_mrp(&mdp, &StochasticPolicy::uniform(2, 2)).unwrap();
        assert_eq!(mrp.transition_matrix().row(0), &[0.3, 0.7]);
    }

    #[test]
    fn mrp_step_uses_branch_offsets() {
        let mdp = FiniteMdp::new(
            2,
            1,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![RewardDist::PointMass(0.0); 2],
            Some(vec![0.0, 0.5, 0.0, 0.0]),
            1.0,
            None,
        )
        .unwrap();
        let mrp = induce_mrp(&mdp, &StochasticPolicy::uniform(2, 1)).unwrap();
        let (r, next) = mrp.step(0, &mut seeded(0));
        assert_eq!((r, next), (0.5, 1));
        assert_eq!(mrp.mean_rewards(), &[0.5, 0.0]);
    }
}
