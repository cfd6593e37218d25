use super::ParetoError;
use crate::linalg::Matrix;
use crate::mdp::{FiniteMdp, StochasticPolicy};

/// Below this the denominator determinant counts as zero.
pub const DEGENERATE_DET_TOL: f64 = 1e-12;

/// Shared dynamics with `K` mean-reward tables (flat `S·A`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRewardMdp {
    base: FiniteMdp,
    tables: Vec<Vec<f64>>,
}

impl MultiRewardMdp {
    /// Tables may be negative (a reset penalty, say) but must lie within
    /// `[−r_max, r_max]`.
    pub fn new(base: FiniteMdp, tables: Vec<Vec<f64>>) -> Result<Self, ParetoError> {
        if tables.is_empty() {
            return Err(ParetoError::InvalidParameter("no reward tables".into()));
        }
        let sa = base.n_states() * base.n_actions();
        for (k, t) in tables.iter().enumerate() {
            if t.len() != sa {
                return Err(ParetoError::InvalidParameter(format!(
                    "reward table {k} has {} entries, expected {sa}",
                    t.len()
                )));
            }
            if let Some(v) = t.iter().find(|v| v.is_nan() || v.abs() > base.r_max()) {
                return Err(ParetoError::InvalidParameter(format!(
                    "reward table {k} entry {v} exceeds r_max {}",
                    base.r_max()
                )));
            }
        }
        Ok(Self { base, tables })
    }

    pub fn base(&self) -> &FiniteMdp {
        &self.base
    }

    pub fn n_objectives(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, k: usize) -> &[f64] {
        &self.tables[k]
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    /// `P^π` and one `r^π_k` per table.
    pub fn induced(&self, policy: &StochasticPolicy) -> (Matrix, Vec<Vec<f64>>) {
        let (n, n_a) = (self.base.n_states(), self.base.n_actions());
        let mut p = Matrix::zeros(n, n);
        let mut r = vec![vec![0.0; n]; self.tables.len()];
        for s in 0..n {
            for a in 0..n_a {
                let w = policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                for (t, q) in self.base.p(s, a).iter().enumerate() {
                    p[(s, t)] += w * q;
                }
                for (rk, table) in r.iter_mut().zip(&self.tables) {
                    rk[s] += w * table[s * n_a + a];
                }
            }
        }
        (p, r)
    }

    /// Gain of every objective under `policy`.
    pub fn gains(&self, policy: &StochasticPolicy) -> Result<Vec<f64>, ParetoError> {
        let (p, r) = self.induced(policy);
        let den = ratio_matrix(&p, None).determinant();
        check_den(den)?;
        Ok(r.iter()
            .map(|rk| ratio_matrix(&p, Some(rk)).determinant() / den)
            .collect())
    }

    /// Gradient of gain `k` over the policy simplex, flat `S·A`: the
    /// derivative in the raw entries `π(a|s)` with each state's mean over
    /// actions removed, so `Σ_a ∇[s,a] = 0`.
    pub fn gradient(&self, policy: &StochasticPolicy, k: usize) -> Result<Vec<f64>, ParetoError> {
        Ok(self.gradients(policy)?.swap_remove(k))
    }

    /// Gradients of all gains, by Jacobi's formula on both determinants,
    /// projected as in [`gradient`](Self::gradient).
    ///
    /// Changing `π(a|s)` only touches row `s` of each matrix, so
    /// `∂det(A) = Σ_j C[s][j] ∂A[s][j]` with `C` the cofactor matrix.
    pub fn gradients(&self, policy: &StochasticPolicy) -> Result<Vec<Vec<f64>>, ParetoError> {
        let (n, n_a) = (self.base.n_states(), self.base.n_actions());
        let (p, r) = self.induced(policy);
        let a_den = ratio_matrix(&p, None);
        let den = a_den.determinant();
        check_den(den)?;
        let cof_den = a_den.cofactors();
        // ∂den/∂π(a|s): the last column is all ones and does not move.
        let d_den: Vec<f64> = (0..n * n_a)
            .map(|i| {
                let (s, a) = (i / n_a, i % n_a);
                let row = self.base.p(s, a);
                (0..n - 1).map(|j| cof_den[(s, j)] * row[j]).sum()
            })
            .collect();
        let mut out = Vec::with_capacity(self.tables.len());
        for (rk, table) in r.iter().zip(&self.tables) {
            let a_num = ratio_matrix(&p, Some(rk));
            let num = a_num.determinant();
            let cof = a_num.cofactors();
            let grad = (0..n * n_a)
                .map(|i| {
                    let (s, a) = (i / n_a, i % n_a);
                    let row = self.base.p(s, a);
                    let mut d_num: f64 = (0..n - 1).map(|j| cof[(s, j)] * row[j]).sum();
                    d_num += cof[(s, n - 1)] * table[i];
                    (d_num * den - num * d_den[i]) / (den * den)
                })
                .collect::<Vec<f64>>();
            out.push(project_tangent(grad, n_a));
        }
        Ok(out)
    }
}

fn project_tangent(mut g: Vec<f64>, n_actions: usize) -> Vec<f64> {
    for row in g.chunks_mut(n_actions) {
        let mean = row.iter().sum::<f64>() / n_actions as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    g
}

fn check_den(den: f64) -> Result<(), ParetoError> {
    if den.abs() <= DEGENERATE_DET_TOL || !den.is_finite() {
        Err(ParetoError::DegenerateChain { determinant: den })
    } else {
        Ok(())
    }
}

/// `P − I` with its last column replaced by `r` (or ones when `None`).
fn ratio_matrix(p: &Matrix, r: Option<&[f64]>) -> Matrix {
    let n = p.rows();
    let mut m = p.clone();
    for i in 0..n {
        m[(i, i)] -= 1.0;
        m[(i, n - 1)] = r.map_or(1.0, |r| r[i]);
    }
    m
}

/// Long-run average `σ · r` of the chain `p`, as a ratio of determinants.
pub fn gain_determinant(p: &Matrix, r: &[f64]) -> Result<f64, ParetoError> {
    if !p.is_square() || p.rows() != r.len() || r.is_empty() {
        return Err(ParetoError::InvalidParameter(format!(
            "matrix {}×{} with reward of length {}",
            p.rows(),
            p.cols(),
            r.len()
        )));
    }
    let den = ratio_matrix(p, None).determinant();
    check_den(den)?;
    Ok(ratio_matrix(p, Some(r)).determinant() / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_multireward_toy, stationary_distribution};

    #[test]
    fn symmetric_two_state() {
        for eps in [0.01, 0.3, 0.9] {
            let p = Matrix::from_rows(&[vec![1.0 - eps, eps], vec![eps, 1.0 - eps]]);
            assert!((gain_determinant(&p, &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn block_diagonal_is_degenerate() {
        let p = Matrix::identity(2);
        assert!(matches!(
            gain_determinant(&p, &[1.0, 0.0]),
            Err(ParetoError::DegenerateChain { .. })
        ));
    }

    #[test]
    fn toy_stay_policy_matches_stationary() {
        let (mdp, tables) = make_multireward_toy(0.1).unwrap();
        let m = MultiRewardMdp::new(mdp, tables).unwrap();
        let pi = StochasticPolicy::deterministic(2, &[1, 1]).unwrap();
        let (p, r) = m.induced(&pi);
        let sigma = stationary_distribution(&p).unwrap();
        let g = m.gains(&pi).unwrap();
        for k in 0..2 {
            let oracle: f64 = sigma.iter().zip(&r[k]).map(|(a, b)| a * b).sum();
            assert!((g[k] - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_reward_has_zero_gradient() {
        let (mdp, _) = make_multireward_toy(0.1).unwrap();
        let m = MultiRewardMdp::new(mdp, vec![vec![0.3; 4]]).unwrap();
        let pi = StochasticPolicy::uniform(2, 2);
        assert!(m.gradient(&pi, 0).unwrap().iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_tangent_differences() {
        let (mdp, tables) = make_multireward_toy(0.1).unwrap();
        let m = MultiRewardMdp::new(mdp, tables).unwrap();
        let pi = StochasticPolicy::new(2, 2, vec![0.3, 0.7, 0.6, 0.4]).unwrap();
        let grads = m.gradients(&pi).unwrap();
        let h = 1e-6;
        for s in 0..2 {
            let mut plus = pi.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[s * 2] += h;
            plus[s * 2 + 1] -= h;
            minus[s * 2] -= h;
            minus[s * 2 + 1] += h;
            let gp = m
                .gains(&StochasticPolicy::new(2, 2, plus).unwrap())
                .unwrap();
            let gm = m
                .gains(&StochasticPolicy::new(2, 2, minus).unwrap())
                .unwrap();
            for k in 0..2 {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                let an = grads[k][s * 2] - grads[k][s * 2 + 1];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
    }
}
