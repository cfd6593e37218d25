//! Stochastic shortest paths: minimum expected cost to reach a goal set.

use crate::linalg::Matrix;
use crate::mdp::{end_components_within, FiniteMdp};
use rayon::prelude::*;

const VI_TOL: f64 = 1e-10;
const VI_MAX_ITERS: usize = 10_000_000;
const PI_MAX_ROUNDS: usize = 1_000;

/// Actions whose cost is at most this count as free when looking for
/// zero-cost end components.
pub const ZERO_COST_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SspSolution {
    /// Minimum expected cost to the goal; `+∞` where no policy reaches it
    /// almost surely, `0` on the goal.
    pub values: Vec<f64>,
    /// A minimizing action, where one exists.
    pub policy: Vec<Option<usize>>,
    pub iterations: usize,
}

/// States from which some policy reaches `goal` with probability one.
pub fn almost_sure_reach(mdp: &FiniteMdp, goal: &[bool]) -> Vec<bool> {
    let n = mdp.n_states();
    let mut u = vec![true; n];
    loop {
        let mut r: Vec<bool> = goal.to_vec();
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if r[s] || !u[s] {
                    continue;
                }
                let hit = (0..mdp.n_actions()).any(|a| {
                    let row = mdp.p(s, a);
                    row.iter().zip(&u).all(|(&p, &inside)| p == 0.0 || inside)
                        && row.iter().zip(&r).any(|(&p, &good)| p > 0.0 && good)
                });
                if hit {
                    r[s] = true;
                    changed = true;
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Minimum expected cumulative cost (flat S·A table `cost ≥ 0`) until
/// entering `goal`.
///
/// Value iteration from zero brings the values close; policy iteration
/// started from the greedy policy then makes them exact to rounding.
pub fn ssp_min_cost(mdp: &FiniteMdp, goal: &[bool], cost: &[f64]) -> SspSolution {
    let (n, n_a) = (mdp.n_states(), mdp.n_actions());
    let u = almost_sure_reach(mdp, goal);
    let active: Vec<usize> = (0..n).filter(|&s| u[s] && !goal[s]).collect();
    let proper: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            (0..n_a)
                .filter(|&a| mdp.p(s, a).iter().zip(&u).all(|(&p, &ok)| p == 0.0 || ok))
                .collect()
        })
        .collect();
    let q = |s: usize, a: usize, v: &[f64]| -> f64 {
        let ev: f64 = mdp
            .p(s, a)
            .iter()
            .zip(v)
            .filter(|(&p, _)| p > 0.0)
            .map(|(p, x)| p * x)
            .sum();
        cost[s * n_a + a] + ev
    };
    let greedy = |s: usize, v: &[f64]| -> (usize, f64) {
        let mut best = (proper[s][0], f64::INFINITY);
        for &a in &proper[s] {
            let val = q(s, a, v);
            if val < best.1 {
                best = (a, val);
            }
        }
        best
    };

    let mut v: Vec<f64> = (0..n)
        .map(|s| if u[s] { 0.0 } else { f64::INFINITY })
        .collect();
    let mut iterations = 0;
    while iterations < VI_MAX_ITERS {
        iterations += 1;
        let mut change = 0.0_f64;
        let next: Vec<f64> = active.iter().map(|&s| greedy(s, &v).1).collect();
        for (&s, x) in active.iter().zip(next) {
            change = change.max((x - v[s]).abs());
            v[s] = x;
        }
        if change < VI_TOL {
            break;
        }
    }

    let mut policy: Vec<Option<usize>> = vec![None; n];
    for &s in &active {
        policy[s] = Some(greedy(s, &v).0);
    }
    let pos: Vec<Option<usize>> = {
        let mut pos = vec![None; n];
        for (i, &s) in active.iter().enumerate() {
            pos[s] = Some(i);
        }
        pos
    };
    for _ in 0..PI_MAX_ROUNDS {
        let m = active.len();
        if m == 0 {
            break;
        }
        let mut a_mat = Matrix::identity(m);
        let mut rhs = vec![0.0; m];
        for (i, &s) in active.iter().enumerate() {
            let a = policy[s].unwrap();
            rhs[i] = cost[s * n_a + a];
            for (t, &p) in mdp.p(s, a).iter().enumerate() {
                if let Some(j) = pos[t] {
                    a_mat[(i, j)] -= p;
                }
            }
        }
        // A singular system means the greedy policy is improper; keep the
        // value-iteration answer.
        let Ok(x) = a_mat.solve(&rhs) else { break };
        let mut exact = v.clone();
        for (&s, xi) in active.iter().zip(&x) {
            exact[s] = *xi;
        }
        let mut improved = false;
        for &s in &active {
            let cur = policy[s].unwrap();
            let (a, val) = greedy(s, &exact);
            if val < q(s, cur, &exact) - 1e-12 * exact[s].abs().max(1.0) {
                policy[s] = Some(a);
                improved = true;
            }
        }
        v = exact;
        if !improved {
            break;
        }
    }
    SspSolution {
        values: v,
        policy,
        iterations,
    }
}

fn unit_costs(mdp: &FiniteMdp) -> Vec<f64> {
    vec![1.0; mdp.n_states() * mdp.n_actions()]
}

fn hitting_costs(mdp: &FiniteMdp) -> Vec<f64> {
    mdp.mean_rewards()
        .iter()
        .map(|r| (mdp.r_max() - r).max(0.0))
        .collect()
}

/// `T[s][t]`: minimum over policies of the expected number of steps to
/// reach `t` from `s` (zero on the diagonal).
pub fn hitting_time_matrix(mdp: &FiniteMdp) -> Matrix {
    let costs = unit_costs(mdp);
    pairwise(mdp, &costs, &vec![false; mdp.n_states()])
}

/// `C[s][t]`: minimum over policies of the expected accumulated
/// `r_max − r̄` before reaching `t` from `s` (zero on the diagonal).
///
/// Wandering forever inside an end component whose actions all pay `r_max`
/// costs nothing, so such components count as reaching the target.
pub fn hitting_cost_matrix(mdp: &FiniteMdp) -> Matrix {
    let costs = hitting_costs(mdp);
    let n_a = mdp.n_actions();
    let free: Vec<Vec<usize>> = (0..mdp.n_states())
        .map(|s| {
            (0..n_a)
                .filter(|&a| costs[s * n_a + a] <= ZERO_COST_TOL)
                .collect()
        })
        .collect();
    let mut zero_cost = vec![false; mdp.n_states()];
    for ec in end_components_within(mdp, free) {
        for s in ec.states {
            zero_cost[s] = true;
        }
    }
    pairwise(mdp, &costs, &zero_cost)
}

fn pairwise(mdp: &FiniteMdp, cost: &[f64], extra_goal: &[bool]) -> Matrix {
    let n = mdp.n_states();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut goal = extra_goal.to_vec();
            goal[t] = true;
            ssp_min_cost(mdp, &goal, cost).values
        })
        .collect();
    let mut m = Matrix::zeros(n, n);
    for (t, col) in cols.iter().enumerate() {
        for s in 0..n {
            m[(s, t)] = if s == t { 0.0 } else { col[s] };
        }
    }
    m
}

fn max_off_diagonal(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut best = 0.0_f64;
    for s in 0..n {
        for t in 0..n {
            if s != t {
                best = best.max(m[(s, t)]);
            }
        }
    }
    best
}

/// Diameter: the largest minimum expected travel time between two states.
/// Infinite when the MDP is not communicating.
pub fn diameter(mdp: &FiniteMdp) -> f64 {
    max_off_diagonal(&hitting_time_matrix(mdp))
}

/// Maximum expected hitting cost `κ`.
pub fn mehc(mdp: &FiniteMdp) -> f64 {
    max_off_diagonal(&hitting_cost_matrix(mdp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_racetrack, make_shaping_toy};

    #[test]
    fn toy_diameter_and_mehc() {
        let mdp = make_shaping_toy(0.11, 0.1, 0.05).unwrap();
        assert!((diameter(&mdp) - 20.0).abs() < 1e-9);
        assert!((mehc(&mdp) - 2.2).abs() < 1e-9);
    }

    #[test]
    fn deterministic_cycle_diameter() {
        let n = 5;
        let mut b = FiniteMdp::builder(n, 1, 1.0);
        for s in 0..n {
            b = b.transition(s, 0, (s + 1) % n, 1.0);
        }
        assert_eq!(diameter(&b.build().unwrap()), (n - 1) as f64);
    }

    #[test]
    fn saturated_rewards_cost_nothing() {
        let mut b = FiniteMdp::builder(3, 1, 1.0);
        for s in 0..3 {
            b = b.transition(s, 0, (s + 1) % 3, 1.0).reward_mean(s, 0, 1.0);
        }
        assert_eq!(mehc(&b.build().unwrap()), 0.0);
    }

    #[test]
    fn racetrack_without_reset_has_infinite_diameter() {
        let mdp = make_racetrack(4, 2, 0.2).unwrap();
        assert!(diameter(&mdp).is_finite());
        assert_eq!(diameter(&mdp.restrict_reset().unwrap()), f64::INFINITY);
    }

    #[test]
    fn zero_cost_wandering_keeps_mehc_finite() {
        // Everything drains into an absorbing state paying r_max, so s1 is
        // unreachable from s0 and s2, yet every hitting cost stays bounded.
        let mdp = FiniteMdp::builder(3, 1, 1.0)
            .transition(0, 0, 2, 1.0)
            .transition(1, 0, 0, 1.0)
            .transition(2, 0, 2, 1.0)
            .reward_mean(2, 0, 1.0)
            .build()
            .unwrap();
        assert_eq!(diameter(&mdp), f64::INFINITY);
        assert_eq!(mehc(&mdp), 2.0);
    }
}
