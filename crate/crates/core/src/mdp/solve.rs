use super::structure::{end_components, subchain_decomposition, EndComponent};
use super::{induce_mrp, FiniteMdp, MdpError, Mrp, StochasticPolicy};
use crate::linalg::{dot, span, Matrix};

/// `is_recoverable` accepts optimal-gain spans up to this value.
pub const RECOVERABLE_TOL: f64 = 1e-9;

const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITERS: usize = 1_000_000;
const RVI_TOL: f64 = 1e-12;
const RVI_MAX_ITERS: usize = 10_000_000;
/// Self-loop weight of the aperiodicity transform used inside RVI.
const APERIODIC_TAU: f64 = 0.5;

/// Exact discounted values: solves `(I − γP) v = r̄`.
pub fn solve_discounted_values(mrp: &Mrp, gamma: f64) -> Result<Vec<f64>, MdpError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(MdpError::InvalidParameter(format!(
            "discount {gamma} must lie in [0, 1)"
        )));
    }
    let n = mrp.n_states();
    let p = mrp.transition_matrix();
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] -= gamma * p[(i, j)];
        }
    }
    Ok(a.solve(mrp.mean_rewards())?)
}

/// The unique stationary distribution of `p`.
///
/// Uniqueness is decided structurally: it holds iff the support graph has
/// exactly one closed class. The distribution then solves `σ(P − I) = 0`
/// with one equation replaced by `Σσ = 1`; if that system is numerically
/// singular, lazy power iteration takes over.
pub fn stationary_distribution(p: &Matrix) -> Result<Vec<f64>, MdpError> {
    check_square(p)?;
    if subchain_decomposition(p).classes.len() != 1 {
        return Err(MdpError::NonUniqueStationary);
    }
    let n = p.rows();
    let mut a = p.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    match a.solve(&rhs) {
        Ok(sigma) => Ok(clean_distribution(sigma)),
        Err(_) => stationary_distribution_iterative(p),
    }
}

/// Stationary distribution by power iteration on the lazy chain
/// `(P + I) / 2`, which shares its stationary distribution with `P` but is
/// aperiodic, so periodic chains converge too.
pub fn stationary_distribution_iterative(p: &Matrix) -> Result<Vec<f64>, MdpError> {
    check_square(p)?;
    if subchain_decomposition(p).classes.len() != 1 {
        return Err(MdpError::NonUniqueStationary);
    }
    let n = p.rows();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITERS {
        let xp = p.vec_mul(&x);
        let resid: f64 = xp.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        if resid <= POWER_TOL {
            return Ok(clean_distribution(xp));
        }
        for (xi, yi) in x.iter_mut().zip(&xp) {
            *xi = 0.5 * (*xi + yi);
        }
    }
    Err(MdpError::NoConvergence {
        what: "stationary power iteration",
        iterations: POWER_MAX_ITERS,
    })
}

fn check_square(p: &Matrix) -> Result<(), MdpError> {
    if p.is_square() && p.rows() > 0 {
        Ok(())
    } else {
        Err(MdpError::DimensionMismatch {
            what: "transition matrix columns",
            expected: p.rows(),
            got: p.cols(),
        })
    }
}

fn clean_distribution(mut x: Vec<f64>) -> Vec<f64> {
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}

/// Gain and bias of a unichain MRP, with `bias[reference] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainBias {
    pub gain: f64,
    pub bias: Vec<f64>,
    /// Smallest state of the recurrent class.
    pub reference: usize,
}

/// `g = σ·r̄`, and the bias solving `b = r̄ − g + P b`.
pub fn solve_gain_bias(mrp: &Mrp) -> Result<GainBias, MdpError> {
    let decomp = subchain_decomposition(mrp);
    if decomp.classes.len() != 1 {
        return Err(MdpError::MultichainInput {
            classes: decomp.classes.len(),
        });
    }
    let reference = decomp.classes[0][0];
    let p = mrp.transition_matrix();
    let r = mrp.mean_rewards();
    let gain = dot(&stationary_distribution(p)?, r);

    // Unknowns: b(s) for s ≠ reference, and g in the reference column.
    let n = mrp.n_states();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = if j == reference {
                1.0
            } else {
                f64::from(u8::from(i == j)) - p[(i, j)]
            };
        }
    }
    let mut bias = a.solve(r)?;
    bias[reference] = 0.0;
    Ok(GainBias {
        gain,
        bias,
        reference,
    })
}

/// Per-state gain of an arbitrary (possibly multichain) MRP.
///
/// Each closed class gets `σ_C · r̄_C`; transient states get the
/// absorption-weighted average of the class gains.
pub fn chain_gains_per_state(mrp: &Mrp) -> Result<Vec<f64>, MdpError> {
    let p = mrp.transition_matrix();
    let r = mrp.mean_rewards();
    let n = mrp.n_states();
    let decomp = subchain_decomposition(mrp);
    let mut g = vec![0.0; n];
    for class in &decomp.classes {
        let m = class.len();
        let mut sub = Matrix::zeros(m, m);
        for (i, &s) in class.iter().enumerate() {
            for (j, &t) in class.iter().enumerate() {
                sub[(i, j)] = p[(s, t)];
            }
        }
        let sigma = stationary_distribution(&sub)?;
        let gc: f64 = class.iter().zip(&sigma).map(|(&s, w)| w * r[s]).sum();
        for &s in class {
            g[s] = gc;
        }
    }
    let tr = &decomp.transient;
    if !tr.is_empty() {
        let m = tr.len();
        let mut a = Matrix::identity(m);
        let mut rhs = vec![0.0; m];
        for (i, &s) in tr.iter().enumerate() {
            for (j, &t) in tr.iter().enumerate() {
                a[(i, j)] -= p[(s, t)];
            }
            rhs[i] = decomp
                .classes
                .iter()
                .flatten()
                .map(|&t| p[(s, t)] * g[t])
                .sum();
        }
        for (&s, v) in tr.iter().zip(a.solve(&rhs)?) {
            g[s] = v;
        }
    }
    Ok(g)
}

/// Per-state gain of `policy` on `mdp`.
pub fn policy_gains_per_state(
    mdp: &FiniteMdp,
    policy: &StochasticPolicy,
) -> Result<Vec<f64>, MdpError> {
    chain_gains_per_state(&induce_mrp(mdp, policy)?)
}

/// Result of relative value iteration on a (weakly) communicating MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct RviSolution {
    pub gain: f64,
    /// Relative values, zero at the first state.
    pub values: Vec<f64>,
    /// Greedy action per state (lowest index among ties).
    pub policy: Vec<usize>,
    pub iterations: usize,
}

/// Relative value iteration with an aperiodicity transform.
///
/// Valid when the optimal gain is the same for every state (for instance,
/// when `mdp` is communicating); the returned gain is then accurate to
/// about `1e-12`.
pub fn relative_value_iteration(mdp: &FiniteMdp) -> Result<RviSolution, MdpError> {
    let ec = EndComponent {
        states: (0..mdp.n_states()).collect(),
        actions: (0..mdp.n_states())
            .map(|_| (0..mdp.n_actions()).collect())
            .collect(),
    };
    rvi_on(mdp, &ec)
}

/// `(action, reward, sparse row)` for one allowed action.
type LocalAction = (usize, f64, Vec<(usize, f64)>);

fn rvi_on(mdp: &FiniteMdp, ec: &EndComponent) -> Result<RviSolution, MdpError> {
    let m = ec.states.len();
    let local = |t: usize| ec.position(t);
    // Sparse rows restricted to the component, with local indices.
    let rows: Vec<Vec<LocalAction>> = ec
        .states
        .iter()
        .zip(&ec.actions)
        .map(|(&s, acts)| {
            acts.iter()
                .map(|&a| {
                    let row = mdp
                        .p(s, a)
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(t, &p)| (local(t).expect("action stays in component"), p))
                        .collect();
                    (a, mdp.mean_reward(s, a), row)
                })
                .collect()
        })
        .collect();

    let mut u = vec![0.0; m];
    let mut next = vec![0.0; m];
    let mut policy = vec![0; m];
    for it in 1..=RVI_MAX_ITERS {
        for i in 0..m {
            let mut best = f64::NEG_INFINITY;
            for (a, r, row) in &rows[i] {
                let ev: f64 = row.iter().map(|&(j, p)| p * u[j]).sum();
                let q = r + APERIODIC_TAU * ev + (1.0 - APERIODIC_TAU) * u[i];
                if q > best {
                    best = q;
                    policy[i] = *a;
                }
            }
            next[i] = best;
        }
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let (lo, hi) = diff
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
                (lo.min(d), hi.max(d))
            });
        let shift = next[0];
        for (ui, ni) in u.iter_mut().zip(&next) {
            *ui = ni - shift;
        }
        if hi - lo < RVI_TOL {
            return Ok(RviSolution {
                gain: 0.5 * (lo + hi),
                values: u,
                policy,
                iterations: it,
            });
        }
    }
    Err(MdpError::NoConvergence {
        what: "relative value iteration",
        iterations: RVI_MAX_ITERS,
    })
}

/// Optimal per-state gain `g*(s)` of an arbitrary finite MDP.
///
/// Each maximal end component is communicating, so relative value iteration
/// gives its optimal gain. A state's optimal gain is then the best value of
/// steering into some end component and staying there, computed by value
/// iteration on `v = max(h, max_a P_a v)` from below, where `h` is the
/// component gain on component states.
pub fn optimal_gain(mdp: &FiniteMdp) -> Result<Vec<f64>, MdpError> {
    let n = mdp.n_states();
    let ecs = end_components(mdp);
    let mut h = vec![f64::NEG_INFINITY; n];
    for ec in &ecs {
        let g = rvi_on(mdp, ec)?.gain;
        for &s in &ec.states {
            h[s] = g;
        }
    }
    let floor = h
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::INFINITY, f64::min);
    let mut v: Vec<f64> = h.iter().map(|&x| x.max(floor)).collect();
    for _ in 0..POWER_MAX_ITERS {
        let mut change = 0.0_f64;
        for s in 0..n {
            let mut best = h[s];
            for a in 0..mdp.n_actions() {
                best = best.max(dot(mdp.p(s, a), &v));
            }
            change = change.max(best - v[s]);
            v[s] = best;
        }
        if change <= 1e-15 {
            return Ok(v);
        }
    }
    Err(MdpError::NoConvergence {
        what: "optimal gain propagation",
        iterations: POWER_MAX_ITERS,
    })
}

/// An MDP is recoverable when its optimal gain does not depend on the state.
pub fn is_recoverable(mdp: &FiniteMdp) -> Result<bool, MdpError> {
    Ok(span(&optimal_gain(mdp)?) <= RECOVERABLE_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_final_visit_mrps, make_racetrack, make_riverswim_mrp, make_shaping_toy};

    fn cycle2(r: [f64; 2]) -> Mrp {
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        Mrp::with_point_rewards(p, &r, 1.0).unwrap()
    }

    #[test]
    fn absorbing_state_geometric_series() {
        let mrp = Mrp::with_point_rewards(Matrix::identity(1), &[1.0], 1.0).unwrap();
        let v = solve_discounted_values(&mrp, 0.9).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn final_visit_values() {
        let gamma = 0.9;
        let mrps = make_final_visit_mrps();
        let top = solve_discounted_values(&mrps.top, gamma).unwrap();
        let mid = solve_discounted_values(&mrps.middle, gamma).unwrap();
        let bot = solve_discounted_values(&mrps.bottom, gamma).unwrap();
        assert!((top[0] - gamma / (1.0 - gamma)).abs() < 1e-12);
        assert!((mid[0] - gamma / (2.0 * (1.0 - gamma))).abs() < 1e-12);
        assert_eq!(bot[0], 0.0);
    }

    #[test]
    fn periodic_chain_stationary() {
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        for sigma in [
            stationary_distribution(&p).unwrap(),
            stationary_distribution_iterative(&p).unwrap(),
        ] {
            assert!((sigma[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_has_many_stationary_distributions() {
        assert_eq!(
            stationary_distribution(&Matrix::identity(2)),
            Err(MdpError::NonUniqueStationary)
        );
    }

    #[test]
    fn direct_and_iterative_routes_agree_on_riverswim() {
        let p = make_riverswim_mrp().transition_matrix().clone();
        let a = stationary_distribution(&p).unwrap();
        let b = stationary_distribution_iterative(&p).unwrap();
        assert!(crate::linalg::sup_dist(&a, &b) < 1e-10);
    }

    #[test]
    fn gain_bias_small_cases() {
        let gb = solve_gain_bias(&cycle2([1.0, 0.0])).unwrap();
        assert!((gb.gain - 0.5).abs() < 1e-15);
        assert_eq!(gb.bias[0], 0.0);
        assert!((gb.bias[1] + 0.5).abs() < 1e-12);

        let p = Matrix::from_vec(3, 3, vec![1.0 / 3.0; 9]);
        let gb = solve_gain_bias(&Mrp::with_point_rewards(p, &[0.3; 3], 1.0).unwrap()).unwrap();
        assert!((gb.gain - 0.3).abs() < 1e-15);
        assert!(gb.bias.iter().all(|b| b.abs() < 1e-14));
    }

    #[test]
    fn multichain_gain_bias_is_rejected() {
        let mrp = make_final_visit_mrps().middle;
        assert!(matches!(
            solve_gain_bias(&mrp),
            Err(MdpError::MultichainInput { classes: 2 })
        ));
        let g = chain_gains_per_state(&mrp).unwrap();
        assert_eq!(g, vec![0.5, 1.0, 0.0]);
    }

    #[test]
    fn toy_optimal_gain() {
        let mdp = make_shaping_toy(0.11, 0.1, 0.05).unwrap();
        let g = optimal_gain(&mdp).unwrap();
        for x in g {
            assert!((x - 0.9).abs() < 1e-10);
        }
        assert!(is_recoverable(&mdp).unwrap());
    }

    #[test]
    fn racetrack_gains() {
        let mdp = make_racetrack(4, 2, 0.2).unwrap();
        assert!(is_recoverable(&mdp).unwrap());
        let restricted = make_racetrack(4, 2, 0.0).unwrap().restrict_reset().unwrap();
        let g = optimal_gain(&restricted).unwrap();
        assert!(g[..4].iter().all(|&x| (x - 0.25).abs() < 1e-10));
        assert!(g[4..].iter().all(|&x| x == 0.0));
        assert!(!is_recoverable(&restricted).unwrap());
    }
}
