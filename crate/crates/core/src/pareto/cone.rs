use rayon::prelude::*;
use serde::Serialize;

use super::gain::MultiRewardMdp;
use super::lp::{maximize, Cmp, Constraint, LpOutcome};
use super::ParetoError;
use crate::mdp::StochasticPolicy;
use crate::rng::seeded_stream;

/// Entries of `π` at or below this are on the simplex boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// A common-ascent margin at or below this means no ascent direction.
pub const MARGIN_TOL: f64 = 1e-8;
/// Floor applied to policy entries after each step.
pub const POLICY_FLOOR: f64 = 1e-12;
/// Floor applied to the initial policy.
pub const INIT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Ascent {
    /// `direction` (flat `S·A`) raises every active gain at first order by
    /// at least `margin`.
    Found { direction: Vec<f64>, margin: f64 },
    /// No tangent direction raises all active gains; `margin` is the LP
    /// optimum.
    Infeasible { margin: f64 },
}

/// Solves `max m` s.t. `∇g_k · d ≥ m` for `k` in `active`, `Σ_a d[s,a] = 0`,
/// `‖d‖_∞ ≤ 1` and `d[s,a] ≥ 0` wherever `π(a|s)` is on the boundary.
pub fn common_ascent_direction(
    gradients: &[Vec<f64>],
    policy: &StochasticPolicy,
    active: &[usize],
) -> Result<Ascent, ParetoError> {
    if active.is_empty() {
        return Err(ParetoError::EmptyActiveSet);
    }
    let (n_s, n_a) = (policy.n_states(), policy.n_actions());
    let n = n_s * n_a;
    // d_i = x_i − o_i with o_i = 1 inside, 0 on the boundary; x_i ∈ [0, u_i].
    // m = y − big with y ∈ [0, 2·big].
    let offset: Vec<f64> = policy
        .as_slice()
        .iter()
        .map(|&p| if p <= BOUNDARY_TOL { 0.0 } else { 1.0 })
        .collect();
    let upper: Vec<f64> = offset.iter().map(|&o| 1.0 + o).collect();
    let big = active
        .iter()
        .map(|&k| gradients[k].iter().map(|g| g.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let mut cons = Vec::new();
    for &k in active {
        let g = &gradients[k];
        if g.len() != n || g.iter().any(|v| !v.is_finite()) {
            return Err(ParetoError::InvalidParameter(format!(
                "gradient {k} must have {n} finite entries"
            )));
        }
        let mut coeffs = g.clone();
        coeffs.push(-1.0);
        let rhs = g.iter().zip(&offset).map(|(a, b)| a * b).sum::<f64>() - big;
        cons.push(Constraint {
            coeffs,
            cmp: Cmp::Ge,
            rhs,
        });
    }
    for s in 0..n_s {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[s * n_a..(s + 1) * n_a].fill(1.0);
        cons.push(Constraint {
            coeffs,
            cmp: Cmp::Eq,
            rhs: offset[s * n_a..(s + 1) * n_a].iter().sum(),
        });
    }
    for (i, &u) in upper.iter().enumerate() {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[i] = 1.0;
        cons.push(Constraint {
            coeffs,
            cmp: Cmp::Le,
            rhs: u,
        });
    }
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    cons.push(Constraint {
        coeffs,
        cmp: Cmp::Le,
        rhs: 2.0 * big,
    });
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    match maximize(&obj, &cons)? {
        LpOutcome::Optimal { x, value } => {
            let margin = value - big;
            let direction: Vec<f64> = x[..n].iter().zip(&offset).map(|(a, b)| a - b).collect();
            if margin > MARGIN_TOL {
                Ok(Ascent::Found { direction, margin })
            } else {
                Ok(Ascent::Infeasible { margin })
            }
        }
        other => Err(ParetoError::LpNumericalFailure(format!(
            "bounded program reported {other:?}"
        ))),
    }
}

/// A run of steps with a fixed set of active objectives.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SteerPhase {
    /// Iterations spent in this phase; the last phase runs until the end.
    pub iterations: usize,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConfig {
    pub max_iterations: usize,
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Empty means every objective is active throughout.
    pub schedule: Vec<SteerPhase>,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            initial_step: 0.5,
            max_backtracks: 30,
            schedule: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoIterate {
    pub iteration: usize,
    pub policy: Vec<f64>,
    pub gains: Vec<f64>,
    #[serde(skip)]
    pub gradients: Vec<Vec<f64>>,
    pub lp_margin: f64,
    /// Step length accepted after this iterate; 0 for the last one.
    pub step: f64,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// No common-ascent direction at the final policy.
    LpInfeasible,
    LineSearchFailed,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeRun {
    pub iterates: Vec<ParetoIterate>,
    pub termination: Termination,
}

impl ConeRun {
    pub fn last(&self) -> &ParetoIterate {
        self.iterates.last().expect("at least one iterate")
    }

    pub fn final_policy(&self, n_actions: usize) -> StochasticPolicy {
        let p = &self.last().policy;
        StochasticPolicy::new(p.len() / n_actions, n_actions, p.clone())
            .expect("iterates are valid policies")
    }
}

fn floor_and_normalize(probs: &mut [f64], n_actions: usize, floor: f64) {
    for row in probs.chunks_mut(n_actions) {
        for p in row.iter_mut() {
            *p = p.max(floor);
        }
        let total: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= total;
        }
    }
}

fn to_policy(mdp: &MultiRewardMdp, probs: Vec<f64>) -> StochasticPolicy {
    let base = mdp.base();
    StochasticPolicy::new(base.n_states(), base.n_actions(), probs)
        .expect("normalized rows are distributions")
}

fn active_at(config: &ConeConfig, phase: usize, k: usize) -> Vec<usize> {
    config
        .schedule
        .get(phase)
        .map_or_else(|| (0..k).collect(), |p| p.active.clone())
}

/// Direct-cone ascent: repeatedly find a direction that raises every active
/// gain and take the largest halving step that does not lower any of them.
///
/// With a steering schedule, a phase also ends early when its LP becomes
/// infeasible; only infeasibility in the last phase stops the run.
pub fn direct_cone_optimize(
    mdp: &MultiRewardMdp,
    init: &StochasticPolicy,
    config: &ConeConfig,
) -> Result<ConeRun, ParetoError> {
    let k = mdp.n_objectives();
    for phase in &config.schedule {
        if phase.active.is_empty() {
            return Err(ParetoError::EmptyActiveSet);
        }
        if let Some(&bad) = phase.active.iter().find(|&&j| j >= k) {
            return Err(ParetoError::InvalidParameter(format!(
                "objective {bad} out of range for {k} tables"
            )));
        }
    }
    let n_a = mdp.base().n_actions();
    let mut probs = init.as_slice().to_vec();
    floor_and_normalize(&mut probs, n_a, INIT_FLOOR);
    let mut policy = to_policy(mdp, probs);
    let mut gains = mdp.gains(&policy)?;
    let mut iterates = Vec::new();
    let (mut phase, mut phase_start) = (0, 0);
    let last_phase = config.schedule.len().saturating_sub(1);

    for it in 0..config.max_iterations {
        if phase < last_phase && it - phase_start >= config.schedule[phase].iterations {
            phase += 1;
            phase_start = it;
        }
        let active = active_at(config, phase, k);
        let gradients = mdp.gradients(&policy)?;
        let ascent = common_ascent_direction(&gradients, &policy, &active)?;
        let mut record = ParetoIterate {
            iteration: it,
            policy: policy.as_slice().to_vec(),
            gains: gains.clone(),
            gradients,
            lp_margin: 0.0,
            step: 0.0,
            active: active.clone(),
        };
        let direction = match ascent {
            Ascent::Infeasible { margin } => {
                record.lp_margin = margin;
                iterates.push(record);
                if phase < last_phase {
                    phase += 1;
                    phase_start = it + 1;
                    continue;
                }
                return Ok(ConeRun {
                    iterates,
                    termination: Termination::LpInfeasible,
                });
            }
            Ascent::Found { direction, margin } => {
                record.lp_margin = margin;
                direction
            }
        };
        let mut step = config.initial_step;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let mut cand: Vec<f64> = policy
                .as_slice()
                .iter()
                .zip(&direction)
                .map(|(p, d)| p + step * d)
                .collect();
            floor_and_normalize(&mut cand, n_a, POLICY_FLOOR);
            let cand = to_policy(mdp, cand);
            if let Ok(g) = mdp.gains(&cand) {
                let no_drop = active.iter().all(|&j| g[j] >= gains[j] - 1e-12);
                let some_rise = active.iter().any(|&j| g[j] >= gains[j] + 1e-12);
                if no_drop && some_rise {
                    accepted = Some((cand, g));
                    break;
                }
            }
            step /= 2.0;
        }
        match accepted {
            Some((cand, g)) => {
                record.step = step;
                iterates.push(record);
                policy = cand;
                gains = g;
            }
            None => {
                iterates.push(record);
                return Ok(ConeRun {
                    iterates,
                    termination: Termination::LineSearchFailed,
                });
            }
        }
    }
    let gradients = mdp.gradients(&policy)?;
    iterates.push(ParetoIterate {
        iteration: config.max_iterations,
        policy: policy.as_slice().to_vec(),
        gains,
        gradients,
        lp_margin: f64::NAN,
        step: 0.0,
        active: active_at(config, phase, k),
    });
    Ok(ConeRun {
        iterates,
        termination: Termination::IterationCap,
    })
}

/// [`direct_cone_optimize`] under a steering schedule.
pub fn steer(
    mdp: &MultiRewardMdp,
    init: &StochasticPolicy,
    schedule: Vec<SteerPhase>,
    config: &ConeConfig,
) -> Result<ConeRun, ParetoError> {
    if schedule.is_empty() {
        return Err(ParetoError::EmptyActiveSet);
    }
    let cfg = ConeConfig {
        schedule,
        ..config.clone()
    };
    direct_cone_optimize(mdp, init, &cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainCloud {
    pub stochastic: Vec<Vec<f64>>,
    /// `(actions, gains)` for every deterministic policy.
    pub deterministic: Vec<(Vec<usize>, Vec<f64>)>,
    /// Policies skipped because their chain has several stationary
    /// distributions.
    pub degenerate: usize,
}

/// Upper limit on `A^S` for enumerating deterministic policies.
pub const MAX_DETERMINISTIC: usize = 100_000;

/// Gains of `n_stochastic` flat-Dirichlet policies (policy `i` drawn from
/// stream `i` of `seed`) and, optionally, of every deterministic policy.
pub fn sample_gain_cloud(
    mdp: &MultiRewardMdp,
    n_stochastic: usize,
    include_deterministic: bool,
    seed: u64,
) -> GainCloud {
    let (n_s, n_a) = (mdp.base().n_states(), mdp.base().n_actions());
    let stochastic: Vec<Option<Vec<f64>>> = (0..n_stochastic as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_stream(seed, i);
            mdp.gains(&StochasticPolicy::random(&mut rng, n_s, n_a))
                .ok()
        })
        .collect();
    let count = (n_a as f64).powi(n_s as i32);
    let deterministic: Vec<(Vec<usize>, Option<Vec<f64>>)> = if include_deterministic
        && count <= MAX_DETERMINISTIC as f64
    {
        let all: Vec<Vec<usize>> = StochasticPolicy::enumerate_deterministic(n_s, n_a).collect();
        all.into_par_iter()
            .map(|d| {
                let pi = StochasticPolicy::deterministic(n_a, &d).expect("valid actions");
                let g = mdp.gains(&pi).ok();
                (d, g)
            })
            .collect()
    } else {
        Vec::new()
    };
    let degenerate = stochastic.iter().filter(|g| g.is_none()).count()
        + deterministic.iter().filter(|(_, g)| g.is_none()).count();
    GainCloud {
        stochastic: stochastic.into_iter().flatten().collect(),
        deterministic: deterministic
            .into_iter()
            .filter_map(|(d, g)| g.map(|g| (d, g)))
            .collect(),
        degenerate,
    }
}
