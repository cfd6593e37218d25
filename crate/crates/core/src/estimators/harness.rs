//! Error-vs-step comparison of estimators on a known MRP.
//!
//! Each seed drives one path from state 0, identical to
//! [`sample_path`](crate::mdp::sample_path) with the same seed, and every
//! estimator consumes that same path. Errors are `|v̂(s) − v(s)| / max v`
//! with `v` from the exact Bellman solve. TD updates for the last `k + 1`
//! records before a checkpoint are still pending at that checkpoint.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_gamma, EstimatorError, LoopEstimatorAll, ModelBasedEstimator, TdEstimator, ValueEstimator,
};
use crate::mdp::{solve_discounted_values, Mrp};
use crate::rng::seeded;
use crate::stats;

/// Smallest checkpoint on the log-spaced grid.
pub const FIRST_CHECKPOINT: usize = 100;
pub const CHECKPOINT_COUNT: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorKind {
    /// One loop estimator per state; states without a completed loop read 0.
    LoopAllStates,
    ModelBased,
    Td {
        k: usize,
        d: f64,
    },
    /// Reports fixed values regardless of the data.
    Fixed(Vec<f64>),
}

impl EstimatorKind {
    pub fn label(&self) -> String {
        match self {
            Self::LoopAllStates => "loop".into(),
            Self::ModelBased => "model-based".into(),
            Self::Td { k, d } if *d == 1.0 => format!("td({k})"),
            Self::Td { k, d } => format!("td({k},d={d})"),
            Self::Fixed(_) => "fixed".into(),
        }
    }

    fn build(
        &self,
        n_states: usize,
        gamma: f64,
    ) -> Result<Box<dyn ValueEstimator>, EstimatorError> {
        Ok(match self {
            Self::LoopAllStates => Box::new(LoopEstimatorAll::new(n_states, gamma)?),
            Self::ModelBased => Box::new(ModelBasedEstimator::new(n_states, gamma)?),
            Self::Td { k, d } => Box::new(TdEstimator::new(n_states, gamma, *k, *d)?),
            Self::Fixed(v) => {
                if v.len() != n_states {
                    return Err(EstimatorError::InvalidParameter(format!(
                        "fixed estimate has {} entries for {n_states} states",
                        v.len()
                    )));
                }
                Box::new(Fixed(v.clone()))
            }
        })
    }
}

struct Fixed(Vec<f64>);

impl ValueEstimator for Fixed {
    fn observe(&mut self, _: usize, _: f64) {}

    fn values(&self) -> Vec<f64> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub estimator: String,
    pub seed: u64,
    /// Number of records consumed.
    pub step: usize,
    pub linf_error: f64,
    pub per_state_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub step: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub gamma: f64,
    pub checkpoints: Vec<usize>,
    pub exact_values: Vec<f64>,
    pub normalizer: f64,
    pub labels: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    fn rows_at<'a>(
        &'a self,
        label: &'a str,
        step: usize,
    ) -> impl Iterator<Item = &'a ComparisonRow> {
        self.rows
            .iter()
            .filter(move |r| r.estimator == label && r.step == step)
    }

    pub fn final_step(&self) -> usize {
        *self.checkpoints.last().expect("at least one checkpoint")
    }

    /// ℓ∞ errors of one estimator at `step`, one per seed.
    pub fn linf_errors(&self, label: &str, step: usize) -> Vec<f64> {
        self.rows_at(label, step).map(|r| r.linf_error).collect()
    }

    /// Median over seeds of the ℓ∞ error at the last checkpoint.
    pub fn final_median(&self, label: &str) -> f64 {
        stats::median(&self.linf_errors(label, self.final_step()))
    }

    /// Per-state `(mean, std)` of the error over seeds at `step`.
    pub fn per_state_error(&self, label: &str, step: usize) -> Vec<(f64, f64)> {
        let rows: Vec<&ComparisonRow> = self.rows_at(label, step).collect();
        let n = self.exact_values.len();
        (0..n)
            .map(|s| {
                let col: Vec<f64> = rows.iter().map(|r| r.per_state_errors[s]).collect();
                (stats::mean(&col), stats::std_dev(&col))
            })
            .collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for label in &self.labels {
            for &step in &self.checkpoints {
                let errs = self.linf_errors(label, step);
                out.push(SummaryRow {
                    estimator: label.clone(),
                    step,
                    mean: stats::mean(&errs),
                    std: stats::std_dev(&errs),
                    median: stats::median(&errs),
                });
            }
        }
        out
    }
}

/// Runs every estimator on one path per seed and records errors at each
/// checkpoint. Seeds run in parallel.
pub fn run_comparison(
    mrp: &Mrp,
    gamma: f64,
    horizon: usize,
    seeds: &[u64],
    kinds: &[EstimatorKind],
) -> Result<ComparisonTable, EstimatorError> {
    check_gamma(gamma)?;
    if horizon == 0 || seeds.is_empty() || kinds.is_empty() {
        return Err(EstimatorError::InvalidParameter(
            "horizon, seeds and estimators must be non-empty".into(),
        ));
    }
    let exact = solve_discounted_values(mrp, gamma)?;
    let max_v = exact.iter().cloned().fold(0.0, f64::max);
    let normalizer = if max_v > 0.0 { max_v } else { 1.0 };
    let checkpoints = stats::log_spaced(FIRST_CHECKPOINT, horizon, CHECKPOINT_COUNT);
    let n = mrp.n_states();
    for kind in kinds {
        kind.build(n, gamma)?;
    }

    let per_seed: Vec<Vec<ComparisonRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut ests: Vec<Box<dyn ValueEstimator>> = kinds
                .iter()
                .map(|k| k.build(n, gamma).expect("validated above"))
                .collect();
            let mut rows = Vec::with_capacity(kinds.len() * checkpoints.len());
            let mut rng = seeded(seed);
            let mut state = 0;
            let mut next_cp = 0;
            for t in 0..horizon {
                let (reward, next) = mrp.step(state, &mut rng);
                for e in &mut ests {
                    e.observe(state, reward);
                }
                state = next;
                if t + 1 == checkpoints[next_cp] {
                    for (kind, e) in kinds.iter().zip(&ests) {
                        let errs: Vec<f64> = e
                            .values()
                            .iter()
                            .zip(&exact)
                            .map(|(a, b)| (a - b).abs() / normalizer)
                            .collect();
                        rows.push(ComparisonRow {
                            estimator: kind.label(),
                            seed,
                            step: t + 1,
                            linf_error: errs.iter().cloned().fold(0.0, f64::max),
                            per_state_errors: errs,
                        });
                    }
                    next_cp += 1;
                    if next_cp == checkpoints.len() {
                        break;
                    }
                }
            }
            rows
        })
        .collect();

    Ok(ComparisonTable {
        gamma,
        checkpoints,
        exact_values: exact,
        normalizer,
        labels: kinds.iter().map(EstimatorKind::label).collect(),
        rows: per_seed.into_iter().flatten().collect(),
    })
}
