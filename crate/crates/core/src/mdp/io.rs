//! JSON model files.
//!
//! ```json
//! {
//!   "n_states": 2, "n_actions": 1,
//!   "transitions": [0.0, 1.0, 1.0, 0.0],
//!   "rewards": [{"kind": "point", "params": [1.0]},
//!               {"kind": "bernoulli", "params": [0.5]}],
//!   "r_max": 1.0,
//!   "reset": null
//! }
//! ```
//!
//! `transitions` is the flat S·A·S table in row-major order. Reward kinds are
//! `point` (`[value]`), `bernoulli` (`[p]` paying `r_max`, or `[p, high]`)
//! and `uniform` (`[lo, hi]`). An optional `reward_offsets` S·A·S table
//! carries next-state-dependent reward shifts.

use super::{FiniteMdp, MdpError, ResetSpec, RewardDist};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Rows further than this from summing to one are rejected; closer rows are
/// renormalized.
pub const LOAD_ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetFields {
    pub action: usize,
    pub initial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub transitions: Vec<f64>,
    pub rewards: Vec<RewardSpec>,
    pub r_max: f64,
    #[serde(default)]
    pub reset: Option<ResetFields>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_offsets: Option<Vec<f64>>,
}

/// A base model plus K mean-reward tables, each flat S·A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiRewardFile {
    pub base: ModelFile,
    pub reward_tables: Vec<Vec<f64>>,
}

fn format_err(e: impl std::fmt::Display) -> MdpError {
    MdpError::Format(e.to_string())
}

impl RewardSpec {
    fn to_dist(&self, r_max: f64) -> Result<RewardDist, MdpError> {
        let bad = || {
            MdpError::Format(format!(
                "reward kind {:?} with params {:?}",
                self.kind, self.params
            ))
        };
        Ok(match (self.kind.as_str(), self.params.as_slice()) {
            ("point", &[v]) => RewardDist::PointMass(v),
            ("bernoulli", &[p]) => RewardDist::Bernoulli { p, high: r_max },
            ("bernoulli", &[p, high]) => RewardDist::Bernoulli { p, high },
            ("uniform", &[lo, hi]) => RewardDist::Uniform { lo, hi },
            _ => return Err(bad()),
        })
    }

    fn from_dist(d: RewardDist) -> Self {
        let (kind, params) = match d {
            RewardDist::PointMass(v) => ("point", vec![v]),
            RewardDist::Bernoulli { p, high } => ("bernoulli", vec![p, high]),
            RewardDist::Uniform { lo, hi } => ("uniform", vec![lo, hi]),
        };
        Self {
            kind: kind.into(),
            params,
        }
    }
}

impl ModelFile {
    pub fn into_mdp(mut self) -> Result<FiniteMdp, MdpError> {
        let n = self.n_states;
        if n == 0 || self.transitions.len() != n * self.n_actions * n {
            return Err(MdpError::Format(format!(
                "transitions has {} entries, expected {}",
                self.transitions.len(),
                n * self.n_actions * n
            )));
        }
        for (i, row) in self.transitions.chunks_mut(n).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > LOAD_ROW_TOL {
                return Err(MdpError::RowNotStochastic {
                    context: format!(
                        "transitions[{}, {}]",
                        i / self.n_actions,
                        i % self.n_actions
                    ),
                    sum,
                });
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        let rewards = self
            .rewards
            .iter()
            .map(|r| r.to_dist(self.r_max))
            .collect::<Result<Vec<_>, _>>()?;
        FiniteMdp::new(
            n,
            self.n_actions,
            self.transitions,
            rewards,
            self.reward_offsets,
            self.r_max,
            self.reset.map(|r| ResetSpec {
                action: r.action,
                initial: r.initial,
            }),
        )
    }

    pub fn from_mdp(mdp: &FiniteMdp) -> Self {
        let offsets = mdp.reward_offsets();
        Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            transitions: mdp.transitions().to_vec(),
            rewards: mdp
                .rewards()
                .iter()
                .map(|&d| RewardSpec::from_dist(d))
                .collect(),
            r_max: mdp.r_max(),
            reset: mdp.reset().map(|r| ResetFields {
                action: r.action,
                initial: r.initial,
            }),
            reward_offsets: offsets.iter().any(|&o| o != 0.0).then(|| offsets.to_vec()),
        }
    }
}

pub fn parse_model(json: &str) -> Result<FiniteMdp, MdpError> {
    serde_json::from_str::<ModelFile>(json)
        .map_err(format_err)?
        .into_mdp()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FiniteMdp, MdpError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| MdpError::Format(format!("{}: {e}", path.as_ref().display())))?;
    parse_model(&text)
}

pub fn model_to_json(mdp: &FiniteMdp) -> String {
    serde_json::to_string_pretty(&ModelFile::from_mdp(mdp)).expect("model serializes")
}

/// Parses a multi-reward file into the base MDP and its reward tables.
pub fn parse_multi_reward(json: &str) -> Result<(FiniteMdp, Vec<Vec<f64>>), MdpError> {
    let file: MultiRewardFile = serde_json::from_str(json).map_err(format_err)?;
    let mdp = file.base.into_mdp()?;
    Ok((mdp, file.reward_tables))
}

pub fn load_multi_reward(path: impl AsRef<Path>) -> Result<(FiniteMdp, Vec<Vec<f64>>), MdpError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| MdpError::Format(format!("{}: {e}", path.as_ref().display())))?;
    parse_multi_reward(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{make_racetrack, make_shaping_toy};

    #[test]
    fn round_trip() {
        for mdp in [
            make_racetrack(4, 2, 0.2).unwrap(),
            make_shaping_toy(0.11, 0.1, 0.05).unwrap(),
        ] {
            assert_eq!(parse_model(&model_to_json(&mdp)).unwrap(), mdp);
        }
    }

    #[test]
    fn near_stochastic_rows_are_renormalized() {
        let json = r#"{"n_states": 2, "n_actions": 1,
            "transitions": [0.3, 0.7000000001, 1.0, 0.0],
            "rewards": [{"kind": "point", "params": [0.0]},
                        {"kind": "bernoulli", "params": [0.5]}],
            "r_max": 2.0, "reset": null}"#;
        let mdp = parse_model(json).unwrap();
        let sum: f64 = mdp.p(0, 0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert_eq!(
            mdp.reward(1, 0),
            RewardDist::Bernoulli { p: 0.5, high: 2.0 }
        );
    }

    #[test]
    fn far_rows_are_rejected() {
        let json = r#"{"n_states": 1, "n_actions": 1, "transitions": [0.99],
            "rewards": [{"kind": "point", "params": [0.0]}], "r_max": 1.0}"#;
        assert!(matches!(
            parse_model(json),
            Err(MdpError::RowNotStochastic { .. })
        ));
    }

    #[test]
    fn unknown_reward_kind() {
        let json = r#"{"n_states": 1, "n_actions": 1, "transitions": [1.0],
            "rewards": [{"kind": "gaussian", "params": [0.0, 1.0]}], "r_max": 1.0}"#;
        assert!(matches!(parse_model(json), Err(MdpError::Format(_))));
    }
}
