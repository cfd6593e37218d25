//! Experiment configuration: one JSON document per run.
//!
//! ```json
//! {
//!   "kind": "evaluate",
//!   "env": { "name": "riverswim-mrp" },
//!   "seeds": { "count": 200 },
//!   "horizon": 100000,
//!   "params": { "gammas": [0.9, 0.99] },
//!   "checks": { "rate_pearson_min": 0.9 }
//! }
//! ```
//!
//! `params` and `checks` depend on `kind`; both may be omitted.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mdplab::pareto::SteerPhase;

/// Environment variable added to every seed.
pub const SEED_OFFSET_VAR: &str = "MDPLAB_SEED_OFFSET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Metrics,
    Evaluate,
    Shaping,
    Learn,
    Pareto,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Metrics => "metrics",
            Self::Evaluate => "evaluate",
            Self::Shaping => "shaping",
            Self::Learn => "learn",
            Self::Pareto => "pareto",
        }
    }
}

/// A named environment constructor or a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    Riverswim,
    RiverswimMrp,
    Racetrack {
        #[serde(default = "defaults::track_len")]
        l: usize,
        #[serde(default = "defaults::crash_states")]
        k: usize,
        #[serde(default = "defaults::crash_prob")]
        delta: f64,
    },
    ShapingToy {
        #[serde(default = "defaults::toy_alpha")]
        alpha: f64,
        #[serde(default = "defaults::toy_beta")]
        beta: f64,
        #[serde(default = "defaults::toy_epsilon")]
        epsilon: f64,
    },
    MultirewardToy {
        #[serde(default = "defaults::multi_epsilon")]
        epsilon: f64,
    },
    /// `k` states: the first lingers with probability `1 − 1/(k−1)`, the
    /// rest form a deterministic cycle through it.
    Mk {
        k: usize,
    },
    /// Three states; the first is never revisited.
    FinalVisit,
    /// A model file, or a multi-reward file for `pareto`.
    File {
        path: PathBuf,
    },
}

/// How a multi-action model is turned into a chain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySpec {
    #[default]
    Uniform,
    /// One action per state.
    Actions(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SeedSpec {
    List(Vec<u64>),
    Range {
        #[serde(default)]
        from: u64,
        count: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    env: EnvSpec,
    seeds: SeedSpec,
    horizon: usize,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    params: Option<serde_json::Value>,
    #[serde(default)]
    checks: Option<serde_json::Value>,
}

// ---------------------------------------------------------------- metrics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsParams {
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default = "defaults::delta")]
    pub cover_delta: f64,
    #[serde(default = "defaults::cover_runs")]
    pub cover_runs: usize,
    #[serde(default)]
    pub cover_start: usize,
    /// Return-time draws per state; 0 skips the tail check.
    #[serde(default)]
    pub tail_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsChecks {
    #[serde(default)]
    pub tau_reference: Option<Vec<f64>>,
    #[serde(default = "defaults::tau_tolerance")]
    pub tau_tolerance: f64,
    /// The `1 − δ` quantile of the sampled cover times stays below the bound.
    #[serde(default)]
    pub cover_within_bound: bool,
    /// No tail point exceeds the bound by more than three standard errors.
    #[serde(default)]
    pub tail_within_bound: bool,
}

// --------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Loop,
    ModelBased,
    Td {
        #[serde(default)]
        k: usize,
        #[serde(default = "defaults::one")]
        d: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateParams {
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default = "defaults::gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "defaults::estimators")]
    pub estimators: Vec<EstimatorSpec>,
}

/// Median final error of `better` is at most that of `worse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingCheck {
    /// Every discount when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub better: String,
    pub worse: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateChecks {
    /// Minimum Pearson correlation between `√τ_s` and the loop estimator's
    /// mean final error at `s`.
    #[serde(default)]
    pub rate_pearson_min: Option<f64>,
    /// Discount for the correlation check; the first one when absent.
    #[serde(default)]
    pub rate_gamma: Option<f64>,
    #[serde(default)]
    pub orderings: Vec<OrderingCheck>,
}

// ---------------------------------------------------------------- shaping

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Values(Vec<f64>),
    File {
        file: PathBuf,
    },
    /// The potential from the shaping toy example.
    Toy {
        toy: ToyPotential,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyPotential {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

/// Random MDPs and admissible potentials, one per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTrials {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(default = "defaults::density")]
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingParams {
    pub potential: PotentialSpec,
    #[serde(default = "defaults::pi_policies")]
    pub pi_policies: usize,
    #[serde(default)]
    pub random_trials: Option<RandomTrials>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingChecks {
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub kappa_shaped: Option<f64>,
    #[serde(default = "defaults::value_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub pi_equiv_max_gap: Option<f64>,
    /// Every random trial keeps `κ'/κ` within `[1/2, 2]`.
    #[serde(default)]
    pub factor_two: bool,
    /// Extended value iteration spans stay below `κ` plus this slack.
    #[serde(default)]
    pub span_slack: Option<f64>,
}

impl Default for ShapingChecks {
    fn default() -> Self {
        Self {
            kappa: None,
            kappa_shaped: None,
            tolerance: defaults::value_tolerance(),
            pi_equiv_max_gap: None,
            factor_two: false,
            span_slack: None,
        }
    }
}

// ------------------------------------------------------------------ learn

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentSpec {
    Ucrl2,
    Ucrl2Bernstein,
    ResetUcrl,
    ResetUcrlBernstein,
}

impl AgentSpec {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ucrl2 => "ucrl2",
            Self::Ucrl2Bernstein => "ucrl2-bernstein",
            Self::ResetUcrl => "reset-ucrl",
            Self::ResetUcrlBernstein => "reset-ucrl-bernstein",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .with_context(|| format!("unknown agent {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnParams {
    #[serde(default = "defaults::agents")]
    pub agents: Vec<AgentSpec>,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    /// Evenly spaced checkpoints on the recorded curves.
    #[serde(default = "defaults::curve_points")]
    pub curve_points: usize,
    /// Also write every step of every seed.
    #[serde(default)]
    pub full_traces: bool,
}

/// Median final resets of `agent` at most those of `baseline`, median
/// average reward at least as high, and no resets from the optimal
/// subchain by `agent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetComparison {
    pub agent: AgentSpec,
    pub baseline: AgentSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnChecks {
    #[serde(default)]
    pub reset_comparison: Option<ResetComparison>,
}

// ----------------------------------------------------------------- pareto

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    #[default]
    Uniform,
    Random(u64),
    File(PathBuf),
    /// Flat `S·A` probabilities.
    Probs(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoParams {
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub steer: Option<Vec<SteerPhase>>,
    #[serde(default = "defaults::cloud_samples")]
    pub cloud_samples: usize,
    #[serde(default = "defaults::yes")]
    pub include_deterministic: bool,
    /// Extra runs from every deterministic corner, with this mass on the
    /// corner action.
    #[serde(default)]
    pub corner_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoChecks {
    /// No cloud point beats the final gains by more than this in every
    /// objective.
    #[serde(default)]
    pub dominance_tol: Option<f64>,
    #[serde(default)]
    pub expect_termination: Option<String>,
    /// Corner runs that must end at a policy with some row below
    /// `1 − stochastic_tol` in every entry.
    #[serde(default)]
    pub min_stochastic_corners: Option<usize>,
    #[serde(default = "defaults::stochastic_tol")]
    pub stochastic_tol: f64,
}

impl Default for ParetoChecks {
    fn default() -> Self {
        Self {
            dominance_tol: None,
            expect_termination: None,
            min_stochastic_corners: None,
            stochastic_tol: defaults::stochastic_tol(),
        }
    }
}

// ------------------------------------------------------------ experiment

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Spec {
    Metrics(MetricsParams, MetricsChecks),
    Evaluate(EvaluateParams, EvaluateChecks),
    Shaping(ShapingParams, ShapingChecks),
    Learn(LearnParams, LearnChecks),
    Pareto(ParetoParams, ParetoChecks),
}

/// A validated configuration with defaults filled in, paths resolved and
/// the seed offset applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub kind: Kind,
    pub env: EnvSpec,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub seed_offset: u64,
    pub spec: Spec,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Experiment {
    /// Reads and validates a config file. Relative paths inside it are
    /// taken from the file's directory.
    pub fn load(path: &Path, seed_offset: u64) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, seed_offset)
            .with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(json: &str, base: &Path, seed_offset: u64) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(json);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(field_error)?;
        Self::from_raw(raw, base, seed_offset)
    }

    /// Builds an experiment from already-typed pieces, as the subcommand
    /// flags do.
    pub fn from_parts(
        kind: Kind,
        env: EnvSpec,
        seeds: Vec<u64>,
        horizon: usize,
        spec: Spec,
        seed_offset: u64,
    ) -> Result<Self> {
        let exp = Self {
            kind,
            env,
            seeds: offset_seeds(seeds, seed_offset)?,
            horizon,
            seed_offset,
            spec,
            out: None,
        };
        exp.validate()?;
        Ok(exp)
    }

    fn from_raw(raw: RawConfig, base: &Path, seed_offset: u64) -> Result<Self> {
        let seeds = match raw.seeds {
            SeedSpec::List(v) => v,
            SeedSpec::Range { from, count } => (from..from.saturating_add(count)).collect(),
        };
        let spec = match raw.kind {
            Kind::Metrics => Spec::Metrics(
                section(raw.params, "params")?,
                section_or_default(raw.checks, "checks")?,
            ),
            Kind::Evaluate => Spec::Evaluate(
                section(raw.params, "params")?,
                section_or_default(raw.checks, "checks")?,
            ),
            Kind::Shaping => Spec::Shaping(
                section(raw.params, "params")?,
                section_or_default(raw.checks, "checks")?,
            ),
            Kind::Learn => Spec::Learn(
                section(raw.params, "params")?,
                section_or_default(raw.checks, "checks")?,
            ),
            Kind::Pareto => Spec::Pareto(
                section(raw.params, "params")?,
                section_or_default(raw.checks, "checks")?,
            ),
        };
        let mut exp = Self {
            kind: raw.kind,
            env: raw.env,
            seeds: offset_seeds(seeds, seed_offset)?,
            horizon: raw.horizon,
            seed_offset,
            spec,
            out: raw.out.map(|p| base.join(p)),
        };
        exp.resolve_paths(base);
        exp.validate()?;
        Ok(exp)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let EnvSpec::File { path } = &mut self.env {
            *path = base.join(&*path);
        }
        match &mut self.spec {
            Spec::Shaping(p, _) => {
                if let PotentialSpec::File { file } = &mut p.potential {
                    *file = base.join(&*file);
                }
            }
            Spec::Pareto(p, _) => {
                if let InitSpec::File(file) = &mut p.init {
                    *file = base.join(&*file);
                }
            }
            _ => {}
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seeds: at least one seed is required");
        }
        if self.horizon == 0 {
            bail!("horizon: must be at least 1");
        }
        let prob = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v < 1.0) {
                bail!("{name}: {v} must lie in (0, 1)");
            }
            Ok(())
        };
        match &self.spec {
            Spec::Metrics(p, _) => {
                prob("params.cover_delta", p.cover_delta)?;
            }
            Spec::Evaluate(p, c) => {
                if p.gammas.is_empty() {
                    bail!("params.gammas: at least one discount is required");
                }
                for g in &p.gammas {
                    if !(*g >= 0.0 && *g < 1.0) {
                        bail!("params.gammas: {g} must lie in [0, 1)");
                    }
                }
                if p.estimators.is_empty() {
                    bail!("params.estimators: at least one estimator is required");
                }
                if let Some(g) = c.rate_gamma {
                    if !p.gammas.contains(&g) {
                        bail!("checks.rate_gamma: {g} is not among params.gammas");
                    }
                }
            }
            Spec::Shaping(p, _) => {
                if let Some(t) = &p.random_trials {
                    if t.n_states == 0 || t.n_actions == 0 {
                        bail!("params.random_trials: need at least one state and action");
                    }
                }
            }
            Spec::Learn(p, c) => {
                prob("params.delta", p.delta)?;
                if p.agents.is_empty() {
                    bail!("params.agents: at least one agent is required");
                }
                if p.curve_points == 0 {
                    bail!("params.curve_points: must be at least 1");
                }
                if let Some(rc) = &c.reset_comparison {
                    for a in [rc.agent, rc.baseline] {
                        if !p.agents.contains(&a) {
                            bail!(
                                "checks.reset_comparison: agent {} is not in params.agents",
                                a.label()
                            );
                        }
                    }
                }
            }
            Spec::Pareto(p, c) => {
                if let Some(m) = p.corner_mass {
                    if !(m > 0.0 && m <= 1.0) {
                        bail!("params.corner_mass: {m} must lie in (0, 1]");
                    }
                }
                if let Some(t) = &c.expect_termination {
                    if !["lp-infeasible", "line-search-failed", "iteration-cap"]
                        .contains(&t.as_str())
                    {
                        bail!("checks.expect_termination: unknown termination {t:?}");
                    }
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the normalized configuration. The output directory does
    /// not take part.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

fn offset_seeds(seeds: Vec<u64>, offset: u64) -> Result<Vec<u64>> {
    seeds
        .into_iter()
        .map(|s| {
            s.checked_add(offset)
                .with_context(|| format!("seed {s} overflows with offset {offset}"))
        })
        .collect()
}

fn field_error(e: serde_path_to_error::Error<serde_json::Error>) -> anyhow::Error {
    let path = e.path().to_string();
    anyhow::anyhow!("{path}: {}", e.into_inner())
}

fn section<T: DeserializeOwned>(v: Option<serde_json::Value>, name: &str) -> Result<T> {
    let v = v.unwrap_or_else(|| serde_json::json!({}));
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            name.to_string()
        } else {
            format!("{name}.{path}")
        };
        anyhow::anyhow!("{path}: {}", e.into_inner())
    })
}

fn section_or_default<T: DeserializeOwned + Default>(
    v: Option<serde_json::Value>,
    name: &str,
) -> Result<T> {
    match v {
        None => Ok(T::default()),
        some => section(some, name),
    }
}

mod defaults {
    use super::{AgentSpec, EstimatorSpec};

    pub fn track_len() -> usize {
        4
    }
    pub fn crash_states() -> usize {
        2
    }
    pub fn crash_prob() -> f64 {
        0.2
    }
    pub fn toy_alpha() -> f64 {
        0.11
    }
    pub fn toy_beta() -> f64 {
        0.1
    }
    pub fn toy_epsilon() -> f64 {
        0.05
    }
    pub fn multi_epsilon() -> f64 {
        0.1
    }
    pub fn delta() -> f64 {
        0.05
    }
    pub fn cover_runs() -> usize {
        10_000
    }
    pub fn tau_tolerance() -> f64 {
        1.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn gammas() -> Vec<f64> {
        vec![0.9, 0.99]
    }
    pub fn estimators() -> Vec<EstimatorSpec> {
        vec![
            EstimatorSpec::Loop,
            EstimatorSpec::ModelBased,
            EstimatorSpec::Td { k: 0, d: 1.0 },
            EstimatorSpec::Td { k: 10, d: 1.0 },
        ]
    }
    pub fn density() -> f64 {
        0.5
    }
    pub fn pi_policies() -> usize {
        50
    }
    pub fn value_tolerance() -> f64 {
        1e-6
    }
    pub fn agents() -> Vec<AgentSpec> {
        vec![AgentSpec::Ucrl2, AgentSpec::ResetUcrl]
    }
    pub fn curve_points() -> usize {
        100
    }
    pub fn cloud_samples() -> usize {
        10_000
    }
    pub fn yes() -> bool {
        true
    }
    pub fn stochastic_tol() -> f64 {
        1e-3
    }
}
