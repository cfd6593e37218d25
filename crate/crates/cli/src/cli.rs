//! Command-line surface. Subcommand flags build the same [`Experiment`] a
//! `--config` file would.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mdplab::pareto::SteerPhase;

use crate::commands::execute;
use crate::config::{
    AgentSpec, EnvSpec, EvaluateChecks, EvaluateParams, Experiment, InitSpec, Kind, LearnChecks,
    LearnParams, MetricsChecks, MetricsParams, ParetoChecks, ParetoParams, PotentialSpec,
    ShapingChecks, ShapingParams, Spec, SEED_OFFSET_VAR,
};
use crate::report;

/// Exit code when `--assert` is set and a check fails.
pub const CHECK_FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "mdplab", version, about = "Finite-MDP experiments")]
pub struct Cli {
    /// Experiment config (JSON). Its kind must match the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Exit with status 2 when a configured check fails.
    #[arg(long = "assert", global = true)]
    pub assert_checks: bool,
    /// Added to every seed.
    #[arg(long, global = true, env = SEED_OFFSET_VAR, default_value_t = 0)]
    pub seed_offset: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hitting, recurrence and cover times, diameter and MEHC.
    Metrics(MetricsArgs),
    /// Compare value estimators on one long path per seed.
    Evaluate(EvaluateArgs),
    /// MEHC and gains before and after potential shaping.
    Shaping(ShapingArgs),
    /// Run optimistic learners and record regret and reset curves.
    Learn(LearnArgs),
    /// Direct-cone ascent over several reward tables.
    Pareto(ParetoArgs),
    /// Verify output directories and print their headline numbers.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct EnvArgs {
    /// Named environment, optionally with parameters: `racetrack:l=6,k=2`.
    #[arg(long)]
    pub env: Option<String>,
    /// Model file (JSON); stands for `--env file`.
    #[arg(long, conflicts_with = "env")]
    pub model: Option<PathBuf>,
    /// Number of seeds, counted from `--first-seed`.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// First seed of the range (default 0).
    #[arg(long)]
    pub first_seed: Option<u64>,
}

impl EnvArgs {
    fn any(&self) -> bool {
        self.env.is_some()
            || self.model.is_some()
            || self.seeds.is_some()
            || self.first_seed.is_some()
    }

    fn env_spec(&self, default: &str) -> Result<EnvSpec> {
        if let Some(path) = &self.model {
            return Ok(EnvSpec::File { path: path.clone() });
        }
        parse_env(self.env.as_deref().unwrap_or(default))
    }

    fn seed_list(&self, default_count: u64) -> Vec<u64> {
        let from = self.first_seed.unwrap_or(0);
        (from..from + self.seeds.unwrap_or(default_count)).collect()
    }
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Return-time draws per state for the tail check (0 skips it).
    #[arg(long)]
    pub tail_samples: Option<usize>,
    /// Simulated cover times.
    #[arg(long)]
    pub cover_runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Discount factor; repeat for several.
    #[arg(long = "gamma")]
    pub gammas: Vec<f64>,
    /// Path length.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ShapingArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Potential file: a JSON array with one value per state.
    #[arg(long)]
    pub potential: Option<PathBuf>,
    /// Extended value iteration steps for the span check.
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// ucrl2, ucrl2-bernstein, reset-ucrl or reset-ucrl-bernstein; repeat
    /// for several.
    #[arg(long = "agent")]
    pub agents: Vec<String>,
    /// Learning steps per seed.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Confidence parameter of the learners.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// `uniform`, `random:SEED` or a JSON file of flat probabilities.
    #[arg(long)]
    pub init: Option<String>,
    /// Phases `objectives:iterations` separated by commas, objectives
    /// joined by `+` or `all`, e.g. `0:20,all`.
    #[arg(long)]
    pub steer: Option<String>,
    /// Iteration cap for every ascent run.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Random stochastic policies in the gain cloud.
    #[arg(long)]
    pub cloud_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directories; `--out` when none are given.
    pub dirs: Vec<PathBuf>,
}

/// `name` or `name:key=value,key=value`.
pub fn parse_env(s: &str) -> Result<EnvSpec> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut obj = serde_json::Map::new();
    obj.insert("name".into(), name.into());
    for kv in rest.split(',').filter(|kv| !kv.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--env: expected key=value, got {kv:?}"))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.into()));
        obj.insert(k.into(), value);
    }
    serde_json::from_value(obj.into()).with_context(|| format!("--env {s:?}"))
}

pub fn parse_init(s: &str) -> Result<InitSpec> {
    Ok(match s {
        "uniform" => InitSpec::Uniform,
        _ => match s.strip_prefix("random:") {
            Some(seed) => InitSpec::Random(seed.parse().context("--init random:SEED")?),
            None => InitSpec::File(s.into()),
        },
    })
}

pub fn parse_steer(s: &str, n_objectives_hint: usize) -> Result<Vec<SteerPhase>> {
    s.split(',')
        .map(|phase| {
            let (objs, iters) = phase.split_once(':').unwrap_or((phase, "1"));
            let active = if objs == "all" {
                (0..n_objectives_hint).collect()
            } else {
                objs.split('+')
                    .map(|k| k.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .with_context(|| format!("--steer: bad objectives in {phase:?}"))?
            };
            let iterations = iters
                .parse()
                .with_context(|| format!("--steer: bad iteration count in {phase:?}"))?;
            Ok(SteerPhase { iterations, active })
        })
        .collect()
}

impl Command {
    fn kind(&self) -> Option<Kind> {
        Some(match self {
            Self::Metrics(_) => Kind::Metrics,
            Self::Evaluate(_) => Kind::Evaluate,
            Self::Shaping(_) => Kind::Shaping,
            Self::Learn(_) => Kind::Learn,
            Self::Pareto(_) => Kind::Pareto,
            Self::Report(_) => return None,
        })
    }

    fn has_flags(&self) -> bool {
        match self {
            Self::Metrics(a) => a.env.any() || a.tail_samples.is_some() || a.cover_runs.is_some(),
            Self::Evaluate(a) => a.env.any() || !a.gammas.is_empty() || a.horizon.is_some(),
            Self::Shaping(a) => a.env.any() || a.potential.is_some() || a.iterations.is_some(),
            Self::Learn(a) => {
                a.env.any() || !a.agents.is_empty() || a.steps.is_some() || a.delta.is_some()
            }
            Self::Pareto(a) => {
                a.env.any()
                    || a.init.is_some()
                    || a.steer.is_some()
                    || a.iterations.is_some()
                    || a.cloud_samples.is_some()
            }
            Self::Report(_) => false,
        }
    }

    /// The experiment described by the flags alone.
    fn experiment(&self, offset: u64) -> Result<Experiment> {
        let kind = self.kind().expect("not a report");
        let (env, seeds, horizon, spec) = match self {
            Self::Metrics(a) => {
                let mut p: MetricsParams = serde_json::from_str("{}")?;
                p.tail_samples = a.tail_samples.unwrap_or(p.tail_samples);
                p.cover_runs = a.cover_runs.unwrap_or(p.cover_runs);
                (
                    a.env.env_spec("riverswim-mrp")?,
                    a.env.seed_list(1),
                    100_000,
                    Spec::Metrics(p, MetricsChecks::default()),
                )
            }
            Self::Evaluate(a) => {
                let mut p: EvaluateParams = serde_json::from_str("{}")?;
                if !a.gammas.is_empty() {
                    p.gammas = a.gammas.clone();
                }
                (
                    a.env.env_spec("riverswim-mrp")?,
                    a.env.seed_list(20),
                    a.horizon.unwrap_or(10_000),
                    Spec::Evaluate(p, EvaluateChecks::default()),
                )
            }
            Self::Shaping(a) => {
                let potential = match &a.potential {
                    Some(file) => PotentialSpec::File { file: file.clone() },
                    None => bail!("shaping: --potential is required without --config"),
                };
                let p = ShapingParams {
                    potential,
                    pi_policies: 50,
                    random_trials: None,
                };
                (
                    a.env.env_spec("shaping-toy")?,
                    a.env.seed_list(1),
                    a.iterations.unwrap_or(500),
                    Spec::Shaping(p, ShapingChecks::default()),
                )
            }
            Self::Learn(a) => {
                let mut p: LearnParams = serde_json::from_str("{}")?;
                if !a.agents.is_empty() {
                    p.agents = a
                        .agents
                        .iter()
                        .map(|s| AgentSpec::parse(s))
                        .collect::<Result<_>>()?;
                }
                p.delta = a.delta.unwrap_or(p.delta);
                (
                    a.env.env_spec("racetrack")?,
                    a.env.seed_list(4),
                    a.steps.unwrap_or(10_000),
                    Spec::Learn(p, LearnChecks::default()),
                )
            }
            Self::Pareto(a) => {
                let mut p: ParetoParams = serde_json::from_str("{}")?;
                if let Some(init) = &a.init {
                    p.init = parse_init(init)?;
                }
                let env = a.env.env_spec("multireward-toy")?;
                if let Some(steer) = &a.steer {
                    let k = crate::env::multi_reward(&env)?.n_objectives();
                    p.steer = Some(parse_steer(steer, k)?);
                }
                p.cloud_samples = a.cloud_samples.unwrap_or(p.cloud_samples);
                (
                    env,
                    a.env.seed_list(1),
                    a.iterations.unwrap_or(500),
                    Spec::Pareto(p, ParetoChecks::default()),
                )
            }
            Self::Report(_) => unreachable!(),
        };
        Experiment::from_parts(kind, env, seeds, horizon, spec, offset)
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    if let Command::Report(args) = &cli.command {
        return report_dirs(args, cli.out.as_deref(), cli.assert_checks);
    }
    let kind = cli.command.kind().expect("not a report");
    let exp = match &cli.config {
        Some(path) => {
            if cli.command.has_flags() {
                bail!("subcommand flags cannot be combined with --config");
            }
            let exp = Experiment::load(path, cli.seed_offset)?;
            if exp.kind != kind {
                bail!(
                    "config {} describes a {} experiment, not {}",
                    path.display(),
                    exp.kind.as_str(),
                    kind.as_str()
                );
            }
            exp
        }
        None => cli.command.experiment(cli.seed_offset)?,
    };
    let out = cli
        .out
        .clone()
        .or_else(|| exp.out.clone())
        .unwrap_or_else(|| PathBuf::from("mdplab-out").join(kind.as_str()));
    let (summary, _) = execute(&exp, &out)?;
    let (text, _) = report::render(&out)?;
    print!("{text}");
    Ok(if cli.assert_checks && !summary.all_passed() {
        ExitCode::from(CHECK_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}

fn report_dirs(args: &ReportArgs, out: Option<&Path>, assert: bool) -> Result<ExitCode> {
    let dirs: Vec<PathBuf> = if args.dirs.is_empty() {
        match out {
            Some(d) => vec![d.to_path_buf()],
            None => bail!("report: give output directories or --out"),
        }
    } else {
        args.dirs.clone()
    };
    let mut all_passed = true;
    for dir in &dirs {
        let (text, summary) = report::render(dir)?;
        print!("{text}");
        all_passed &= summary.all_passed();
    }
    Ok(if assert && !all_passed {
        ExitCode::from(CHECK_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}
