use anyhow::{bail, Result};
use rayon::prelude::*;
use serde_json::json;

use mdplab::mdp::FiniteMdp;
use mdplab::ofu::{regret_report, run_learning, LearnerTrace, RegretReport, Ucrl2, Ucrl2Config};
use mdplab::stats::{mean, median};

use crate::artifacts::{num, Artifacts, Summary};
use crate::config::{AgentSpec, Experiment, LearnChecks, LearnParams};
use crate::env;

fn agent_config(agent: AgentSpec, delta: f64, env: &FiniteMdp) -> Result<Ucrl2Config> {
    let reset = || match env.reset() {
        Some(r) => Ok(r),
        None => bail!(
            "agent {} needs an environment with a reset action",
            agent.label()
        ),
    };
    Ok(match agent {
        AgentSpec::Ucrl2 => Ucrl2Config::ucrl2(delta),
        AgentSpec::Ucrl2Bernstein => Ucrl2Config::ucrl2_bernstein(delta),
        AgentSpec::ResetUcrl => Ucrl2Config::reset_ucrl(delta, reset()?),
        AgentSpec::ResetUcrlBernstein => Ucrl2Config {
            known_reset: Some(reset()?),
            ..Ucrl2Config::ucrl2_bernstein(delta)
        },
    })
}

struct SeedRun {
    seed: u64,
    trace: Option<LearnerTrace>,
    report: RegretReport,
    evi_failures: usize,
}

struct AgentResult {
    agent: AgentSpec,
    runs: Vec<SeedRun>,
}

impl AgentResult {
    fn finals(&self, f: impl Fn(&RegretReport) -> f64) -> Vec<f64> {
        self.runs.iter().map(|r| f(&r.report)).collect()
    }

    fn median_resets(&self) -> f64 {
        median(&self.finals(|r| r.final_resets() as f64))
    }

    fn median_reward(&self) -> f64 {
        median(&self.finals(|r| r.final_average_reward()))
    }

    fn median_regret(&self) -> f64 {
        median(&self.finals(|r| r.final_regret()))
    }

    fn subchain_resets(&self) -> usize {
        self.runs
            .iter()
            .map(|r| r.report.final_subchain_resets())
            .sum()
    }
}

/// `points` evenly spaced steps ending at `horizon`, deduplicated.
fn checkpoints(horizon: usize, points: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=points)
        .map(|i| (i * horizon).div_ceil(points).max(1))
        .collect();
    out.dedup();
    out
}

pub fn run(
    exp: &Experiment,
    p: &LearnParams,
    c: &LearnChecks,
    art: &mut Artifacts,
    sum: &mut Summary,
) -> Result<()> {
    let env = env::mdp(&exp.env)?;
    let configs = p
        .agents
        .iter()
        .map(|&a| agent_config(a, p.delta, &env))
        .collect::<Result<Vec<_>>>()?;

    let mut results = Vec::new();
    for (&agent, cfg) in p.agents.iter().zip(&configs) {
        let runs = exp
            .seeds
            .par_iter()
            .map(|&seed| {
                let mut learner = Ucrl2::new(env.n_states(), env.n_actions(), env.r_max(), *cfg);
                let trace = run_learning(&env, &mut learner, exp.horizon, seed);
                let report = regret_report(&trace, &env)?;
                Ok(SeedRun {
                    seed,
                    trace: p.full_traces.then_some(trace),
                    report,
                    evi_failures: learner.evi_failures(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        results.push(AgentResult { agent, runs });
    }
    let first = &results[0].runs[0].report;
    let (rho_star, subchain) = (first.rho_star, first.optimal_subchain.clone());

    let steps = checkpoints(exp.horizon, p.curve_points);
    let mut curve_rows = Vec::new();
    let mut agg_rows = Vec::new();
    for res in &results {
        for run in &res.runs {
            let r = &run.report;
            for &t in &steps {
                let i = t - 1;
                curve_rows.push(vec![
                    res.agent.label().to_string(),
                    run.seed.to_string(),
                    t.to_string(),
                    num(r.regret[i]),
                    r.cumulative_resets[i].to_string(),
                    num(r.running_average_resets[i]),
                    num(r.running_average_reward[i]),
                    r.subchain_resets[i].to_string(),
                ]);
            }
        }
        for &t in &steps {
            let i = t - 1;
            let col = |f: &dyn Fn(&RegretReport) -> f64| -> Vec<f64> {
                res.runs.iter().map(|run| f(&run.report)).collect()
            };
            let regret = col(&|r| r.regret[i]);
            let resets = col(&|r| r.cumulative_resets[i] as f64);
            let avg_resets = col(&|r| r.running_average_resets[i]);
            let reward = col(&|r| r.running_average_reward[i]);
            let sub = col(&|r| r.subchain_resets[i] as f64);
            agg_rows.push(vec![
                res.agent.label().to_string(),
                "all".into(),
                t.to_string(),
                num(median(&regret)),
                num(mean(&regret)),
                num(median(&resets)),
                num(median(&avg_resets)),
                num(median(&reward)),
                num(sub.iter().sum()),
            ]);
        }
    }
    art.csv(
        "curves.csv",
        &[
            "agent",
            "seed",
            "step",
            "regret",
            "cumulative_resets",
            "running_average_resets",
            "running_average_reward",
            "subchain_resets",
        ]
        .map(String::from),
        curve_rows,
    )?;
    art.csv(
        "curves_aggregate.csv",
        &[
            "agent",
            "seed",
            "step",
            "median_regret",
            "mean_regret",
            "median_cumulative_resets",
            "median_running_average_resets",
            "median_running_average_reward",
            "total_subchain_resets",
        ]
        .map(String::from),
        agg_rows,
    )?;
    if p.full_traces {
        for res in &results {
            let rows = res.runs.iter().flat_map(|run| {
                let tr = run.trace.as_ref().expect("kept when full_traces is set");
                (0..tr.len()).map(move |t| {
                    vec![
                        run.seed.to_string(),
                        (t + 1).to_string(),
                        tr.states[t].to_string(),
                        tr.actions[t].to_string(),
                        num(tr.rewards[t]),
                        tr.episodes[t].to_string(),
                    ]
                })
            });
            art.csv(
                &format!("trace_{}.csv", res.agent.label()),
                &["seed", "step", "state", "action", "reward", "episode"].map(String::from),
                rows,
            )?;
        }
    }

    sum.line("optimal gain", format!("{rho_star:.4}"));
    sum.line("optimal subchain", format!("{subchain:?}"));
    let mut per_agent = serde_json::Map::new();
    for res in &results {
        let evi: usize = res.runs.iter().map(|r| r.evi_failures).sum();
        sum.line(
            res.agent.label(),
            format!(
                "median regret {:.1}, median resets {}, median average reward {:.4}, subchain resets over all seeds {}",
                res.median_regret(),
                res.median_resets(),
                res.median_reward(),
                res.subchain_resets()
            ),
        );
        per_agent.insert(
            res.agent.label().into(),
            json!({
                "median_final_regret": res.median_regret(),
                "median_final_resets": res.median_resets(),
                "median_final_average_reward": res.median_reward(),
                "total_subchain_resets": res.subchain_resets(),
                "evi_failures": evi,
            }),
        );
    }

    if let Some(rc) = &c.reset_comparison {
        let get = |a: AgentSpec| results.iter().find(|r| r.agent == a).expect("validated");
        let (ours, base) = (get(rc.agent), get(rc.baseline));
        let name = |what: &str| format!("{what}: {} vs {}", rc.agent.label(), rc.baseline.label());
        sum.check(
            name("no more resets"),
            ours.median_resets() <= base.median_resets(),
            format!(
                "median {} vs {}",
                ours.median_resets(),
                base.median_resets()
            ),
        );
        sum.check(
            name("average reward at least as high"),
            ours.median_reward() >= base.median_reward(),
            format!(
                "median {:.4} vs {:.4}",
                ours.median_reward(),
                base.median_reward()
            ),
        );
        sum.check(
            format!(
                "no resets from the optimal subchain by {}",
                rc.agent.label()
            ),
            ours.subchain_resets() == 0,
            format!("{} over all seeds", ours.subchain_resets()),
        );
    }

    art.json(
        "learn.json",
        &json!({
            "rho_star": rho_star,
            "optimal_subchain": subchain,
            "horizon": exp.horizon,
            "seeds": exp.seeds,
            "agents": per_agent,
        }),
    )
}
