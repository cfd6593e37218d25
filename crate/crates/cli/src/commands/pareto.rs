use anyhow::{bail, Context, Result};
use serde_json::json;

use mdplab::mdp::StochasticPolicy;
use mdplab::pareto::{
    direct_cone_optimize, sample_gain_cloud, steer, ConeConfig, ConeRun, MultiRewardMdp,
    Termination, MAX_DETERMINISTIC,
};
use mdplab::rng::seeded;

use crate::artifacts::{num, nums, Artifacts, Summary};
use crate::config::{Experiment, InitSpec, ParetoChecks, ParetoParams};
use crate::env;

use super::fmt_list;

fn initial_policy(spec: &InitSpec, m: &MultiRewardMdp) -> Result<StochasticPolicy> {
    let (n, na) = (m.base().n_states(), m.base().n_actions());
    let probs = match spec {
        InitSpec::Uniform => return Ok(StochasticPolicy::uniform(n, na)),
        InitSpec::Random(seed) => return Ok(StochasticPolicy::random(&mut seeded(*seed), n, na)),
        InitSpec::Probs(v) => v.clone(),
        InitSpec::File(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading initial policy {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| {
                format!(
                    "{}: expected a flat JSON array of S·A probabilities",
                    path.display()
                )
            })?
        }
    };
    StochasticPolicy::new(n, na, probs).context("params.init")
}

pub fn termination_name(t: Termination) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Some state keeps every action below `1 − tol`.
fn is_stochastic(policy: &[f64], n_actions: usize, tol: f64) -> bool {
    policy
        .chunks(n_actions)
        .any(|row| row.iter().cloned().fold(0.0, f64::max) < 1.0 - tol)
}

fn iterate_rows(label: &str, seed: &str, run: &ConeRun) -> Vec<Vec<String>> {
    run.iterates
        .iter()
        .map(|it| {
            let mut row = vec![
                label.to_string(),
                seed.to_string(),
                it.iteration.to_string(),
            ];
            row.extend(nums(&it.gains));
            row.push(num(it.lp_margin));
            row.push(num(it.step));
            row.push(
                it.active
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            row.extend(nums(&it.policy));
            row
        })
        .collect()
}

pub fn run(
    exp: &Experiment,
    p: &ParetoParams,
    c: &ParetoChecks,
    art: &mut Artifacts,
    sum: &mut Summary,
) -> Result<()> {
    let m = env::multi_reward(&exp.env)?;
    let (n, na, k) = (m.base().n_states(), m.base().n_actions(), m.n_objectives());
    let init = initial_policy(&p.init, &m)?;
    let cfg = ConeConfig {
        max_iterations: exp.horizon,
        ..ConeConfig::default()
    };
    let main = match &p.steer {
        Some(schedule) => steer(&m, &init, schedule.clone(), &cfg)?,
        None => direct_cone_optimize(&m, &init, &cfg)?,
    };
    let init_seed = match p.init {
        InitSpec::Random(s) => s.to_string(),
        _ => String::new(),
    };
    let mut rows = iterate_rows("main", &init_seed, &main);

    let mut corners = Vec::new();
    if let Some(mass) = p.corner_mass {
        if (na as f64).powi(n as i32) > MAX_DETERMINISTIC as f64 {
            bail!("params.corner_mass: too many deterministic policies to enumerate");
        }
        for actions in StochasticPolicy::enumerate_deterministic(n, na) {
            let probs: Vec<f64> = actions
                .iter()
                .flat_map(|&a| {
                    (0..na).map(move |b| {
                        if a == b {
                            mass
                        } else {
                            (1.0 - mass) / (na - 1).max(1) as f64
                        }
                    })
                })
                .collect();
            let start = StochasticPolicy::new(n, na, probs)?;
            let run = match &p.steer {
                Some(schedule) => steer(&m, &start, schedule.clone(), &cfg)?,
                None => direct_cone_optimize(&m, &start, &cfg)?,
            };
            let label = format!(
                "corner:{}",
                actions
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join("-")
            );
            rows.extend(iterate_rows(&label, "", &run));
            corners.push((label, run));
        }
    }
    let mut header: Vec<String> = ["run", "seed", "step"].map(String::from).to_vec();
    header.extend((0..k).map(|j| format!("gain_{j}")));
    header.extend(["lp_margin", "step_size", "active"].map(String::from));
    header.extend((0..n * na).map(|i| format!("pi_s{}_a{}", i / na, i % na)));
    art.csv("iterates.csv", &header, rows)?;

    let cloud_seed = exp.seeds[0];
    let cloud = sample_gain_cloud(&m, p.cloud_samples, p.include_deterministic, cloud_seed);
    let mut cloud_header: Vec<String> = ["seed", "index", "kind", "actions"]
        .map(String::from)
        .to_vec();
    cloud_header.extend((0..k).map(|j| format!("gain_{j}")));
    let stochastic = cloud.stochastic.iter().enumerate().map(|(i, g)| {
        let mut row = vec![
            cloud_seed.to_string(),
            i.to_string(),
            "stochastic".into(),
            String::new(),
        ];
        row.extend(nums(g));
        row
    });
    let deterministic = cloud.deterministic.iter().enumerate().map(|(i, (d, g))| {
        let mut row = vec![
            String::new(),
            i.to_string(),
            "deterministic".into(),
            d.iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ];
        row.extend(nums(g));
        row
    });
    art.csv(
        "gain_cloud.csv",
        &cloud_header,
        stochastic.chain(deterministic).collect::<Vec<_>>(),
    )?;

    let last = main.last();
    let termination = termination_name(main.termination);
    sum.line(
        "main run",
        format!("{termination} after {} iterates", main.iterates.len()),
    );
    sum.line("final gains", fmt_list(&last.gains, 4));
    sum.line("final policy", fmt_list(&last.policy, 4));

    let all_points = cloud
        .stochastic
        .iter()
        .chain(cloud.deterministic.iter().map(|(_, g)| g));
    let dominated_by = |tol: f64| {
        all_points
            .clone()
            .filter(|q| q.iter().zip(&last.gains).all(|(q, f)| *q > f + tol))
            .count()
    };
    let n_points = cloud.stochastic.len() + cloud.deterministic.len();
    if let Some(tol) = c.dominance_tol {
        let d = dominated_by(tol);
        sum.check(
            "final gains undominated by the cloud",
            d == 0,
            format!("{d} of {n_points} cloud points dominate by more than {tol}"),
        );
    }
    if let Some(want) = &c.expect_termination {
        sum.check(
            "termination",
            &termination == want,
            format!("{termination} (expected {want})"),
        );
    }
    let stochastic_corners = corners
        .iter()
        .filter(|(_, r)| {
            r.termination == Termination::LpInfeasible
                && is_stochastic(&r.last().policy, na, c.stochastic_tol)
        })
        .count();
    if !corners.is_empty() {
        sum.line(
            "corner runs",
            format!(
                "{stochastic_corners}/{} end certified at a stochastic policy",
                corners.len()
            ),
        );
    }
    if let Some(min) = c.min_stochastic_corners {
        sum.check(
            "corner runs reaching stochastic policies",
            stochastic_corners >= min,
            format!("{stochastic_corners} of {} (min {min})", corners.len()),
        );
    }

    art.json(
        "pareto.json",
        &json!({
            "termination": termination,
            "iterations": main.iterates.len(),
            "final_gains": last.gains,
            "final_policy": last.policy,
            "cloud_points": n_points,
            "cloud_degenerate": cloud.degenerate,
            "corners": corners.iter().map(|(label, r)| json!({
                "run": label,
                "termination": termination_name(r.termination),
                "final_gains": r.last().gains,
                "final_policy": r.last().policy,
                "stochastic": is_stochastic(&r.last().policy, na, c.stochastic_tol),
            })).collect::<Vec<_>>(),
        }),
    )
}
