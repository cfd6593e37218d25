use anyhow::Result;
use serde_json::json;

use mdplab::metrics::{
    cover_time_bound, diameter, expected_hitting_times, mehc, return_time_tail_check,
    sample_cover_times,
};
use mdplab::stats::{mean, quantile};

use crate::artifacts::{num, Artifacts, Summary};
use crate::config::{Experiment, MetricsChecks, MetricsParams};
use crate::env::{self, Model};

use super::fmt_list;

pub fn run(
    exp: &Experiment,
    p: &MetricsParams,
    c: &MetricsChecks,
    art: &mut Artifacts,
    sum: &mut Summary,
) -> Result<()> {
    let chain = env::chain(&exp.env, &p.policy)?;
    let n = chain.n_states();
    let seed = exp.seeds[0];

    let profiles = (0..n)
        .map(|s| expected_hitting_times(&chain, s))
        .collect::<Result<Vec<_>, _>>()?;
    let rho: Vec<f64> = profiles.iter().map(|h| h.recurrence_time).collect();
    let tau: Vec<f64> = profiles
        .iter()
        .map(|h| h.max_expected_hitting_time)
        .collect();
    art.csv(
        "hitting_times.csv",
        &["state", "rho", "tau", "class_tau"].map(String::from),
        profiles.iter().map(|h| {
            vec![
                h.target.to_string(),
                num(h.recurrence_time),
                num(h.max_expected_hitting_time),
                h.class_max_expected_hitting_time
                    .map(num)
                    .unwrap_or_default(),
            ]
        }),
    )?;
    sum.line("rho", fmt_list(&rho, 2));
    sum.line("tau", fmt_list(&tau, 2));

    let (mut d, mut kappa) = (None, None);
    if let Model::Mdp(m) = env::build(&exp.env)? {
        d = Some(diameter(&m));
        kappa = Some(mehc(&m));
        sum.line("diameter D", format!("{:.4}", d.unwrap()));
        sum.line("mehc kappa", format!("{:.4}", kappa.unwrap()));
    }

    let mut cover = serde_json::Value::Null;
    if tau.iter().all(|t| t.is_finite()) && p.cover_runs > 0 && p.cover_start < n {
        let bound = cover_time_bound(&chain, p.cover_delta)?;
        let times = sample_cover_times(&chain, p.cover_start, p.cover_runs, seed);
        art.csv(
            "cover_times.csv",
            &["seed", "step", "cover_time"].map(String::from),
            times
                .iter()
                .enumerate()
                .map(|(run, t)| vec![seed.to_string(), run.to_string(), t.to_string()]),
        )?;
        let as_f: Vec<f64> = times.iter().map(|&t| t as f64).collect();
        let q = quantile(&as_f, 1.0 - p.cover_delta);
        sum.line(
            "cover time",
            format!(
                "mean {:.1}, q{} {:.1}, bound {:.1}",
                mean(&as_f),
                1.0 - p.cover_delta,
                q,
                bound
            ),
        );
        if c.cover_within_bound {
            sum.check(
                "cover quantile within bound",
                q <= bound,
                format!("q {q:.1} vs bound {bound:.1}"),
            );
        }
        cover = json!({
            "delta": p.cover_delta,
            "start": p.cover_start,
            "runs": p.cover_runs,
            "mean": mean(&as_f),
            "quantile": q,
            "bound": bound,
        });
    } else if c.cover_within_bound {
        sum.check(
            "cover quantile within bound",
            false,
            "cover time is unbounded or was not sampled",
        );
    }

    let mut flagged_total = None;
    if p.tail_samples > 0 {
        let mut rows = Vec::new();
        let mut flagged = 0;
        for (s, &tau_s) in tau.iter().enumerate() {
            if !tau_s.is_finite() {
                continue;
            }
            let horizon = ((5.0 * std::f64::consts::E * tau_s).ceil() as usize).min(exp.horizon);
            let s_seed = seed.wrapping_add(s as u64);
            let check = return_time_tail_check(&chain, s, horizon, p.tail_samples, s_seed)?;
            flagged += check.flagged.len();
            for i in 0..check.t.len() {
                rows.push(vec![
                    s_seed.to_string(),
                    s.to_string(),
                    check.t[i].to_string(),
                    num(check.empirical[i]),
                    num(check.stderr[i]),
                    num(check.bound[i]),
                ]);
            }
        }
        art.csv(
            "return_tail.csv",
            &["seed", "state", "step", "empirical", "stderr", "bound"].map(String::from),
            rows,
        )?;
        sum.line("tail points above bound", flagged.to_string());
        flagged_total = Some(flagged);
    }
    if c.tail_within_bound {
        sum.check(
            "return-time tail within bound",
            flagged_total == Some(0),
            match flagged_total {
                Some(f) => format!("{f} points flagged"),
                None => "tail check not run (tail_samples = 0)".into(),
            },
        );
    }

    if let Some(reference) = &c.tau_reference {
        let ok = reference.len() == n
            && reference
                .iter()
                .zip(&tau)
                .all(|(r, t)| (r - t).abs() <= c.tau_tolerance);
        sum.check(
            "tau matches reference",
            ok,
            format!(
                "{} vs {} (tolerance {})",
                fmt_list(&tau, 2),
                fmt_list(reference, 2),
                c.tau_tolerance
            ),
        );
    }

    art.json(
        "metrics.json",
        &json!({
            "n_states": n,
            "rho": rho,
            "tau": tau,
            "diameter": d,
            "kappa": kappa,
            "cover": cover,
            "tail_flagged": flagged_total,
        }),
    )
}
