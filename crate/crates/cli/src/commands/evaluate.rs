use anyhow::Result;
use serde_json::json;

use mdplab::estimators::{run_comparison, ComparisonTable, EstimatorKind};
use mdplab::metrics::max_expected_hitting_times;
use mdplab::stats::pearson;

use crate::artifacts::{num, nums, Artifacts, Summary};
use crate::config::{EstimatorSpec, EvaluateChecks, EvaluateParams, Experiment};
use crate::env;

pub fn kind(spec: &EstimatorSpec) -> EstimatorKind {
    match spec {
        EstimatorSpec::Loop => EstimatorKind::LoopAllStates,
        EstimatorSpec::ModelBased => EstimatorKind::ModelBased,
        EstimatorSpec::Td { k, d } => EstimatorKind::Td { k: *k, d: *d },
    }
}

pub fn run(
    exp: &Experiment,
    p: &EvaluateParams,
    c: &EvaluateChecks,
    art: &mut Artifacts,
    sum: &mut Summary,
) -> Result<()> {
    let mrp = env::mrp(&exp.env, &p.policy)?;
    let n = mrp.n_states();
    let kinds: Vec<EstimatorKind> = p.estimators.iter().map(kind).collect();
    // States that are not positive recurrent have no finite τ.
    let sqrt_tau: Option<Vec<f64>> = max_expected_hitting_times(mrp.chain())
        .ok()
        .filter(|t| t.iter().all(|x| x.is_finite()))
        .map(|t| t.iter().map(|x| x.sqrt()).collect());

    let tables = p
        .gammas
        .iter()
        .map(|&g| run_comparison(&mrp, g, exp.horizon, &exp.seeds, &kinds))
        .collect::<Result<Vec<ComparisonTable>, _>>()?;

    let mut header: Vec<String> = ["gamma", "estimator", "seed", "step", "linf_error"]
        .map(String::from)
        .to_vec();
    header.extend((0..n).map(|s| format!("error_s{s}")));
    art.csv(
        "errors.csv",
        &header,
        tables.iter().flat_map(|t| {
            t.rows.iter().map(move |r| {
                let mut row = vec![
                    num(t.gamma),
                    r.estimator.clone(),
                    r.seed.to_string(),
                    r.step.to_string(),
                    num(r.linf_error),
                ];
                row.extend(nums(&r.per_state_errors));
                row
            })
        }),
    )?;
    art.csv(
        "error_summary.csv",
        &[
            "gamma",
            "estimator",
            "seed",
            "step",
            "mean",
            "std",
            "median",
        ]
        .map(String::from),
        tables.iter().flat_map(|t| {
            t.summary().into_iter().map(move |r| {
                vec![
                    num(t.gamma),
                    r.estimator,
                    "all".into(),
                    r.step.to_string(),
                    num(r.mean),
                    num(r.std),
                    num(r.median),
                ]
            })
        }),
    )?;
    let mut rate_rows = Vec::new();
    for t in &tables {
        let step = t.final_step();
        for label in &t.labels {
            for (s, (m, sd)) in t.per_state_error(label, step).into_iter().enumerate() {
                rate_rows.push(vec![
                    num(t.gamma),
                    label.clone(),
                    "all".into(),
                    step.to_string(),
                    s.to_string(),
                    sqrt_tau.as_ref().map(|v| num(v[s])).unwrap_or_default(),
                    num(m),
                    num(sd),
                ]);
            }
        }
    }
    art.csv(
        "per_state_final.csv",
        &[
            "gamma",
            "estimator",
            "seed",
            "step",
            "state",
            "sqrt_tau",
            "mean_error",
            "std_error",
        ]
        .map(String::from),
        rate_rows,
    )?;

    let mut medians = serde_json::Map::new();
    for t in &tables {
        let line: Vec<String> = t
            .labels
            .iter()
            .map(|l| format!("{l} {:.4}", t.final_median(l)))
            .collect();
        sum.line(
            format!("median final error, gamma {}", t.gamma),
            line.join(", "),
        );
        let per: serde_json::Map<String, serde_json::Value> = t
            .labels
            .iter()
            .map(|l| (l.clone(), json!(t.final_median(l))))
            .collect();
        medians.insert(num(t.gamma), per.into());
    }

    let mut rate = None;
    if let Some(min) = c.rate_pearson_min {
        let gamma = c.rate_gamma.unwrap_or(p.gammas[0]);
        let table = tables.iter().find(|t| t.gamma == gamma).expect("validated");
        let detail;
        let passed = match (&sqrt_tau, table.labels.iter().any(|l| l == "loop")) {
            (Some(st), true) => {
                let means: Vec<f64> = table
                    .per_state_error("loop", table.final_step())
                    .iter()
                    .map(|(m, _)| *m)
                    .collect();
                let r = pearson(st, &means);
                rate = Some(r);
                detail = format!("r = {r:.4} at gamma {gamma} (min {min})");
                r >= min
            }
            (None, _) => {
                detail = "some state has infinite tau".into();
                false
            }
            (_, false) => {
                detail = "the loop estimator was not run".into();
                false
            }
        };
        sum.check("loop error tracks sqrt(tau)", passed, detail);
    }
    if let Some(r) = rate {
        sum.line("pearson(sqrt tau, loop error)", format!("{r:.4}"));
    }

    for o in &c.orderings {
        for t in tables
            .iter()
            .filter(|t| o.gamma.is_none_or(|g| g == t.gamma))
        {
            let name = format!("{} <= {} at gamma {}", o.better, o.worse, t.gamma);
            let known = |l: &str| t.labels.iter().any(|x| x == l);
            if !known(&o.better) || !known(&o.worse) {
                sum.check(name, false, format!("labels available: {:?}", t.labels));
                continue;
            }
            let (b, w) = (t.final_median(&o.better), t.final_median(&o.worse));
            sum.check(name, b <= w, format!("median {b:.4} vs {w:.4}"));
        }
    }

    art.json(
        "evaluate.json",
        &json!({
            "n_states": n,
            "horizon": exp.horizon,
            "seeds": exp.seeds.len(),
            "sqrt_tau": sqrt_tau,
            "final_median_error": medians,
            "rate_pearson": rate,
        }),
    )
}
