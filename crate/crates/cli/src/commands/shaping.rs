use anyhow::{Context, Result};
use serde_json::json;

use mdplab::mdp::{make_random_mdp, FiniteMdp};
use mdplab::metrics::mehc;
use mdplab::rng::seeded;
use mdplab::shaping::{
    check_pi_equivalence, mehc_shaping_report, sample_admissible_potential, shape,
    span_lemma_check, toy_potential, ShapingError,
};

use crate::artifacts::{num, Artifacts, Summary};
use crate::config::{Experiment, PotentialSpec, RandomTrials, ShapingChecks, ShapingParams};
use crate::env;

use super::fmt_list;

pub fn load_potential(spec: &PotentialSpec) -> Result<Vec<f64>> {
    Ok(match spec {
        PotentialSpec::Values(v) => v.clone(),
        PotentialSpec::File { file } => {
            let text = std::fs::read_to_string(file)
                .with_context(|| format!("reading potential {}", file.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("{}: expected a JSON array of numbers", file.display()))?
        }
        PotentialSpec::Toy { toy } => toy_potential(toy.alpha, toy.beta, toy.epsilon),
    })
}

/// `(κ, κ^φ, ratio or the reason it is undefined)`.
fn factor_two(mdp: &FiniteMdp, phi: &[f64]) -> Result<(f64, f64, Result<f64, String>)> {
    match mehc_shaping_report(mdp, phi) {
        Ok(r) => Ok((r.kappa, r.kappa_shaped, Ok(r.ratio))),
        Err(ShapingError::PreconditionFailed {
            reason,
            kappa,
            kappa_shaped,
        }) => Ok((kappa, kappa_shaped, Err(reason))),
        Err(e) => Err(e.into()),
    }
}

pub fn run(
    exp: &Experiment,
    p: &ShapingParams,
    c: &ShapingChecks,
    art: &mut Artifacts,
    sum: &mut Summary,
) -> Result<()> {
    let mdp = env::mdp(&exp.env)?;
    let phi = load_potential(&p.potential)?;
    let shaped = shape(&mdp, &phi)?;
    let (kappa, kappa_shaped, ratio) = factor_two(&mdp, &phi)?;
    let gap = check_pi_equivalence(&mdp, &shaped, p.pi_policies, exp.seeds[0])?;
    let spans = span_lemma_check(&mdp, exp.horizon);

    sum.line("potential", fmt_list(&phi, 4));
    sum.line("kappa", format!("{kappa:.4}"));
    sum.line("kappa shaped", format!("{kappa_shaped:.4}"));
    sum.line(
        "ratio",
        match &ratio {
            Ok(r) => format!("{r:.4}"),
            Err(reason) => format!("undefined ({reason})"),
        },
    );
    sum.line("pi-equivalence gap", format!("{gap:.3e}"));
    sum.line(
        "max EVI span",
        format!("{:.4} over {} iterations", spans.max_span, exp.horizon),
    );

    art.csv(
        "evi_spans.csv",
        &["step", "span", "kappa"].map(String::from),
        spans
            .spans
            .iter()
            .enumerate()
            .map(|(i, s)| vec![(i + 1).to_string(), num(*s), num(kappa)]),
    )?;
    art.csv(
        "shaped_rewards.csv",
        &["state", "action", "mean_reward", "shaped_mean_reward"].map(String::from),
        (0..mdp.n_states()).flat_map(|s| {
            let (mdp, shaped) = (&mdp, &shaped);
            (0..mdp.n_actions()).map(move |a| {
                vec![
                    s.to_string(),
                    a.to_string(),
                    num(mdp.mean_reward(s, a)),
                    num(shaped.mean_reward(s, a)),
                ]
            })
        }),
    )?;

    let check_value = |name: &str, want: Option<f64>, got: f64, sum: &mut Summary| {
        if let Some(w) = want {
            sum.check(
                name,
                (w - got).abs() <= c.tolerance,
                format!("{got:.6} vs expected {w} (tolerance {})", c.tolerance),
            );
        }
    };
    check_value("kappa", c.kappa, kappa, sum);
    check_value("kappa shaped", c.kappa_shaped, kappa_shaped, sum);
    if let Some(max) = c.pi_equiv_max_gap {
        sum.check(
            "shaping preserves policy gains",
            gap <= max,
            format!("gap {gap:.3e} (max {max:e})"),
        );
    }
    if let Some(slack) = c.span_slack {
        sum.check(
            "EVI span at most kappa",
            spans.holds(slack),
            format!("max span {:.4} vs kappa {:.4}", spans.max_span, kappa),
        );
    }

    let trials = match &p.random_trials {
        Some(t) => Some(random_trials(exp, t, art)?),
        None => None,
    };
    if let Some(t) = &trials {
        sum.line(
            "random trials",
            format!(
                "{} usable of {}, ratio in [{:.4}, {:.4}]",
                t.usable, t.total, t.lo, t.hi
            ),
        );
    }
    if c.factor_two {
        let (passed, detail) = match &trials {
            Some(t) => (
                t.usable > 0 && t.lo >= 0.5 && t.hi <= 2.0,
                format!(
                    "{} usable trials, ratio in [{:.4}, {:.4}]",
                    t.usable, t.lo, t.hi
                ),
            ),
            None => (false, "no random trials configured".into()),
        };
        sum.check("factor-two bound on random MDPs", passed, detail);
    }

    art.json(
        "shaping.json",
        &json!({
            "potential": phi,
            "kappa": kappa,
            "kappa_shaped": kappa_shaped,
            "ratio": ratio.as_ref().ok(),
            "precondition_failure": ratio.as_ref().err(),
            "pi_equiv_gap": gap,
            "max_evi_span": spans.max_span,
            "random_trials": trials.as_ref().map(|t| json!({
                "total": t.total,
                "usable": t.usable,
                "ratio_min": t.lo,
                "ratio_max": t.hi,
            })),
        }),
    )
}

struct TrialStats {
    total: usize,
    usable: usize,
    lo: f64,
    hi: f64,
}

/// One random MDP and admissible potential per seed.
fn random_trials(exp: &Experiment, t: &RandomTrials, art: &mut Artifacts) -> Result<TrialStats> {
    let mut rows = Vec::new();
    let mut stats = TrialStats {
        total: exp.seeds.len(),
        usable: 0,
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    for &seed in &exp.seeds {
        let mut rng = seeded(seed);
        let mdp = make_random_mdp(&mut rng, t.n_states, t.n_actions, t.density, 0.05, 0.95);
        let Some(phi) = sample_admissible_potential(&mut rng, &mdp) else {
            rows.push(vec![
                seed.to_string(),
                "no-admissible-potential".into(),
                num(mehc(&mdp)),
                String::new(),
                String::new(),
            ]);
            continue;
        };
        let (k, ks, ratio) = factor_two(&mdp, &phi)?;
        let (status, r) = match ratio {
            Ok(r) => {
                stats.usable += 1;
                stats.lo = stats.lo.min(r);
                stats.hi = stats.hi.max(r);
                ("ok".to_string(), num(r))
            }
            Err(reason) => (format!("precondition-failed: {reason}"), String::new()),
        };
        rows.push(vec![seed.to_string(), status, num(k), num(ks), r]);
    }
    art.csv(
        "random_trials.csv",
        &["seed", "status", "kappa", "kappa_shaped", "ratio"].map(String::from),
        rows,
    )?;
    Ok(stats)
}
