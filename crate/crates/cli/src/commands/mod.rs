pub mod evaluate;
pub mod learn;
pub mod metrics;
pub mod pareto;
pub mod shaping;

use std::path::Path;

use anyhow::Result;

use crate::artifacts::{Artifacts, Manifest, Summary};
use crate::config::{Experiment, Spec};

/// Runs the experiment and writes its artifacts and manifest to `out`.
pub fn execute(exp: &Experiment, out: &Path) -> Result<(Summary, Manifest)> {
    let hash = exp.hash();
    let mut art = Artifacts::create(out, &hash)?;
    let mut sum = Summary {
        kind: exp.kind.as_str().into(),
        config_hash: hash,
        ..Summary::default()
    };
    match &exp.spec {
        Spec::Metrics(p, c) => metrics::run(exp, p, c, &mut art, &mut sum)?,
        Spec::Evaluate(p, c) => evaluate::run(exp, p, c, &mut art, &mut sum)?,
        Spec::Shaping(p, c) => shaping::run(exp, p, c, &mut art, &mut sum)?,
        Spec::Learn(p, c) => learn::run(exp, p, c, &mut art, &mut sum)?,
        Spec::Pareto(p, c) => pareto::run(exp, p, c, &mut art, &mut sum)?,
    }
    let manifest = art.finish(exp, &sum)?;
    Ok((sum, manifest))
}

pub fn fmt_list(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("[{}]", parts.join(", "))
}
