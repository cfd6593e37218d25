//! Turns an [`EnvSpec`] into the model a subcommand needs.

use anyhow::{bail, Context, Result};

use mdplab::mdp::{
    induce_mrp, io, make_final_visit_mrps, make_mk_chain, make_multireward_toy, make_racetrack,
    make_riverswim_mdp, make_riverswim_mrp, make_shaping_toy, FiniteMdp, MarkovChain, Mrp,
    StochasticPolicy,
};
use mdplab::pareto::MultiRewardMdp;

use crate::config::{EnvSpec, PolicySpec};

pub enum Model {
    Chain(MarkovChain),
    Mrp(Mrp),
    Mdp(FiniteMdp),
}

pub fn build(spec: &EnvSpec) -> Result<Model> {
    Ok(match spec {
        EnvSpec::Riverswim => Model::Mdp(make_riverswim_mdp()),
        EnvSpec::RiverswimMrp => Model::Mrp(make_riverswim_mrp()),
        EnvSpec::Racetrack { l, k, delta } => Model::Mdp(make_racetrack(*l, *k, *delta)?),
        EnvSpec::ShapingToy {
            alpha,
            beta,
            epsilon,
        } => Model::Mdp(make_shaping_toy(*alpha, *beta, *epsilon)?),
        EnvSpec::MultirewardToy { epsilon } => Model::Mdp(make_multireward_toy(*epsilon)?.0),
        EnvSpec::Mk { k } => Model::Chain(make_mk_chain(*k)?),
        EnvSpec::FinalVisit => Model::Mrp(make_final_visit_mrps().middle),
        EnvSpec::File { path } => Model::Mdp(
            io::load_model(path).with_context(|| format!("loading model {}", path.display()))?,
        ),
    })
}

pub fn mdp(spec: &EnvSpec) -> Result<FiniteMdp> {
    match build(spec)? {
        Model::Mdp(m) => Ok(m),
        _ => bail!(
            "env {}: this command needs a model with actions",
            name(spec)
        ),
    }
}

pub fn mrp(spec: &EnvSpec, policy: &PolicySpec) -> Result<Mrp> {
    match build(spec)? {
        Model::Mrp(m) => Ok(m),
        Model::Mdp(m) => Ok(induce_mrp(&m, &stochastic(policy, &m)?)?),
        Model::Chain(_) => bail!("env {}: this command needs rewards", name(spec)),
    }
}

pub fn chain(spec: &EnvSpec, policy: &PolicySpec) -> Result<MarkovChain> {
    match build(spec)? {
        Model::Chain(c) => Ok(c),
        Model::Mrp(m) => Ok(m.chain().clone()),
        Model::Mdp(m) => Ok(induce_mrp(&m, &stochastic(policy, &m)?)?.chain().clone()),
    }
}

pub fn multi_reward(spec: &EnvSpec) -> Result<MultiRewardMdp> {
    let (base, tables) = match spec {
        EnvSpec::MultirewardToy { epsilon } => make_multireward_toy(*epsilon)?,
        EnvSpec::File { path } => io::load_multi_reward(path)
            .with_context(|| format!("loading multi-reward model {}", path.display()))?,
        other => bail!("env {}: pareto needs a multi-reward model", name(other)),
    };
    Ok(MultiRewardMdp::new(base, tables)?)
}

fn stochastic(policy: &PolicySpec, mdp: &FiniteMdp) -> Result<StochasticPolicy> {
    match policy {
        PolicySpec::Uniform => Ok(StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions())),
        PolicySpec::Actions(a) => {
            if a.len() != mdp.n_states() {
                bail!(
                    "params.policy: {} actions for {} states",
                    a.len(),
                    mdp.n_states()
                );
            }
            Ok(StochasticPolicy::deterministic(mdp.n_actions(), a)?)
        }
    }
}

pub fn name(spec: &EnvSpec) -> String {
    serde_json::to_value(spec)
        .ok()
        .and_then(|v| v.get("name").and_then(|n| n.as_str()).map(String::from))
        .unwrap_or_default()
}
