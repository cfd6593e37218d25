//! Numerical laboratory for finite Markov decision processes.
pub mod estimators;
pub mod linalg;
pub mod mdp;
pub mod metrics;
pub mod ofu;
pub mod pareto;
pub mod rng;
pub mod shaping;
pub mod stats;

/// The guide's snippets, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/chain-metrics.md")]
    mod chain_metrics {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/shaping.md")]
    mod shaping {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/pareto.md")]
    mod pareto {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
