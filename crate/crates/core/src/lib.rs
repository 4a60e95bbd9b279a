//! Deterministic simulator of a collaborative-training data marketplace.
//!
//! Agents stake deposits to submit labeled samples, an online perceptron
//! trains on every accepted submission, and a contract refunds stakes whose
//! label the model later agrees with while forfeiting the rest into a
//! reward pool.
//!
//! ```
//! use stakesim::sim::{run, ScenarioFile, ScenarioConfig, DatasetFile};
//!
//! let file = ScenarioFile {
//!     num_words: 60,
//!     dataset: DatasetFile::Synthetic { n: 400, seed: 1 },
//!     max_virtual_time_s: Some(30 * 86_400),
//!     ..ScenarioFile::default()
//! };
//! let report = run(&ScenarioConfig::try_from(file)?)?;
//! assert_eq!(report.gap, report.accuracy_all - report.final_accuracy);
//! # Ok::<(), stakesim::sim::SimError>(())
//! ```

pub mod agents;
pub mod cli;
pub mod contract;
pub mod data;
pub mod model;
pub mod rng;
pub mod sim;

pub use contract::{AgentId, Contract, ContractRules, Ledger, SubmissionId, Units};
pub use model::{Label, LabeledSample, SparsePerceptron};
pub use sim::{ScenarioConfig, SimulationReport};

/// Book chapters, compiled as doctests so their snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/contract.md")]
    mod contract {}
    #[doc = include_str!("../../../book/src/perceptron.md")]
    mod perceptron {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
