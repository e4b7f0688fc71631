// SPDX-License-Identifier: Apache-2.0

//! Scenario files, runs, artifacts and Monte Carlo sweeps on top of `droopsim-core`.
//!
//! A scenario is a JSON document (see [`scenario`]) with a small delay syntax for
//! fractions of the period. [`run::run_scenario`] builds and simulates it and returns a
//! [`run::RunReport`]; [`run::write_artifacts`] stores the report, a VCD trace and a log
//! under the scenario hash. [`sweep::monte_carlo`] repeats a scenario over seeds,
//! variation levels or droop onsets.

use std::path::PathBuf;

pub mod delay;
pub mod oracle;
pub mod run;
pub mod scenario;
pub mod sweep;
pub mod trace;

pub use delay::Delay;
pub use run::{run_scenario, write_artifacts, Run, RunReport};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use sweep::{monte_carlo, AggregateReport, Sweep};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("simulating {scenario} ({hash}): {source}")]
    Sim { scenario: String, hash: String, source: droopsim_core::SimError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("sweep: {0}")]
    Sweep(String),
}
