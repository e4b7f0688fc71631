// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use droopsim::oracle::oracle_check;
use droopsim::sweep::{monte_carlo, Sweep};
use droopsim::{load_scenario, run_scenario, write_artifacts, HarnessError, Scenario};

/// Gate-level simulation of a droop-adaptive clock.
#[derive(Parser)]
#[command(name = "droopsim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a scenario file and print its hash.
    Validate { file: PathBuf },
    /// Simulate a scenario and write report.json, trace.vcd and log.
    Run {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Repeat a scenario over seeds, epsilon values or droop onsets.
    #[command(group(ArgGroup::new("sweep").required(true).args(["seeds", "epsilon", "onset"])))]
    Sweep {
        file: PathBuf,
        /// Seed range `A..B` (end exclusive) or `A..=B`.
        #[arg(long)]
        seeds: Option<String>,
        /// Comma-separated epsilon values.
        #[arg(long)]
        epsilon: Option<String>,
        /// Droop onset `start:end:step`, e.g. `20T:21T:T/100`.
        #[arg(long)]
        onset: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare an idealized scenario with the interval-algebra oracle.
    Oracle { file: PathBuf },
}

fn load(path: &Path) -> Result<Scenario, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
    Ok(load_scenario(&text)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(true)` when nothing was found.
fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.cmd {
        Cmd::Validate { file } => {
            let s = load(&file)?;
            println!("ok {} {}", s.topology, s.hash());
            Ok(true)
        }
        Cmd::Run { file, seed, out } => {
            let mut s = load(&file)?;
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            let run = run_scenario(&s)?;
            let dir = write_artifacts(&s, &run, &out)?;
            let rep = &run.report;
            for f in &rep.findings {
                println!("{f}");
            }
            println!("{} findings, {} metastability events, artifacts in {}", rep.findings.len(), rep.metastability.len(), dir.display());
            Ok(rep.passed)
        }
        Cmd::Sweep { file, seeds, epsilon, onset, out } => {
            let s = load(&file)?;
            let sweep = match (seeds, epsilon, onset) {
                (Some(r), _, _) => Sweep::parse_seeds(&r),
                (_, Some(l), _) => Sweep::parse_epsilon(&l),
                (_, _, Some(o)) => Sweep::parse_onset(&o),
                _ => unreachable!("clap enforces one sweep"),
            }
            .map_err(HarnessError::Sweep)?;
            let agg = monte_carlo(&s, &sweep)?;
            let dir = out.join(format!("sweep-{}-{}", agg.sweep, &agg.base_hash[..16]));
            fs::create_dir_all(&dir).map_err(|e| HarnessError::Io { path: dir.clone(), source: e })?;
            let p = dir.join("aggregate.json");
            let json = serde_json::to_string_pretty(&agg).expect("aggregate serializes");
            fs::write(&p, json + "\n").map_err(|e| HarnessError::Io { path: p.clone(), source: e })?;
            println!("{} runs: {} passed, {} failed ({} errors)", agg.total, agg.passed, agg.failed, agg.errors);
            println!("cases {:?}", agg.cases);
            if let Some(e) = agg.first_failing_epsilon {
                println!("first failing epsilon {e}");
            }
            println!("aggregate in {}", p.display());
            Ok(agg.all_passed())
        }
        Cmd::Oracle { file } => {
            let s = load(&file)?;
            let rep = oracle_check(&s)?;
            for n in &rep.nets {
                match n.first_mismatch {
                    None => println!("{}: match ({} edges)", n.net, n.simulated_edges),
                    Some(t) => println!("{}: MISMATCH from {t} ({} vs {} edges)", n.net, n.simulated_edges, n.oracle_edges),
                }
            }
            Ok(rep.matched())
        }
    }
}
