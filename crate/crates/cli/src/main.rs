// Copyright 2026 The dpsync Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `dpsync` command-line tool.

use std::fmt::Write as _;
use std::io::{ErrorKind, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use dpsync::experiment::{self, ExperimentConfig};
use dpsync::StrategyKind;

#[derive(Parser)]
#[command(
    name = "dpsync",
    version,
    about = "Differentially private database synchronization simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one strategy and write its report.
    Run(Common),
    /// Run several strategies on the same data and seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated strategies; defaults to all five.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<StrategyKind>,
    },
    /// Empirically estimate the privacy loss on neighboring streams.
    Audit(Common),
    /// Check the logical-gap and outsourced-size tail bounds.
    Bounds(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    timer: Option<u64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    flush_interval: Option<u64>,
    #[arg(long)]
    flush_size: Option<usize>,
}

impl Common {
    /// Loads the config and applies flag overrides. `--trials` goes to the
    /// section the subcommand actually uses.
    fn load(&self, command: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            match command {
                "audit" => match cfg.audit.as_mut() {
                    Some(a) => a.trials = v,
                    None => bail!("config has no `audit` section"),
                },
                "bounds" => {
                    cfg.bounds.get_or_insert_with(Default::default).trials = v;
                }
                _ => cfg.trials = v,
            }
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.eps {
            cfg.params.eps = v;
        }
        if let Some(v) = self.timer {
            cfg.params.timer = v;
        }
        if let Some(v) = self.theta {
            cfg.params.theta = v;
        }
        if let Some(v) = self.flush_interval {
            cfg.params.flush_interval = v;
        }
        if let Some(v) = self.flush_size {
            cfg.params.flush_size = v;
        }
        Ok(cfg)
    }
}

/// Executes the subcommand, appending its console report to `out`. Returns
/// whether every verdict passed.
fn execute(command: Command, out: &mut String) -> Result<bool> {
    let mut ok = true;
    match command {
        Command::Run(common) => {
            let cfg = common.load("run")?;
            let output = experiment::run(&cfg)?;
            let dir = experiment::write_run(&cfg, &output)?;
            let s = &output.summary;
            writeln!(
                out,
                "{}: mean logical gap {:.3}, total {:.1}, dummy {:.1}",
                s.strategy, s.mean_lg, s.total, s.dummy
            )?;
            for q in &s.queries {
                writeln!(
                    out,
                    "  {}: mean L1 {:.3}, max L1 {:.3}",
                    q.query, q.mean_l1, q.max_l1
                )?;
            }
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::Compare { common, strategies } => {
            let cfg = common.load("compare")?;
            let strategies = if strategies.is_empty() {
                StrategyKind::ALL.to_vec()
            } else {
                strategies
            };
            let (cmp, _) = experiment::compare(&cfg, &strategies)?;
            let dir = experiment::write_comparison(&cfg, &cmp)?;
            out.push_str(&cmp.to_csv()?);
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::Audit(common) => {
            let cfg = common.load("audit")?;
            let r = experiment::audit(&cfg)?;
            let dir = experiment::write_audit(&cfg, &r)?;
            writeln!(
                out,
                "{} {}: eps_hat {:.3} vs target {} over {} bins ({} trials/arm)",
                if r.pass { "PASS" } else { "FAIL" },
                r.strategy,
                r.eps_hat,
                r.eps_target,
                r.bins_used,
                r.trials
            )?;
            writeln!(out, "wrote {}", dir.display())?;
            ok = r.pass;
        }
        Command::Bounds(common) => {
            let cfg = common.load("bounds")?;
            let results = experiment::bounds(&cfg)?;
            let dir = experiment::write_bounds(&cfg, &results)?;
            for r in &results {
                ok &= r.pass;
                writeln!(
                    out,
                    "{} {:?}: alpha {:.3}, tail {:.4} vs beta {} ({} samples)",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.bound,
                    r.alpha,
                    r.empirical_tail,
                    r.beta,
                    r.samples
                )?;
            }
            writeln!(out, "wrote {}", dir.display())?;
        }
    }
    Ok(ok)
}

fn main() -> Result<ExitCode> {
    let mut out = String::new();
    let ok = execute(Cli::parse().command, &mut out)?;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    match std::io::stdout().lock().write_all(out.as_bytes()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
