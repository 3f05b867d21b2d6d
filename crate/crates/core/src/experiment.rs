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

//! Experiment runner behind the command-line tool: configuration, the
//! simulation loop with periodic queries, strategy comparisons, and wrappers
//! over the audits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{self, Bound, NoiseMode};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, QueryPoint, QuerySummary, TimePoint};
use crate::noise::NoiseSource;
use crate::query::{query_error, Query};
use crate::sim::{derive_seed, Replica};
use crate::strategy::{StrategyKind, StrategyParams};
use crate::stream::{ingest_csv, BernoulliStream, GrowingDatabase, IngestOptions, Record};

pub const DEFAULT_QUERY_INTERVAL: u64 = 360;

/// Where a table's stream comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetConfig {
    Csv {
        name: String,
        path: PathBuf,
        time_column: String,
        #[serde(default = "default_granularity")]
        granularity_secs: u64,
        /// Record attribute -> CSV column.
        #[serde(default)]
        attributes: BTreeMap<String, String>,
        #[serde(default)]
        origin: Option<i64>,
        #[serde(default)]
        horizon: Option<u64>,
    },
    Synthetic {
        name: String,
        length: u64,
        rate: f64,
        #[serde(default)]
        initial: usize,
        /// Fixed data seed; when absent every trial draws a fresh stream.
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_granularity() -> u64 {
    60
}

impl DatasetConfig {
    pub fn name(&self) -> &str {
        match self {
            DatasetConfig::Csv { name, .. } | DatasetConfig::Synthetic { name, .. } => name,
        }
    }

    /// Loads the stream; relative CSV paths resolve against `base_dir`.
    fn load(&self, base_dir: &Path, trial_seed: u64, index: u64) -> Result<GrowingDatabase> {
        match self {
            DatasetConfig::Csv {
                name,
                path,
                time_column,
                granularity_secs,
                attributes,
                origin,
                horizon,
            } => {
                let path = if path.is_relative() {
                    base_dir.join(path)
                } else {
                    path.clone()
                };
                let text = fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!(
                        "cannot read dataset `{name}` at {}: {e}",
                        path.display()
                    ))
                })?;
                let opts = IngestOptions {
                    attributes: attributes.clone(),
                    origin: *origin,
                    horizon: *horizon,
                    ..IngestOptions::new(name.clone(), time_column.clone(), *granularity_secs)
                };
                ingest_csv(&text, &opts)
            }
            DatasetConfig::Synthetic {
                name,
                length,
                rate,
                initial,
                seed,
            } => BernoulliStream::new(name.clone(), *length, *rate)
                .with_initial(*initial)
                .generate(seed.unwrap_or_else(|| derive_seed(trial_seed, 1000 + index))),
        }
    }

    fn is_resampled(&self) -> bool {
        matches!(self, DatasetConfig::Synthetic { seed: None, .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub tau: u64,
    #[serde(default = "default_audit_trials")]
    pub trials: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_floor")]
    pub bin_floor: usize,
    /// Truncate the base stream to this many ticks.
    #[serde(default)]
    pub length: Option<u64>,
    #[serde(default)]
    pub remove: Option<u64>,
    #[serde(default)]
    pub window: Option<(u64, u64)>,
    #[serde(default)]
    pub max_entries: Option<usize>,
}

fn default_audit_trials() -> usize {
    100_000
}

fn default_slack() -> f64 {
    0.3
}

fn default_floor() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_bound_trials")]
    pub trials: usize,
    /// Defaults to `⌈4 ln(1/β)⌉`.
    #[serde(default)]
    pub min_syncs: Option<usize>,
    /// Defaults to the stream length.
    #[serde(default)]
    pub at: Option<u64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            beta: default_beta(),
            trials: default_bound_trials(),
            min_syncs: None,
            at: None,
        }
    }
}

fn default_beta() -> f64 {
    0.05
}

fn default_bound_trials() -> usize {
    audit::MIN_BOUND_TRIALS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyKind,
    #[serde(default)]
    pub params: StrategyParams<f64>,
    #[serde(default)]
    pub queries: Vec<Query>,
    #[serde(default = "default_query_interval")]
    pub query_interval: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Flush every backlog after the stream ends.
    #[serde(default)]
    pub drain: bool,
    #[serde(default)]
    pub audit: Option<AuditSection>,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    /// Directory relative dataset paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_strategy() -> StrategyKind {
    StrategyKind::DpTimer
}

fn default_query_interval() -> u64 {
    DEFAULT_QUERY_INTERVAL
}

fn default_trials() -> usize {
    1
}

impl ExperimentConfig {
    /// A config over the given datasets with every other field at its default.
    pub fn new(datasets: Vec<DatasetConfig>) -> Self {
        ExperimentConfig {
            datasets,
            strategy: default_strategy(),
            params: StrategyParams::default(),
            queries: Vec::new(),
            query_interval: DEFAULT_QUERY_INTERVAL,
            seed: 0,
            trials: 1,
            out: None,
            drain: false,
            audit: None,
            bounds: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name()) {
                return Err(Error::Config(format!(
                    "dataset `{}` declared twice",
                    d.name()
                )));
            }
        }
        for q in &self.queries {
            for table in q.tables() {
                if !names.contains(table) {
                    return Err(Error::Config(format!(
                        "{} references unknown dataset `{table}`",
                        q.name()
                    )));
                }
            }
        }
        if self.query_interval < 1 {
            return Err(Error::Config("query_interval must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.params.validate(self.strategy)
    }

    fn load_datasets(&self, trial_seed: u64) -> Result<Vec<GrowingDatabase>> {
        self.datasets
            .iter()
            .enumerate()
            .map(|(i, d)| d.load(&self.base_dir, trial_seed, i as u64))
            .collect()
    }
}

/// One trial: its metrics plus the per-table update patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutput {
    pub report: MetricsReport<f64>,
    pub transcripts: Vec<(String, crate::store::UpdatePattern)>,
    /// Whether every table passed the eventual-consistency check (only
    /// meaningful after a drain).
    pub consistent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub mean_lg: f64,
    pub total: usize,
    pub dummy: usize,
    pub queries: Vec<QuerySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: StrategyKind,
    pub params: StrategyParams<f64>,
    pub seed: u64,
    pub trials: usize,
    pub mean_lg: f64,
    /// Mean over trials of the final outsourced total.
    pub total: f64,
    pub dummy: f64,
    pub queries: Vec<QuerySummary>,
    pub per_trial: Vec<TrialSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trials: Vec<TrialOutput>,
}

fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, trial as u64)
}

/// Simulates one trial of `kind` over `tables`.
pub fn simulate_trial(
    cfg: &ExperimentConfig,
    kind: StrategyKind,
    tables: &[GrowingDatabase],
    seed: u64,
) -> Result<TrialOutput> {
    let mut replicas = tables
        .iter()
        .enumerate()
        .map(|(j, gdb)| {
            let j = j as u64;
            let r = Replica::new(
                gdb,
                kind,
                cfg.params,
                NoiseSource::seeded(derive_seed(seed, 2 * j)),
                derive_seed(seed, 2 * j + 1),
            )?;
            Ok(if cfg.drain { r.record_actions() } else { r })
        })
        .collect::<Result<Vec<_>>>()?;
    let horizon = tables.iter().map(GrowingDatabase::len).max().unwrap_or(0);

    let mut series = Vec::with_capacity(horizon as usize);
    let mut queries = Vec::new();
    for t in 1..=horizon {
        for r in &mut replicas {
            r.advance()?;
        }
        series.push(TimePoint {
            t,
            lg: replicas.iter().map(Replica::logical_gap).sum(),
            total: replicas.iter().map(|r| r.store().total()).sum(),
            dummy: replicas.iter().map(|r| r.store().dummy_count()).sum(),
        });
        if t % cfg.query_interval == 0 && !cfg.queries.is_empty() {
            queries.extend(evaluate_queries(&cfg.queries, &replicas, t)?);
        }
    }

    let consistent = if cfg.drain {
        let mut ok = true;
        for r in &mut replicas {
            r.drain()?;
            ok &= crate::metrics::consistency_check(r.gdb(), r.actions().unwrap_or_default());
        }
        Some(ok)
    } else {
        None
    };

    Ok(TrialOutput {
        report: MetricsReport {
            strategy: kind,
            params: cfg.params,
            seed,
            series,
            queries,
        },
        transcripts: replicas
            .iter()
            .map(|r| {
                (
                    r.gdb().table_id().to_string(),
                    r.store().transcript().clone(),
                )
            })
            .collect(),
        consistent,
    })
}

fn evaluate_queries(
    queries: &[Query],
    replicas: &[Replica<'_, f64>],
    t: u64,
) -> Result<Vec<QueryPoint>> {
    let mut logical: BTreeMap<String, Vec<&Record>> = BTreeMap::new();
    let mut outsourced: BTreeMap<String, Vec<&Record>> = BTreeMap::new();
    let mut rows: BTreeMap<String, usize> = BTreeMap::new();
    for r in replicas {
        let name = r.gdb().table_id().to_string();
        logical.insert(name.clone(), r.gdb().logical_db_at(t.min(r.gdb().len()))?);
        outsourced.insert(name.clone(), r.store().rows().iter().collect());
        rows.insert(name, r.store().total());
    }
    queries
        .iter()
        .map(|q| {
            let truth = q.evaluate(&logical)?;
            let observed = q.evaluate(&outsourced)?;
            Ok(QueryPoint {
                t,
                query: q.name().to_string(),
                truth: truth.total(),
                observed: observed.total(),
                l1: query_error(&truth, &observed)?,
                cost: q.scan_cost(&rows),
            })
        })
        .collect()
}

fn summarize_trial(out: &TrialOutput) -> TrialSummary {
    let last = out.report.final_point().unwrap_or(TimePoint {
        t: 0,
        lg: 0,
        total: 0,
        dummy: 0,
    });
    TrialSummary {
        seed: out.report.seed,
        mean_lg: out.report.mean_lg(),
        total: last.total,
        dummy: last.dummy,
        queries: out.report.query_summaries(),
        consistent: out.consistent,
    }
}

/// Runs `cfg.trials` trials of `cfg.strategy`. Deterministic given the seed.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_strategy(cfg, cfg.strategy)
}

fn run_strategy(cfg: &ExperimentConfig, kind: StrategyKind) -> Result<RunOutput> {
    cfg.validate()?;
    cfg.params.validate(kind)?;
    let fixed = if cfg.datasets.iter().any(DatasetConfig::is_resampled) {
        None
    } else {
        Some(cfg.load_datasets(cfg.seed)?)
    };
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.seed, i);
            match &fixed {
                Some(tables) => simulate_trial(cfg, kind, tables, seed),
                None => simulate_trial(cfg, kind, &cfg.load_datasets(seed)?, seed),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let per_trial: Vec<TrialSummary> = trials.iter().map(summarize_trial).collect();
    let n = per_trial.len() as f64;
    let mut queries: Vec<QuerySummary> = Vec::new();
    for name in per_trial
        .first()
        .map(|t| {
            t.queries
                .iter()
                .map(|q| q.query.clone())
                .collect::<Vec<_>>()
        })
        .unwrap_or_default()
    {
        let all: Vec<&QueryPoint> = trials
            .iter()
            .flat_map(|t| t.report.queries.iter().filter(|q| q.query == name))
            .collect();
        let m = all.len().max(1) as f64;
        queries.push(QuerySummary {
            query: name,
            mean_l1: all.iter().map(|q| q.l1).sum::<f64>() / m,
            max_l1: all.iter().map(|q| q.l1).fold(0.0, f64::max),
            mean_cost: all.iter().map(|q| q.cost as f64).sum::<f64>() / m,
            samples: all.len(),
        });
    }
    let summary = RunSummary {
        strategy: kind,
        params: cfg.params,
        seed: cfg.seed,
        trials: cfg.trials,
        mean_lg: per_trial.iter().map(|t| t.mean_lg).sum::<f64>() / n,
        total: per_trial.iter().map(|t| t.total as f64).sum::<f64>() / n,
        dummy: per_trial.iter().map(|t| t.dummy as f64).sum::<f64>() / n,
        queries,
        per_trial,
    };
    Ok(RunOutput { summary, trials })
}

/// One strategy's row of a comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: StrategyKind,
    pub queries: Vec<QuerySummary>,
    pub mean_lg: f64,
    pub total: f64,
    pub dummy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// One line per (strategy, query).
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "Strategy",
            "Query",
            "Mean L1 Err",
            "Max L1 Err",
            "Mean logical gap",
            "Total data",
            "Dummy data",
            "Mean scan cost",
        ])?;
        for row in &self.rows {
            let base = |q: &str, mean: String, max: String, cost: String| {
                vec![
                    row.strategy.to_string(),
                    q.to_string(),
                    mean,
                    max,
                    format!("{:.3}", row.mean_lg),
                    format!("{:.1}", row.total),
                    format!("{:.1}", row.dummy),
                    cost,
                ]
            };
            if row.queries.is_empty() {
                w.write_record(base("", String::new(), String::new(), String::new()))?;
            }
            for q in &row.queries {
                w.write_record(base(
                    &q.query,
                    format!("{:.3}", q.mean_l1),
                    format!("{:.3}", q.max_l1),
                    format!("{:.1}", q.mean_cost),
                ))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }
}

/// Runs every strategy on the same data and trial seeds.
pub fn compare(
    cfg: &ExperimentConfig,
    strategies: &[StrategyKind],
) -> Result<(Comparison, Vec<RunOutput>)> {
    if strategies.is_empty() {
        return Err(Error::Config("compare needs at least one strategy".into()));
    }
    let runs = strategies
        .iter()
        .map(|&k| run_strategy(cfg, k))
        .collect::<Result<Vec<_>>>()?;
    let rows = runs
        .iter()
        .map(|r| ComparisonRow {
            strategy: r.summary.strategy,
            queries: r.summary.queries.clone(),
            mean_lg: r.summary.mean_lg,
            total: r.summary.total,
            dummy: r.summary.dummy,
        })
        .collect();
    Ok((Comparison { rows }, runs))
}

/// Audits the configured private strategy on the first dataset.
pub fn audit(cfg: &ExperimentConfig) -> Result<audit::DPAuditResult<f64>> {
    cfg.validate()?;
    let section = cfg
        .audit
        .as_ref()
        .ok_or_else(|| Error::Config("config has no `audit` section".into()))?;
    let first = &cfg.datasets[0];
    let mut base = first.load(&cfg.base_dir, cfg.seed, 0)?;
    if let Some(len) = section.length {
        base = base.truncated(len);
    }
    let acfg = audit::AuditConfig {
        tau: section.tau,
        trials: section.trials,
        seed: cfg.seed,
        slack: section.slack,
        bin_floor: section.bin_floor,
        remove: section.remove,
        window: section.window,
        max_entries: section.max_entries,
    };
    audit::dp_audit(cfg.strategy, cfg.params, &base, &acfg)
}

/// Runs the gap and size tail checks that apply to the configured strategy.
pub fn bounds(cfg: &ExperimentConfig) -> Result<Vec<audit::BoundCheckResult<f64>>> {
    cfg.validate()?;
    let checks = match cfg.strategy {
        StrategyKind::DpTimer => [Bound::TimerGap, Bound::TimerSize],
        StrategyKind::DpAnt => [Bound::AntGap, Bound::AntSize],
        other => {
            return Err(Error::Config(format!(
                "bound checks apply to private strategies, not {other}"
            )))
        }
    };
    let section = cfg.bounds.clone().unwrap_or_default();
    let first = &cfg.datasets[0];
    let base_dir = cfg.base_dir.clone();
    let fixed = if first.is_resampled() {
        None
    } else {
        Some(first.load(&base_dir, cfg.seed, 0)?)
    };
    let length = match &fixed {
        Some(gdb) => gdb.len(),
        None => first.load(&base_dir, cfg.seed, 0)?.len(),
    };
    let stream_gen = |seed: u64| -> Result<GrowingDatabase> {
        match &fixed {
            Some(gdb) => Ok(gdb.clone()),
            None => first.load(&base_dir, seed, 0),
        }
    };
    let bcfg = audit::BoundCheckConfig {
        beta: section.beta,
        trials: section.trials,
        seed: cfg.seed,
        min_syncs: section
            .min_syncs
            .unwrap_or_else(|| (4.0 * (1.0 / section.beta).ln()).ceil() as usize),
        at: section.at.unwrap_or(length),
        noise: NoiseMode::Seeded,
    };
    checks
        .iter()
        .map(|&b| audit::check_bound(b, cfg.params, &stream_gen, &bcfg))
        .collect()
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Writes `report.json`, `transcript.csv`, `timeseries.csv` and
/// `queries.csv`; the CSVs describe the first trial.
pub fn write_run(cfg: &ExperimentConfig, output: &RunOutput) -> Result<PathBuf> {
    let dir = out_dir(cfg)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&output.summary)? + "\n",
    )?;
    if let Some(first) = output.trials.first() {
        if let Some((_, pattern)) = first.transcripts.first() {
            fs::write(dir.join("transcript.csv"), pattern.to_csv()?)?;
        }
        if first.transcripts.len() > 1 {
            for (name, pattern) in &first.transcripts {
                fs::write(
                    dir.join(format!("transcript-{name}.csv")),
                    pattern.to_csv()?,
                )?;
            }
        }
        fs::write(dir.join("timeseries.csv"), first.report.series_csv()?)?;
        fs::write(dir.join("queries.csv"), first.report.queries_csv()?)?;
    }
    Ok(dir)
}

pub fn write_comparison(cfg: &ExperimentConfig, cmp: &Comparison) -> Result<PathBuf> {
    let dir = out_dir(cfg)?;
    fs::write(
        dir.join("compare.json"),
        serde_json::to_string_pretty(cmp)? + "\n",
    )?;
    fs::write(dir.join("compare.csv"), cmp.to_csv()?)?;
    Ok(dir)
}

pub fn write_audit(cfg: &ExperimentConfig, result: &audit::DPAuditResult<f64>) -> Result<PathBuf> {
    let dir = out_dir(cfg)?;
    fs::write(
        dir.join("audit.json"),
        serde_json::to_string_pretty(result)? + "\n",
    )?;
    Ok(dir)
}

pub fn write_bounds(
    cfg: &ExperimentConfig,
    results: &[audit::BoundCheckResult<f64>],
) -> Result<PathBuf> {
    let dir = out_dir(cfg)?;
    fs::write(
        dir.join("bounds.json"),
        serde_json::to_string_pretty(results)? + "\n",
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "bound",
        "k_or_t",
        "alpha",
        "beta",
        "samples",
        "exceeded",
        "empirical_tail",
        "pass",
    ])?;
    for r in results {
        w.write_record([
            serde_json::to_value(r.bound)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
            r.k_or_t.to_string(),
            format!("{:.4}", r.alpha),
            r.beta.to_string(),
            r.samples.to_string(),
            r.exceeded.to_string(),
            format!("{:.6}", r.empirical_tail),
            r.pass.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    fs::write(dir.join("bounds.csv"), bytes)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(kind: StrategyKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(vec![DatasetConfig::Synthetic {
            name: "Y".into(),
            length: 10,
            rate: 0.5,
            initial: 2,
            seed: Some(3),
        }]);
        cfg.strategy = kind;
        cfg.query_interval = 5;
        cfg.queries = vec![Query::Q2 {
            table: "Y".into(),
            attr: "pickupID".into(),
        }];
        cfg
    }

    #[test]
    fn set_toy_run() {
        let out = run(&toy(StrategyKind::Set)).unwrap();
        let trial = &out.trials[0];
        assert_eq!(trial.transcripts[0].1.len(), 11);
        assert!(trial.report.series.iter().all(|p| p.lg == 0));
        assert!(trial.report.queries.iter().all(|q| q.l1 == 0.0));
        assert_eq!(trial.report.final_point().unwrap().total, 12);
    }

    #[test]
    fn config_rejects_unknown_tables() {
        let mut cfg = toy(StrategyKind::Sur);
        cfg.queries = vec![Query::Q3 {
            left: "Y".into(),
            right: "G".into(),
            on: "pickTime".into(),
        }];
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
        cfg.queries.clear();
        cfg.query_interval = 0;
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"datasets":[{"source":"synthetic","name":"Y","length":100,"rate":0.4}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.strategy, StrategyKind::DpTimer);
        assert_eq!(cfg.query_interval, 360);
        assert_eq!(cfg.params.eps, 0.5);
        assert_eq!(cfg.params.timer, 30);
        assert_eq!(cfg.params.theta, 15.0);
        assert_eq!(cfg.params.flush_interval, 2000);
        assert_eq!(cfg.params.flush_size, 15);
        assert!(ExperimentConfig::from_json(r#"{"datasets":[],"bogus":1}"#).is_err());
    }

    #[test]
    fn compare_single_strategy_matches_run() {
        let cfg = toy(StrategyKind::DpTimer);
        let (cmp, runs) = compare(&cfg, &[StrategyKind::DpTimer]).unwrap();
        assert_eq!(runs[0], run(&cfg).unwrap());
        assert_eq!(cmp.rows.len(), 1);
        assert!(cmp
            .to_csv()
            .unwrap()
            .starts_with("Strategy,Query,Mean L1 Err,Max L1 Err"));
    }
}
