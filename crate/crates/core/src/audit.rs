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

//! Monte-Carlo checks of the gap and storage tail bounds, and an empirical
//! differential-privacy audit of the update pattern.
//!
//! Logarithms are natural throughout.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::scalar::Real;
use crate::sim::{derive_seed, Replica};
use crate::store::PatternEntry;
use crate::strategy::{Cause, StrategyKind, StrategyParams};
use crate::stream::GrowingDatabase;

/// Generates the stream of one trial from that trial's seed.
pub type StreamGen<'a> = dyn Fn(u64) -> Result<GrowingDatabase> + Sync + 'a;

/// DP-Timer gap allowance `(2/ε)·sqrt(k·ln(1/β))` after `k` syncs.
pub fn timer_alpha<F: Real>(eps: F, k: usize, beta: F) -> F {
    F::lit(2.0) / eps * (F::from_count(k) * beta.recip().ln()).sqrt()
}

/// DP-ANT gap allowance `16·(ln t + ln(2/β))/ε` at tick `t`.
pub fn ant_alpha<F: Real>(eps: F, t: u64, beta: F) -> F {
    F::lit(16.0) * (F::lit(t as f64).ln() + (F::lit(2.0) / beta).ln()) / eps
}

/// Flush allowance `η = s·⌊t/f⌋`.
pub fn flush_allowance(flush_size: usize, flush_interval: u64, t: u64) -> usize {
    flush_size * (t / flush_interval) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// DP-Timer logical gap beyond the current window.
    TimerGap,
    /// DP-Timer total outsourced records.
    TimerSize,
    /// DP-ANT logical gap beyond the records since the last sync.
    AntGap,
    /// DP-ANT total outsourced records.
    AntSize,
}

impl Bound {
    pub fn strategy(self) -> StrategyKind {
        match self {
            Bound::TimerGap | Bound::TimerSize => StrategyKind::DpTimer,
            Bound::AntGap | Bound::AntSize => StrategyKind::DpAnt,
        }
    }
}

/// Noise used by the Monte-Carlo trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", bound = "F: Real")]
pub enum NoiseMode<F> {
    #[default]
    Seeded,
    /// Every Laplace draw replaced by this value.
    Constant(F),
}

impl<F: Real> NoiseMode<F> {
    fn source(self, seed: u64) -> NoiseSource<F> {
        match self {
            NoiseMode::Seeded => NoiseSource::seeded(seed),
            NoiseMode::Constant(v) => NoiseSource::constant(v),
        }
    }
}

pub const MIN_BOUND_TRIALS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct BoundCheckConfig<F> {
    pub beta: F,
    pub trials: usize,
    pub seed: u64,
    /// Smallest sync index sampled by the DP-Timer gap check.
    #[serde(default)]
    pub min_syncs: usize,
    /// Tick sampled by the size checks and the DP-ANT gap check.
    #[serde(default)]
    pub at: u64,
    #[serde(default)]
    pub noise: NoiseMode<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct BoundCheckResult<F> {
    pub bound: Bound,
    /// Sync count `k` (timer gap) or tick `t` the bound was instantiated at.
    pub k_or_t: u64,
    pub alpha: F,
    pub beta: F,
    pub samples: usize,
    pub exceeded: usize,
    pub empirical_tail: f64,
    pub pass: bool,
}

impl<F: Real> BoundCheckConfig<F> {
    fn validate(&self) -> Result<()> {
        if !(self.beta > F::zero() && self.beta < F::one()) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.trials < MIN_BOUND_TRIALS {
            return Err(Error::Config(format!(
                "bound checks need at least {MIN_BOUND_TRIALS} trials, got {}",
                self.trials
            )));
        }
        Ok(())
    }

    fn log_inv_beta(&self) -> f64 {
        self.beta.recip().ln().as_f64()
    }
}

fn finish<F: Real>(
    bound: Bound,
    k_or_t: u64,
    alpha: F,
    cfg: &BoundCheckConfig<F>,
    (samples, exceeded): (usize, usize),
) -> Result<BoundCheckResult<F>> {
    if samples == 0 {
        return Err(Error::Input(format!(
            "{bound:?} check collected no samples; stream too short"
        )));
    }
    let empirical_tail = exceeded as f64 / samples as f64;
    Ok(BoundCheckResult {
        bound,
        k_or_t,
        alpha,
        beta: cfg.beta,
        samples,
        exceeded,
        empirical_tail,
        pass: empirical_tail <= cfg.beta.as_f64(),
    })
}

/// Runs `trial` for every seed and sums the `(samples, exceeded)` pairs.
fn tally<T>(cfg: &BoundCheckConfig<impl Real>, trial: T) -> Result<(usize, usize)>
where
    T: Fn(u64) -> Result<(usize, usize)> + Sync,
{
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| trial(derive_seed(cfg.seed, i)))
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
}

fn replica<'a, F: Real>(
    gdb: &'a GrowingDatabase,
    kind: StrategyKind,
    params: StrategyParams<F>,
    noise: NoiseMode<F>,
    seed: u64,
) -> Result<Replica<'a, F>> {
    Replica::new(
        gdb,
        kind,
        params,
        noise.source(seed),
        derive_seed(seed, u64::MAX),
    )
}

/// Tail of `LG(t) − c_{t*}^t ≥ (2/ε)√(k ln(1/β))`, sampled just before every
/// DP-Timer sync whose index `k` is at least `min_syncs`.
pub fn check_timer_bound<F: Real>(
    params: StrategyParams<F>,
    stream_gen: &StreamGen<'_>,
    cfg: &BoundCheckConfig<F>,
) -> Result<BoundCheckResult<F>> {
    cfg.validate()?;
    let needed = 4.0 * cfg.log_inv_beta();
    if (cfg.min_syncs as f64) < needed {
        return Err(Error::Config(format!(
            "gap bound requires k >= 4 ln(1/beta) = {needed:.2} syncs, min_syncs is {}",
            cfg.min_syncs
        )));
    }
    let counts = tally(cfg, |seed| {
        let gdb = stream_gen(seed)?;
        let mut r = replica(&gdb, StrategyKind::DpTimer, params, cfg.noise, seed)?;
        let (mut samples, mut exceeded) = (0, 0);
        while r.now() < gdb.len() {
            let before = r.strategy().sync_count();
            r.advance()?;
            let k = r.strategy().sync_count();
            if k > before && k >= cfg.min_syncs {
                let p = r.probe();
                let carried = F::from_count(p.backlog) - F::from_count(p.pending);
                samples += 1;
                exceeded += usize::from(carried >= timer_alpha(params.eps, k, cfg.beta));
            }
        }
        Ok((samples, exceeded))
    })?;
    let alpha = timer_alpha(params.eps, cfg.min_syncs, cfg.beta);
    finish(Bound::TimerGap, cfg.min_syncs as u64, alpha, cfg, counts)
}

/// Tail of `|DS_t| ≥ |D_t| + α + s⌊t/f⌋` for DP-Timer at tick `cfg.at`.
pub fn check_timer_size_bound<F: Real>(
    params: StrategyParams<F>,
    stream_gen: &StreamGen<'_>,
    cfg: &BoundCheckConfig<F>,
) -> Result<BoundCheckResult<F>> {
    cfg.validate()?;
    params.validate(StrategyKind::DpTimer)?;
    let needed = 4.0 * params.timer as f64 * cfg.log_inv_beta();
    if (cfg.at as f64) <= needed {
        return Err(Error::Config(format!(
            "size bound requires t > 4 T ln(1/beta) = {needed:.2}, got t = {}",
            cfg.at
        )));
    }
    let k = (cfg.at / params.timer) as usize;
    let alpha = timer_alpha(params.eps, k, cfg.beta);
    let counts = size_tally(StrategyKind::DpTimer, params, stream_gen, cfg, alpha)?;
    finish(Bound::TimerSize, cfg.at, alpha, cfg, counts)
}

/// Tail of `LG(t) − c_{t*}^t ≥ 16(ln t + ln(2/β))/ε` for DP-ANT at `cfg.at`.
pub fn check_ant_bound<F: Real>(
    params: StrategyParams<F>,
    stream_gen: &StreamGen<'_>,
    cfg: &BoundCheckConfig<F>,
) -> Result<BoundCheckResult<F>> {
    cfg.validate()?;
    if cfg.at < 1 {
        return Err(Error::Config(
            "gap bound needs a sampling tick t >= 1".into(),
        ));
    }
    let alpha = ant_alpha(params.eps, cfg.at, cfg.beta);
    let counts = tally(cfg, |seed| {
        let gdb = stream_gen(seed)?;
        if gdb.len() < cfg.at {
            return Ok((0, 0));
        }
        let mut r = replica(&gdb, StrategyKind::DpAnt, params, cfg.noise, seed)?;
        while r.now() < cfg.at {
            r.advance()?;
        }
        let p = r.probe();
        let carried = F::from_count(p.backlog) - F::from_count(p.pending);
        Ok((1, usize::from(carried >= alpha)))
    })?;
    finish(Bound::AntGap, cfg.at, alpha, cfg, counts)
}

/// Tail of `|DS_t| ≥ |D_t| + α + s⌊t/f⌋` for DP-ANT at tick `cfg.at`.
pub fn check_ant_size_bound<F: Real>(
    params: StrategyParams<F>,
    stream_gen: &StreamGen<'_>,
    cfg: &BoundCheckConfig<F>,
) -> Result<BoundCheckResult<F>> {
    cfg.validate()?;
    if cfg.at < 1 {
        return Err(Error::Config(
            "size bound needs a sampling tick t >= 1".into(),
        ));
    }
    let alpha = ant_alpha(params.eps, cfg.at, cfg.beta);
    let counts = size_tally(StrategyKind::DpAnt, params, stream_gen, cfg, alpha)?;
    finish(Bound::AntSize, cfg.at, alpha, cfg, counts)
}

fn size_tally<F: Real>(
    kind: StrategyKind,
    params: StrategyParams<F>,
    stream_gen: &StreamGen<'_>,
    cfg: &BoundCheckConfig<F>,
    alpha: F,
) -> Result<(usize, usize)> {
    let eta = flush_allowance(params.flush_size, params.flush_interval, cfg.at);
    tally(cfg, |seed| {
        let gdb = stream_gen(seed)?;
        if gdb.len() < cfg.at {
            return Ok((0, 0));
        }
        let mut r = replica(&gdb, kind, params, cfg.noise, seed)?;
        while r.now() < cfg.at {
            r.advance()?;
        }
        let limit = F::from_count(gdb.logical_size_at(cfg.at)? + eta) + alpha;
        Ok((1, usize::from(F::from_count(r.store().total()) >= limit)))
    })
}

/// Runs the check matching `bound`.
pub fn check_bound<F: Real>(
    bound: Bound,
    params: StrategyParams<F>,
    stream_gen: &StreamGen<'_>,
    cfg: &BoundCheckConfig<F>,
) -> Result<BoundCheckResult<F>> {
    match bound {
        Bound::TimerGap => check_timer_bound(params, stream_gen, cfg),
        Bound::TimerSize => check_timer_size_bound(params, stream_gen, cfg),
        Bound::AntGap => check_ant_bound(params, stream_gen, cfg),
        Bound::AntSize => check_ant_size_bound(params, stream_gen, cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct AuditConfig<F> {
    /// Neighbors agree through this tick.
    pub tau: u64,
    /// Simulations per arm.
    pub trials: usize,
    pub seed: u64,
    /// Allowance for sampling error on top of the target budget.
    pub slack: F,
    /// Minimum count in both arms for a bin to be compared.
    pub bin_floor: usize,
    /// Tick of the update removed to build the neighbor; defaults to the
    /// first non-null update after `tau`.
    #[serde(default)]
    pub remove: Option<u64>,
    /// Only transcript entries with `t` in this inclusive range form the
    /// bin key. [`dp_audit`] defaults it to the entries at or after the
    /// removed update, [`dp_audit_pair`] to the whole transcript.
    #[serde(default)]
    pub window: Option<(u64, u64)>,
    /// Keep at most this many entries of the window in the bin key.
    #[serde(default)]
    pub max_entries: Option<usize>,
}

impl<F: Real> AuditConfig<F> {
    pub fn new(tau: u64, trials: usize, seed: u64) -> Self {
        AuditConfig {
            tau,
            trials,
            seed,
            slack: F::lit(0.3),
            bin_floor: 20,
            remove: None,
            window: None,
            max_entries: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct DPAuditResult<F> {
    pub strategy: StrategyKind,
    pub eps_target: F,
    /// Largest `|ln(p/p')|` over co-populated bins.
    pub eps_hat: F,
    pub bins_used: usize,
    pub trials: usize,
    /// Tick of the update that differs between the neighbors.
    pub removed: Option<u64>,
    pub pass: bool,
}

/// Audits `kind` on `base` against its neighbor with one update after `tau`
/// removed.
pub fn dp_audit<F: Real>(
    kind: StrategyKind,
    params: StrategyParams<F>,
    base: &GrowingDatabase,
    cfg: &AuditConfig<F>,
) -> Result<DPAuditResult<F>> {
    let removed = match cfg.remove {
        Some(t) if t > cfg.tau => t,
        Some(t) => {
            return Err(Error::Input(format!(
                "removed update at tick {t} does not follow tau = {}",
                cfg.tau
            )))
        }
        None => (cfg.tau + 1..=base.len())
            .find(|&t| base.update_at(t).is_some())
            .ok_or_else(|| Error::Input(format!("no update after tau = {} to remove", cfg.tau)))?,
    };
    let neighbor = base.without_update(removed)?;
    // entries before `removed` are identically distributed under both arms
    let cfg = AuditConfig {
        window: Some(cfg.window.unwrap_or((removed, u64::MAX))),
        ..cfg.clone()
    };
    let mut result = dp_audit_pair(kind, params, base, &neighbor, &cfg)?;
    result.removed = Some(removed);
    Ok(result)
}

type BinKey = Vec<(u64, usize, Cause)>;

/// Histogram-ratio estimate of the privacy loss between two given streams.
pub fn dp_audit_pair<F: Real>(
    kind: StrategyKind,
    params: StrategyParams<F>,
    d: &GrowingDatabase,
    d_prime: &GrowingDatabase,
    cfg: &AuditConfig<F>,
) -> Result<DPAuditResult<F>> {
    if !kind.is_private() {
        return Err(Error::Config(format!(
            "audit applies to private strategies, not {kind}"
        )));
    }
    params.validate(kind)?;
    if cfg.trials == 0 {
        return Err(Error::Config("audit needs at least one trial".into()));
    }
    let window = cfg.window.unwrap_or((0, u64::MAX));
    let key_of = |e: &PatternEntry| {
        (window.0..=window.1)
            .contains(&e.t)
            .then_some((e.t, e.volume, e.cause))
    };

    let histogram = |gdb: &GrowingDatabase, arm: u64| -> Result<HashMap<BinKey, usize>> {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(cfg.seed, 2 * i + arm);
                let mut r = Replica::seeded(gdb, kind, params, seed)?;
                r.run_to_end()?;
                let entries = r.store().transcript().entries.iter().filter_map(key_of);
                Ok(entries
                    .take(cfg.max_entries.unwrap_or(usize::MAX))
                    .collect::<BinKey>())
            })
            .try_fold(HashMap::new, |mut h, key: Result<BinKey>| {
                *h.entry(key?).or_insert(0) += 1;
                Ok(h)
            })
            .try_reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                Ok(a)
            })
    };
    let h0 = histogram(d, 0)?;
    let h1 = histogram(d_prime, 1)?;

    let mut eps_hat = 0.0f64;
    let mut bins_used = 0;
    for (key, &n0) in &h0 {
        let n1 = h1.get(key).copied().unwrap_or(0);
        if n0 >= cfg.bin_floor && n1 >= cfg.bin_floor {
            bins_used += 1;
            eps_hat = eps_hat.max((n0 as f64 / n1 as f64).ln().abs());
        }
    }
    let eps_hat = F::lit(eps_hat);
    Ok(DPAuditResult {
        strategy: kind,
        eps_target: params.eps,
        eps_hat,
        bins_used,
        trials: cfg.trials,
        removed: None,
        pass: eps_hat <= params.eps + cfg.slack,
    })
}
