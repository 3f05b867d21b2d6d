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

//! Synchronization strategies driven one tick at a time.
//!
//! Every strategy consumes the setup records and then one optional update per
//! tick, answering with the protocol runs (setup, sync or flush) the owner
//! performs at that tick. The naive baselines are `SUR` (upload on receipt),
//! `OTO` (upload once at setup) and `SET` (upload one record every tick,
//! dummy if nothing arrived). `DP-Timer` and `DP-ANT` hide the arrival
//! pattern behind Laplace-noised batch sizes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::LocalCache;
use crate::error::{Error, Result};
use crate::noise::{perturb, NoiseSource};
use crate::scalar::Real;
use crate::stream::Record;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Sur,
    Oto,
    Set,
    DpTimer,
    DpAnt,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Sur,
        StrategyKind::Oto,
        StrategyKind::Set,
        StrategyKind::DpTimer,
        StrategyKind::DpAnt,
    ];

    pub fn is_private(self) -> bool {
        matches!(self, StrategyKind::DpTimer | StrategyKind::DpAnt)
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Sur => "sur",
            StrategyKind::Oto => "oto",
            StrategyKind::Set => "set",
            StrategyKind::DpTimer => "dp-timer",
            StrategyKind::DpAnt => "dp-ant",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "sur" => Ok(StrategyKind::Sur),
            "oto" => Ok(StrategyKind::Oto),
            "set" => Ok(StrategyKind::Set),
            "dptimer" | "timer" => Ok(StrategyKind::DpTimer),
            "dpant" | "ant" => Ok(StrategyKind::DpAnt),
            _ => Err(Error::Config(format!(
                "unknown strategy `{s}` (expected sur, oto, set, dp-timer or dp-ant)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "F: Real")]
pub struct StrategyParams<F> {
    /// Total privacy budget.
    pub eps: F,
    /// Sync period of DP-Timer.
    pub timer: u64,
    /// Sync threshold of DP-ANT.
    pub theta: F,
    /// Ticks between cache flushes.
    pub flush_interval: u64,
    /// Records uploaded per flush.
    pub flush_size: usize,
}

impl<F: Real> Default for StrategyParams<F> {
    fn default() -> Self {
        StrategyParams {
            eps: F::lit(0.5),
            timer: 30,
            theta: F::lit(15.0),
            flush_interval: 2000,
            flush_size: 15,
        }
    }
}

impl<F: Real> StrategyParams<F> {
    pub fn validate(&self, kind: StrategyKind) -> Result<()> {
        if !kind.is_private() {
            return Ok(());
        }
        if !self.eps.is_finite() || self.eps <= F::zero() {
            return Err(Error::Parameter(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if kind == StrategyKind::DpTimer && self.timer < 1 {
            return Err(Error::Parameter("timer period must be at least 1".into()));
        }
        if kind == StrategyKind::DpAnt && (self.theta.is_nan() || self.theta < F::one()) {
            return Err(Error::Parameter(format!(
                "theta must be at least 1, got {}",
                self.theta
            )));
        }
        if self.flush_interval < 1 {
            return Err(Error::Parameter("flush interval must be at least 1".into()));
        }
        if self.flush_size < 1 {
            return Err(Error::Parameter("flush size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cause {
    Setup,
    Sync,
    Flush,
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cause::Setup => "setup",
            Cause::Sync => "sync",
            Cause::Flush => "flush",
        })
    }
}

impl FromStr for Cause {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "setup" => Ok(Cause::Setup),
            "sync" => Ok(Cause::Sync),
            "flush" => Ok(Cause::Flush),
            _ => Err(Error::Parameter(format!("unknown cause `{s}`"))),
        }
    }
}

/// One protocol run: the batch `γ_t` the owner uploads at `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncAction {
    pub time: u64,
    pub batch: Vec<Record>,
    pub cause: Cause,
}

impl SyncAction {
    pub fn volume(&self) -> usize {
        self.batch.len()
    }
}

/// Owner state observed at a tick after the arrival is cached and before
/// any sync or flush runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Probe {
    pub time: u64,
    /// Real records held back in the cache, i.e. the logical gap.
    pub backlog: usize,
    /// Arrivals since the last sync, `c_{t*}^t`.
    pub pending: usize,
}

#[derive(Clone, Debug)]
pub struct SyncStrategy<F> {
    kind: StrategyKind,
    params: StrategyParams<F>,
    cache: LocalCache,
    noise: NoiseSource<F>,
    // arrivals[i] is true when u_{i+1} was non-null
    arrivals: Vec<bool>,
    now: u64,
    last_sync: u64,
    syncs: usize,
    eps1: F,
    eps2: F,
    noisy_threshold: F,
    probe: Probe,
}

impl<F: Real> SyncStrategy<F> {
    /// Loads `initial` into `cache` and performs the setup upload.
    pub fn init(
        kind: StrategyKind,
        params: StrategyParams<F>,
        initial: Vec<Record>,
        mut cache: LocalCache,
        mut noise: NoiseSource<F>,
    ) -> Result<(Self, SyncAction)> {
        params.validate(kind)?;
        if !cache.is_empty() {
            return Err(Error::Contract("strategy needs a fresh cache".into()));
        }
        let n0 = initial.len();
        for r in initial {
            cache.write(r)?;
        }
        let (eps1, eps2) = (params.eps / F::lit(2.0), params.eps / F::lit(2.0));
        let mut noisy_threshold = F::zero();
        let batch = match kind {
            StrategyKind::Sur | StrategyKind::Oto | StrategyKind::Set => cache.read(n0, 0),
            StrategyKind::DpTimer => perturb(n0, params.eps, &mut cache, &mut noise, 0)?,
            StrategyKind::DpAnt => {
                let batch = perturb(n0, params.eps, &mut cache, &mut noise, 0)?;
                noisy_threshold = params.theta + noise.laplace(F::lit(2.0) / eps1)?;
                batch
            }
        };
        let strategy = SyncStrategy {
            kind,
            params,
            cache,
            noise,
            arrivals: Vec::new(),
            now: 0,
            last_sync: 0,
            syncs: 0,
            eps1,
            eps2,
            noisy_threshold,
            probe: Probe::default(),
        };
        let setup = SyncAction {
            time: 0,
            batch,
            cause: Cause::Setup,
        };
        Ok((strategy, setup))
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn params(&self) -> &StrategyParams<F> {
        &self.params
    }

    pub fn cache(&self) -> &LocalCache {
        &self.cache
    }

    /// Last tick processed.
    pub fn now(&self) -> u64 {
        self.now
    }

    /// Time of the last sync (setup counts as tick 0).
    pub fn last_sync(&self) -> u64 {
        self.last_sync
    }

    /// Number of sync runs so far, excluding setup and flushes.
    pub fn sync_count(&self) -> usize {
        self.syncs
    }

    pub fn noisy_threshold(&self) -> F {
        self.noisy_threshold
    }

    pub fn last_probe(&self) -> Probe {
        self.probe
    }

    fn arrivals_between(&self, after: u64, upto: u64) -> usize {
        self.arrivals[after as usize..upto as usize]
            .iter()
            .filter(|&&x| x)
            .count()
    }

    /// Advances to tick `t` with logical update `update`.
    pub fn step(&mut self, t: u64, update: Option<Record>) -> Result<Vec<SyncAction>> {
        if t != self.now + 1 {
            return Err(Error::Sequencing(format!(
                "expected tick {}, got {t}",
                self.now + 1
            )));
        }
        if update.as_ref().is_some_and(|r| r.is_dummy) {
            return Err(Error::Contract(format!(
                "logical update at tick {t} is a dummy"
            )));
        }
        self.now = t;
        self.arrivals.push(update.is_some());
        let mut actions = Vec::new();

        match self.kind {
            StrategyKind::Sur => {
                self.observe(t);
                if let Some(r) = update {
                    actions.push(self.sync(t, vec![r]));
                }
            }
            StrategyKind::Oto => self.observe(t),
            StrategyKind::Set => {
                if let Some(r) = update {
                    self.cache.write(r)?;
                }
                self.observe(t);
                let batch = self.cache.read(1, t);
                actions.push(self.sync(t, batch));
            }
            StrategyKind::DpTimer => {
                if let Some(r) = update {
                    self.cache.write(r)?;
                }
                self.observe(t);
                if t.is_multiple_of(self.params.timer) {
                    let count = self.arrivals_between(t - self.params.timer, t);
                    let batch =
                        perturb(count, self.params.eps, &mut self.cache, &mut self.noise, t)?;
                    actions.push(self.sync(t, batch));
                }
            }
            StrategyKind::DpAnt => {
                let v = self.noise.laplace(F::lit(4.0) / self.eps1)?;
                if let Some(r) = update {
                    self.cache.write(r)?;
                }
                self.observe(t);
                let count = self.arrivals_between(self.last_sync, t);
                if F::from_count(count) + v >= self.noisy_threshold {
                    let batch = perturb(count, self.eps2, &mut self.cache, &mut self.noise, t)?;
                    actions.push(self.sync(t, batch));
                    self.noisy_threshold =
                        self.params.theta + self.noise.laplace(F::lit(2.0) / self.eps1)?;
                }
            }
        }

        if self.kind.is_private() && t.is_multiple_of(self.params.flush_interval) {
            actions.push(SyncAction {
                time: t,
                batch: self.cache.read(self.params.flush_size, t),
                cause: Cause::Flush,
            });
        }
        Ok(actions)
    }

    /// Keeps stepping with null updates until no real record is cached.
    pub fn drain(&mut self) -> Result<Vec<SyncAction>> {
        let mut actions = Vec::new();
        if !self.kind.is_private() {
            return Ok(actions);
        }
        while !self.cache.is_empty() {
            let t = self.now + 1;
            actions.extend(self.step(t, None)?);
        }
        Ok(actions)
    }

    fn observe(&mut self, t: u64) {
        self.probe = Probe {
            time: t,
            backlog: self.cache.len(),
            pending: self.arrivals_between(self.last_sync, t),
        };
    }

    fn sync(&mut self, t: u64, batch: Vec<Record>) -> SyncAction {
        self.last_sync = t;
        self.syncs += 1;
        SyncAction {
            time: t,
            batch,
            cause: Cause::Sync,
        }
    }
}
