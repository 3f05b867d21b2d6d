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

//! Drives one strategy over one stream into one mock server.

use crate::cache::{DummyFactory, LocalCache};
use crate::error::Result;
use crate::noise::NoiseSource;
use crate::scalar::Real;
use crate::store::OutsourcedStore;
use crate::strategy::{Cause, Probe, StrategyKind, StrategyParams, SyncAction, SyncStrategy};
use crate::stream::GrowingDatabase;

/// SplitMix64 step; derives independent per-trial and per-table seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An owner synchronizing `gdb` to a server, one tick per `advance`.
pub struct Replica<'a, F> {
    gdb: &'a GrowingDatabase,
    strategy: SyncStrategy<F>,
    store: OutsourcedStore,
    log: Option<Vec<SyncAction>>,
}

impl<'a, F: Real> Replica<'a, F> {
    /// Sets up a replica whose noise comes from `noise` and whose dummies are
    /// seeded with `dummy_seed`.
    pub fn new(
        gdb: &'a GrowingDatabase,
        kind: StrategyKind,
        params: StrategyParams<F>,
        noise: NoiseSource<F>,
        dummy_seed: u64,
    ) -> Result<Self> {
        let dummies = DummyFactory::new(gdb.table_id(), gdb.attribute_domains(), dummy_seed)?;
        let (strategy, setup) = SyncStrategy::init(
            kind,
            params,
            gdb.initial().to_vec(),
            LocalCache::new(dummies),
            noise,
        )?;
        let store = OutsourcedStore::setup(setup.batch);
        Ok(Replica {
            gdb,
            strategy,
            store,
            log: None,
        })
    }

    /// Replica with a seeded noise source; `seed` fixes the whole run.
    pub fn seeded(
        gdb: &'a GrowingDatabase,
        kind: StrategyKind,
        params: StrategyParams<F>,
        seed: u64,
    ) -> Result<Self> {
        Self::new(
            gdb,
            kind,
            params,
            NoiseSource::seeded(seed),
            derive_seed(seed, u64::MAX),
        )
    }

    /// Keeps a copy of every action, setup included. Call before advancing.
    pub fn record_actions(mut self) -> Self {
        debug_assert_eq!(self.now(), 0, "recording starts at setup");
        self.log = Some(vec![SyncAction {
            time: 0,
            batch: self.store.rows().to_vec(),
            cause: Cause::Setup,
        }]);
        self
    }

    /// Processes the next tick and returns how many actions it produced.
    pub fn advance(&mut self) -> Result<usize> {
        let t = self.strategy.now() + 1;
        let update = self.gdb.update_at(t).cloned();
        let actions = self.strategy.step(t, update)?;
        self.apply(actions)
    }

    /// Runs through the end of the stream.
    pub fn run_to_end(&mut self) -> Result<()> {
        while self.strategy.now() < self.gdb.len() {
            self.advance()?;
        }
        Ok(())
    }

    /// Flushes the owner's backlog after the stream is exhausted.
    pub fn drain(&mut self) -> Result<usize> {
        let actions = self.strategy.drain()?;
        self.apply(actions)
    }

    fn apply(&mut self, actions: Vec<SyncAction>) -> Result<usize> {
        let n = actions.len();
        for action in actions {
            if let Some(log) = &mut self.log {
                log.push(action.clone());
            }
            self.store.apply(action)?;
        }
        Ok(n)
    }

    pub fn now(&self) -> u64 {
        self.strategy.now()
    }

    pub fn gdb(&self) -> &GrowingDatabase {
        self.gdb
    }

    pub fn strategy(&self) -> &SyncStrategy<F> {
        &self.strategy
    }

    pub fn store(&self) -> &OutsourcedStore {
        &self.store
    }

    pub fn probe(&self) -> Probe {
        self.strategy.last_probe()
    }

    pub fn actions(&self) -> Option<&[SyncAction]> {
        self.log.as_deref()
    }

    /// `|D_now| - |real rows outsourced|`; equals the exact set-difference
    /// gap because every real row is a distinct logical record.
    pub fn logical_gap(&self) -> usize {
        let logical = self.gdb.initial().len()
            + self
                .gdb
                .count_since(0, self.now().min(self.gdb.len()))
                .unwrap_or(0);
        logical - self.store.real_count()
    }
}
