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

//! Owner-side FIFO cache with dummy padding on over-sized reads.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stream::Record;

/// Mints dummy records whose attributes are uniform over declared domains.
#[derive(Clone, Debug)]
pub struct DummyFactory {
    table_id: String,
    domains: BTreeMap<String, (i64, i64)>,
    rng: ChaCha8Rng,
}

impl DummyFactory {
    pub fn new(
        table_id: impl Into<String>,
        domains: BTreeMap<String, (i64, i64)>,
        seed: u64,
    ) -> Result<Self> {
        if let Some((name, (lo, hi))) = domains.iter().find(|(_, (lo, hi))| lo > hi) {
            return Err(Error::Parameter(format!(
                "empty domain [{lo}, {hi}] for `{name}`"
            )));
        }
        Ok(DummyFactory {
            table_id: table_id.into(),
            domains,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn mint(&mut self, now: u64) -> Record {
        let mut r = Record::new(self.table_id.clone(), now);
        r.is_dummy = true;
        for (name, &(lo, hi)) in &self.domains {
            r.attrs.insert(name.clone(), self.rng.gen_range(lo..=hi));
        }
        r
    }
}

/// FIFO buffer of real records awaiting synchronization.
#[derive(Clone, Debug)]
pub struct LocalCache {
    queue: VecDeque<Record>,
    dummies: DummyFactory,
}

impl LocalCache {
    pub fn new(dummies: DummyFactory) -> Self {
        LocalCache {
            queue: VecDeque::new(),
            dummies,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn write(&mut self, record: Record) -> Result<()> {
        if record.is_dummy {
            return Err(Error::Contract("dummy records are never cached".into()));
        }
        self.queue.push_back(record);
        Ok(())
    }

    /// Pops the first `n` records, padding with fresh dummies stamped `now`
    /// when fewer than `n` are buffered. Always returns exactly `n` records.
    pub fn read(&mut self, n: usize, now: u64) -> Vec<Record> {
        let real = n.min(self.queue.len());
        let mut out: Vec<Record> = self.queue.drain(..real).collect();
        out.extend((real..n).map(|_| self.dummies.mint(now)));
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &Record> {
        self.queue.iter()
    }
}
