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

//! Mock server holding outsourced rows and the adversary-visible transcript.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::{Cause, SyncAction};
use crate::stream::Record;

/// One protocol run as seen by the server: when, and how many records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternEntry {
    pub t: u64,
    pub volume: usize,
    pub cause: Cause,
}

/// The update pattern `{(t, |γ_t|)}`; carries no record contents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdatePattern {
    pub entries: Vec<PatternEntry>,
}

impl UpdatePattern {
    pub fn total_volume(&self) -> usize {
        self.entries.iter().map(|e| e.volume).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `t,volume,cause` with a header row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "volume", "cause"])?;
        for e in &self.entries {
            w.write_record([e.t.to_string(), e.volume.to_string(), e.cause.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for row in r.records() {
            let row = row?;
            let field = |i: usize| row.get(i).unwrap_or_default();
            let parse_err =
                |what: &str| Error::Input(format!("bad {what} in transcript row {row:?}"));
            entries.push(PatternEntry {
                t: field(0).parse().map_err(|_| parse_err("time"))?,
                volume: field(1).parse().map_err(|_| parse_err("volume"))?,
                cause: field(2).parse()?,
            });
        }
        Ok(UpdatePattern { entries })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Clone, Debug, Default)]
pub struct OutsourcedStore {
    rows: Vec<Record>,
    pattern: UpdatePattern,
    real: usize,
}

impl OutsourcedStore {
    pub fn setup(gamma0: Vec<Record>) -> Self {
        let mut store = OutsourcedStore::default();
        store.push(0, gamma0, Cause::Setup);
        store
    }

    /// Appends a sync or flush batch delivered at `action.time`.
    pub fn apply(&mut self, action: SyncAction) -> Result<()> {
        let last = self.pattern.entries.last().map_or(0, |e| e.t);
        if action.cause == Cause::Setup {
            return Err(Error::Sequencing("setup runs only once".into()));
        }
        if action.time == 0 || action.time < last {
            return Err(Error::Sequencing(format!(
                "update at tick {} precedes last update at tick {last}",
                action.time
            )));
        }
        self.push(action.time, action.batch, action.cause);
        Ok(())
    }

    fn push(&mut self, t: u64, batch: Vec<Record>, cause: Cause) {
        self.real += batch.iter().filter(|r| !r.is_dummy).count();
        self.pattern.entries.push(PatternEntry {
            t,
            volume: batch.len(),
            cause,
        });
        self.rows.extend(batch);
    }

    pub fn transcript(&self) -> &UpdatePattern {
        &self.pattern
    }

    /// All stored rows, dummies included, in delivery order.
    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    /// Rows left after the analyst discards dummies.
    pub fn snapshot_real(&self) -> Vec<&Record> {
        self.rows.iter().filter(|r| !r.is_dummy).collect()
    }

    pub fn total(&self) -> usize {
        self.rows.len()
    }

    pub fn real_count(&self) -> usize {
        self.real
    }

    pub fn dummy_count(&self) -> usize {
        self.rows.len() - self.real
    }
}
