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

//! Accuracy and storage metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;
use crate::store::OutsourcedStore;
use crate::strategy::{StrategyKind, StrategyParams, SyncAction};
use crate::stream::{GrowingDatabase, Record};

/// `LG(t) = |D_t − D_t ∩ D̂_t|`, computed as a multiset difference between
/// the logical database and the real rows the server holds.
pub fn logical_gap(gdb: &GrowingDatabase, store: &OutsourcedStore, t: u64) -> Result<usize> {
    let mut outsourced: HashMap<&Record, usize> = HashMap::new();
    for r in store.snapshot_real() {
        *outsourced.entry(r).or_insert(0) += 1;
    }
    let mut gap = 0;
    for r in gdb.logical_db_at(t)? {
        match outsourced.get_mut(r) {
            Some(n) if *n > 0 => *n -= 1,
            _ => gap += 1,
        }
    }
    Ok(gap)
}

/// True when every record of `D_L` was uploaded exactly once and the real
/// records appear in arrival order.
pub fn consistency_check(gdb: &GrowingDatabase, actions: &[SyncAction]) -> bool {
    let mut uploaded = actions
        .iter()
        .flat_map(|a| a.batch.iter())
        .filter(|r| !r.is_dummy);
    let mut expected = gdb.records();
    loop {
        match (expected.next(), uploaded.next()) {
            (None, None) => return true,
            (Some(e), Some(u)) if e == u => continue,
            _ => return false,
        }
    }
}

/// Owner/server state after all actions of tick `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t: u64,
    pub lg: usize,
    pub total: usize,
    pub dummy: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPoint {
    pub t: u64,
    pub query: String,
    pub truth: u64,
    pub observed: u64,
    pub l1: f64,
    /// Server rows scanned to answer.
    pub cost: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuerySummary {
    pub query: String,
    pub mean_l1: f64,
    pub max_l1: f64,
    pub mean_cost: f64,
    pub samples: usize,
}

/// Metrics of one simulated trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct MetricsReport<F> {
    pub strategy: StrategyKind,
    pub params: StrategyParams<F>,
    pub seed: u64,
    pub series: Vec<TimePoint>,
    pub queries: Vec<QueryPoint>,
}

impl<F: Real> MetricsReport<F> {
    pub fn mean_lg(&self) -> f64 {
        if self.series.is_empty() {
            return 0.0;
        }
        self.series.iter().map(|p| p.lg as f64).sum::<f64>() / self.series.len() as f64
    }

    pub fn final_point(&self) -> Option<TimePoint> {
        self.series.last().copied()
    }

    pub fn query_summaries(&self) -> Vec<QuerySummary> {
        let mut names: Vec<&str> = self.queries.iter().map(|q| q.query.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names
            .into_iter()
            .map(|name| {
                let pts: Vec<&QueryPoint> =
                    self.queries.iter().filter(|q| q.query == name).collect();
                let n = pts.len() as f64;
                QuerySummary {
                    query: name.to_string(),
                    mean_l1: pts.iter().map(|p| p.l1).sum::<f64>() / n,
                    max_l1: pts.iter().map(|p| p.l1).fold(0.0, f64::max),
                    mean_cost: pts.iter().map(|p| p.cost as f64).sum::<f64>() / n,
                    samples: pts.len(),
                }
            })
            .collect()
    }

    /// `t,lg,total,dummy`.
    pub fn series_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.series {
            w.serialize(p)?;
        }
        finish(w)
    }

    /// `t,query,truth,observed,l1` (cost is in the JSON report only).
    pub fn queries_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "query", "truth", "observed", "l1"])?;
        for q in &self.queries {
            w.write_record([
                q.t.to_string(),
                q.query.clone(),
                q.truth.to_string(),
                q.observed.to_string(),
                q.l1.to_string(),
            ])?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Replica;
    use crate::stream::BernoulliStream;

    #[test]
    fn gap_of_naive_strategies() {
        let gdb = BernoulliStream::new("T", 200, 0.3)
            .with_initial(4)
            .generate(5)
            .unwrap();
        let mut sur: Replica<f64> =
            Replica::seeded(&gdb, StrategyKind::Sur, Default::default(), 1).unwrap();
        let mut oto: Replica<f64> =
            Replica::seeded(&gdb, StrategyKind::Oto, Default::default(), 1).unwrap();
        for t in 1..=gdb.len() {
            sur.advance().unwrap();
            oto.advance().unwrap();
            assert_eq!(logical_gap(&gdb, sur.store(), t).unwrap(), 0);
            let d_t = gdb.logical_size_at(t).unwrap();
            assert_eq!(logical_gap(&gdb, oto.store(), t).unwrap(), d_t - 4);
        }
    }

    #[test]
    fn gap_matches_cache_for_timer() {
        let gdb = BernoulliStream::new("T", 300, 0.5)
            .with_initial(2)
            .generate(8)
            .unwrap();
        let params = StrategyParams {
            timer: 7,
            flush_interval: 50,
            flush_size: 3,
            ..Default::default()
        };
        let mut r: Replica<f64> = Replica::seeded(&gdb, StrategyKind::DpTimer, params, 3).unwrap();
        for t in 1..=gdb.len() {
            r.advance().unwrap();
            let gap = logical_gap(&gdb, r.store(), t).unwrap();
            assert_eq!(gap, r.strategy().cache().len());
            assert_eq!(gap, r.logical_gap());
        }
    }

    #[test]
    fn consistency_examples() {
        let gdb = BernoulliStream::new("T", 150, 0.4)
            .with_initial(1)
            .generate(2)
            .unwrap();
        let mut sur = Replica::<f64>::seeded(&gdb, StrategyKind::Sur, Default::default(), 1)
            .unwrap()
            .record_actions();
        sur.run_to_end().unwrap();
        sur.drain().unwrap();
        assert!(consistency_check(&gdb, sur.actions().unwrap()));

        let mut oto = Replica::<f64>::seeded(&gdb, StrategyKind::Oto, Default::default(), 1)
            .unwrap()
            .record_actions();
        oto.run_to_end().unwrap();
        assert!(!consistency_check(&gdb, oto.actions().unwrap()));
    }
}
