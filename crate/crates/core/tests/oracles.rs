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

//! Brute-force oracles for ingestion, queries, the store and cache flushes.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use dpsync::metrics::consistency_check;
use dpsync::noise::NoiseSource;
use dpsync::query::{q1_range_count, q2_group_count, q3_join_count, query_error};
use dpsync::sim::Replica;
use dpsync::stream::{ingest_csv, PICKUP_ID, PICK_TIME};
use dpsync::{
    BernoulliStream, Cause, DummyFactory, IngestOptions, LocalCache, OutsourcedStore, QueryAnswer,
    Record, StrategyKind, StrategyParams, SyncAction, SyncStrategy,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_store(n: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut r = Record::new("Y", i as u64)
                .with_attr(PICKUP_ID, rng.gen_range(1..=40))
                .with_attr(PICK_TIME, rng.gen_range(0..60));
            r.is_dummy = rng.gen_bool(0.3);
            r
        })
        .collect()
}

#[test]
fn range_count_matches_scan() {
    for seed in 0..20 {
        let store = random_store(200, seed);
        for (lo, hi) in [(1, 40), (5, 5), (10, 30), (39, 40)] {
            let real: Vec<&Record> = store.iter().filter(|r| !r.is_dummy).collect();
            let mut scan = 0;
            for r in &real {
                let v = r.attrs[PICKUP_ID];
                if lo <= v && v <= hi {
                    scan += 1;
                }
            }
            assert_eq!(q1_range_count(&store, PICKUP_ID, lo, hi).unwrap(), scan);
        }
    }
}

#[test]
fn group_count_matches_scan() {
    for seed in 0..20 {
        let store = random_store(200, seed);
        let mut scan = BTreeMap::<i64, u64>::new();
        for r in store.iter().filter(|r| !r.is_dummy) {
            *scan.entry(r.attrs[PICKUP_ID]).or_default() += 1;
        }
        assert_eq!(q2_group_count(&store, PICKUP_ID).unwrap(), scan);
    }
}

#[test]
fn join_count_matches_nested_loop() {
    for seed in 0..10 {
        let a = random_store(100, seed);
        let b = random_store(100, seed + 1000);
        let mut nested = 0;
        for x in a.iter().filter(|r| !r.is_dummy) {
            for y in b.iter().filter(|r| !r.is_dummy) {
                if x.attrs[PICK_TIME] == y.attrs[PICK_TIME] {
                    nested += 1;
                }
            }
        }
        assert_eq!(q3_join_count(&a, &b, PICK_TIME).unwrap(), nested);
    }
}

#[test]
fn l1_error_matches_key_union() {
    for seed in 0..20 {
        let truth = q2_group_count(&random_store(150, seed), PICKUP_ID).unwrap();
        let seen = q2_group_count(&random_store(90, seed + 7), PICKUP_ID).unwrap();
        let keys: std::collections::BTreeSet<i64> =
            truth.keys().chain(seen.keys()).copied().collect();
        let brute: f64 = keys
            .iter()
            .map(|k| {
                let a = truth.get(k).copied().unwrap_or(0) as f64;
                let b = seen.get(k).copied().unwrap_or(0) as f64;
                (a - b).abs()
            })
            .sum();
        let got = query_error(&QueryAnswer::Groups(truth), &QueryAnswer::Groups(seen)).unwrap();
        assert_eq!(got, brute);
    }
}

#[test]
fn month_of_minutes_ingests_every_distinct_row() {
    // A cleaned month of taxi pickups: one row per occupied minute.
    let minutes = 43_200usize;
    let rows = 18_429usize;
    let mut rng = ChaCha8Rng::seed_from_u64(18_429);
    let mut occupied: Vec<usize> = sample(&mut rng, minutes, rows - 1)
        .into_iter()
        .map(|m| m + 1)
        .collect();
    occupied.push(0);
    occupied.sort_unstable();
    let start = NaiveDate::from_ymd_opt(2020, 6, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let mut csv = String::from("VendorID,tpep_pickup_datetime,PULocationID,fare_amount\n");
    for m in &occupied {
        let ts = start + Duration::minutes(*m as i64) + Duration::seconds(rng.gen_range(0..60));
        csv += &format!(
            "2,{},{},{:.2}\n",
            ts.format("%Y-%m-%d %H:%M:%S"),
            rng.gen_range(1..=265),
            9.5
        );
    }
    let opts = IngestOptions {
        horizon: Some(minutes as u64),
        ..IngestOptions::new("Y", "tpep_pickup_datetime", 60).attribute(PICKUP_ID, "PULocationID")
    };
    let gdb = ingest_csv(&csv, &opts).unwrap();
    assert_eq!(gdb.len(), 43_200);
    assert_eq!(gdb.initial().len(), 1);
    assert_eq!(gdb.total_records(), 18_429);
    assert!(gdb
        .records()
        .all(|r| !r.is_dummy && r.attr(PICKUP_ID).is_some()));
}

#[test]
fn sur_store_holds_every_arrival() {
    let gdb = BernoulliStream::new("Y", 500, 0.3)
        .with_initial(4)
        .generate(8)
        .unwrap();
    let mut r = Replica::seeded(&gdb, StrategyKind::Sur, StrategyParams::default(), 1)
        .unwrap()
        .record_actions();
    r.run_to_end().unwrap();
    let arrivals = gdb.updates().iter().filter(|u| u.is_some()).count();
    assert_eq!(r.store().total(), arrivals + 4);
    assert!(consistency_check(&gdb, r.actions().unwrap()));
}

#[test]
fn flush_entry_carries_fixed_volume() {
    let mut store = OutsourcedStore::setup(Vec::new());
    let batch: Vec<Record> = (0..15)
        .map(|i| {
            let mut r = Record::new("Y", 2000);
            r.is_dummy = i >= 4;
            r
        })
        .collect();
    store
        .apply(SyncAction {
            time: 2000,
            batch,
            cause: Cause::Flush,
        })
        .unwrap();
    let last = store.transcript().entries.last().unwrap();
    assert_eq!((last.t, last.volume, last.cause), (2000, 15, Cause::Flush));
    assert_eq!((store.real_count(), store.dummy_count()), (4, 11));
}

#[test]
fn flushes_deliver_a_stuck_backlog_within_two_intervals() {
    // Seven real records wait in the cache; noise pinned far negative keeps
    // every sync empty, so only the flushes (f = 10, s = 5) move data.
    let params = StrategyParams {
        eps: 0.5,
        timer: 3,
        theta: 15.0,
        flush_interval: 10,
        flush_size: 5,
    };
    let initial: Vec<Record> = (0..7).map(|_| Record::new("Y", 0)).collect();
    let cache = LocalCache::new(DummyFactory::new("Y", BTreeMap::new(), 4).unwrap());
    let (mut s, setup) = SyncStrategy::init(
        StrategyKind::DpTimer,
        params,
        initial,
        cache,
        NoiseSource::constant(-100.0),
    )
    .unwrap();
    assert!(setup.batch.is_empty());
    let mut flushed_real = 0;
    for t in 1..=20 {
        for a in s.step(t, None).unwrap() {
            if a.cause == Cause::Flush {
                flushed_real += a.batch.iter().filter(|r| !r.is_dummy).count();
            }
        }
    }
    assert_eq!(flushed_real, 7);
    assert!(s.cache().is_empty());
}

#[test]
fn timer_gap_counts_leftovers_from_earlier_windows() {
    let gdb = BernoulliStream::new("Y", 200, 0.6).generate(3).unwrap();
    let params = StrategyParams {
        timer: 20,
        ..StrategyParams::default()
    };
    let mut r = Replica::seeded(&gdb, StrategyKind::DpTimer, params, 11).unwrap();
    while r.now() < 200 {
        r.advance().unwrap();
        if r.now() % 20 == 10 {
            let last = r.strategy().last_sync();
            let window = gdb.count_since(last, r.now()).unwrap();
            let gap = dpsync::metrics::logical_gap(&gdb, r.store(), r.now()).unwrap();
            assert_eq!(gap, r.strategy().cache().len());
            assert!(gap >= window);
        }
    }
}
