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

//! The logical growing database and its ingestion from timestamped CSV.
//!
//! Time is discrete. Tick `0` is the setup instant and holds the initial
//! records; every later tick `t` carries at most one logical update.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attribute carrying the pickup location in the built-in queries.
pub const PICKUP_ID: &str = "pickupID";
/// Attribute carrying the pickup time unit; the join key of the built-in join.
pub const PICK_TIME: &str = "pickTime";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub arrival_time: u64,
    pub table_id: String,
    pub attrs: BTreeMap<String, i64>,
    pub is_dummy: bool,
}

impl Record {
    pub fn new(table_id: impl Into<String>, arrival_time: u64) -> Self {
        Record {
            arrival_time,
            table_id: table_id.into(),
            attrs: BTreeMap::new(),
            is_dummy: false,
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: i64) -> Self {
        self.attrs.insert(name.into(), value);
        self
    }

    pub fn attr(&self, name: &str) -> Option<i64> {
        self.attrs.get(name).copied()
    }
}

/// `D = {D_0, U}`: initial records plus one optional update per tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowingDatabase {
    table_id: String,
    initial: Vec<Record>,
    updates: Vec<Option<Record>>,
    // prefix[t] = number of non-null updates among u_1..u_t
    prefix: Vec<usize>,
}

impl GrowingDatabase {
    /// Builds a stream; `updates[i]` is the update arriving at tick `i + 1`.
    pub fn new(
        table_id: impl Into<String>,
        initial: Vec<Record>,
        updates: Vec<Option<Record>>,
    ) -> Result<Self> {
        for r in &initial {
            if r.is_dummy {
                return Err(Error::Contract(
                    "initial records must not be dummies".into(),
                ));
            }
        }
        let mut prefix = Vec::with_capacity(updates.len() + 1);
        prefix.push(0);
        for (i, u) in updates.iter().enumerate() {
            let t = i as u64 + 1;
            let mut next = prefix[i];
            if let Some(r) = u {
                if r.arrival_time != t {
                    return Err(Error::Contract(format!(
                        "update at tick {t} carries arrival_time {}",
                        r.arrival_time
                    )));
                }
                if r.is_dummy {
                    return Err(Error::Contract(format!("update at tick {t} is a dummy")));
                }
                next += 1;
            }
            prefix.push(next);
        }
        Ok(GrowingDatabase {
            table_id: table_id.into(),
            initial,
            updates,
            prefix,
        })
    }

    pub fn table_id(&self) -> &str {
        &self.table_id
    }

    pub fn initial(&self) -> &[Record] {
        &self.initial
    }

    pub fn updates(&self) -> &[Option<Record>] {
        &self.updates
    }

    /// Stream length `L`: the index of the last tick.
    pub fn len(&self) -> u64 {
        self.updates.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    /// The update arriving at tick `t` (1-based); `None` for null ticks and
    /// for ticks past the end of the stream.
    pub fn update_at(&self, t: u64) -> Option<&Record> {
        if t == 0 {
            return None;
        }
        self.updates.get((t - 1) as usize).and_then(Option::as_ref)
    }

    /// `D_t = D_0 ∪ {u_1, .., u_t}` in arrival order.
    pub fn logical_db_at(&self, t: u64) -> Result<Vec<&Record>> {
        self.check_tick(t)?;
        let mut out: Vec<&Record> = self.initial.iter().collect();
        out.extend(self.updates[..t as usize].iter().flatten());
        Ok(out)
    }

    /// `|D_t|` without materializing the multiset.
    pub fn logical_size_at(&self, t: u64) -> Result<usize> {
        self.check_tick(t)?;
        Ok(self.initial.len() + self.prefix[t as usize])
    }

    /// Number of non-null updates `u_i` with `t_star < i <= t`.
    pub fn count_since(&self, t_star: u64, t: u64) -> Result<usize> {
        if t_star > t {
            return Err(Error::Range(format!(
                "window start {t_star} is after its end {t}"
            )));
        }
        self.check_tick(t)?;
        Ok(self.prefix[t as usize] - self.prefix[t_star as usize])
    }

    /// Total number of real records `|D_L|`.
    pub fn total_records(&self) -> usize {
        self.initial.len() + self.prefix[self.updates.len()]
    }

    /// All records in arrival order: `D_0` first, then each non-null update.
    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.initial.iter().chain(self.updates.iter().flatten())
    }

    /// Observed `[min, max]` of every attribute across all records.
    pub fn attribute_domains(&self) -> BTreeMap<String, (i64, i64)> {
        let mut domains: BTreeMap<String, (i64, i64)> = BTreeMap::new();
        for r in self.records() {
            for (k, &v) in &r.attrs {
                domains
                    .entry(k.clone())
                    .and_modify(|(lo, hi)| {
                        *lo = (*lo).min(v);
                        *hi = (*hi).max(v);
                    })
                    .or_insert((v, v));
            }
        }
        domains
    }

    /// Copy of this stream with the update at tick `t` turned into a null.
    pub fn without_update(&self, t: u64) -> Result<Self> {
        if self.update_at(t).is_none() {
            return Err(Error::Input(format!("no update at tick {t} to remove")));
        }
        let mut updates = self.updates.clone();
        updates[(t - 1) as usize] = None;
        GrowingDatabase::new(self.table_id.clone(), self.initial.clone(), updates)
    }

    /// Same stream truncated to its first `len` ticks.
    pub fn truncated(&self, len: u64) -> Self {
        let len = len.min(self.len()) as usize;
        GrowingDatabase {
            table_id: self.table_id.clone(),
            initial: self.initial.clone(),
            updates: self.updates[..len].to_vec(),
            prefix: self.prefix[..=len].to_vec(),
        }
    }

    /// Writes the stream as CSV with a `timestamp` column (seconds from
    /// origin 0) followed by one column per attribute.
    pub fn to_csv(&self, granularity_secs: u64) -> Result<String> {
        let columns: BTreeSet<&str> = self
            .records()
            .flat_map(|r| r.attrs.keys().map(String::as_str))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["timestamp"];
        header.extend(columns.iter().copied());
        w.write_record(&header)?;
        for r in self.records() {
            let mut row = vec![(r.arrival_time * granularity_secs).to_string()];
            for c in &columns {
                row.push(r.attr(c).map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }

    fn check_tick(&self, t: u64) -> Result<()> {
        if t > self.len() {
            return Err(Error::Range(format!(
                "tick {t} exceeds stream length {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// How to map a CSV file onto a growing database.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IngestOptions {
    pub table_id: String,
    pub time_column: String,
    /// Seconds per time unit.
    pub granularity_secs: u64,
    /// Record attribute name -> CSV column holding its integer value.
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    /// Attribute that receives the tick index of each record.
    #[serde(default = "default_time_attribute")]
    pub time_attribute: Option<String>,
    /// Timestamp (seconds) mapped to tick 0; defaults to the file minimum,
    /// rounded down to a multiple of the granularity.
    #[serde(default)]
    pub origin: Option<i64>,
    /// Stream length `L`; defaults to the last occupied tick.
    #[serde(default)]
    pub horizon: Option<u64>,
}

fn default_time_attribute() -> Option<String> {
    Some(PICK_TIME.to_string())
}

impl IngestOptions {
    pub fn new(
        table_id: impl Into<String>,
        time_column: impl Into<String>,
        granularity_secs: u64,
    ) -> Self {
        IngestOptions {
            table_id: table_id.into(),
            time_column: time_column.into(),
            granularity_secs,
            attributes: BTreeMap::new(),
            time_attribute: default_time_attribute(),
            origin: None,
            horizon: None,
        }
    }

    pub fn attribute(mut self, attr: impl Into<String>, column: impl Into<String>) -> Self {
        self.attributes.insert(attr.into(), column.into());
        self
    }
}

/// Parses a timestamp given as integer/decimal epoch seconds or as a
/// calendar date-time in one of the common layouts.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then(|| v.floor() as i64);
    }
    const LAYOUTS: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%m/%d/%Y %I:%M:%S %p",
        "%Y-%m-%d %H:%M",
    ];
    LAYOUTS
        .iter()
        .find_map(|layout| NaiveDateTime::parse_from_str(s, layout).ok())
        .map(|dt| dt.and_utc().timestamp())
}

fn parse_int(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 => Some(v as i64),
        _ => None,
    }
}

/// Ingests a CSV document into the one-record-per-tick form.
///
/// Rows with a missing or unparseable timestamp or mapped attribute are
/// dropped. Rows landing on an already occupied tick are dropped too, so the
/// first row in file order wins. Tick 0 becomes `D_0`.
pub fn ingest_csv(text: &str, opts: &IngestOptions) -> Result<GrowingDatabase> {
    if opts.granularity_secs == 0 {
        return Err(Error::Parameter(
            "granularity must be at least one second".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Ingest("missing header row".into()));
    }
    let position = |name: &str| headers.iter().position(|h| h == name);
    let time_idx = position(&opts.time_column)
        .ok_or_else(|| Error::Ingest(format!("header lacks time column `{}`", opts.time_column)))?;
    let mut attr_idx = Vec::with_capacity(opts.attributes.len());
    for (attr, column) in &opts.attributes {
        let idx = position(column).ok_or_else(|| {
            Error::Ingest(format!(
                "header lacks column `{column}` for attribute `{attr}`"
            ))
        })?;
        attr_idx.push((attr.as_str(), idx));
    }

    // (timestamp, attribute values) in file order
    let mut rows: Vec<(i64, Vec<i64>)> = Vec::new();
    for row in reader.records() {
        let Ok(row) = row else { continue };
        let Some(ts) = row.get(time_idx).and_then(parse_timestamp) else {
            continue;
        };
        let values: Option<Vec<i64>> = attr_idx
            .iter()
            .map(|&(_, idx)| row.get(idx).and_then(parse_int))
            .collect();
        if let Some(values) = values {
            rows.push((ts, values));
        }
    }

    let gran = opts.granularity_secs as i64;
    // The earliest row opens tick 0; snapping to a granularity boundary keeps
    // ticks aligned with calendar units.
    let origin = match opts.origin {
        Some(o) => o,
        None => rows
            .iter()
            .map(|(ts, _)| ts.div_euclid(gran) * gran)
            .min()
            .unwrap_or(0),
    };
    let mut seen = HashSet::new();
    let mut kept: Vec<(u64, Record)> = Vec::new();
    for (ts, values) in rows {
        if ts < origin {
            continue;
        }
        let tick = ((ts - origin) / gran) as u64;
        // Only update ticks are deduplicated; every row at the origin joins D_0.
        if opts.horizon.is_some_and(|h| tick > h) || (tick > 0 && !seen.insert(tick)) {
            continue;
        }
        let mut record = Record::new(opts.table_id.clone(), tick);
        for (&(attr, _), v) in attr_idx.iter().zip(values) {
            record.attrs.insert(attr.to_string(), v);
        }
        if let Some(name) = &opts.time_attribute {
            record.attrs.insert(name.clone(), tick as i64);
        }
        kept.push((tick, record));
    }

    let len = opts
        .horizon
        .unwrap_or_else(|| kept.iter().map(|(t, _)| *t).max().unwrap_or(0));
    let mut initial = Vec::new();
    let mut updates: Vec<Option<Record>> = vec![None; len as usize];
    for (tick, record) in kept {
        if tick == 0 {
            initial.push(record);
        } else {
            updates[(tick - 1) as usize] = Some(record);
        }
    }
    GrowingDatabase::new(opts.table_id.clone(), initial, updates)
}

/// Synthetic stream with independent Bernoulli arrivals per tick.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BernoulliStream {
    pub table_id: String,
    pub length: u64,
    /// Probability that a tick carries a record.
    pub rate: f64,
    /// Number of records in `D_0`.
    #[serde(default)]
    pub initial: usize,
    /// Inclusive range of the `pickupID` attribute.
    #[serde(default = "default_pickup_range")]
    pub pickup_range: (i64, i64),
}

fn default_pickup_range() -> (i64, i64) {
    (1, 265)
}

impl BernoulliStream {
    pub fn new(table_id: impl Into<String>, length: u64, rate: f64) -> Self {
        BernoulliStream {
            table_id: table_id.into(),
            length,
            rate,
            initial: 0,
            pickup_range: default_pickup_range(),
        }
    }

    pub fn with_initial(mut self, initial: usize) -> Self {
        self.initial = initial;
        self
    }

    pub fn generate(&self, seed: u64) -> Result<GrowingDatabase> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Parameter(format!(
                "arrival rate {} not in [0, 1]",
                self.rate
            )));
        }
        let (lo, hi) = self.pickup_range;
        if lo > hi {
            return Err(Error::Parameter(format!("empty pickup range [{lo}, {hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let make = |t: u64, rng: &mut ChaCha8Rng| {
            Record::new(self.table_id.clone(), t)
                .with_attr(PICKUP_ID, rng.gen_range(lo..=hi))
                .with_attr(PICK_TIME, t as i64)
        };
        let initial = (0..self.initial).map(|_| make(0, &mut rng)).collect();
        let updates = (1..=self.length)
            .map(|t| rng.gen_bool(self.rate).then(|| make(t, &mut rng)))
            .collect();
        GrowingDatabase::new(self.table_id.clone(), initial, updates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64) -> Record {
        Record::new("T", t).with_attr(PICKUP_ID, t as i64)
    }

    #[test]
    fn logical_db_definition() {
        let gdb = GrowingDatabase::new("T", vec![rec(0)], vec![Some(rec(1)), None]).unwrap();
        assert_eq!(gdb.logical_db_at(0).unwrap(), vec![&rec(0)]);
        assert_eq!(gdb.logical_db_at(2).unwrap(), vec![&rec(0), &rec(1)]);
        assert!(matches!(gdb.logical_db_at(3), Err(Error::Range(_))));
    }

    #[test]
    fn count_since_examples() {
        let updates = vec![Some(rec(1)), None, Some(rec(3)), Some(rec(4))];
        let gdb = GrowingDatabase::new("T", vec![], updates).unwrap();
        assert_eq!(gdb.count_since(0, 4).unwrap(), 3);
        assert_eq!(gdb.count_since(2, 2).unwrap(), 0);
        assert!(matches!(gdb.count_since(3, 2), Err(Error::Range(_))));
    }

    #[test]
    fn rejects_misplaced_update() {
        let err = GrowingDatabase::new("T", vec![], vec![Some(rec(2))]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn ingest_dedups_same_minute() {
        let text = "ts,loc\n0,10\n300,11\n330,12\n";
        let opts = IngestOptions::new("Y", "ts", 60).attribute(PICKUP_ID, "loc");
        let gdb = ingest_csv(text, &opts).unwrap();
        assert_eq!(gdb.initial().len(), 1);
        assert_eq!(gdb.len(), 5);
        assert_eq!(gdb.update_at(5).unwrap().attr(PICKUP_ID), Some(11));
        assert_eq!(gdb.update_at(5).unwrap().attr(PICK_TIME), Some(5));
        assert!((1..5).all(|t| gdb.update_at(t).is_none()));
    }

    #[test]
    fn ingest_empty_body() {
        let opts = IngestOptions::new("Y", "ts", 60);
        let gdb = ingest_csv("ts,loc\n", &opts).unwrap();
        assert!(gdb.initial().is_empty());
        assert!(gdb.updates().is_empty());
    }

    #[test]
    fn ingest_header_defects() {
        let opts = IngestOptions::new("Y", "ts", 60).attribute(PICKUP_ID, "loc");
        let err = ingest_csv("", &opts).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
        let err = ingest_csv("time,loc\n1,2\n", &opts).unwrap_err();
        assert!(err.to_string().contains("`ts`"), "{err}");
        let err = ingest_csv("ts,where\n1,2\n", &opts).unwrap_err();
        assert!(err.to_string().contains("`loc`"), "{err}");
    }

    #[test]
    fn ingest_drops_invalid_rows() {
        let text = "ts,loc\n0,1\n60,\nnot-a-time,3\n120,x\n180,4\n";
        let opts = IngestOptions::new("Y", "ts", 60).attribute(PICKUP_ID, "loc");
        let gdb = ingest_csv(text, &opts).unwrap();
        assert_eq!(gdb.total_records(), 2);
        assert_eq!(gdb.update_at(3).unwrap().attr(PICKUP_ID), Some(4));
    }

    #[test]
    fn ingest_calendar_timestamps() {
        let text =
            "pickup,loc\n2020-06-01 00:00:10,5\n2020-06-01 00:02:59,6\n06/01/2020 12:04:00 AM,7\n";
        let opts = IngestOptions::new("Y", "pickup", 60).attribute(PICKUP_ID, "loc");
        let gdb = ingest_csv(text, &opts).unwrap();
        // origin snaps to 00:00:00, the minute holding the earliest row
        assert_eq!(gdb.len(), 4);
        assert_eq!(gdb.initial()[0].attr(PICKUP_ID), Some(5));
        assert_eq!(gdb.update_at(2).unwrap().attr(PICKUP_ID), Some(6));
        assert_eq!(gdb.update_at(4).unwrap().attr(PICKUP_ID), Some(7));
    }

    #[test]
    fn bernoulli_stream_is_seeded() {
        let spec = BernoulliStream::new("Y", 500, 0.4).with_initial(3);
        let a = spec.generate(9).unwrap();
        assert_eq!(a, spec.generate(9).unwrap());
        assert_ne!(a, spec.generate(10).unwrap());
        assert_eq!(a.initial().len(), 3);
        let n = a.count_since(0, 500).unwrap();
        assert!((150..250).contains(&n), "{n}");
    }
}
