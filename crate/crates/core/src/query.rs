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

//! The three test queries with dummy-aware rewriting.
//!
//! Every predicate is conjoined with `isDummy = false`, so dummies never pass
//! a filter, never form a group and never join.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{Record, PICKUP_ID, PICK_TIME};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryAnswer {
    Scalar(u64),
    Groups(BTreeMap<i64, u64>),
}

impl QueryAnswer {
    /// Scalar value, or the sum over groups.
    pub fn total(&self) -> u64 {
        match self {
            QueryAnswer::Scalar(v) => *v,
            QueryAnswer::Groups(g) => g.values().sum(),
        }
    }
}

fn value(r: &Record, attr: &str) -> Result<i64> {
    r.attr(attr).ok_or_else(|| {
        Error::Schema(format!(
            "record at tick {} lacks attribute `{attr}`",
            r.arrival_time
        ))
    })
}

/// `COUNT(*) WHERE lo <= attr <= hi`.
pub fn q1_range_count<'a>(
    src: impl IntoIterator<Item = &'a Record>,
    attr: &str,
    lo: i64,
    hi: i64,
) -> Result<u64> {
    if lo > hi {
        return Err(Error::Parameter(format!("empty range [{lo}, {hi}]")));
    }
    let mut n = 0;
    for r in src.into_iter().filter(|r| !r.is_dummy) {
        if (lo..=hi).contains(&value(r, attr)?) {
            n += 1;
        }
    }
    Ok(n)
}

/// `attr, COUNT(*) GROUP BY attr`.
pub fn q2_group_count<'a>(
    src: impl IntoIterator<Item = &'a Record>,
    attr: &str,
) -> Result<BTreeMap<i64, u64>> {
    let mut groups = BTreeMap::new();
    for r in src.into_iter().filter(|r| !r.is_dummy) {
        *groups.entry(value(r, attr)?).or_insert(0) += 1;
    }
    Ok(groups)
}

/// `COUNT(*) FROM a INNER JOIN b ON a.on = b.on`.
pub fn q3_join_count<'a>(
    a: impl IntoIterator<Item = &'a Record>,
    b: impl IntoIterator<Item = &'a Record>,
    on: &str,
) -> Result<u64> {
    let mut right: HashMap<i64, u64> = HashMap::new();
    for r in b.into_iter().filter(|r| !r.is_dummy) {
        *right.entry(value(r, on)?).or_insert(0) += 1;
    }
    let mut n = 0;
    for r in a.into_iter().filter(|r| !r.is_dummy) {
        n += right.get(&value(r, on)?).copied().unwrap_or(0);
    }
    Ok(n)
}

/// L1 distance between two answers; absent groups count as zero.
pub fn query_error(truth: &QueryAnswer, observed: &QueryAnswer) -> Result<f64> {
    match (truth, observed) {
        (QueryAnswer::Scalar(a), QueryAnswer::Scalar(b)) => Ok(a.abs_diff(*b) as f64),
        (QueryAnswer::Groups(a), QueryAnswer::Groups(b)) => {
            let mut err: u64 = 0;
            for (k, &va) in a {
                err += va.abs_diff(b.get(k).copied().unwrap_or(0));
            }
            for (k, &vb) in b {
                if !a.contains_key(k) {
                    err += vb;
                }
            }
            Ok(err as f64)
        }
        _ => Err(Error::Parameter("answers have different shapes".into())),
    }
}

/// A configured query over named tables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Query {
    Q1 {
        table: String,
        #[serde(default = "pickup_id")]
        attr: String,
        lo: i64,
        hi: i64,
    },
    Q2 {
        table: String,
        #[serde(default = "pickup_id")]
        attr: String,
    },
    Q3 {
        left: String,
        right: String,
        #[serde(default = "pick_time")]
        on: String,
    },
}

fn pickup_id() -> String {
    PICKUP_ID.to_string()
}

fn pick_time() -> String {
    PICK_TIME.to_string()
}

impl Query {
    pub fn name(&self) -> &'static str {
        match self {
            Query::Q1 { .. } => "q1",
            Query::Q2 { .. } => "q2",
            Query::Q3 { .. } => "q3",
        }
    }

    pub fn tables(&self) -> Vec<&str> {
        match self {
            Query::Q1 { table, .. } | Query::Q2 { table, .. } => vec![table],
            Query::Q3 { left, right, .. } => vec![left, right],
        }
    }

    pub fn evaluate(&self, tables: &BTreeMap<String, Vec<&Record>>) -> Result<QueryAnswer> {
        let get = |name: &str| {
            tables
                .get(name)
                .ok_or_else(|| Error::Config(format!("query references unknown table `{name}`")))
        };
        match self {
            Query::Q1 {
                table,
                attr,
                lo,
                hi,
            } => Ok(QueryAnswer::Scalar(q1_range_count(
                get(table)?.iter().copied(),
                attr,
                *lo,
                *hi,
            )?)),
            Query::Q2 { table, attr } => Ok(QueryAnswer::Groups(q2_group_count(
                get(table)?.iter().copied(),
                attr,
            )?)),
            Query::Q3 { left, right, on } => Ok(QueryAnswer::Scalar(q3_join_count(
                get(left)?.iter().copied(),
                get(right)?.iter().copied(),
                on,
            )?)),
        }
    }

    /// Rows a server scans to answer: linear for filters and groupings, the
    /// product of both sides for the join.
    pub fn scan_cost(&self, row_counts: &BTreeMap<String, usize>) -> u64 {
        let rows = |name: &str| row_counts.get(name).copied().unwrap_or(0) as u64;
        match self {
            Query::Q1 { table, .. } | Query::Q2 { table, .. } => rows(table),
            Query::Q3 { left, right, .. } => rows(left) * rows(right),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pickup: i64, time: i64, dummy: bool) -> Record {
        let mut r = Record::new("T", time as u64)
            .with_attr(PICKUP_ID, pickup)
            .with_attr(PICK_TIME, time);
        r.is_dummy = dummy;
        r
    }

    #[test]
    fn q1_bounds_and_dummies() {
        let rows = [
            rec(50, 1, false),
            rec(100, 2, false),
            rec(101, 3, false),
            rec(60, 4, true),
            rec(60, 5, true),
        ];
        assert_eq!(q1_range_count(&rows, PICKUP_ID, 50, 100).unwrap(), 2);
        assert_eq!(q1_range_count(&[], PICKUP_ID, 50, 100).unwrap(), 0);
        assert!(matches!(
            q1_range_count(&rows, PICKUP_ID, 5, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn q2_groups_real_only() {
        let rows = [
            rec(7, 1, false),
            rec(7, 2, false),
            rec(9, 3, false),
            rec(7, 4, true),
        ];
        assert_eq!(
            q2_group_count(&rows, PICKUP_ID).unwrap(),
            BTreeMap::from([(7, 2), (9, 1)])
        );
        let dummies = [rec(7, 1, true), rec(8, 2, true)];
        assert!(q2_group_count(&dummies, PICKUP_ID).unwrap().is_empty());
        assert!(matches!(
            q2_group_count(&rows, "fare"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn q3_join_examples() {
        let a = [rec(1, 1, false), rec(1, 2, false)];
        let b = [rec(1, 2, false), rec(1, 2, false)];
        assert_eq!(q3_join_count(&a, &b, PICK_TIME).unwrap(), 2);
        let a = [rec(1, 5, false)];
        let b = [rec(1, 5, true)];
        assert_eq!(q3_join_count(&a, &b, PICK_TIME).unwrap(), 0);
        assert!(matches!(
            q3_join_count(&a, &a, "nope"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn l1_error_conventions() {
        let s = |v| QueryAnswer::Scalar(v);
        assert_eq!(query_error(&s(4), &s(4)).unwrap(), 0.0);
        assert_eq!(query_error(&s(4), &s(9)).unwrap(), 5.0);
        let truth = QueryAnswer::Groups(BTreeMap::from([(1, 3), (2, 5)]));
        let observed = QueryAnswer::Groups(BTreeMap::from([(1, 3)]));
        assert_eq!(query_error(&truth, &observed).unwrap(), 5.0);
        assert_eq!(query_error(&observed, &truth).unwrap(), 5.0);
        assert!(query_error(&truth, &s(1)).is_err());
    }

    #[test]
    fn configured_query_parses() {
        let q: Query =
            serde_json::from_str(r#"{"type":"q1","table":"Y","lo":50,"hi":100}"#).unwrap();
        assert_eq!(q.name(), "q1");
        let q: Query = serde_json::from_str(r#"{"type":"q3","left":"Y","right":"G"}"#).unwrap();
        assert_eq!(
            q,
            Query::Q3 {
                left: "Y".into(),
                right: "G".into(),
                on: PICK_TIME.into()
            }
        );
        let sizes = BTreeMap::from([("Y".to_string(), 10), ("G".to_string(), 7)]);
        assert_eq!(q.scan_cost(&sizes), 70);
    }
}
