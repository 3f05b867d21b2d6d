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

//! Drives the `dpsync` binary end to end.

use std::fs;
use std::path::Path;
use std::process::Command;

fn dpsync(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dpsync"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.json");
    fs::write(
        &path,
        format!(
            r#"{{
  "datasets": [{{"source": "synthetic", "name": "Y", "length": 720, "rate": 0.4, "seed": 3}}],
  "queries": [{{"type": "q1", "table": "Y", "lo": 1, "hi": 100}},
              {{"type": "q2", "table": "Y", "attr": "pickupID"}}]{extra}
}}"#
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let o = dpsync(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--strategy",
        "set",
        "--trials",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["strategy"], "set");
    assert_eq!(report["trials"], 2);
    assert_eq!(report["mean_lg"], 0.0);
    let transcript = fs::read_to_string(out.join("transcript.csv")).unwrap();
    assert_eq!(transcript.lines().next(), Some("t,volume,cause"));
    assert_eq!(transcript.lines().count(), 1 + 721);
    let series = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 720);
    let queries = fs::read_to_string(out.join("queries.csv")).unwrap();
    assert_eq!(
        queries.lines().collect::<Vec<_>>()[..2],
        ["t,query,truth,observed,l1", queries.lines().nth(1).unwrap()]
    );
    assert_eq!(queries.lines().count(), 1 + 2 * 2);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "strategy": "dp-ant", "seed": 1"#);
    let out = dir.path().join("out");
    let o = dpsync(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--strategy",
        "dp-timer",
        "--eps",
        "2",
        "--timer",
        "45",
        "--theta",
        "9",
        "--flush-interval",
        "100",
        "--flush-size",
        "4",
        "--seed",
        "42",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["strategy"], "dp-timer");
    assert_eq!(report["seed"], 42);
    let p = &report["params"];
    assert_eq!(
        (p["eps"].as_f64(), p["timer"].as_u64(), p["theta"].as_f64()),
        (Some(2.0), Some(45), Some(9.0))
    );
    assert_eq!(
        (p["flush_interval"].as_u64(), p["flush_size"].as_u64()),
        (Some(100), Some(4))
    );
    let transcript = fs::read_to_string(out.join("transcript.csv")).unwrap();
    assert!(transcript.lines().skip(1).all(|l| {
        let t: u64 = l.split(',').next().unwrap().parse().unwrap();
        t == 0 || t.is_multiple_of(45) || t.is_multiple_of(100)
    }));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "trials": 3"#);
    let read = |name: &str| {
        let out = dir.path().join(name);
        assert!(
            dpsync(&["run", "--config", &config, "--out", out.to_str().unwrap()])
                .status
                .success()
        );
        [
            "report.json",
            "transcript.csv",
            "timeseries.csv",
            "queries.csv",
        ]
        .map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn compare_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let o = dpsync(&[
        "compare",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--strategies",
        "sur,oto,timer",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(table.starts_with(
        "Strategy,Query,Mean L1 Err,Max L1 Err,Mean logical gap,Total data,Dummy data"
    ));
    assert_eq!(table.lines().count(), 1 + 3 * 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("dp-timer,q2"));
}

#[test]
fn audit_and_bounds_report_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#", "strategy": "dp-timer", "params": {"eps": 1.0, "timer": 30, "flush_interval": 1000},
           "audit": {"tau": 30, "trials": 20000, "length": 60}, "bounds": {"trials": 1000}"#,
    );
    let out = dir.path().join("out");
    let o = dpsync(&["audit", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let audit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit["pass"], true);
    assert_eq!(audit["trials"], 20000);

    let o = dpsync(&[
        "bounds",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--eps",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let bounds = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert_eq!(bounds.lines().count(), 1 + 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS TimerGap"));
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpsync(&[
        "run",
        "--config",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));

    let config = write_config(dir.path(), r#", "query_interval": 0"#);
    let o = dpsync(&[
        "run",
        "--config",
        &config,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("query_interval"));

    let config = write_config(dir.path(), "");
    let o = dpsync(&["run", "--config", &config, "--eps", "-1"]);
    assert!(!o.status.success());
    let o = dpsync(&["audit", "--config", &config]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("audit"));
    let o = dpsync(&["run", "--config", &config, "--strategy", "bogus"]);
    assert!(!o.status.success());
}
