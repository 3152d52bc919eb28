#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{addr, at, txid};
use ponzi_core::coredata::{write_transactions, TxIO, TxRecord};

fn ponzi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ponzi"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = ponzi(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(out.stderr.trim_ascii()).unwrap()
}

fn p(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

/// Three members over three days with nothing on the middle day.
fn small_inputs(dir: &Path) {
    let (a, b, c, ext) = (addr('1', 1), addr('1', 2), addr('1', 3), addr('3', 1));
    let tx = |i: u64, day: i64, ins: Vec<TxIO>, outs: Vec<TxIO>| TxRecord {
        txid: txid(i),
        time: at(day, i as i64),
        coinbase: false,
        inputs: ins,
        outputs: outs,
    };
    let txs = vec![
        tx(
            1,
            0,
            vec![TxIO::new(&ext, 5_000_000)],
            vec![TxIO::new(&a, 5_000_000)],
        ),
        tx(
            2,
            0,
            vec![TxIO::new(&a, 5_000_000)],
            vec![TxIO::new(&b, 5_000_000)],
        ),
        tx(
            3,
            2,
            vec![TxIO::new(&b, 4_000_000)],
            vec![TxIO::new(&c, 4_000_000)],
        ),
        tx(
            4,
            2,
            vec![TxIO::new(&c, 4_000_000)],
            vec![TxIO::new(&ext, 3_990_000)],
        ),
    ];
    let mut buf = Vec::new();
    write_transactions(&mut buf, &txs).unwrap();
    fs::write(dir.join("tx.ndjson"), buf).unwrap();
    fs::write(
        dir.join("roster.csv"),
        format!("address,member_id,country,registration_date,age,gender\n{a},a,IN,,,\n{b},b,ID,,,\n{c},c,IN,,,\n"),
    )
    .unwrap();
    fs::write(
        dir.join("prices.csv"),
        "date,usd_per_btc\n2016-01-01,400.00\n2016-01-02,410.00\n2016-01-03,420.00\n",
    )
    .unwrap();
}

fn ingest_small(dir: &Path) -> String {
    small_inputs(dir);
    let ds = dir.join("ds");
    ok(&[
        "ingest",
        "--tx",
        &p(&dir.join("tx.ndjson")),
        "--roster",
        &p(&dir.join("roster.csv")),
        "--prices",
        &p(&dir.join("prices.csv")),
        "--day-range",
        "2016-01-01..2016-01-03",
        "--out",
        &p(&ds),
    ]);
    p(&ds)
}

#[test]
fn empty_day_reports_zero_volume() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = ingest_small(tmp.path());
    let res = tmp.path().join("res");
    ok(&["metrics", "--dataset", &ds, "--out", &p(&res)]);
    let daily = fs::read_to_string(res.join("daily.csv")).unwrap();
    let lines: Vec<&str> = daily.lines().collect();
    assert_eq!(lines.len(), 4, "{daily}");
    assert!(lines[0].starts_with("day,dtv,"));
    assert!(lines[2].starts_with("2016-01-02,0,"), "{}", lines[2]);
    assert!(res.join("ledger.csv").is_file());
    assert!(res.join("summary.json").is_file());
}

#[test]
fn missing_input_is_a_named_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = ponzi(&[
        "ingest",
        "--tx",
        &p(&tmp.path().join("absent.ndjson")),
        "--roster",
        "r.csv",
        "--prices",
        "p.csv",
        "--out",
        &p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "input");
    assert!(err["message"].as_str().unwrap().contains("--tx"));
    assert!(!out_dir.exists());
}

#[test]
fn failing_command_leaves_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = ingest_small(tmp.path());
    let res = tmp.path().join("res");
    let out = ponzi(&["classify", "--dataset", &ds, "--out", &p(&res)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "phase_too_short");
    assert!(!res.exists());
    let leftovers: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with('.'))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn config_file_supplies_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    small_inputs(tmp.path());
    fs::write(
        tmp.path().join("run.toml"),
        "tx = \"tx.ndjson\"\nroster = \"roster.csv\"\nprices = \"prices.csv\"\nday_range = \"2016-01-01..2016-01-03\"\nout = \"ds\"\n",
    )
    .unwrap();
    ok(&["ingest", "--config", &p(&tmp.path().join("run.toml"))]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ds/dataset.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["day_range"]["start"], "2016-01-01");
    assert_eq!(manifest["build"]["retained"], 4);

    fs::write(tmp.path().join("bad.toml"), "colour = \"red\"\n").unwrap();
    let out = ponzi(&["phases", "--config", &p(&tmp.path().join("bad.toml"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn phases_follow_the_generated_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.toml");
    fs::write(
        &cfg,
        "seed = 9\nmembers = 1500\nscammers = 3\ndays = 140\nbootstrap_days = 30\n\
         cycles = [{ peak_day = 60, peak_dtv = 80 }, { peak_day = 100, peak_dtv = 40 }]\n\
         countries = [{ code = \"IN\", weight = 1.0 }]\n",
    )
    .unwrap();
    let sim = tmp.path().join("sim");
    let ds = tmp.path().join("ds");
    let res = tmp.path().join("res");
    ok(&["simulate", "--config", &p(&cfg), "--out", &p(&sim)]);
    ok(&[
        "ingest",
        "--tx",
        &p(&sim.join("transactions.ndjson")),
        "--roster",
        &p(&sim.join("roster.csv")),
        "--wallets",
        &p(&sim.join("wallets.csv")),
        "--prices",
        &p(&sim.join("prices.csv")),
        "--out",
        &p(&ds),
    ]);
    ok(&["phases", "--dataset", &p(&ds), "--out", &p(&res)]);
    let truth: serde_json::Value =
        serde_json::from_slice(&fs::read(sim.join("groundtruth.json")).unwrap()).unwrap();
    let got: serde_json::Value =
        serde_json::from_slice(&fs::read(res.join("phases.json")).unwrap()).unwrap();
    let date = |v: &serde_json::Value| v.as_str().unwrap().parse::<chrono::NaiveDate>().unwrap();
    let off = |a: &serde_json::Value, b: &serde_json::Value| (date(a) - date(b)).num_days().abs();
    assert!(off(&got["hyperoperation"]["starts"], &truth["hyper_start"]) <= 2);
    assert!(off(&got["hyperoperation"]["ends"], &truth["hyper_end"]) <= 2);
    let peaks: Vec<&serde_json::Value> = got["hyperoperation"]["cycles"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| &c["peak_day"])
        .collect();
    let want: Vec<&serde_json::Value> = truth["peak_days"].as_array().unwrap().iter().collect();
    assert_eq!(peaks, want);

    ok(&["classify", "--dataset", &p(&ds), "--out", &p(&res)]);
    ok(&[
        "flows",
        "--dataset",
        &p(&ds),
        "--self-loops",
        "--out",
        &p(&res),
    ]);
    ok(&["report", "--out", &p(&res)]);
    let report = fs::read_to_string(res.join("report.md")).unwrap();
    assert!(report.contains("## Likely scammers"));
    assert!(fs::read_to_string(res.join("geo.dot"))
        .unwrap()
        .starts_with("digraph"));
}
