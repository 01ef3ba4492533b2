use std::path::Path;
use std::process::{Command, Output};

use attrition_conformal::io::{write_dataset_csv, write_json, ColumnMapping};
use attrition_conformal::sim::{generate, DgpKind, DgpSpec};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_attrition-conformal"));
    c.env("SOURCE_DATE_EPOCH", "1700000000");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn simulate(out: &Path, method: &str, seed: &str) {
    ok(&[
        "simulate",
        "--dgp",
        "dgp1",
        "--n",
        "1000",
        "--reps",
        "3",
        "--method",
        method,
        "--learner",
        "glm",
        "--alpha",
        "0.025",
        "--gamma",
        "0.025",
        "--rho",
        "0",
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ]);
}

#[test]
fn simulate_writes_three_files_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    simulate(&out, "cise", "7");
    for f in ["mc_report.json", "mc_long.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let first: Vec<Vec<u8>> = ["mc_report.json", "mc_long.csv", "manifest.json"]
        .iter()
        .map(|f| read(&out.join(f)))
        .collect();
    simulate(&out, "cise", "7");
    for (i, f) in ["mc_report.json", "mc_long.csv", "manifest.json"]
        .iter()
        .enumerate()
    {
        assert_eq!(first[i], read(&out.join(f)), "{f} changed between reruns");
    }

    let report: serde_json::Value = serde_json::from_slice(&first[0]).unwrap();
    assert_eq!(report["reps"].as_array().unwrap().len(), 3);
    let long = String::from_utf8(first[1].clone()).unwrap();
    let header = long.lines().next().unwrap();
    assert!(header.ends_with("metric,value"));
    assert_eq!(long.lines().filter(|l| l.contains(",coverage,")).count(), 3);
}

#[test]
fn thread_count_does_not_change_report() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "simulate", "--dgp", "dgp2", "--n", "800", "--reps", "3", "--rho", "0.9", "--seed", "3",
    ];
    let a = dir.path().join("one");
    let b = dir.path().join("many");
    let mut args_a = base.to_vec();
    args_a.extend(["--threads", "1", "--out", a.to_str().unwrap()]);
    ok(&args_a);
    let mut cmd = bin();
    cmd.args(base)
        .args(["--out", b.to_str().unwrap()])
        .env("ATTRITION_CONFORMAL_THREADS", "4");
    assert!(cmd.output().unwrap().status.success());
    assert_eq!(
        read(&a.join("mc_report.json")),
        read(&b.join("mc_report.json"))
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();
    let rho_e = run(&[
        "simulate",
        "--dgp",
        "appendixE",
        "--n",
        "500",
        "--rho",
        "0",
        "--out",
        o,
    ]);
    assert_eq!(rho_e.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&rho_e.stderr).contains("--rho"));
    assert_eq!(run(&["report", "--out", o]).status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--dgp", "dgp1", "--n", "500", "--alpha", "1.5", "--out", o])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["simulate", "--dgp", "dgp7", "--n", "500", "--out", o])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn report_merges_and_deduplicates() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("cise");
    let b = dir.path().join("wcqr");
    simulate(&a, "cise", "11");
    simulate(&b, "wcqr_nested_exact", "11");
    let ra = a.join("mc_report.json");
    let rb = b.join("mc_report.json");
    let out1 = dir.path().join("r1");
    let out2 = dir.path().join("r2");
    ok(&[
        "report",
        "--in",
        ra.to_str().unwrap(),
        rb.to_str().unwrap(),
        ra.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
    ]);
    ok(&[
        "report",
        "--in",
        rb.to_str().unwrap(),
        ra.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    let csv1 = String::from_utf8(read(&out1.join("report.csv"))).unwrap();
    assert_eq!(csv1.lines().count(), 3, "{csv1}");
    assert_eq!(
        read(&out1.join("report.json")),
        read(&out2.join("report.json"))
    );
    assert!(csv1.lines().nth(1).unwrap().starts_with("cise,"));

    let rows: serde_json::Value = serde_json::from_slice(&read(&out1.join("report.json"))).unwrap();
    let len = |i: usize| rows[i]["length"]["mean"].clone();
    assert_eq!(len(1), serde_json::json!("inf"));
    assert!(len(0).as_f64().unwrap().is_finite());
}

#[test]
fn report_rejects_mixed_levels_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    simulate(&a, "wcqr_nested_inexact", "1");
    ok(&[
        "simulate",
        "--dgp",
        "dgp1",
        "--n",
        "1000",
        "--reps",
        "2",
        "--method",
        "wcqr_nested_inexact",
        "--alpha",
        "0.05",
        "--gamma",
        "0.05",
        "--seed",
        "1",
        "--out",
        b.to_str().unwrap(),
    ]);
    let ra = a.join("mc_report.json");
    let rb = b.join("mc_report.json");
    let out = dir.path().join("r");
    let o = out.to_str().unwrap();
    let mixed = run(&[
        "report",
        "--in",
        ra.to_str().unwrap(),
        rb.to_str().unwrap(),
        "--out",
        o,
    ]);
    assert_eq!(mixed.status.code(), Some(2));
    ok(&[
        "report",
        "--in",
        ra.to_str().unwrap(),
        rb.to_str().unwrap(),
        "--allow-mixed",
        "--out",
        o,
    ]);
}

fn export(dir: &Path, n: usize, seed: u64, all_respond: bool) -> (String, String) {
    let mut draw = generate(&DgpSpec::new(DgpKind::Dgp1, n).with_seed(seed)).unwrap();
    if all_respond {
        let ds = &mut draw.data;
        for i in 0..n {
            ds.r[i] = 1;
            ds.y[i] = Some(if ds.d[i] == 1 {
                draw.truth.y1[i]
            } else {
                draw.truth.y0[i]
            });
        }
    }
    let data = dir.join(format!("data{seed}.csv"));
    let map = dir.join("map.json");
    write_dataset_csv(&draw.data, &data).unwrap();
    write_json(&map, &ColumnMapping::standard(10)).unwrap();
    (data.to_str().unwrap().into(), map.to_str().unwrap().into())
}

#[test]
fn analyze_reports_all_four_columns_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let (data, map) = export(dir.path(), 800, 21, false);
    let out = dir.path().join("an");
    let args = [
        "analyze",
        "--data",
        &data,
        "--map",
        &map,
        "--method",
        "cise",
        "--reps",
        "10",
        "--alpha",
        "0.025",
        "--gamma",
        "0.025",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    ok(&args);
    let text = String::from_utf8(read(&out.join("ate_summary.json"))).unwrap();
    let pos = |k: &str| {
        text.find(&format!("\"{k}\""))
            .unwrap_or_else(|| panic!("{k} missing"))
    };
    assert!(
        pos("ATER1") < pos("ATER0")
            && pos("ATER0") < pos("ATEall")
            && pos("ATEall") < pos("Length")
    );
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for k in ["ATER1", "ATER0", "ATEall"] {
        assert!(v[k]["value"].is_number(), "{k} not populated: {text}");
    }
    assert!(v["Length"]["mean"].is_number());
    assert!(v["ATER0"]["se"].is_number());

    let intervals = String::from_utf8(read(&out.join("intervals.csv"))).unwrap();
    assert_eq!(intervals.lines().next().unwrap(), "row,lo,hi,length,runs");
    assert_eq!(
        intervals.lines().count() - 1,
        v["n_r0"].as_u64().unwrap() as usize
    );

    let first = read(&out.join("ate_summary.json"));
    let manifest = read(&out.join("manifest.json"));
    ok(&args);
    assert_eq!(first, read(&out.join("ate_summary.json")));
    assert_eq!(manifest, read(&out.join("manifest.json")));
}

#[test]
fn analyze_without_attrition_uses_observed_effect() {
    let dir = tempfile::tempdir().unwrap();
    let (data, map) = export(dir.path(), 600, 4, true);
    let out = dir.path().join("an");
    ok(&[
        "analyze",
        "--data",
        &data,
        "--map",
        &map,
        "--reps",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let v: serde_json::Value =
        serde_json::from_slice(&read(&out.join("ate_summary.json"))).unwrap();
    assert!(v["ATER0"].is_null());
    assert_eq!(v["ATEall"], v["ATER1"]);
    assert_eq!(v["n_r0"], 0);
}

#[test]
fn analyze_reports_bad_rows_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "y,d,r,x1\n1.0,1,1,0.2\nNA,0,1,0.4\n").unwrap();
    let map = dir.path().join("map.json");
    write_json(&map, &ColumnMapping::standard(1)).unwrap();
    let out = dir.path().join("o");
    let res = run(&[
        "analyze",
        "--data",
        data.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("row 2"));
}
