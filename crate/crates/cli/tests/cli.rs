//! End-to-end runs of the `treesplit` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use treesplit::traffic::MetricsReport;

const FAIR_T: [(usize, f64); 4] = [
    (3, 0.9),
    (4, 0.923076923076923),
    (12, 0.924249260650131),
    (24, 0.924201273691125),
];

fn treesplit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treesplit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TREESPLIT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn analytic_table_has_the_fair_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = treesplit(&["analytic", "--n-max", "24", "--p", "0.5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("analytic.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("# treesplit"));
    assert_eq!(csv.lines().nth(1), Some("n,L_n,T_n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 24);
    for (n, want) in FAIR_T {
        let t: f64 = rows[n - 1].split(',').nth(2).unwrap().parse().unwrap();
        assert!((t - want).abs() < 1e-9, "T_{n} = {t}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--protocol",
        "sicta",
        "--lambda",
        "0.6",
        "--budget",
        "20000",
        "--seed",
        "11",
    ];
    assert!(treesplit(&args, a.path()).status.success());
    assert!(treesplit(&args, b.path()).status.success());
    for name in ["simulate.json", "simulate.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = treesplit(
        &[
            "simulate",
            "--protocol",
            "atic",
            "--lambda",
            "0.8",
            "--budget",
            "20000",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("simulate.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["meta"]["seed"], 5);
    let reports: Vec<MetricsReport> = serde_json::from_value(doc["reports"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&reports).unwrap(), doc["reports"]);
    let again = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    assert_eq!(again, text);
}

#[test]
fn compare_contains_every_simulate_row() {
    let dir = tempfile::tempdir().unwrap();
    let cmp = treesplit(
        &[
            "compare",
            "--protocols",
            "bta,sicta,atic",
            "--lambda",
            "0.3:0.5:0.2",
            "--budget",
            "10000",
            "--seed",
            "2",
        ],
        dir.path(),
    );
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    let compare = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let compare_rows = data_rows(&compare);
    assert_eq!(compare_rows.len(), 6);
    for protocol in ["bta", "sicta", "atic"] {
        for lambda in ["0.3", "0.5"] {
            let sub = tempfile::tempdir().unwrap();
            let sim = treesplit(
                &[
                    "simulate",
                    "--protocol",
                    protocol,
                    "--lambda",
                    lambda,
                    "--budget",
                    "10000",
                    "--seed",
                    "2",
                ],
                sub.path(),
            );
            assert!(sim.status.success());
            let simulate = fs::read_to_string(sub.path().join("simulate.csv")).unwrap();
            assert_eq!(simulate.lines().nth(1), compare.lines().nth(1), "same columns");
            for row in data_rows(&simulate) {
                assert!(compare_rows.contains(&row), "{protocol} {lambda}: {row}");
            }
        }
    }
    for name in [
        "compare_delay_hist.csv",
        "compare_collision_degree.csv",
        "compare_skip_values.csv",
        "compare_collisions_per_cri.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn scripted_tree_has_five_solid_and_four_dashed_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = treesplit(
        &[
            "tree",
            "--protocol",
            "sicta",
            "--users",
            "4",
            "--seed",
            "7",
            "--script",
            "1=LRLL,2=LRLR,3=LRR,4=R",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dot = fs::read_to_string(dir.path().join("tree.dot")).unwrap();
    assert_eq!(dot.matches("style=solid").count(), 5);
    assert_eq!(dot.matches("style=dashed").count(), 4);
    let jsonl = fs::read_to_string(dir.path().join("tree.jsonl")).unwrap();
    for line in jsonl.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
}

#[test]
fn config_file_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"seed": 9, "protocols": ["sicta"], "lambda": 0.4, "budget": 5000}"#,
    )
    .unwrap();
    let out = treesplit(
        &["simulate", "--config", cfg.to_str().unwrap(), "--budget", "3000"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("simulate.json")).unwrap()).unwrap();
    let c = &doc["reports"][0]["config"];
    assert_eq!(
        (c["budget"].as_u64(), c["seed"].as_u64(), c["p"].as_f64()),
        (Some(3000), Some(9), Some(0.5))
    );
    assert_eq!(c["protocol"], "sicta");
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"seed": 1, "p": 1.2}"#).unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (
            vec!["simulate", "--config", cfg.to_str().unwrap(), "--lambda", "0.3"],
            "`p`",
        ),
        (vec!["sweep", "--lambda", "0.1:0.5:0", "--seed", "1"], "lambda_grid"),
        (vec!["simulate", "--lambda", "0.3"], "seed"),
        (
            vec!["simulate", "--lambda", "0.3", "--seed", "1", "--protocol", "aloha"],
            "protocols",
        ),
        (vec!["analytic", "--p", "0"], "`p`"),
        (vec!["frobnicate"], "frobnicate"),
    ];
    for (args, field) in cases {
        let out = treesplit(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{args:?}: {err}");
    }
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = treesplit(&["analytic"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file"));
}

#[test]
fn output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_treesplit"))
        .args(["asymptote", "--p-grid", "0.3:0.7:0.2"])
        .env("TREESPLIT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("asymptote.csv")).unwrap();
    assert_eq!(data_rows(&csv).len(), 3);
    assert!(csv.contains("0.5,0.924196240747"));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = treesplit(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("windowed-scan"));
}
