use std::process::{Command, Output};

const STAMP: &str = "2021-06-01T00:00:00Z";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snr-geom"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn catalog_lists_six_surfaces() {
    let out = run(&["catalog"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.contains("clifford_torus χ=0 minimal T≡0"));

    let v = json(&run(&["catalog", "--json"]));
    let names: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "slice_sphere",
            "clifford_torus",
            "veronese",
            "small_sphere",
            "graph_torus",
            "cylinder_patch"
        ]
    );
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn error_exit_codes() {
    assert_eq!(
        run(&["check", "--surface", "klein_bottle"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["check", "--grid", "4x4"]).status.code(), Some(3));
    assert_eq!(run(&["check", "--grid", "16x9000"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("report.json");
    let out = run(&["check", "--grid", "8x8", "--out", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(
        run(&["lemma34", "--trials", "10", "--p", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["variation", "--surface", "clifford_torus", "--delta", "0.5"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&["check", "--tol", "nonsense=1"]).status.code(),
        Some(2)
    );
}

#[test]
fn check_report_schema() {
    let out = run(&[
        "check",
        "--surface",
        "clifford_torus",
        "--grid",
        "16x16",
        "--timestamp",
        STAMP,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["timestamp"], STAMP);
    assert_eq!(v["pass"], true);
    assert_eq!(v["config"]["surface"], "clifford_torus");
    let checks = v["checks"].as_array().unwrap();
    for c in checks {
        for key in [
            "name",
            "kind",
            "lhs",
            "rhs",
            "residual",
            "tolerance",
            "pass",
            "notes",
        ] {
            assert!(c.get(key).is_some(), "{key} missing in {c}");
        }
        assert!(["identity", "inequality", "equality-case"].contains(&c["kind"].as_str().unwrap()));
    }
    let main = checks
        .iter()
        .find(|c| c["name"] == "main_inequality")
        .unwrap();
    assert_eq!(main["pass"], true);
    let notes = main["notes"].as_str().unwrap();
    assert!(notes.contains("equality: false") && notes.contains("Known discrepancies"));
}

#[test]
fn slice_sphere_equality_flag() {
    let out = run(&[
        "check",
        "--surface",
        "slice_sphere",
        "--n",
        "2",
        "--grid",
        "16x32",
        "--timestamp",
        STAMP,
    ]);
    assert!(out.status.success());
    let v = json(&out);
    let main = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "main_inequality")
        .unwrap();
    assert!(main["notes"].as_str().unwrap().contains("equality: true"));
}

#[test]
fn csv_output() {
    let out = run(&[
        "check",
        "--surface",
        "cylinder_patch",
        "--grid",
        "8x8",
        "--format",
        "csv",
        "--timestamp",
        STAMP,
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "name,kind,lhs,rhs,residual,tolerance,pass"
    );
    assert!(lines.all(|l| l.split(',').count() == 7));
}

#[test]
fn failing_tolerance_gives_exit_one() {
    // A tolerance far below rounding error fails the integral identity.
    let out = run(&[
        "check",
        "--surface",
        "graph_torus",
        "--grid",
        "8x8",
        "--tol",
        "lemma1=1e-300",
        "--timestamp",
        STAMP,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let report = dir.path().join("report.json");
    std::fs::write(
        &cfg,
        "surface = graph_torus\ngrid = 8x8\nseed = 3\ntol.simons = 1e-3\n",
    )
    .unwrap();
    let out = run(&[
        "check",
        "--config",
        cfg.to_str().unwrap(),
        "--surface",
        "clifford_torus",
        "--out",
        report.to_str().unwrap(),
        "--timestamp",
        STAMP,
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["config"]["surface"], "clifford_torus");
    assert_eq!(v["config"]["seed"], 3);
    assert_eq!(v["config"]["tolerances"]["simons"], 1e-3);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = [
        "check",
        "--surface",
        "graph_torus",
        "--grid",
        "24x24",
        "--seed",
        "5",
    ];
    let a = Command::new(env!("CARGO_BIN_EXE_snr-geom"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1600000000")
        .output()
        .unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_snr-geom"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1600000000")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["timestamp"], "2020-09-13T12:26:40Z");
}

#[test]
fn lemma34_and_variation_reports() {
    let v = json(&run(&[
        "lemma34",
        "--trials",
        "200",
        "--p",
        "3",
        "--m",
        "2",
        "--seed",
        "9",
        "--timestamp",
        STAMP,
    ]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"][1]["lhs"], 24.0);
    assert_eq!(v["checks"][1]["rhs"], 24.0);

    let out = run(&[
        "variation",
        "--surface",
        "clifford_torus",
        "--grid",
        "12x12",
        "--seed",
        "1",
        "--timestamp",
        STAMP,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out)["checks"].as_array().unwrap().len(), 10);
}
