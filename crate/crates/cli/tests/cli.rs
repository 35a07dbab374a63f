use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nilquant"))
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(o: &Output) -> (String, String) {
    (
        String::from_utf8_lossy(&o.stdout).into(),
        String::from_utf8_lossy(&o.stderr).into(),
    )
}

fn gauss(center: [f64; 3]) -> Value {
    json!([{"amp": [1.0, 0.0], "center": center, "width": [1.0, 1.0, 1.0], "mod": [0.1, -0.1, 0.0], "side": "qr"}])
}

fn heisenberg(experiment: &str) -> Value {
    json!({
        "schema": 1,
        "experiment": experiment,
        "algebra": "heisenberg3",
        "operands": [gauss([0.2, 0.0, 0.1]), gauss([-0.1, 0.2, 0.1]), gauss([0.0, -0.2, 0.0])],
    })
}

#[test]
fn describe_shipped_sweep() {
    let o = run(&[
        "describe",
        shipped("heisenberg-sweep.json").to_str().unwrap(),
    ]);
    let (out, err) = text(&o);
    assert_eq!(o.status.code(), Some(0), "{err}");
    assert!(out.contains("center: dim 1 (r-dim 1)"), "{out}");
    assert!(out.contains("quotient K: dim 2 = abelian(2)"), "{out}");
    assert!(out.contains("h = 0.0125: route Central"), "{out}");
    assert!(out.contains("estimated runtime"), "{out}");
}

#[test]
fn describe_inline_engel() {
    let o = run(&[
        "describe",
        shipped("engel4-describe.json").to_str().unwrap(),
    ]);
    let (out, err) = text(&o);
    assert_eq!(o.status.code(), Some(0), "{err}");
    assert!(out.contains("quotient K: dim 3 = heisenberg3"), "{out}");
}

#[test]
fn malformed_json_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"schema\": 1, \"experiment\": ").unwrap();
    for cmd in ["describe", "run"] {
        let o = run(&[cmd, p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        assert!(text(&o).1.contains("MalformedConfig"));
    }
    let mut v = heisenberg("jacobi");
    v["schema"] = json!(2);
    let p = write(dir.path(), "schema.json", &v);
    assert_eq!(run(&["run", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn non_skew_perturbation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = heisenberg("cocycle-check");
    v["cocycle"] =
        json!({"omega0": true, "perturbation": [[0, 1, ["lin", [1.0]]], [1, 0, ["lin", [1.0]]]]});
    let p = write(dir.path(), "c.json", &v);
    let o = run(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("NotSkew"));
}

#[test]
fn zero_hbar_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = heisenberg("sweep");
    v["hbars"] = json!([0.1, 0.05, 0.0, 0.0125]);
    let p = write(dir.path(), "s.json", &v);
    let o = run(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("h = 0"));
}

#[test]
fn product_table_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "table.json", &heisenberg("product-table"));
    let out = dir.path().join("out");
    let o = run(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "99",
        "--threads",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{:?}", text(&o));
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(csv.starts_with("hbar,q1,q2,r1,re,im\n"));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("table.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], json!(true));
    assert!(
        report["result"]["products"][0]["pointwise_residual"]
            .as_f64()
            .unwrap()
            < 1e-6
    );
    // the resolved config carries every default
    let cfg = &report["config"];
    assert_eq!(cfg["seed"], json!(99));
    assert_eq!(cfg["hbars"], json!([0.0, 0.5]));
    assert!(cfg["thresholds"]["pointwise"].is_number());
    assert!(cfg["rules"]["coverage"].is_number());
    assert_eq!(cfg["output"]["stem"], json!("table"));
}

#[test]
fn checks_pass_on_valid_inputs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["heisenberg-jacobi.json", "engel4-cocycle-check.json"] {
        let o = run(&[
            "run",
            shipped(name).to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{name}: {:?}", text(&o));
    }
    let csv = std::fs::read_to_string(dir.path().join("engel4-cocycle-check.csv")).unwrap();
    assert!(csv.starts_with("check,residual\ngroup_cocycle,"));
}

#[test]
fn threshold_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = heisenberg("cocycle-check");
    v["thresholds"] = json!({"min_slope": 0.9, "max_slope_shift": 0.1, "moyal": 1e-5, "rieffel": 1e-5,
        "pointwise": 1e-6, "jacobi": 5e-5, "jacobi_ratio": [3.0, 5.0], "leibniz": 1e-8,
        "group_cocycle": -1.0, "sigma": 1e-9});
    let p = write(dir.path(), "t.json", &v);
    let o = run(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).1.contains("group-cocycle identity residual"));
    assert!(dir.path().join("t.json").exists());
}

#[test]
fn narrow_grid_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = heisenberg("product-table");
    let spec = |hw: f64, n: usize, d: usize| json!({"center": vec![0.0; d], "half_width": vec![hw; d], "points": vec![n; d]});
    v["quadrature"] = json!({"x": spec(0.5, 16, 2), "y": spec(4.0, 32, 2), "q": spec(4.0, 16, 2), "r": spec(4.0, 16, 1)});
    let p = write(dir.path(), "g.json", &v);
    let o = run(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4), "{:?}", text(&o));
    assert!(text(&o).1.contains("GridTooSmall"));
}

#[test]
fn explicit_grids_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let spec = |hw: f64, n: usize, d: usize| json!({"center": vec![0.0; d], "half_width": vec![hw; d], "points": vec![n; d]});
    let mut v = heisenberg("product-table");
    v["quadrature"] = json!({"x": spec(4.0, 8, 2), "y": spec(4.0, 32, 2), "q": spec(4.0, 16, 2), "r": spec(4.0, 16, 1)});
    let p = write(dir.path(), "few.json", &v);
    let o = run(&["describe", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(text(&o).1.contains("GridTooSmall"));
    v["quadrature"]["x"] = spec(-1.0, 16, 2);
    let p = write(dir.path(), "neg.json", &v);
    assert_eq!(
        run(&["describe", p.to_str().unwrap()]).status.code(),
        Some(2)
    );
    v["quadrature"]["x"] = spec(4.0, 16, 3);
    let p = write(dir.path(), "dims.json", &v);
    let o = run(&["describe", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("DimensionMismatch"));
}
