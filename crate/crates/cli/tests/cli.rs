use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wgpca"));
    c.env_remove("WGPCA_OUT").env("RUST_LOG", "warn");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn column(rows: &[Vec<String>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn write_manifest(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("input.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn empty_manifest_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let m = write_manifest(tmp.path(), r#"{"records": []}"#);
    let o = run(&[
        "barycenter",
        m.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no records"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["gpca"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let t1 = data("spread_normals.json");
    assert_eq!(
        run(&["gpca", t1.to_str().unwrap(), "--method", "pca"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["gpca", t1.to_str().unwrap(), "--k", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["gpca", "/nonexistent/input.json"]).status.code(),
        Some(2)
    );
    assert!(run(&["--help"]).status.success());
}

#[test]
fn spread_normals_barycenter_is_standard_normal() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    ok(&[
        "barycenter",
        data("spread_normals.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = read_csv(&out.join("barycenter_density.csv"));
    let (x, f) = (column(&rows, 0), column(&rows, 1));
    let err = x
        .iter()
        .zip(&f)
        .map(|(x, f)| (f - normal_pdf(*x)).abs())
        .fold(0.0, f64::max);
    assert!(err < 0.01, "sup error {err}");
    let q = read_csv(&out.join("barycenter.csv"));
    assert_eq!(q.len(), 1000);

    let run = json(&out.join("run.json"));
    assert_eq!(run["command"], "barycenter");
    assert_eq!(run["config"]["grid"], 1000);
    assert_eq!(run["config"]["omega"]["lo"], "-inf");
    assert_eq!(run["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = run["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["barycenter.csv", "barycenter_density.csv"]);
}

#[test]
fn single_record_barycenter_is_the_record() {
    let tmp = TempDir::new().unwrap();
    let m = write_manifest(
        tmp.path(),
        r#"{"records": [{"label": "only", "kind": "parametric", "family": "uniform", "a": 2.0, "b": 1.0}]}"#,
    );
    let out = tmp.path().join("b");
    ok(&[
        "barycenter",
        m.to_str().unwrap(),
        "--grid",
        "50",
        "--omega",
        "0,10",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = read_csv(&out.join("barycenter.csv"));
    for r in &rows {
        let (t, q): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((q - (1.0 + 2.0 * t)).abs() < 1e-12);
    }
}

#[test]
fn outlier_normals_report_the_violating_record() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    ok(&[
        "gpca",
        data("outlier_normals.json").to_str().unwrap(),
        "--k",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out.join("sufficiency.txt")).unwrap();
    assert!(text.contains("pca sufficient: no"), "{text}");
    assert!(text.contains("constrained solution: yes"), "{text}");
    assert!(text.lines().any(|l| l == "1\tnu1"), "{text}");
    let explained = read_csv(&out.join("explained.csv"));
    assert_eq!(explained.len(), 1);
    let comps = read_csv(&out.join("components.csv"));
    assert_eq!(comps[0].len(), 3);
}

#[test]
fn gpca_writes_mode_curves_for_every_tau() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    ok(&[
        "gpca",
        data("spread_normals.json").to_str().unwrap(),
        "--k",
        "1",
        "--tau=-1,0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    for name in [
        "mode_1_t-1.csv",
        "mode_1_t0.5.csv",
        "modes.csv",
        "scores.csv",
        "components.csv",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert!(!out.join("mode_1_t2.csv").exists());
    let modes = read_csv(&out.join("modes.csv"));
    assert!(modes.iter().all(|r| r[4] == "true"));
    let rows = read_csv(&out.join("mode_1_t0.5.csv"));
    let (x, f) = (column(&rows, 0), column(&rows, 1));
    let h = x[1] - x[0];
    let mass: f64 = f.iter().map(|v| v * h).sum();
    assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
    assert!(f.iter().all(|v| *v >= 0.0));
}

#[test]
fn compare_shows_negative_linear_modes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("c");
    ok(&[
        "compare",
        data("spread_normals.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let r = json(&out.join("compare.json"));
    assert_eq!(r["gpca"]["modes_valid"], true);
    let modes = r["fpca"]["linear_modes"].as_array().unwrap();
    for t in [-2.0, 2.0] {
        let m = modes
            .iter()
            .find(|m| m["component"] == 1 && m["t"].as_f64() == Some(t))
            .unwrap();
        assert!(m["min_density"].as_f64().unwrap() < 0.0, "t = {t}");
    }
    let g = r["gpca"]["explained_ratios"][0].as_f64().unwrap();
    let f = r["fpca"]["explained_ratios"][0].as_f64().unwrap();
    assert!(g > f);
    assert_eq!(r["labels"].as_array().unwrap().len(), 4);
}

#[test]
fn two_records_give_one_component() {
    let tmp = TempDir::new().unwrap();
    let m = write_manifest(
        tmp.path(),
        r#"{"records": [
            {"label": "a", "kind": "parametric", "family": "normal", "a": 1.0, "b": 0.0},
            {"label": "b", "kind": "parametric", "family": "normal", "a": 2.0, "b": 1.0}
        ]}"#,
    );
    let out = tmp.path().join("c");
    ok(&[
        "compare",
        m.to_str().unwrap(),
        "--grid",
        "200",
        "--k",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let r = json(&out.join("compare.json"));
    assert_eq!(r["gpca"]["explained_ratios"].as_array().unwrap().len(), 1);
    assert_eq!(r["fpca"]["explained_ratios"].as_array().unwrap().len(), 1);
}

#[test]
fn geodesic_endpoints_and_additivity() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("g");
    let input = data("spread_normals.json");
    ok(&[
        "geodesic",
        input.to_str().unwrap(),
        "nu1",
        "nu4",
        "--steps",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    let q = read_csv(&out.join("geodesic_quantiles.csv"));
    assert_eq!(q.len(), 5 * 1000);

    let bary = tmp.path().join("ref");
    ok(&[
        "ingest",
        input.to_str().unwrap(),
        "--out",
        bary.to_str().unwrap(),
    ]);
    let bundle = read_csv(&bary.join("quantiles.csv"));
    // columns: t, nu1, nu2, nu3, nu4
    for (j, r) in bundle.iter().enumerate() {
        assert_eq!(q[j][2], r[1]);
        assert_eq!(q[4 * 1000 + j][2], r[4]);
    }
    let d = read_csv(&out.join("geodesic_distances.csv"));
    let (d0, d1) = (column(&d, 1), column(&d, 2));
    let total = d1[0];
    for i in 0..d.len() {
        assert!((d0[i] + d1[i] - total).abs() < 1e-10);
        assert!((d0[i] - i as f64 / 4.0 * total).abs() < 1e-10);
    }
    let o = run(&[
        "geodesic",
        input.to_str().unwrap(),
        "nu1",
        "nope",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_configs_give_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let input = data("outlier_normals.json");
    let digests = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "gpca",
            input.to_str().unwrap(),
            "--k",
            "2",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        json(&out.join("run.json"))["outputs"].clone()
    };
    assert_eq!(digests("a"), digests("b"));
}

#[test]
fn bundle_input_matches_manifest_input() {
    let tmp = TempDir::new().unwrap();
    let input = data("spread_normals.json");
    let bundle = tmp.path().join("bundle");
    ok(&[
        "ingest",
        input.to_str().unwrap(),
        "--grid",
        "300",
        "--out",
        bundle.to_str().unwrap(),
    ]);
    assert!(bundle.join("manifest.json").exists());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&[
        "gpca",
        bundle.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    ok(&[
        "gpca",
        input.to_str().unwrap(),
        "--grid",
        "300",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(a.join("explained.csv")).unwrap(),
        fs::read(b.join("explained.csv")).unwrap()
    );
    assert_eq!(json(&a.join("run.json"))["config"]["grid"], 300);
    // a grid that contradicts the bundle
    let o = run(&[
        "gpca",
        bundle.to_str().unwrap(),
        "--grid",
        "100",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn histogram_records_resolve_relative_paths() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("h1.csv"),
        "bin_left,bin_right,mass\n0,1,0.5\n1,2,0.5\n",
    )
    .unwrap();
    fs::write(
        tmp.path().join("h2.csv"),
        "bin_left,bin_right,mass\n0,1,0.2\n1,inf,0.8\n",
    )
    .unwrap();
    let m = write_manifest(
        tmp.path(),
        r#"{"cap": 4, "records": [
            {"label": "h1", "kind": "histogram", "path": "h1.csv"},
            {"label": "h2", "kind": "histogram", "path": "h2.csv"}
        ]}"#,
    );
    let out = tmp.path().join("b");
    ok(&[
        "barycenter",
        m.to_str().unwrap(),
        "--grid",
        "100",
        "--omega",
        "0,4",
        "--out",
        out.to_str().unwrap(),
    ]);
    let q = column(&read_csv(&out.join("barycenter.csv")), 1);
    assert!(q.windows(2).all(|w| w[0] <= w[1]));
    assert!(*q.last().unwrap() <= 4.0 && q[0] >= 0.0);
    // a value outside Ω is an input error
    let o = run(&[
        "barycenter",
        m.to_str().unwrap(),
        "--grid",
        "100",
        "--omega",
        "0,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"grid": 120, "k": 1, "taus": [1.0]}"#).unwrap();
    let out = tmp.path().join("g");
    ok(&[
        "gpca",
        data("spread_normals.json").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--k",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let run = json(&out.join("run.json"));
    assert_eq!(run["config"]["grid"], 120);
    assert_eq!(run["config"]["k"], 2);
    assert!(out.join("mode_2_t1.csv").exists());
    assert!(!out.join("mode_1_t2.csv").exists());

    fs::write(&cfg, r#"{"gird": 120}"#).unwrap();
    let o = run_cfg(&cfg);
    assert_eq!(o.status.code(), Some(2));
}

fn run_cfg(cfg: &Path) -> Output {
    run(&[
        "barycenter",
        data("spread_normals.json").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ])
}

#[test]
fn output_root_from_environment() {
    let tmp = TempDir::new().unwrap();
    let o = bin()
        .args([
            "barycenter",
            data("spread_normals.json").to_str().unwrap(),
            "--grid",
            "50",
        ])
        .env("WGPCA_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp
        .path()
        .join("barycenter")
        .join("barycenter.csv")
        .exists());
}

#[test]
fn consistency_medians_shrink() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("c");
    ok(&[
        "consistency",
        "--omega=-10,10",
        "--grid",
        "100",
        "--k",
        "1",
        "--schedule",
        "10,80",
        "--trials",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = read_csv(&out.join("consistency.csv"));
    let err = column(&rows, 1);
    assert_eq!(err.len(), 2);
    assert!(err[1] < err[0]);
    assert_eq!(
        run(&["consistency", "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fpca_method_writes_linear_modes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("f");
    ok(&[
        "gpca",
        data("spread_normals.json").to_str().unwrap(),
        "--method",
        "fpca",
        "--k",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = read_csv(&out.join("mode_1_t-2.csv"));
    assert!(column(&rows, 1).iter().any(|v| *v < 0.0));
    assert!(fs::read_to_string(out.join("sufficiency.txt"))
        .unwrap()
        .starts_with("not applicable"));
}
