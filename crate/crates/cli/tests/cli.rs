use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn manred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manred"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn manred")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn generated(dir: &TempDir, kind: &str) -> PathBuf {
    let path = dir.path().join(format!("{kind}.csv"));
    let out = manred(&["generate", "--kind", kind, "--seed", "42", "--out", path_str(&path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn write_csv(path: &Path, header: &str, rows: &[String]) {
    fs::write(path, format!("{header}\n{}\n", rows.join("\n"))).unwrap();
}

#[test]
fn generate_writes_csv_and_sidecar_reproducibly() {
    let dir = TempDir::new().unwrap();
    let a = generated(&dir, "sphere_hard");
    let (header, rows) = read_table(&a);
    assert_eq!(rows.len(), 600);
    assert_eq!(header.len(), 101);
    assert_eq!(header.last().unwrap(), "label");
    let spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sphere_hard.spec.json")).unwrap()).unwrap();
    assert_eq!(spec["kind"], "sphere");
    assert_eq!(spec["dim"], 100);

    let b = dir.path().join("again.csv");
    manred(&["generate", "--kind", "sphere_hard", "--seed", "42", "--out", path_str(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn generate_usage_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("x.csv");
    let missing = manred(&["generate", "--out", path_str(&out_path)]);
    assert_eq!(code(&missing), 2);
    assert!(stdout(&missing).is_empty());

    let unknown = manred(&["generate", "--kind", "torus", "--out", path_str(&out_path)]);
    assert_eq!(code(&unknown), 2);
    assert!(stderr(&unknown).contains("torus"));

    let bad = dir.path().join("no/such/dir/x.csv");
    let io = manred(&["generate", "--kind", "moons", "--out", path_str(&bad)]);
    assert_eq!(code(&io), 3);
    assert!(stderr(&io).contains("no/such/dir"), "{}", stderr(&io));
}

#[test]
fn unknown_flags_are_rejected() {
    let out = manred(&["geodesic", "--spec", "sphere:3", "--x", "1,0,0", "--y", "0,1,0", "--bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["generate", "reduce", "mean", "benchmark", "geodesic"] {
        let out = manred(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        assert!(stdout(&out).contains("Usage"), "{sub}");
    }
}

#[test]
fn reduce_pga_on_sphere_data() {
    let dir = TempDir::new().unwrap();
    let data = generated(&dir, "sphere_hard");
    let emb = dir.path().join("emb.csv");
    let out = manred(&["reduce", "--method", "pga", "--in", path_str(&data), "--components", "3", "--out", path_str(&emb)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_table(&emb);
    assert_eq!(header, ["y0", "y1", "y2", "label"]);
    assert_eq!(rows.len(), 600);
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("emb.model.json")).unwrap()).unwrap();
    assert!(model.get("basis").is_some());
    let text = stdout(&out);
    assert!(text.contains("method: pga") && text.contains("spectrum: "), "{text}");
}

#[test]
fn reduce_runs_every_method() {
    let dir = TempDir::new().unwrap();
    let data = generated(&dir, "moons");
    for method in ["pga", "rrpca", "ronpp", "rle", "rlda", "risomap", "rsvm"] {
        let emb = dir.path().join(format!("{method}.csv"));
        let out = manred(&["reduce", "--method", method, "--in", path_str(&data), "--components", "2", "--out", path_str(&emb)]);
        assert_eq!(code(&out), 0, "{method}: {}", stderr(&out));
        let (header, rows) = read_table(&emb);
        let expected_cols = match method {
            "rlda" | "rsvm" => 1,
            _ => 2,
        };
        assert_eq!(header.len(), expected_cols + 1, "{method}");
        assert_eq!(rows.len(), 600, "{method}");
        assert!(rows.iter().flatten().all(|v| v.parse::<f64>().unwrap().is_finite()), "{method}");
        assert!(dir.path().join(format!("{method}.model.json")).is_file());
    }
}

#[test]
fn reduce_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = generated(&dir, "swiss_roll");
    let run = |name: &str| {
        let emb = dir.path().join(name);
        let out = manred(&["reduce", "--method", "risomap", "--in", path_str(&data), "--out", path_str(&emb)]);
        (stdout(&out), fs::read(&emb).unwrap())
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

/// Two tight clusters far apart: a 3-NN graph has two components.
fn two_clusters(dir: &TempDir) -> PathBuf {
    let rows: Vec<String> = (0..20)
        .map(|i| {
            let offset = if i < 10 { 0.0 } else { 1000.0 };
            let t = i as f64 * 0.37;
            format!("{},{},{}", offset + t.cos(), t.sin(), i / 10)
        })
        .collect();
    let path = dir.path().join("split.csv");
    write_csv(&path, "a,b,label", &rows);
    path
}

#[test]
fn disconnected_graph_exits_4_unless_k_grows() {
    let dir = TempDir::new().unwrap();
    let data = two_clusters(&dir);
    let emb = dir.path().join("e.csv");
    let args = ["reduce", "--method", "rle", "--in", path_str(&data), "--k", "3", "--components", "1", "--out", path_str(&emb)];
    let out = manred(&args);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("[10, 10]"), "{}", stderr(&out));

    let mut grown = args.to_vec();
    grown.push("--grow-k");
    let out = manred(&grown);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("grew k"));
}

#[test]
fn rlda_clamps_components_to_classes_minus_one() {
    let dir = TempDir::new().unwrap();
    let data = generated(&dir, "sphere_bands");
    let emb = dir.path().join("e.csv");
    let out = manred(&["reduce", "--method", "rlda", "--in", path_str(&data), "--components", "5", "--out", path_str(&emb)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("clamping"));
    let (header, _) = read_table(&emb);
    assert_eq!(header, ["y0", "y1", "label"]);
}

#[test]
fn rsvm_rejects_multiclass_data() {
    let dir = TempDir::new().unwrap();
    let data = generated(&dir, "sphere_bands");
    let emb = dir.path().join("e.csv");
    let out = manred(&["reduce", "--method", "rsvm", "--in", path_str(&data), "--out", path_str(&emb)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn geodesic_of_antipodal_points_is_pi() {
    let out = manred(&["geodesic", "--spec", "sphere:3", "--x", "1,0,0", "--y", "-1,0,0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), format!("{:.12}", std::f64::consts::PI));
    assert_eq!(stdout(&out).trim(), "3.141592653590");
}

#[test]
fn geodesic_rejects_points_off_the_manifold() {
    let out = manred(&["geodesic", "--spec", "sphere:3", "--x", "1,1,0", "--y", "0,1,0"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).is_empty());
}

#[test]
fn mean_of_one_point_is_that_point() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("one.csv");
    write_csv(&path, "x0,x1,x2,label", &["0.6,0.0,0.8,0".to_string()]);
    let out = manred(&["mean", "--in", path_str(&path), "--spec", "sphere:3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out), "x0,x1,x2\n0.6,0.0,0.8\n");
}

#[test]
fn mean_on_spd_data_is_the_geometric_mean() {
    // Commuting SPD matrices: the affine-invariant mean is the entrywise geometric mean.
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("spd.csv");
    write_csv(&path, "a,b,c,d,label", &["1,0,0,9,0".to_string(), "4,0,0,1,1".to_string()]);
    let out = manred(&["mean", "--in", path_str(&path), "--spec", "spd:2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let values: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    for (got, want) in values.iter().zip([2.0, 0.0, 0.0, 3.0]) {
        assert!((got - want).abs() < 1e-6, "{text}");
    }
}

#[test]
fn mean_reports_non_convergence_with_exit_5() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("spread.csv");
    let rows: Vec<String> = (0..6)
        .map(|i| {
            let t = i as f64;
            let (x, y, z) = (t.cos(), t.sin(), 0.5 + 0.1 * t);
            let n = (x * x + y * y + z * z).sqrt();
            format!("{},{},{},0", x / n, y / n, z / n)
        })
        .collect();
    write_csv(&path, "x0,x1,x2,label", &rows);
    let out = manred(&["mean", "--in", path_str(&path), "--spec", "sphere:3", "--max-iter", "1", "--tol", "1e-15"]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
}

#[test]
fn missing_input_is_an_io_error() {
    let out = manred(&["mean", "--in", "/definitely/not/here.csv"]);
    assert_eq!(code(&out), 3);
}

fn small_config(dir: &TempDir, seed: u64) -> PathBuf {
    let path = dir.path().join(format!("config{seed}.json"));
    fs::write(&path, format!(r#"{{"seed": {seed}, "max_samples": 120}}"#)).unwrap();
    path
}

fn run_benchmark(dir: &TempDir, config: &Path, name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out_path = dir.path().join(name);
    let mut args = vec!["benchmark", "--config", path_str(config), "--out", path_str(&out_path)];
    args.extend_from_slice(extra);
    (manred(&args), out_path)
}

/// Report rows without the wall-clock column.
fn rows_without_time(path: &Path) -> Vec<Vec<String>> {
    let (header, rows) = read_table(path);
    let t = header.iter().position(|h| h == "wall_ms").unwrap();
    rows.into_iter()
        .map(|mut r| {
            r.remove(t);
            r
        })
        .collect()
}

#[test]
fn benchmark_grid_shape_and_outputs() {
    let dir = TempDir::new().unwrap();
    let config = small_config(&dir, 42);
    let (out, csv) = run_benchmark(&dir, &config, "report.csv", &["--with-rsvm"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_table(&csv);
    assert_eq!(header.join(","), "dataset,method,accuracy,wall_ms,n,d,C,k");
    assert_eq!(rows.len(), 10 * 9);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json.as_object().unwrap().len(), 9);

    let grid = stdout(&out);
    for name in ["PCA", "LDA", "Isomap", "R-PGA", "R-RPCA", "R-ONPP", "R-LE", "R-LDA", "R-Isomap", "RSVM"] {
        assert!(grid.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing:\n{grid}");
    }
    // RSVM cells on multi-class data fail softly.
    assert!(grid.contains("fail"));
}

#[test]
fn benchmark_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let c42 = small_config(&dir, 42);
    let c7 = small_config(&dir, 7);
    let (a, a_csv) = run_benchmark(&dir, &c42, "a.csv", &[]);
    let (b, b_csv) = run_benchmark(&dir, &c42, "b.csv", &[]);
    let (c, c_csv) = run_benchmark(&dir, &c7, "c.csv", &[]);
    for out in [&a, &b, &c] {
        assert_eq!(code(out), 0, "{}", stderr(out));
    }
    assert_eq!(rows_without_time(&a_csv), rows_without_time(&b_csv));
    assert_ne!(rows_without_time(&a_csv), rows_without_time(&c_csv));
}

#[test]
fn benchmark_includes_real_data_when_present() {
    let dir = TempDir::new().unwrap();
    let real = dir.path().join("real");
    fs::create_dir(&real).unwrap();
    let rows: Vec<String> = (0..60)
        .map(|i| {
            let c = i % 3;
            let t = i as f64;
            format!("{},{},{},{c}", c as f64 * 3.0 + (t * 0.7).sin(), (t * 1.3).cos(), (t * 0.3).sin(), )
        })
        .collect();
    write_csv(&real.join("wine.csv"), "f0,f1,f2,label", &rows);
    let config = small_config(&dir, 42);
    let (out, csv) = run_benchmark(&dir, &config, "r.csv", &["--include-real", path_str(&real)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).lines().next().unwrap().contains("wine"));
    let (_, rows) = read_table(&csv);
    assert_eq!(rows.iter().filter(|r| r[0] == "wine").count(), 9);
}

#[test]
fn benchmark_rejects_unknown_config_keys() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"sead": 1}"#).unwrap();
    let (out, _) = run_benchmark(&dir, &config, "x.csv", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sead"));
}
