use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn vdreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdreg")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_training(dir: &Path, rows: usize) -> String {
    let mut csv = String::from("x1,x2,y\n");
    for i in 0..rows {
        let a = (i as f64 * 0.7).sin();
        let b = (i as f64 * 1.3).cos();
        let x1 = if i % 4 == 1 { "NA".to_string() } else { format!("{a}") };
        let x2 = if i % 3 == 2 { "NA".to_string() } else { format!("{b}") };
        csv += &format!("{x1},{x2},{}\n", 1.0 + a - 0.5 * b + 0.05 * i as f64);
    }
    let path = dir.join("train.csv");
    fs::write(&path, csv).unwrap();
    path.display().to_string()
}

fn fit(dir: &Path, data: &str, extra: &[&str]) -> String {
    let out = dir.join("fit").display().to_string();
    let mut args = vec!["fit", "--data", data, "--response", "y", "--seed", "5", "--out", &out];
    args.extend_from_slice(extra);
    let o = vdreg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn missing_data_file_exits_3_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.csv").display().to_string();
    let out = tmp.path().join("out").display().to_string();
    let o = vdreg(&["fit", "--data", &missing, "--response", "y", "--seed", "1", "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains(&missing), "{msg}");
    assert_eq!(msg.trim_end().lines().count(), 1);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_training(tmp.path(), 5);
    let out = tmp.path().join("out").display().to_string();
    // No seed.
    let o = vdreg(&["fit", "--data", &data, "--response", "y", "--out", &out]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = vdreg(&["fit", "--data", &data, "--response", "y", "--seed", "1", "--model", "lasso", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = vdreg(&["fit", "--data", &data, "--response", "y", "--seed", "1", "--iters", "10", "--burn", "20", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn toy_fit_writes_expected_record_count() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_training(tmp.path(), 5);
    let out = fit(tmp.path(), &data, &["--iters", "230", "--burn", "30", "--thin", "7"]);
    let draws = fs::read_to_string(Path::new(&out).join("draws.ndjson")).unwrap();
    assert_eq!(draws.lines().count(), (230 - 30) / 7);
    let parts = fs::read_to_string(Path::new(&out).join("partitions.txt")).unwrap();
    assert_eq!(parts.lines().count(), (230 - 30) / 7);
    for f in ["diagnostics.json", "manifest.json", "run.ini", "standardization.json"] {
        assert!(Path::new(&out).join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(Path::new(&out).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], "5");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn rerun_from_saved_config_gives_identical_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_training(tmp.path(), 12);
    let out = fit(tmp.path(), &data, &["--iters", "400", "--burn", "100", "--model", "vdlreg"]);
    let again = tmp.path().join("again").display().to_string();
    let cfg = Path::new(&out).join("run.ini").display().to_string();
    let o = vdreg(&["fit", "--config", &cfg, "--out", &again]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["draws.ndjson", "partitions.txt", "diagnostics.json", "manifest.json"] {
        assert_eq!(
            fs::read(Path::new(&out).join(f)).unwrap(),
            fs::read(Path::new(&again).join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn predictions_cover_all_missing_and_training_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_training(tmp.path(), 16);
    let out = fit(tmp.path(), &data, &["--iters", "600", "--burn", "100"]);
    let first_row = fs::read_to_string(&data).unwrap().lines().nth(1).unwrap().to_string();
    let (x, _) = first_row.rsplit_once(',').unwrap();
    let q = tmp.path().join("q.csv");
    fs::write(&q, format!("x1,x2\nNA,NA\n{x}\n")).unwrap();
    let pred = tmp.path().join("pred").display().to_string();
    let o = vdreg(&[
        "predict", "--fit", &out, "--queries", &q.display().to_string(), "--grid", "-4:6:11", "--out", &pred,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(Path::new(&pred).join("predictions.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "query,x1,x2,mean,sd");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("1,NA,NA,"));
    for r in &rows[1..] {
        let f: Vec<f64> = r.rsplit(',').take(2).map(|v| v.parse().unwrap()).collect();
        assert!(f.iter().all(|v| v.is_finite()), "{r}");
    }
    let dens = fs::read_to_string(Path::new(&pred).join("density.csv")).unwrap();
    assert_eq!(dens.lines().count(), 1 + 2 * 11);
}

#[test]
fn two_covariate_fit_emits_surface_curves_and_point() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_training(tmp.path(), 16);
    let out = fit(tmp.path(), &data, &["--iters", "400", "--burn", "100"]);
    let q = tmp.path().join("q.csv");
    fs::write(&q, "x1,x2\n0,0\n").unwrap();
    let pred = tmp.path().join("pred").display().to_string();
    let o = vdreg(&["predict", "--fit", &out, "--queries", &q.display().to_string(), "--surface", "4", "--out", &pred]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(Path::new(&pred).join("surface.csv")).unwrap();
    let count = |prefix: &str| text.lines().filter(|l| l.starts_with(prefix)).count();
    assert_eq!(count("both,"), 16);
    assert_eq!(count("x1_only,"), 4);
    assert_eq!(count("x2_only,"), 4);
    assert_eq!(count("none,NA,NA,"), 1);
}

#[test]
fn query_schema_mismatch_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_training(tmp.path(), 8);
    let out = fit(tmp.path(), &data, &["--iters", "200", "--burn", "50"]);
    let pred = tmp.path().join("pred").display().to_string();
    for body in ["x1,x3\n0,0\n", "x1\n0\n", "x1,x2\n0\n"] {
        let q = tmp.path().join("q.csv");
        fs::write(&q, body).unwrap();
        let o = vdreg(&["predict", "--fit", &out, "--queries", &q.display().to_string(), "--out", &pred]);
        assert_eq!(o.status.code(), Some(2), "{body:?}: {}", stderr(&o));
    }
    // Surface output needs exactly two covariates.
    let one = tmp.path().join("one");
    fs::create_dir_all(&one).unwrap();
    let d1 = one.join("train.csv");
    fs::write(&d1, "x1,y\n0.1,1\n0.5,2\n-0.3,0.4\n1.2,2.2\n").unwrap();
    let f1 = fit(&one, &d1.display().to_string(), &["--iters", "200", "--burn", "50"]);
    let q = tmp.path().join("q1.csv");
    fs::write(&q, "x1\n0\n").unwrap();
    let o = vdreg(&["predict", "--fit", &f1, "--queries", &q.display().to_string(), "--surface", "3", "--out", &pred]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn changed_training_data_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_training(tmp.path(), 8);
    let out = fit(tmp.path(), &data, &["--iters", "200", "--burn", "50"]);
    write_training(tmp.path(), 9);
    let q = tmp.path().join("q.csv");
    fs::write(&q, "x1,x2\n0,0\n").unwrap();
    let pred = tmp.path().join("pred").display().to_string();
    let o = vdreg(&["predict", "--fit", &out, "--queries", &q.display().to_string(), "--out", &pred]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn one_replicate_simulation_is_quick() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim").display().to_string();
    let start = Instant::now();
    let o = vdreg(&["simulate", "--replicates", "1", "--seed", "2", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(start.elapsed().as_secs_f64() < 60.0);
    let summary = fs::read_to_string(Path::new(&out).join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn methods_flag_restricts_columns_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim").display().to_string();
    let o = vdreg(&[
        "simulate", "--replicates", "20", "--methods", "vdreg,cc-ls", "--iters", "150", "--burn", "50", "--jobs",
        "4", "--seed", "3", "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(Path::new(&out).join("summary.csv")).unwrap();
    let methods: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["vdreg", "cc-ls"]);
    let table = fs::read_to_string(Path::new(&out).join("summary.txt")).unwrap();
    assert!(table.lines().next().unwrap().contains("vdreg") && !table.contains("vdlreg"));
    let reps = fs::read_to_string(Path::new(&out).join("replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 20 * 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.ini");
    fs::write(&cfg, "command = simulate\nseed = 1\nreplicatess = 2\n").unwrap();
    let out = tmp.path().join("sim").display().to_string();
    let o = vdreg(&["simulate", "--config", &cfg.display().to_string(), "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replicatess"));
}
