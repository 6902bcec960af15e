use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vmfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmfe"))
        .args(args)
        .env_remove("VMFE_THREADS")
        .output()
        .expect("binary runs")
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn write(path: &str, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const STANDARD_2D: &str = r#"{"m": 2, "mu": [0, 0], "lambda": [[1], [0, 1]], "mu_v": [1, 0], "tau": 0, "generator": "gaussian"}"#;
const SKEWED_2D: &str = r#"{"m": 2, "mu": [0.5, -1], "lambda": [[1.2], [0.3, 0.8]], "mu_v": [0.6, 0.8], "tau": 5.656854249492381, "generator": "gaussian"}"#;

fn sample(dir: &TempDir, params: &str, n: usize, seed: u64, out: &str) {
    let pf = p(dir, "params_in.json");
    write(&pf, params);
    let o = vmfe(&["sample", "--params", &pf, "-n", &n.to_string(), "--seed", &seed.to_string(), "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn read_rows(path: &str) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn sample_zero_rows_is_header_only() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "s.csv");
    sample(&dir, STANDARD_2D, 0, 1, &out);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "x1,x2\n");
}

#[test]
fn sample_is_seeded() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (p(&dir, "a.csv"), p(&dir, "b.csv"), p(&dir, "c.csv"));
    sample(&dir, SKEWED_2D, 500, 7, &a);
    sample(&dir, SKEWED_2D, 500, 7, &b);
    sample(&dir, SKEWED_2D, 500, 8, &c);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn standard_normal_column_means() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "s.csv");
    let n = 20_000;
    sample(&dir, STANDARD_2D, n, 3, &out);
    let rows = read_rows(&out);
    assert_eq!(rows.len(), n);
    for j in 0..2 {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "column {j} mean {mean}");
    }
}

#[test]
fn fit_then_eval_agree() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "d.csv");
    sample(&dir, SKEWED_2D, 1000, 11, &data);
    let (fitted, report) = (p(&dir, "fit.json"), p(&dir, "report.json"));
    let o = vmfe(&[
        "fit", "--data", &data, "--generator", "gaussian", "--method", "fixed-point", "--seed", "2",
        "--out-params", &fitted, "--out-report", &report,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let reported = doc["loglik"].as_f64().unwrap();
    assert!(Path::new(doc["trace_path"].as_str().unwrap()).exists());

    let o = vmfe(&["eval", "--params", &fitted, "--data", &data]);
    assert!(o.status.success(), "{}", stderr(&o));
    let printed: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    // eval prints 12 significant digits
    assert!(((printed - reported) / reported).abs() < 1e-11, "{printed} vs {reported}");
}

#[test]
fn eval_standard_normal_average() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "d.csv");
    let n = 20_000;
    sample(&dir, STANDARD_2D, n, 5, &data);
    let pf = p(&dir, "std.json");
    write(&pf, STANDARD_2D);
    let o = vmfe(&["eval", "--params", &pf, "--data", &data]);
    let total: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    // per-sample log density of N(0, I₂) is -ln 2π - t/2, with E[t] = 2
    let rows = read_rows(&data);
    let mean_t = rows.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / n as f64;
    let want = -(2.0 * std::f64::consts::PI).ln() - mean_t / 2.0;
    assert!((total / n as f64 - want).abs() < 1e-9);
    assert!((total / n as f64 - (-(2.0 * std::f64::consts::PI).ln() - 1.0)).abs() < 4.0 / (n as f64).sqrt());
}

#[test]
fn eval_empty_and_degenerate() {
    let dir = TempDir::new().unwrap();
    let pf = p(&dir, "std.json");
    write(&pf, STANDARD_2D);
    let empty = p(&dir, "e.csv");
    write(&empty, "x1,x2\n");
    let o = vmfe(&["eval", "--params", &pf, "--data", &empty]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "0");

    let centre = p(&dir, "c.csv");
    write(&centre, "x1,x2\n1,2\n0,0\n");
    let o = vmfe(&["eval", "--params", &pf, "--data", &centre]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
}

#[test]
fn parse_errors_exit_two_with_location() {
    let dir = TempDir::new().unwrap();
    let pf = p(&dir, "bad.json");
    write(&pf, r#"{"m": 2, "mu": [0, 0], "lambda": [[1], [0, "x"]], "mu_v": [1, 0], "tau": 0, "generator": "gaussian"}"#);
    let out = p(&dir, "s.csv");
    let o = vmfe(&["sample", "--params", &pf, "-n", "3", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda[1][1]"), "{}", stderr(&o));

    let good = p(&dir, "good.json");
    write(&good, STANDARD_2D);
    let ragged = p(&dir, "r.csv");
    write(&ragged, "x1,x2\n1,2\n3,4\n5\n");
    let o = vmfe(&["eval", "--params", &good, "--data", &ragged]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn domain_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    let pf = p(&dir, "neg.json");
    write(&pf, r#"{"m": 2, "mu": [0, 0], "lambda": [[1], [0, 1]], "mu_v": [1, 0], "tau": -1, "generator": "gaussian"}"#);
    let o = vmfe(&["sample", "--params", &pf, "-n", "3", "--out", &p(&dir, "s.csv")]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn cauchy_data_with_gaussian_model_runs() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "d.csv");
    sample(&dir, &SKEWED_2D.replace("gaussian", "cauchy"), 500, 4, &data);
    let o = vmfe(&[
        "fit", "--data", &data, "--generator", "gaussian", "--max-iters", "300",
        "--out-params", &p(&dir, "f.json"), "--out-report", &p(&dir, "r.json"),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", stderr(&o));
    assert!(dir.path().join("f.json").exists());
}

#[test]
fn experiment_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let run = |out: &str, threads: &str| {
        vmfe(&[
            "experiment", "--dims", "2,4", "--taus", "2.828,14.142", "--trials", "3", "--n-samples", "200",
            "--max-iters", "200", "--seed", "9", "--threads", threads, "--out-dir", out,
        ])
    };
    let (a, b) = (p(&dir, "a"), p(&dir, "b"));
    let o = run(&a, "1");
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&b, "2");
    assert!(o.status.success(), "{}", stderr(&o));
    let results = std::fs::read_to_string(Path::new(&a).join("results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines[0], "generator,m,tau,trial,error_ratio,iters,converged,wall_time_s");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2 * 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 8));
    let summary = std::fs::read_to_string(Path::new(&a).join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 8);
    for f in ["results.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(Path::new(&a).join(f)).unwrap(),
            std::fs::read(Path::new(&b).join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn experiment_unwritable_dir_fails_early() {
    let dir = TempDir::new().unwrap();
    let blocker = p(&dir, "file");
    write(&blocker, "");
    let out = format!("{blocker}/sub");
    let o = vmfe(&["experiment", "--dims", "2", "--taus", "1", "--trials", "1", "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn experiment_spec_file_with_overrides() {
    let dir = TempDir::new().unwrap();
    let spec = p(&dir, "spec.json");
    write(&spec, r#"{"dims": [2], "taus": [3.0], "trials": 1, "n_samples": 100, "max_iters": 50}"#);
    let out = p(&dir, "o");
    let o = vmfe(&["experiment", "--spec", &spec, "--generators", "cauchy", "--out-dir", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = std::fs::read_to_string(Path::new(&out).join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 2);
    assert!(results.lines().nth(1).unwrap().starts_with("cauchy,2,3,0,"));

    write(&spec, r#"{"dimz": [2]}"#);
    let o = vmfe(&["experiment", "--spec", &spec, "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(2));
}
