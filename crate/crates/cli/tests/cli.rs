use hankel_gof::linalg::SpdMatrix;
use hankel_gof::pipeline::MatrixSample;
use hankel_gof::wishart::{RngStream, WishartModel};
use rand::Rng;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hankel-gof"));
    c.env_remove("HANKEL_GOF_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three assets of random-walk prices over `days` consecutive calendar days,
/// with every 9th day missing from the price file.
fn write_prices(dir: &Path, days: usize, seed: u64) -> (PathBuf, PathBuf) {
    let start = chrono::NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
    let mut rng = RngStream::new(seed, 0).rng();
    let mut level = [100.0, 50.0, 20.0];
    let mut prices = String::from("date,AAA,BBB,CCC\n");
    let mut cal = String::new();
    for d in 0..days {
        let date = start + chrono::Days::new(d as u64);
        cal.push_str(&format!("{date}\n"));
        let common: f64 = rng.gen::<f64>() - 0.5;
        for (k, l) in level.iter_mut().enumerate() {
            let own: f64 = rng.gen::<f64>() - 0.5;
            *l *= (0.01 * (own + 0.3 * (k as f64 + 1.0) * common)).exp();
        }
        if d % 9 == 4 {
            continue;
        }
        prices.push_str(&format!("{date},{},{},{}\n", level[0], level[1], level[2]));
    }
    let pp = dir.join("prices.csv");
    let cp = dir.join("calendar.txt");
    std::fs::write(&pp, prices).unwrap();
    std::fs::write(&cp, cal).unwrap();
    (pp, cp)
}

fn write_null_sample(path: &Path, alpha: f64, m: usize, n: usize, seed: u64) {
    let s = WishartModel::standard(alpha, m).unwrap().sampler();
    let mut rng = RngStream::new(seed, 0).rng();
    let xs: Vec<SpdMatrix> = (0..n).map(|_| s.sample_spd(&mut rng)).collect();
    let ids = (0..n).map(|i| format!("x{i}")).collect();
    MatrixSample::new(ids, xs).unwrap().save(path).unwrap();
}

#[test]
fn tables_rows() {
    let out = run(&["tables", "--m", "2", "--eps", "1e-10", "--alphas", "5,10,100"]);
    assert!(out.status.success());
    let v = json(&out);
    let rows: Vec<(f64, u64, u64)> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["alpha"].as_f64().unwrap(), r["r"].as_u64().unwrap(), r["N"].as_u64().unwrap()))
        .collect();
    assert_eq!(rows, vec![(5.0, 6, 14), (10.0, 4, 7), (100.0, 2, 2)]);
    assert!(v["version"].is_string());
}

#[test]
fn spectrum_both_methods() {
    let a = json(&run(&["spectrum", "--alpha", "3", "--m", "2"]));
    let b = json(&run(&["spectrum", "--alpha", "3", "--m", "2", "--method", "roots"]));
    assert_eq!(a["method"], "matrix");
    assert_eq!(b["method"], "g-roots");
    let d1 = a["deltas"][0][0].as_f64().unwrap();
    let d2 = b["deltas"][0][0].as_f64().unwrap();
    assert!((d1 - d2).abs() < 1e-8 * d1.max(1.0));
    assert!(a["version"].is_string() && a["truncation"]["N"].is_u64());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["tables"]).status.code(), Some(1));
    assert_eq!(run(&["spectrum", "--alpha", "x", "--m", "2"]).status.code(), Some(1));
    assert_eq!(run(&["test", "--input", "a.csv", "--alpha", "3", "--method", "bogus"]).status.code(), Some(1));
    assert_eq!(run(&["spectrum", "--alpha", "0.2", "--m", "2"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.csv");
    assert_eq!(run(&["test", "--input", p(&missing), "--alpha", "3"]).status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "m=2\nA,1,2\n").unwrap();
    assert_eq!(run(&["test", "--input", p(&bad), "--alpha", "3"]).status.code(), Some(2));
    let prices = dir.path().join("p.csv");
    std::fs::write(&prices, "date,A,B\n2020-01-01,1,0\n").unwrap();
    let out = dir.path().join("m.csv");
    assert_eq!(run(&["ingest", "--prices", p(&prices), "--period", "3", "--out", p(&out)]).status.code(), Some(2));
    std::fs::write(&prices, "").unwrap();
    assert_eq!(run(&["ingest", "--prices", p(&prices), "--period", "3", "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn ingest_then_test_financial_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (prices, cal) = write_prices(dir.path(), 261, 5);
    let mats = dir.path().join("matrices.csv");
    let out = run(&["ingest", "--prices", p(&prices), "--calendar", p(&cal), "--period", "10", "--out", p(&mats)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    assert_eq!(summary["return_rows"], 260);
    assert_eq!(summary["matrices"], 26);
    let sample = MatrixSample::load(&mats).unwrap();
    assert_eq!((sample.len(), sample.m()), (26, 3));

    let report_path = dir.path().join("report.json");
    let out = run(&["test", "--input", p(&mats), "--alpha", "4.5", "--method", "mc", "--reps", "10000", "--out", p(&report_path)]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 3, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let t = report["statistic"].as_f64().unwrap();
    assert!(t.is_finite() && t >= 0.0);
    let crit = report["critical_value"].as_f64().unwrap();
    assert!((0.001..=0.004).contains(&crit), "critical value {crit}");
    assert_eq!(code == 3, report["reject"].as_bool().unwrap());
    for key in ["n", "m", "alpha", "method", "level", "p_value", "mc_reps", "seed", "flags", "config", "version"] {
        assert!(report.get(key).is_some(), "{key}");
    }
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.csv");
    write_null_sample(&mats, 3.0, 2, 15, 2);
    let a = run(&["test", "--input", p(&mats), "--alpha", "3", "--reps", "300", "--seed", "11"]);
    let b = run(&["test", "--input", p(&mats), "--alpha", "3", "--reps", "300", "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.csv");
    write_null_sample(&mats, 3.0, 2, 12, 3);
    let out = bin().args(["test", "--input", p(&mats), "--alpha", "3", "--reps", "200"]).env("HANKEL_GOF_SEED", "777").output().unwrap();
    assert_eq!(json(&out)["seed"], 777);
    let out = run(&["test", "--input", p(&mats), "--alpha", "3", "--reps", "200"]);
    assert_eq!(json(&out)["seed"], hankel_gof::goftest::DEFAULT_SEED);
}

#[test]
fn null_samples_mostly_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.csv");
    let mut accepted = 0;
    let trials = 20;
    for s in 0..trials {
        write_null_sample(&mats, 3.0, 2, 20, 100 + s);
        let out = run(&["test", "--input", p(&mats), "--alpha", "3", "--reps", "400", "--seed", &s.to_string()]);
        match out.status.code() {
            Some(0) => accepted += 1,
            Some(3) => {}
            c => panic!("unexpected exit {c:?}: {}", String::from_utf8_lossy(&out.stderr)),
        }
    }
    // 0.95 acceptance; 15 of 20 is below the binomial 0.1% tail
    assert!(accepted >= 15, "{accepted}/{trials}");
}

#[test]
fn grossly_non_wishart_sample_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let mats = dir.path().join("m.csv");
    let mut rng = RngStream::new(9, 0).rng();
    let xs: Vec<SpdMatrix> = (0..30)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            SpdMatrix::from_diag(&[1.0 + 1e-3 * u, 1e-3 * (1.0 + v)]).unwrap()
        })
        .collect();
    MatrixSample::new((0..30).map(|i| i.to_string()).collect(), xs).unwrap().save(&mats).unwrap();
    let out = run(&["test", "--input", p(&mats), "--alpha", "3", "--reps", "300"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn calibrate_and_power() {
    let c = json(&run(&["calibrate", "--alpha", "3", "--m", "2", "--n", "30", "--level", "0.05", "--reps", "300", "--seed", "4"]));
    assert!(c["critical_value"].as_f64().unwrap() > 0.0);
    assert_eq!(c["config"]["seed"], 4);
    let out = run(&["power", "--family", "shape", "--alpha", "3", "--m", "2", "--n", "30", "--reps", "100", "--seed", "4", "--calibration-reps", "200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    for key in ["family", "theta_or_n", "level", "reps", "reject_rate", "se", "seed", "config", "version"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let r = v["reject_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&r));
}

#[test]
fn matrices_round_trip_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let (prices, cal) = write_prices(dir.path(), 101, 8);
    let mats = dir.path().join("m.csv");
    assert!(run(&["ingest", "--prices", p(&prices), "--calendar", p(&cal), "--period", "10", "--out", p(&mats)]).status.success());
    let table = hankel_gof::pipeline::load_prices(&prices, Some(&hankel_gof::pipeline::read_calendar(std::fs::File::open(&cal).unwrap()).unwrap())).unwrap();
    let direct = hankel_gof::pipeline::period_covariances(&hankel_gof::pipeline::log_returns(&table).unwrap(), 10).unwrap();
    let loaded = MatrixSample::load(&mats).unwrap();
    assert_eq!(loaded.len(), 10);
    for (a, b) in direct.matrices().iter().zip(loaded.matrices()) {
        for (x, y) in a.matrix().as_slice().iter().zip(b.matrix().as_slice()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }
}
