use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const EXAMPLE2: &str = "\
[problem]
m = 2
A = -1.5, 0.5, 0.5, -1.5
X0 = 1, 2
gamma = 0.5
T = 1

[discretization]
n = 3
j = 3
";

fn fracspline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracspline")).args(args).output().expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE2);
    let out = fracspline(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = lines(&dir.path().join("solution.csv"));
    assert_eq!(rows[0], "t,x_1,x_2,ref_1,ref_2,err_1,err_2");
    // s = 4, error grid s + 2
    assert_eq!(rows.len() - 1, (1 << 6) + 1);
    let first: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[3..5], [1.0, 2.0]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("linf_error"));
}

#[test]
fn grid_level_override() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE2);
    let out = fracspline(&[
        "solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--grid-level", "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(lines(&dir.path().join("solution.csv")).len() - 1, 9);
}

#[test]
fn unsolvable_config_exits_2_with_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &EXAMPLE2.replace("j = 3", "j = 3\ns = 1"));
    let out = fracspline(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 11") && err.contains("solvability"), "{err}");
    assert!(!dir.path().join("solution.csv").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE2);
    let (cfg, d) = (cfg.to_str().unwrap(), dir.path().to_str().unwrap());
    assert_eq!(fracspline(&["solve", "--config", "/no/such/file.conf"]).status.code(), Some(2));
    assert_eq!(fracspline(&["solve"]).status.code(), Some(2));
    assert_eq!(fracspline(&["converge", "--config", cfg, "--j-min", "5", "--j-max", "3", "--out", d]).status.code(), Some(2));
    assert_eq!(fracspline(&["ml", "--gamma", "0", "--z-min", "0", "--z-max", "1", "--out", d]).status.code(), Some(2));
    assert_eq!(fracspline(&["basis", "--n", "0", "--out", d]).status.code(), Some(2));
}

#[test]
fn converge_reports_orders() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE2);
    let out = fracspline(&[
        "converge", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--j-min", "2",
        "--j-max", "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = lines(&dir.path().join("convergence.csv"));
    assert_eq!(rows[0], "j,err_1,err_2,rho_1,rho_2");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].ends_with(",,"));
    for row in &rows[2..] {
        let rho: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(rho > 0.3 && rho < 0.8, "{row}");
    }
}

#[test]
fn ml_table_matches_closed_forms() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = fracspline(&["ml", "--gamma", "1", "--z-min", "-2", "--z-max", "2", "--step", "0.5", "--out", d]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = lines(&dir.path().join("ml.csv"));
    assert_eq!(rows.len() - 1, 9);
    for row in &rows[1..] {
        let (z, e) = row.split_once(',').unwrap();
        let (z, e): (f64, f64) = (z.parse().unwrap(), e.parse().unwrap());
        assert!((e - z.exp()).abs() <= 1e-12 * z.exp().max(1.0), "{row}");
    }
    // E_{1/2}(-1) = e·erfc(1)
    let out = fracspline(&["ml", "--gamma", "0.5", "--z-min", "-1", "--z-max", "-1", "--out", d]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = lines(&dir.path().join("ml.csv"));
    let e: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((e - 0.427_583_576_155_807).abs() <= 1e-13, "{e}");
}

#[test]
fn ml_outside_trusted_range_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = fracspline(&[
        "ml", "--gamma", "0.1", "--beta", "2", "--z-min", "-40", "--z-max", "0", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trusted range"));
}

#[test]
fn basis_writes_edge_series() {
    let dir = TempDir::new().unwrap();
    let out = fracspline(&[
        "basis", "--n", "3", "--gamma", "0.25,0.75", "--levels", "0,2", "--grid-step", "0.125", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = lines(&dir.path().join("basis.csv"));
    assert_eq!(rows[0], "series,level,ell,gamma,t,phi,caputo");
    let series: std::collections::BTreeSet<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    // 2 orders × 2 levels × ℓ ∈ {−3, …, 0}
    assert_eq!(series.len(), 16);
    // level 0 spans [0, 4] in 32 steps, level 2 spans [0, 1] in 8 steps
    assert_eq!(rows.len() - 1, 2 * 4 * (33 + 9));
    for row in &rows[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let t: f64 = f[4].parse().unwrap();
        if t == 0.0 {
            assert_eq!(f[6].parse::<f64>().unwrap(), 0.0, "{row}");
        }
    }
}

#[test]
fn dump_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &EXAMPLE2.replace("T = 1", "T = 1\nforcing_1 = poly 1 0.5"));
    let out = fracspline(&["solve", "--config", cfg.to_str().unwrap(), "--dump-config"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dumped = String::from_utf8(out.stdout).unwrap();
    assert!(dumped.contains("s = j+1") && dumped.contains("grid_level = s+2"), "{dumped}");
    let again = write_config(&dir, &dumped);
    let out = fracspline(&["solve", "--config", again.to_str().unwrap(), "--dump-config"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), dumped);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EXAMPLE2);
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4"].iter().enumerate() {
        let sub = dir.path().join(format!("run{k}"));
        let out = fracspline(&[
            "--threads", threads, "solve", "--config", cfg.to_str().unwrap(), "--out", sub.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push(fs::read(sub.join("solution.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn unstable_matrix_gives_advisory() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &EXAMPLE2.replace("A = -1.5, 0.5, 0.5, -1.5", "A = 0.5, 0, 0, -1"));
    let out = fracspline(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("non-negative real part"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["example1.conf", "example2.conf"] {
        let out = fracspline(&["solve", "--config", root.join(name).to_str().unwrap(), "--dump-config"]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
    }
}
