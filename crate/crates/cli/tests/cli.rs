use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bdf_core::bdf_operators::OperatorKernel;
use serde_json::Value;

fn bdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdf")).args(args).output().unwrap()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn json(path: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bdf(&[]).status.code(), Some(1));
    assert_eq!(bdf(&["dress", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(bdf(&["dress", "--alpha", "-1"]).status.code(), Some(1));
    assert_eq!(bdf(&["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_two() {
    // A geometric basis with ratio 1.001 is numerically linearly dependent.
    let o = bdf(&["nrhf", "--basis", "0.5,1.001,12"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hydrogen_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "h");
    let o = bdf(&["nrhf", "--out", &out]);
    assert!(o.status.success());
    let v = json(&out);
    let e = v["energy"].as_f64().unwrap();
    assert!((e + 0.5).abs() < 5e-3, "{e}");
    let orbitals = fs::read_to_string(format!("{out}.orbitals.csv")).unwrap();
    assert!(orbitals.starts_with("r,spin,orbital,psi"));
    let m = json(&format!("{out}.manifest.json"));
    assert_eq!(m["subcommand"], "nrhf");
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["config"]["seed"], 0);
}

#[test]
fn furry_check_passes() {
    let o = bdf(&["furry-check", "--exact", "--trials", "100"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["violations"], 0);
}

#[test]
fn renorm_columns_agree() {
    let o = bdf(&["renorm", "--alpha", "0.02", "--lambda", "1e3", "--jmax", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,lambda,L,f0,Z3_formula,Z3_quadrature,tol"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((row[4] - row[5]).abs() <= row[6], "{row:?}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# screened helium\nZ = 2\nM = 2\na = 0.3\n").unwrap();
    let out = out_arg(dir.path(), "he");
    let o = bdf(&["--config", cfg.to_str().unwrap(), "nrhf", "--a", "0.05", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&format!("{out}.manifest.json"));
    assert_eq!(m["config"]["Z"], 2.0);
    assert_eq!(m["config"]["a"], 0.05);
}

#[test]
fn manifest_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = out_arg(dir.path(), "first");
    let second = out_arg(dir.path(), "second");
    assert!(bdf(&["uehling", "--jmax", "0", "--alpha", "0.01", "--seed", "3", "--out", &first]).status.success());
    let manifest = format!("{first}.manifest.json");
    assert!(bdf(&["--config", &manifest, "uehling", "--out", &second]).status.success());
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert_eq!(fs::read(format!("{first}.json")).unwrap(), fs::read(format!("{second}.json")).unwrap());
    // A manifest from another subcommand is refused.
    assert_eq!(bdf(&["--config", &manifest, "dress"]).status.code(), Some(1));
}

#[test]
fn gamma_binary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "scf");
    let o = bdf(&["scf-run", "--n", "8", "--extent", "6", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = fs::read_to_string(&out).unwrap();
    let records: Vec<Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(records.len() >= 2);
    let res: Vec<f64> = records.iter().map(|r| r["residual"].as_f64().unwrap()).collect();
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    let sidecar = json(&format!("{out}.json"));
    let rank = sidecar["gamma_compression"]["rank"].as_u64().unwrap() as usize;
    let mut f = fs::File::open(format!("{out}.gamma.bin")).unwrap();
    let k = OperatorKernel::read_binary(&mut f, 1e3).unwrap();
    assert_eq!(k.rank(), rank);
}
