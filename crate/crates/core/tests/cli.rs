use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sh-bdf3"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    std::fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

const ZERO_RUN: &str = "\
dim = 2
L = 10
M = 8
tau = 0.1
steps = 3
eps = 0.25
g = 0.5
ic = zero
output_dir = out
";

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["simulate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["simulate", "missing.cfg"], dir.path()).status.code(), Some(1));

    let cfg = write_config(dir.path(), "bad.cfg", &ZERO_RUN.replace("tau = 0.1", "tau = -1"));
    let out = run(&["simulate", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau must be positive"));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn zero_run_writes_log_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.cfg", ZERO_RUN);
    let out = run(&["simulate", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/energy.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], k.to_string());
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
    }

    let first = std::fs::read(dir.path().join("out/energy.csv")).unwrap();
    assert_eq!(run(&["simulate", &cfg], dir.path()).status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("out/energy.csv")).unwrap(), first);
}

#[test]
fn energy_of_snapshot_matches_log() {
    let dir = tempfile::tempdir().unwrap();
    let body = ZERO_RUN
        .replace("ic = zero", "ic = random\nseed = 3\namplitude = 0.3")
        .replace("steps = 3", "steps = 4\nsnapshot_every = 2");
    let cfg = write_config(dir.path(), "rand.cfg", &body);
    assert_eq!(run(&["simulate", &cfg], dir.path()).status.code(), Some(0));

    let out = run(&["energy", "--export", "out/snap_00000004.bin"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "4");
    let e: f64 = row[3].parse().unwrap();

    let csv = std::fs::read_to_string(dir.path().join("out/energy.csv")).unwrap();
    let logged: f64 = csv.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(e, logged);
    assert!(dir.path().join("out/snap_00000004.txt").exists());
    assert!(dir.path().join("out/snap_00000002.bin").exists());

    let bad = run(&["energy", "rand.cfg"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn converge_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let body = "\
dim = 2
L = 6.283185307179586
M = 16
tau = 0.01
steps = 20
eps = 0.25
g = 1
ic = example1
forcing = on
study = temporal
study_steps = 4, 8
output_dir = out
";
    let cfg = write_config(dir.path(), "conv.cfg", body);
    let out = run(&["converge", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "N,tau,M,error_l2,order");
    assert_eq!(csv.lines().count(), 3);
}
