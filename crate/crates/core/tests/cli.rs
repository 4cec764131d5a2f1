use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "[coefficient]\nfamily = separable_1d\n[grids]\nn_x = 8\nn_y = 16\nn_f = 8\n[sweep]\neps_denominators = 2, 4, 8\n[solver]\nomega_intervals = 8\n";

fn locper(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locper"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.ini");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_accepts_builtin_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = locper(&["validate", "--samples", "500"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("samples 500"));
}

#[test]
fn bad_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("eps_denominators = 2, 4, 8", "eps = 0.3"));
    let o = locper(&["sweep"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("validation failure"));

    let cfg = write_config(dir.path(), &SMALL.replace("family = separable_1d", "family = separable_1d\nc1 = 3"));
    assert_eq!(locper(&["validate"], &cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = locper(&["sweep", "--seed", "7"], &cfg, out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("slope E2"));
    }
    for f in ["convergence.csv", "loglog.dat"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("eps_denominator,eps,E0,E1,E2"));
    assert!(fs::read_to_string(a.join("timings.csv")).unwrap().starts_with("scope,stage,wall_ms"));
}

#[test]
fn exhausted_norm_budget_exits_with_solver_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("[solver]\n", "[solver]\npower_max_iter = 1\n"));
    let o = locper(&["sweep"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("PARTIAL"));
    assert!(dir.path().join("convergence.csv").exists());
}

#[test]
fn cells_round_trip_through_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = locper(&["cells"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = dir.path().join("cells.bin");
    assert!(table.exists());
    let built = String::from_utf8_lossy(&o.stdout).lines().next().unwrap().to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_locper"))
        .args(["cells", "--config"])
        .arg(&cfg)
        .arg("--inspect")
        .arg(&table)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().next().unwrap(), built);
}

#[test]
fn effective_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = locper(&["effective"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("mean a0"));
    let csv = fs::read_to_string(dir.path().join("effective.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn missing_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = locper(&["sweep"], &dir.path().join("absent.ini"), dir.path());
    assert_ne!(o.status.code(), Some(0));
}
