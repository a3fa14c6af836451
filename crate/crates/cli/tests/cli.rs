use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bundled(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    fs::read_to_string(path).unwrap()
}

/// Writes a bundled config with textual replacements into `dir`.
fn variant(dir: &Path, name: &str, replacements: &[(&str, &str)]) -> PathBuf {
    let mut text = bundled(name);
    for (from, to) in replacements {
        assert!(text.contains(from), "{from} not in {name}");
        text = text.replace(from, to);
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn se5nav(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_se5nav")).args(args).env("SE5NAV_OUTPUT_ROOT", root).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn validate_accepts_bundled_configs() {
    let root = tempfile::tempdir().unwrap();
    for name in ["stereo.toml", "gps.toml"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        let out = se5nav(root.path(), &["validate", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(stdout(&out).contains(": ok ("));
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = variant(dir.path(), "stereo.toml", &[("rho2 = 6.0", "rho2 = 10.0"), ("dt = 0.001", "dt = 0.0")]);
    let out = se5nav(dir.path(), &["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("distinct") && err.contains("dt"), "{err}");

    let out = se5nav(dir.path(), &["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let ok = variant(dir.path(), "gps.toml", &[]);
    let out = se5nav(dir.path(), &["sweep", ok.to_str().unwrap(), "--runs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_under_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "stereo.toml", &[("duration = 30.0", "duration = 0.5")]);
    let root = dir.path().join("results");
    let out = se5nav(&root, &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("settled RMS"));
    let run_dir = root.join("stereo").join("run");
    for file in ["truth.csv", "estimate.csv", "errors.csv", "measurements.csv", "summary.json", "summary.txt"] {
        assert!(run_dir.join(file).exists(), "{file}");
    }
    assert!(fs::read_to_string(run_dir.join("errors.csv")).unwrap().starts_with("# se5nav errors schema v1\n"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "gps.toml", &[("duration = 30.0", "duration = 0.3")]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(se5nav(&a, &["run", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(se5nav(&b, &["run", cfg.to_str().unwrap()]).status.code(), Some(0));
    for file in ["truth.csv", "estimate.csv", "errors.csv", "measurements.csv"] {
        let read = |r: &Path| fs::read(r.join("gps").join("run").join(file)).unwrap();
        assert_eq!(read(&a), read(&b), "{file}");
    }
}

#[test]
fn divergence_exits_with_code_three_and_dumps_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "gps.toml", &[("dt = 0.0002", "dt = 0.001"), ("duration = 30.0", "duration = 1.0")]);
    let out = se5nav(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("gps").join("run").join("last_good_state.json").exists());
}

#[test]
fn observability_failure_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled("gps.toml");
    let cut = text.find("[channel.2]").unwrap();
    let end = text.find("[observer]").unwrap();
    let path = dir.path().join("vector_only.toml");
    fs::write(&path, format!("{}{}", &text[..cut], &text[end..]).replace("name = \"gps\"", "name = \"vector_only\"")).unwrap();
    let out = se5nav(dir.path(), &["obsv", path.to_str().unwrap(), "--delta", "1", "--until", "10"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("observable on grid: false"));
    let csv = fs::read_to_string(dir.path().join("vector_only").join("obsv").join("observability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 3);
}

#[test]
fn observability_pass_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "stereo.toml", &[]);
    let out = se5nav(dir.path(), &["obsv", cfg.to_str().unwrap(), "--delta", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("stereo").join("obsv").join("observability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 11);
}

#[test]
fn sweep_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "stereo.toml", &[]);
    let out = se5nav(dir.path(), &["sweep", cfg.to_str().unwrap(), "--runs", "2", "--seed", "4", "--duration", "15"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("converged 2/2"));
    let dir = dir.path().join("stereo").join("sweep");
    assert!(dir.join("sweep.csv").exists() && dir.join("sweep.json").exists());
}

#[test]
fn sweep_without_time_to_converge_exits_with_code_five() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "stereo.toml", &[]);
    let out = se5nav(dir.path(), &["sweep", cfg.to_str().unwrap(), "--runs", "1", "--duration", "0.2"]);
    assert_eq!(out.status.code(), Some(5));
}
