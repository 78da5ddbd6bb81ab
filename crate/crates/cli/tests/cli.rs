use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_soliton-flow"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn preset_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run", "--preset", "example1-m1", "--out"]).arg(&out).output().unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("monitors: 7 requested, 7 pass, 0 fail"), "{summary}");
    assert!(summary.contains("fits: 8 total, 0 failed"), "{summary}");
    for f in ["metric.svg", "phase.svg", "ratios.svg"] {
        assert!(out.join(f).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "integrator.stepsize = 1\n");
    assert_eq!(code(bin().args(["run", "--config"]).arg(&bad)), 2);
    assert_eq!(code(bin().args(["run", "--preset", "no-such-model"])), 2);
    assert_eq!(code(bin().args(["run", "--config"]).arg(dir.path().join("missing.cfg"))), 2);
    assert_eq!(code(bin().arg("frobnicate")), 2);

    let invalid = write(dir.path(), "invalid.cfg", "startup.ubar = 1\n");
    assert_eq!(code(bin().args(["run", "--no-plots", "--config"]).arg(&invalid).arg("--out").arg(dir.path().join("a"))), 3);

    let early = write(dir.path(), "early.cfg", "integrator.end = 5\nintegrator.max_steps = 50\n");
    let out = dir.path().join("early");
    assert_eq!(code(bin().args(["run", "--no-plots", "--config"]).arg(&early).arg("--out").arg(&out)), 4);
    assert!(out.join("trajectory.csv").exists());
}

#[test]
fn sweep_three_by_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.cfg", "sweep.hbar = 3, 6, 9\nsweep.ubar = -0.5, -1, -2\nsweep.hbar = 3, 6, 9, 6\n");
    let out = dir.path().join("sweep");
    let res = bin().args(["sweep", "--no-plots", "--workers", "4", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("duplicate grid value"));
    let index = std::fs::read_to_string(out.join("index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    for (k, row) in rows.iter().enumerate() {
        assert!(row.starts_with(&format!("{k},")));
        assert!(row.contains(",0,Pass,7,0,0,"), "{row}");
    }
}

#[test]
fn sweep_without_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "plain.cfg", "integrator.end = 1\n");
    assert_eq!(code(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(dir.path())), 2);
}

#[test]
fn workers_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", "integrator.end = 0.5\nsweep.ubar = -1, -2\n");
    let mut cmd = bin();
    cmd.env("SOLITON_FLOW_WORKERS", "lots").args(["sweep", "--no-plots", "--config"]).arg(&cfg).arg("--out").arg(dir.path());
    assert_eq!(code(&mut cmd), 2);
    let mut cmd = bin();
    cmd.env("SOLITON_FLOW_WORKERS", "1").args(["sweep", "--no-plots", "--config"]).arg(&cfg).arg("--out").arg(dir.path());
    assert_eq!(code(&mut cmd), 0);
}

#[test]
fn critical_points_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cp.csv");
    let res = bin().args(["critical-points", "--model", "dims=1,2,3;lambdas=0,1,2", "--out"]).arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 5);
    assert_eq!(code(bin().args(["critical-points", "--model", "example1-m1", "--out"]).arg(&out)), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "r.cfg", "integrator.end = 3\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(out)), 0);
    }
    for f in ["trajectory.csv", "monitors.csv", "fits.csv", "metric.svg", "phase.svg", "ratios.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
