use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn glideplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glideplan")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_is_deterministic_and_writes_its_outputs() {
    let mission = root().join("scenarios/still_glide.toml");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            path_str(&mission).to_string(),
            "--seed".into(),
            "7".into(),
            "--replan-interval".into(),
            "0".into(),
            "--out".into(),
            path_str(out).to_string(),
        ]
    };
    let run = |out: &Path| {
        let v = args(out);
        stdout(&glideplan(&v.iter().map(String::as_str).collect::<Vec<_>>()))
    };
    let first = run(&a);
    assert_eq!(first, run(&b));
    assert!(first.contains("glide_ratio"), "{first}");
    for name in ["log.csv", "metrics.toml", "metrics.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    // solve reports match apart from their timings
    let untimed = |dir: &Path| {
        let text = std::fs::read_to_string(dir.join("solves.json")).unwrap();
        text.lines().filter(|l| !l.contains("wall_time_s")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(untimed(&a), untimed(&b));
    assert!(a.join("plot").read_dir().unwrap().next().is_some());

    // evaluating the written log reproduces the simulation's metrics
    let eval = stdout(&glideplan(&[
        "evaluate",
        path_str(&a.join("log.csv")),
        "--mission",
        path_str(&mission),
    ]));
    assert_eq!(eval, first);
}

#[test]
fn bad_time_step_fails_without_writing() {
    let mission = root().join("scenarios/still_glide.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let o = glideplan(&["simulate", path_str(&mission), "--dt", "0.5", "--out", path_str(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--dt"));
    assert!(!out.exists());
}

#[test]
fn invalid_mission_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let mission = dir.path().join("m.toml");
    std::fs::write(
        &mission,
        "[[waypoints]]\nx = 0.0\ny = 0.0\nz = 50.0\n\n[[waypoints]]\nx = 100.0\ny = 0.0\nz = 40.0\nmode = \"glide\"\n",
    )
    .unwrap();
    let o = glideplan(&["plan", path_str(&mission)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6") && err.contains("va_ref"), "{err}");
}

#[test]
fn fit_polar_reads_the_sample_data() {
    let csv = root().join("data/polar_samples.csv");
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&glideplan(&["fit-polar", path_str(&csv), "--out", path_str(dir.path())]));
    assert!(!text.is_empty());
    assert!(dir.path().read_dir().unwrap().next().is_some());
}

#[test]
fn plan_prints_every_leg() {
    let mission = root().join("scenarios/circuit.toml");
    let text = stdout(&glideplan(&["plan", path_str(&mission)]));
    assert!(!text.is_empty());
}

#[test]
fn sweep_prints_one_row_per_case() {
    let mission = root().join("scenarios/still_glide.toml");
    let text = stdout(&glideplan(&[
        "sweep",
        path_str(&mission),
        "--sigma2",
        "0,0.1",
        "--wind-speed",
        "0",
        "--replan-interval",
        "0",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("sigma2,"));
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("0.1,"));
}
