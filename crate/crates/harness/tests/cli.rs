use std::fs;
use std::process::{Command, Output};

fn aht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aht")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_preset_is_a_config_error() {
    let out = aht(&["simulate", "--preset", "unknown"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    for name in ["stability", "linearized", "ipm", "commutator-bench", "oracle-compare", "blowup-probe"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn bad_override_names_the_key() {
    let out = aht(&["show", "--preset", "stability", "--set", "sim.cfl=7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sim.cfl"));
}

#[test]
fn shown_config_runs_from_file_in_both_formats() {
    let tmp = tempfile::tempdir().unwrap();
    for (ext, extra) in [("conf", None), ("json", Some("--json"))] {
        let out_dir = tmp.path().join(ext);
        let out_str = out_dir.to_str().unwrap();
        let output_override = format!("output={out_str}");
        let mut args = vec!["show", "--preset", "stability", "--set", "n=16", "--set", "sim.t_end=0.2"];
        args.extend(["--set", output_override.as_str()]);
        args.extend(extra);
        let shown = aht(&args);
        assert!(shown.status.success(), "{}", stderr(&shown));
        let path = tmp.path().join(format!("cfg.{ext}"));
        fs::write(&path, &shown.stdout).unwrap();

        let run = aht(&["simulate", "--config", path.to_str().unwrap()]);
        assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
        assert!(out_dir.join("diagnostics.json").is_file());
    }
}

#[test]
fn blowup_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = aht(&[
        "simulate",
        "--preset",
        "stability",
        "--output",
        tmp.path().to_str().unwrap(),
        "--set",
        "n=16",
        "--set",
        "background.a=[[100,0],[0,100]]",
        "--set",
        "sim.dt_max=0.1",
        "--set",
        "sim.t_end=50",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("last finite time"));
}

#[test]
fn io_failure_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let target = blocker.join("out");
    let out = aht(&[
        "simulate",
        "--preset",
        "stability",
        "--set",
        "n=16",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_and_report_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let sweep = Command::new(env!("CARGO_BIN_EXE_aht"))
        .args([
            "sweep", "--preset", "stability", "--output", dir, "--set", "n=16", "--set", "sim.t_end=0.5", "--param",
            "amplitude", "--values", "0.02,0.01",
        ])
        .env("AHT_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(sweep.status.code(), Some(0), "{}", stderr(&sweep));
    assert_eq!(fs::read_to_string(tmp.path().join("summary.csv")).unwrap().lines().count(), 3);

    let report = aht(&["report", "--dir", dir]);
    assert_eq!(report.status.code(), Some(0));
    assert_eq!(fs::read_to_string(tmp.path().join("report.csv")).unwrap().lines().count(), 3);

    let empty = aht(&["sweep", "--preset", "stability", "--output", dir, "--param", "n", "--values", ""]);
    assert_eq!(empty.status.code(), Some(2));

    let bad_workers = Command::new(env!("CARGO_BIN_EXE_aht"))
        .args(["sweep", "--preset", "stability", "--output", dir, "--param", "n", "--values", "16"])
        .env("AHT_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_workers.status.code(), Some(2));
    assert!(stderr(&bad_workers).contains("AHT_WORKERS"));
}
