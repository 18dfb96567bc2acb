//! End-to-end checks of the `wecfarm` binary: exit codes, output guards and
//! the files each command writes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wecfarm(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wecfarm"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("WECFARM_")) {
        cmd.env_remove(k);
    }
    cmd.arg("--quiet").args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn overlapping_layout_exits_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = wecfarm(&[
        "simulate",
        "--set",
        "n_wec=3",
        "--set",
        "layout={fixture=\"row\",spacing=5.0}",
        "--wave",
        "regular:2,8",
        "-o",
        path(&dir.path().join("run")),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("bodies 1 and 2"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn invalid_input_exits_two() {
    let unknown_field = wecfarm(&["simulate", "--set", "bogus=1"]);
    assert_eq!(code(&unknown_field), 2);
    let bad_limit = wecfarm(&["simulate", "--p-limit", "lots"]);
    assert_eq!(code(&bad_limit), 2);
    let unknown_preset = wecfarm(&["optimize", "--preset", "nope"]);
    assert_eq!(code(&unknown_preset), 2);
    assert!(stderr(&unknown_preset).contains("table1-concurrent"));
    let no_study = wecfarm(&["optimize"]);
    assert_eq!(code(&no_study), 2);
}

#[test]
fn simulate_isolated_device_has_unit_q_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = wecfarm(&["simulate", "--wave", "regular:2,8", "-o", path(&run)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let q = report[0]["metrics"]["q_factor"].as_f64().unwrap();
    assert!((q - 1.0).abs() < 1e-12, "q = {q}");
    let power = report[0]["metrics"]["farm_power"].as_f64().unwrap();
    assert!(power > 0.0);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o["path"] == "report.json"));
}

#[test]
fn non_empty_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("keep.txt"), "x").unwrap();
    let args = ["simulate", "--wave", "regular:2,8", "-o", path(dir.path())];
    let refused = wecfarm(&args);
    assert_eq!(code(&refused), 2);
    assert!(!dir.path().join("report.json").exists());

    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&wecfarm(&forced)), 0);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("keep.txt").exists());
}

#[test]
fn synthetic_site_round_trips_and_tampering_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("site.csv");
    let made = wecfarm(&["site", "--synth", "low-energy", "--seed", "3", "-o", path(&csv)]);
    assert_eq!(code(&made), 0, "{}", stderr(&made));
    assert!(dir.path().join("site.manifest.json").exists());
    assert_eq!(code(&wecfarm(&["site", "--check", path(&csv)])), 0);

    // Doubling one probability breaks that year's normalization.
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let fields: Vec<&str> = lines[1].split(',').collect();
    let prob: f64 = fields[3].parse().unwrap();
    let year = fields[0].to_string();
    lines[1] = format!("{},{},{},{}", fields[0], fields[1], fields[2], 2.0 * prob + 0.01);
    fs::write(&csv, lines.join("\n") + "\n").unwrap();

    let checked = wecfarm(&["site", "--check", path(&csv)]);
    assert_eq!(code(&checked), 2);
    assert!(stderr(&checked).contains(&year), "{}", stderr(&checked));
}

#[test]
fn manifest_rerun_rejects_changed_climate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("site.csv");
    assert_eq!(code(&wecfarm(&["site", "--synth", "high-energy", "-o", path(&csv)])), 0);
    let run = dir.path().join("run");
    let first = wecfarm(&["simulate", "--climate", path(&csv), "-o", path(&run)]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));

    let manifest = run.join("manifest.json");
    let again = wecfarm(&["simulate", "--config", path(&manifest), "-o", path(&dir.path().join("again"))]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    assert_eq!(
        fs::read(run.join("report.json")).unwrap(),
        fs::read(dir.path().join("again/report.json")).unwrap()
    );

    fs::write(&csv, fs::read_to_string(&csv).unwrap() + "\n").unwrap();
    let changed = wecfarm(&["simulate", "--config", path(&manifest), "-o", path(&dir.path().join("third"))]);
    assert_eq!(code(&changed), 2);
    assert!(stderr(&changed).contains("changed"));

    let wrong_command = wecfarm(&["sweep", "--config", path(&manifest), "-o", path(&dir.path().join("fourth"))]);
    assert_eq!(code(&wrong_command), 2);
}
