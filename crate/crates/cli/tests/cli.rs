use std::fs;
use std::path::Path;
use std::process::Command;

use patchflow::grid::{read_snapshot, write_snapshot, GridSpec, ScalarField};

fn sim() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sim"));
    c.env_remove("SIM_OUT");
    c
}

fn small(mode: &str, extra: &str) -> String {
    format!(
        r#"mode = "{mode}"
[grid]
n = 40
half_width = 1.0
[params]
tau = 0.005
t_final = 0.05
[initial]
rho0 = "disk"
radius = 0.3
n0 = 2.0
[output]
snapshot_every = 0.025
{extra}"#
    )
}

fn run_config(dir: &Path, name: &str, text: &str) -> (i32, String) {
    let cfg = dir.join(format!("{name}.toml"));
    fs::write(&cfg, text).unwrap();
    let out = sim().arg("run").arg(&cfg).arg("--out").arg(dir.join(name)).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn summary(dir: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(dir.join("summary.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn every_mode_runs_and_writes_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("scheme", "", "diagnostics.csv"),
        ("elliptic", "", "elliptic.csv"),
        ("hs_source", "", "flow.csv"),
        ("hs_potential", "", "flow.csv"),
        ("check_master", "", "master_ii.csv"),
        ("check_contraction", "[pair]\nrho0 = \"disk\"\nradius = 0.25\nn0 = 2.0\n", "contraction.csv"),
        ("geometry", "", "geometry.csv"),
    ];
    for (mode, extra, artifact) in cases {
        let (code, stdout) = run_config(tmp.path(), mode, &small(mode, extra));
        let dir = tmp.path().join(mode);
        assert!(dir.join(artifact).exists(), "{mode}: missing {artifact}");
        let lines = summary(&dir);
        assert!(!lines.is_empty(), "{mode}");
        for l in &lines {
            for key in ["id", "bound", "measured", "pass"] {
                assert!(l.get(key).is_some(), "{mode}: {l}");
            }
        }
        let all = lines.iter().all(|l| l["pass"] == true);
        assert_eq!(code, if all { 0 } else { 1 }, "{mode}: {stdout}");
        assert_eq!(stdout.lines().count(), lines.len());
    }
    assert!(tmp.path().join("geometry/holder.json").exists());
    assert!(fs::read_dir(tmp.path().join("geometry/snapshots")).unwrap().any(|e| {
        e.unwrap().file_name().to_string_lossy().starts_with("arrival")
    }));
}

#[test]
fn snapshots_round_trip_as_initial_data() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _) = run_config(tmp.path(), "first", &small("scheme", ""));
    assert_eq!(code, 0);
    let snap = tmp.path().join("first/snapshots/rho_000010.snap");
    let (header, field) = read_snapshot(&mut std::io::BufReader::new(fs::File::open(&snap).unwrap())).unwrap();
    assert_eq!(header.field_name, "rho");
    assert!((header.t - 0.05).abs() < 1e-12);

    let g = GridSpec::square(40, 1.0).unwrap();
    let n0 = ScalarField::constant(g, 1.0);
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &n0, 0.0, "n").unwrap();
    fs::write(tmp.path().join("n0.snap"), buf).unwrap();
    fs::copy(&snap, tmp.path().join("rho0.snap")).unwrap();
    let text = "mode = \"scheme\"\n[grid]\nn = 40\nhalf_width = 1.0\n[params]\ntau = 0.005\nt_final = 0.02\n\
                [initial]\nrho0_file = \"rho0.snap\"\nn0_file = \"n0.snap\"\n";
    let (code, _) = run_config(tmp.path(), "second", text);
    assert_eq!(code, 0);
    let (_, start) = read_snapshot(&mut std::io::BufReader::new(
        fs::File::open(tmp.path().join("second/snapshots/rho_000000.snap")).unwrap(),
    ))
    .unwrap();
    assert_eq!(start, field.map(|v| v.min(1.0)));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small("scheme", "");
    run_config(tmp.path(), "a", &text);
    run_config(tmp.path(), "b", &text);
    for f in ["diagnostics.csv", "summary.jsonl", "snapshots/rho_000010.snap", "snapshots/p_000010.snap"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small("scheme", "").replace("tau = 0.005", "tau = 0.005\nb = 300.0");
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let out = sim().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("params.b") && err.contains("line 7"), "{err}");

    fs::write(&cfg, "mode = \"nonsense\"\n").unwrap();
    assert_eq!(sim().arg("run").arg(&cfg).output().unwrap().status.code(), Some(2));
    assert_eq!(sim().arg("run").arg(tmp.path().join("missing.toml")).output().unwrap().status.code(), Some(2));
    assert_eq!(sim().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let out = sim().args(["preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two-blob-merge"));
    assert_eq!(sim().args(["check", "nope"]).current_dir(tmp.path()).output().unwrap().status.code(), Some(2));
}

#[test]
fn sim_out_overrides_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("from-env");
    let out = sim()
        .args(["check", "ctransform", "--threads", "1", "--out"])
        .arg(tmp.path().join("ignored"))
        .env("SIM_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(target.join("summary.jsonl").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn failing_assertions_exit_with_one() {
    // cell death breaks the nutrient-driven master dynamics
    let tmp = tempfile::tempdir().unwrap();
    let text = small("check_master", "").replace("tau = 0.005", "tau = 0.005\nb = 20.0");
    let (code, stdout) = run_config(tmp.path(), "death", &text);
    assert_eq!(code, 1, "{stdout}");
    let lines = summary(&tmp.path().join("death"));
    let master = lines.iter().find(|l| l["id"] == "master_i").unwrap();
    assert_eq!(master["pass"], false);
}
