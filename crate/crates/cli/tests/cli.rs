use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn tubeqer(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tubeqer"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TUBEQER_OUT")
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn circle_example_passes_and_writes_tables() {
    let dir = TempDir::new().unwrap();
    let o = tubeqer(&["circle-example"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let names: Vec<_> = files(&dir.path().join("circle-example")).into_iter().map(|(p, _)| p).collect();
    assert!(names.contains(&PathBuf::from("summary.json")));
    assert!(names.iter().any(|p| p.to_string_lossy().starts_with("tu_k10")));
}

#[test]
fn fixed_seed_gives_identical_artifacts() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["identities", "--seed", "7", "--resolution", "40"];
    assert_eq!(tubeqer(&args, a.path()).status.code(), Some(0));
    assert_eq!(tubeqer(&args, b.path()).status.code(), Some(0));
    let (fa, fb) = (files(&a.path().join("identities")), files(&b.path().join("identities")));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);

    let c = TempDir::new().unwrap();
    tubeqer(&["identities", "--seed", "8", "--resolution", "40"], c.path());
    assert_ne!(fa, files(&c.path().join("identities")));
}

#[test]
fn general_position_reports_negative_integral() {
    let dir = TempDir::new().unwrap();
    let o = tubeqer(&["general-position"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("general-position/summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["data"]["integral"].as_f64().unwrap() < 0.0);
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
}

#[test]
fn failed_check_exits_with_two() {
    // The single-mode Cauchy data does not approach the defect reference.
    let dir = TempDir::new().unwrap();
    let o = tubeqer(&["qer-convergence", "--h-list", "1/5,1/10,1/20,1/40"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL [8a]"));
    assert!(dir.path().join("qer-convergence/summary.json").exists());
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");

    fs::write(&cfg, "seed = 3\n").unwrap();
    let o = tubeqer(&["identities", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kind"));

    fs::write(&cfg, "kind = \"identities\"\nresolutoin = 10\n").unwrap();
    let o = tubeqer(&["identities", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolutoin"));

    fs::write(&cfg, "kind = \"wavefront\"\n").unwrap();
    let o = tubeqer(&["identities", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_flags_exit_with_one() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["no-such-kind"][..],
        &["multiplier", "--h-list", "1/20,1/10"],
        &["multiplier", "--resolution", "0"],
        &["multiplier", "--h-list", "0.1,0.07"],
        &["bounds-scaling", "--h-list", "0.1,0.05"],
    ] {
        let o = tubeqer(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unwritable_output_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = tubeqer(&["general-position"], &blocker);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_and_env_choose_output_root() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    let root = dir.path().join("from-file");
    fs::write(&cfg, format!("kind = \"general-position\"\nout = {:?}\n", root.to_str().unwrap())).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tubeqer"))
        .args(["general-position", "--config", cfg.to_str().unwrap()])
        .env_remove("TUBEQER_OUT")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(root.join("general-position/summary.json").exists());

    let env_root = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_tubeqer"))
        .args(["general-position"])
        .env("TUBEQER_OUT", &env_root)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_root.join("general-position/summary.json").exists());
}
