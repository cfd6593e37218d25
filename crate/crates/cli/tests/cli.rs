use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mdplab_cli::artifacts::Manifest;
use mdplab_cli::config::Experiment;
use tempfile::TempDir;

fn mdplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdplab"))
        .args(args)
        .env_remove("MDPLAB_SEED_OFFSET")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

const SMALL_PARETO: &str = r#"{
  "kind": "pareto",
  "env": { "name": "multireward-toy" },
  "seeds": [4],
  "horizon": 50,
  "params": { "cloud_samples": 200, "corner_mass": 0.999 },
  "checks": { "dominance_tol": 1e-3 }
}"#;

const SMALL_LEARN: &str = r#"{
  "kind": "learn",
  "env": { "name": "racetrack" },
  "seeds": { "count": 3 },
  "horizon": 3000,
  "params": { "agents": ["ucrl2", "reset-ucrl"], "curve_points": 10 }
}"#;

fn run_config(config: &Path, kind: &str, out: &Path) -> Output {
    mdplab(&[
        kind,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_configs_parse() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            Experiment::load(&path, 0).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5, "only {n} bundled configs");
}

#[test]
fn empty_seeds_is_a_schema_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind":"metrics","env":{"name":"riverswim-mrp"},"seeds":[],"horizon":10}"#,
    );
    let out = run_config(&cfg, "metrics", &tmp.path().join("out"));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("seeds"), "{}", stderr(&out));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_and_mistyped_fields_are_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind":"learn","env":{"name":"racetrack"},"seeds":[0],"horizon":10,
            "params":{"delta":"small"}}"#,
    );
    let out = run_config(&cfg, "learn", &tmp.path().join("out"));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("params.delta"), "{}", stderr(&out));

    let cfg = write_config(
        tmp.path(),
        "d.json",
        r#"{"kind":"learn","env":{"name":"racetrack","laps":3},"seeds":[0],"horizon":10}"#,
    );
    let out = run_config(&cfg, "learn", &tmp.path().join("out"));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("laps"), "{}", stderr(&out));
}

#[test]
fn config_kind_must_match_subcommand() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "p.json", SMALL_PARETO);
    let out = run_config(&cfg, "learn", &tmp.path().join("out"));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("pareto"), "{}", stderr(&out));
}

#[test]
fn runs_are_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    for (name, json, kind) in [
        ("p.json", SMALL_PARETO, "pareto"),
        ("l.json", SMALL_LEARN, "learn"),
    ] {
        let cfg = write_config(tmp.path(), name, json);
        let (a, b) = (
            tmp.path().join(format!("{kind}-a")),
            tmp.path().join(format!("{kind}-b")),
        );
        assert!(run_config(&cfg, kind, &a).status.success());
        let with_two_jobs = mdplab(&[
            kind,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--jobs",
            "2",
        ]);
        assert!(with_two_jobs.status.success(), "{}", stderr(&with_two_jobs));
        assert_eq!(dir_bytes(&a), dir_bytes(&b), "{kind} outputs differ");
    }
}

#[test]
fn seed_offset_shifts_seeds_and_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "l.json", SMALL_LEARN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_config(&cfg, "learn", &a).status.success());
    let shifted = Command::new(env!("CARGO_BIN_EXE_mdplab"))
        .args([
            "learn",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ])
        .env("MDPLAB_SEED_OFFSET", "100")
        .output()
        .unwrap();
    assert!(shifted.status.success(), "{}", stderr(&shifted));
    let read = |d: &Path| -> Manifest {
        serde_json::from_slice(&fs::read(d.join("manifest.json")).unwrap()).unwrap()
    };
    let (ma, mb) = (read(&a), read(&b));
    assert_ne!(ma.config_hash, mb.config_hash);
    assert_eq!(mb.config["seeds"], serde_json::json!([100, 101, 102]));
    let curves = fs::read_to_string(b.join("curves.csv")).unwrap();
    assert!(curves.lines().nth(1).unwrap().contains(",100,"));
}

#[test]
fn csv_rows_carry_hash_seed_and_step() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "l.json", SMALL_LEARN);
    let out = tmp.path().join("out");
    assert!(run_config(&cfg, "learn", &out).status.success());
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    for name in ["curves.csv", "curves_aggregate.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&header[..2], &["config_hash", "agent"]);
        assert!(header.contains(&"seed") && header.contains(&"step"));
        for line in lines {
            assert!(line.starts_with(&manifest.config_hash));
        }
    }
    assert_eq!(manifest.config_hash.len(), 64);
    assert!(manifest.files.iter().all(|f| f.sha256.len() == 64));
}

#[test]
fn report_detects_tampering() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "p.json", SMALL_PARETO);
    let out = tmp.path().join("out");
    assert!(run_config(&cfg, "pareto", &out).status.success());

    let ok = mdplab(&["report", out.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("final gains"));
    assert!(stdout(&ok).contains("PASS"));

    let csv = out.join("iterates.csv");
    let mut bytes = fs::read(&csv).unwrap();
    let last = bytes.len() - 2;
    bytes[last] = if bytes[last] == b'1' { b'2' } else { b'1' };
    fs::write(&csv, bytes).unwrap();
    let bad = mdplab(&["report", out.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(
        stderr(&bad).contains("checksum mismatch"),
        "{}",
        stderr(&bad)
    );
    assert!(stderr(&bad).contains("iterates.csv"));
}

#[test]
fn report_rejects_missing_directory_or_manifest() {
    let tmp = TempDir::new().unwrap();
    let missing = mdplab(&["report", tmp.path().join("nope").to_str().unwrap()]);
    assert!(!missing.status.success());
    assert!(
        stderr(&missing).contains("does not exist"),
        "{}",
        stderr(&missing)
    );

    let empty = mdplab(&["report", tmp.path().to_str().unwrap()]);
    assert!(!empty.status.success());
    assert!(
        stderr(&empty).contains("manifest.json"),
        "{}",
        stderr(&empty)
    );
}

#[test]
fn assert_flag_sets_exit_status() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.json",
        r#"{"kind":"metrics","env":{"name":"mk","k":5},"seeds":[0],"horizon":100,
            "params":{"cover_runs":100},
            "checks":{"tau_reference":[1,1,1,1,1],"tau_tolerance":0.5}}"#,
    );
    let out = tmp.path().join("out");
    let lenient = run_config(&cfg, "metrics", &out);
    assert!(lenient.status.success());
    assert!(stdout(&lenient).contains("FAIL tau matches reference"));

    let strict = mdplab(&[
        "metrics",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--assert",
    ]);
    assert_eq!(strict.status.code(), Some(2));
    let report = mdplab(&["report", "--assert", out.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(2));
}

#[test]
fn flags_build_an_experiment() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = mdplab(&[
        "learn",
        "--env",
        "racetrack:l=3,k=2",
        "--agent",
        "reset-ucrl",
        "--steps",
        "500",
        "--seeds",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.kind, "learn");
    assert_eq!(manifest.config["horizon"], 500);
    assert_eq!(manifest.config["env"]["l"], 3);

    let cfg = write_config(tmp.path(), "l.json", SMALL_LEARN);
    let both = mdplab(&[
        "learn",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!both.status.success());
}

#[test]
fn shaping_reads_model_and_potential_files() {
    let tmp = TempDir::new().unwrap();
    let model =
        mdplab::mdp::io::model_to_json(&mdplab::mdp::make_shaping_toy(0.11, 0.1, 0.05).unwrap());
    fs::write(tmp.path().join("m.json"), model).unwrap();
    fs::write(tmp.path().join("phi.json"), "[0, 0.1]").unwrap();
    let out = tmp.path().join("out");
    let o = mdplab(&[
        "shaping",
        "--model",
        tmp.path().join("m.json").to_str().unwrap(),
        "--potential",
        tmp.path().join("phi.json").to_str().unwrap(),
        "--iterations",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("shaping.json")).unwrap()).unwrap();
    for key in ["kappa", "kappa_shaped", "ratio", "pi_equiv_gap"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert!(s["pi_equiv_gap"].as_f64().unwrap() < 1e-9);
    assert!((s["kappa_shaped"].as_f64().unwrap() - 2.1).abs() < 1e-9);
}

#[test]
fn quick_bundled_configs_pass_their_checks() {
    let tmp = TempDir::new().unwrap();
    for (name, kind) in [
        ("shaping-toy", "shaping"),
        ("pareto-toy", "pareto"),
        ("metrics-mk10", "metrics"),
    ] {
        let cfg = configs_dir().join(format!("{name}.json"));
        let out = tmp.path().join(name);
        let o = mdplab(&[
            kind,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--assert",
        ]);
        assert!(o.status.success(), "{name}: {}{}", stdout(&o), stderr(&o));
    }
}
