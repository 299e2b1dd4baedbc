use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planecover"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(cfg).arg("--out").arg(out).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn filiform_algebra_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["algebra"], &config("algebra_filiform4.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&dir.path().join("algebra.json"));
    assert_eq!(a["central_series_dims"], serde_json::json!([1, 2, 4]));
    assert_eq!(a["dimension_condition"], "none");
    assert!(a["commuting_pair"].is_null());
}

#[test]
fn explicit_algebra_finds_central_pair() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["algebra"], &config("algebra_heisenberg_line.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let a = json(&dir.path().join("algebra.json"));
    assert_eq!(a["dimension_condition"], 1);
    assert_eq!(a["commuting_pair"]["certificate"]["is_plane"], true);
}

#[test]
fn heisenberg_trace_is_straight() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["geodesic"], &config("geodesic_heisenberg.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = table(&dir.path().join("trace.csv"));
    assert_eq!(header[..4], ["s", "x1", "x2", "x3"]);
    assert_eq!(rows.len(), 201);
    for r in rows {
        let s = r[0];
        assert!((r[1] - 1.0).abs() < 1e-10);
        assert!((r[2] - s).abs() < 1e-10, "{r:?}");
        assert!((r[3] - s / 2.0).abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn verify_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &config("verify_warped_euclidean.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["report"]["hypothesis"]["holds"], true);
    assert_eq!(r["report"]["conclusion_holds"], true);
    assert_eq!(r["report"]["consistent"], true);
    let img = std::fs::read(dir.path().join("reconstruction_0.pgm")).unwrap();
    assert!(img.starts_with(b"P5\n32 32\n255\n"));
}

#[test]
fn remaining_configs_run() {
    for (cmd, cfg) in [
        ("escape", "escape_heisenberg.json"),
        ("xray", "xray_warped.json"),
        ("khat", "khat_warped.json"),
        ("khat", "khat_heisenberg_line.json"),
        ("khat", "khat_paraboloid.json"),
        ("demo-noninjective", "demo_noninjective.json"),
        ("geodesic", "geodesic_warped.json"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&[cmd], &config(cfg), dir.path());
        assert_eq!(o.status.code(), Some(0), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json(&dir.path().join("manifest.json"))["checks_passed"], true);
    }
}

#[test]
fn manifest_records_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("escape_heisenberg.json");
    let o = run(&["--seed", "11", "escape"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let m = json(&dir.path().join("manifest.json"));
    let copied = std::fs::read(dir.path().join("config.json")).unwrap();
    assert_eq!(copied, std::fs::read(&cfg).unwrap());
    use sha2::Digest;
    assert_eq!(m["config_sha256"], hex::encode(sha2::Sha256::digest(&copied)));
    assert_eq!(m["seed"], 11);
    assert_eq!(m["command"], "escape");
    assert!(m["artifacts"].as_array().unwrap().iter().any(|a| a == "profile.csv"));
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (cmd, cfg) in [("escape", "escape_heisenberg.json"), ("xray", "xray_warped.json"), ("verify", "verify_warped_euclidean.json")] {
        assert_eq!(run(&["--threads", "2", cmd], &config(cfg), a.path()).status.code(), Some(0));
        assert_eq!(run(&["--threads", "3", cmd], &config(cfg), b.path()).status.code(), Some(0));
        for entry in std::fs::read_dir(a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            if name == "manifest.json" {
                continue;
            }
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            assert!(x == y, "{cmd}: {name:?} differs");
        }
    }
}

#[test]
fn unknown_command_is_usage_error() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bad_configs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let cases = [
        write("broken.json", "{ not json"),
        write("noversion.json", r#"{"algebra": {"preset": "heisenberg"}}"#),
        write("version.json", r#"{"schema_version": 9, "algebra": {"preset": "heisenberg"}}"#),
        write("extra.json", r#"{"schema_version": 1, "algebra": {"preset": "heisenberg"}, "colour": 1}"#),
        write("preset.json", r#"{"schema_version": 1, "algebra": {"preset": "octonion"}}"#),
        write("jacobi.json", r#"{"schema_version": 1, "algebra": {"dim": 3, "brackets": [[1, 2, 3, 1.0], [2, 3, 2, 1.0]]}}"#),
    ];
    for cfg in &cases {
        let o = run(&["algebra"], cfg, &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{}: {}", cfg.display(), String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["algebra"], &dir.path().join("missing.json"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["--tolerance-scale=-1", "algebra"], &config("algebra_filiform4.json"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("escape.json");
    // a horizon far too short for geodesics from a ball of radius 4 to leave it
    std::fs::write(
        &cfg,
        r#"{"schema_version": 1, "algebra": {"preset": "heisenberg"}, "radii": [4.0], "samples": 8, "horizon": 1.0}"#,
    )
    .unwrap();
    let o = run(&["escape"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // a Lie algebra that is not nilpotent
    std::fs::write(&cfg, r#"{"schema_version": 1, "algebra": {"dim": 3, "brackets": [[1, 2, 3, 1.0], [2, 3, 1, 1.0]]}}"#).unwrap();
    let o = run(&["algebra"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let o = run(&["algebra"], &config("algebra_filiform4.json"), &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
