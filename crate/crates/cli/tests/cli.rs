use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wingwrap_core::harness::{sha256_hex, RunManifest, TRIALS_HEADER};

fn wingwrap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wingwrap"))
        .args(args)
        .env_remove("WINGWRAP_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(extra);
    wingwrap(&args)
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn field(header: &str, row: &str, name: &str) -> String {
    let i = header.split(',').position(|h| h == name).unwrap();
    row.split(',').nth(i).unwrap().to_string()
}

#[test]
fn miss_geometry_trial() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", "master_seed = 1\n[trial]\nlateral_offset = 1.5\n");
    let out = dir.path().join("out");
    let o = run("trial", &config, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = lines(&out.join("trials.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(field(&rows[0], &rows[1], "outcome"), "Miss");
    assert_eq!(field(&rows[0], &rows[1], "holds"), "false");
    for f in ["sweep.csv", "manifest.json", "summary.txt", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", "master_seed = 1\n[pole]\nradius = 0.0\n");
    let out = dir.path().join("out");
    let o = run("trial", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("PoleSpec.radius"), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_and_missing_seed_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (i, text) in ["master_seed = 1\n[pole]\nradios = 0.05\n", "[pole]\nradius = 0.05\n"].iter().enumerate() {
        let config = write_config(dir.path(), &format!("c{i}.toml"), text);
        let o = run("trial", &config, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(!out.exists());
    }
    let o = wingwrap(&["trial", "--config", "/nonexistent/config.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trials_flag_only_for_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", "master_seed = 1\n");
    let out = dir.path().join("out");
    let o = run("trial", &config, &out, &["--trials", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--trials"));
    assert!(!out.exists());
}

#[test]
fn min_speed_without_bracket_fails() {
    let dir = tempfile::tempdir().unwrap();
    // Nothing perches below 1.2 m/s.
    let config = write_config(
        dir.path(),
        "c.toml",
        "master_seed = 1\n[plan.search]\nv_lo = 0.5\nv_hi = 1.2\ntol = 0.1\n",
    );
    let out = dir.path().join("out");
    let o = run("min-speed", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("minimum-speed search failed"));
    assert!(!out.exists());
}

#[test]
fn sweep_row_counts_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.toml",
        "master_seed = 99\n[plan]\nfractions = [0.25]\ntrials_per_cell = 40\nskip_min_speed = true\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run("sweep", &config, out, &["--emit-trajectory", "7"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let trials = lines(&a.join("trials.csv"));
    assert_eq!(trials[0], TRIALS_HEADER.join(","));
    assert_eq!(trials.len(), 41);
    assert_eq!(lines(&a.join("sweep.csv")).len(), 2);

    let manifest = |dir: &Path| -> RunManifest {
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
    };
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.config_hash, mb.config_hash);
    for (name, sum) in &ma.files {
        assert_eq!(&sha256_hex(&std::fs::read(a.join(name)).unwrap()), sum, "{name}");
    }

    let traj = lines(&a.join("trajectory.csv"));
    assert!(traj[0].starts_with("t,x,y,theta,phi_left_1,"));
    assert!(traj.len() > 10);
}

#[test]
fn emitted_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", "master_seed = 5\n[trial]\nimpact_speed = 2.7\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("trial", &config, &a, &["--seed", "6"]).status.success());
    // The written config is the effective one, seed override included.
    assert!(run("trial", &a.join("config.toml"), &b, &[]).status.success());
    for f in ["trials.csv", "sweep.csv", "config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_trajectory_id_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.toml", "master_seed = 1\n[trial]\nlateral_offset = 1.5\n");
    let out = dir.path().join("out");
    let o = run("trial", &config, &out, &["--emit-trajectory", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}
