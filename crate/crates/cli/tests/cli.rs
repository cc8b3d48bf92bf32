use std::path::Path;
use std::process::{Command, Output};

fn kamscale(command: &str, config: &str, out: &Path) -> Output {
    let cfg = out.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_kamscale"))
        .args(["--command", command, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("{key} missing in {stdout}"))
}

const SMALL: &str = "trunc = 16\nsamples = 40\n";

#[test]
fn run_inside_the_ball_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamscale("run", &format!("{SMALL}fraction = 0.5\n"), dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert_eq!(field(&stdout, "status"), "Converged");
    assert!(field(&stdout, "residual").parse::<f64>().unwrap() <= 1e-10);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("n,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "Converged");
    for f in ["solution.txt", "input.txt", "instance.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn zero_input_takes_no_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamscale("run", &format!("{SMALL}fraction = 0\n"), dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert_eq!(field(&stdout, "iterations"), "0");
}

#[test]
fn far_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamscale("run", &format!("{SMALL}fraction = 50\n"), dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1), "{stdout}");
    assert!(field(&stdout, "failure").starts_with("certificate:input_ball"), "{stdout}");
}

#[test]
fn input_file_is_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.txt"), "kind=taylor order=16\n0 0 0\n1 1e-5 0\n2 -2e-6 0\n").unwrap();
    let o = kamscale("run", &format!("{SMALL}input = x.txt\n"), dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout} {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_is_complete_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = kamscale("sweep", SMALL, d.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let ca = std::fs::read(a.path().join("sweep.csv")).unwrap();
    let cb = std::fs::read(b.path().join("sweep.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(text.lines().next(), Some("delta,fraction,status,iterations,residual,rate"));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("Converged")), "{text}");
}

#[test]
fn epsilon_table_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamscale("epsilon-table", "", dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("epsilon_table.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 36);
    for r in rows {
        let rel: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!(rel <= 1e-10, "{r}");
    }
}

#[test]
fn group_and_action_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [("verify-group", "group_law.json"), ("verify-ac", "ac.json"), ("measure-j", "measure_j.json")] {
        let o = kamscale(cmd, SMALL, dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stdout));
        let _: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(file)).unwrap()).unwrap();
    }
}

#[test]
fn oracle_compare_needs_identity_base_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamscale("oracle-compare", "trunc = 16\nsamples = 20\n", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = kamscale("oracle-compare", "a.coeffs = 0, 1, 0.1\n", dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error=config"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = kamscale("run", "trunc = 16\nbogus = 1\n", dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error=config") && err.contains("line 2"), "{err}");
    let o = kamscale("run", "delta = 0.95\n", dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    let run = |seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_kamscale"))
            .args(["--command", "run", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(dir.path().join("input.txt")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
    assert_eq!(run("3"), run("3"));
}
