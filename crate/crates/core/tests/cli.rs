use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zsps(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerosum-ps"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ZSPS_OUT_DIR")
        .output()
        .unwrap()
}

const SMALL: &str = "game = \"random\"\nprior = \"joint\"\nnum_states = 3\nhorizon = 3\nepisodes = 4\nnum_seeds = 2\np2 = [\"eq\", \"fp\"]\n";

#[test]
fn solve_matrix_prints_zero_for_matching_pennies() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), "[[1, -1], [-1, 1]]").unwrap();
    let out = zsps(&["solve-matrix", "m.json"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), 0.0);

    fs::write(dir.path().join("bad.json"), "[[1, -1], [-1]]").unwrap();
    assert_eq!(zsps(&["solve-matrix", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["run", "--episodes", "0"],
        &["run", "--p2", "nobody"],
        &["run", "--preset", "nope"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = zsps(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    fs::write(dir.path().join("c.toml"), "episodes = \"many\"").unwrap();
    assert_eq!(zsps(&["run", "--config", "c.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn run_writes_csvs_and_records_that_pass_bound_checks() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = zsps(
        &["run", "--config", "c.toml", "--out", "o", "--validate", "--record-trajectories", "--diagnostics"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("o");
    for label in ["ps_vs_eq", "ps_vs_fp"] {
        let csv = fs::read_to_string(o.join(format!("regret_{label}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run_id,seed,episode,delta_k,cum_regret,delta_hat_1,delta_hat_2,delta_tilde_1,delta_tilde_2,upsilon_partial,bound_value"
        );
        assert_eq!(lines.count(), 8);
        let summary = fs::read_to_string(o.join(format!("summary_{label}.csv"))).unwrap();
        assert_eq!(summary.lines().count(), 5);
        assert!(o.join(format!("bounds_{label}.json")).is_file());
    }
    let resolved = fs::read_to_string(o.join("config.toml")).unwrap();
    assert!(resolved.contains("episodes = 4"));

    let record = o.join("records/ps_vs_eq_seed0.json");
    let out = zsps(&["check-bounds", record.to_str().unwrap(), "--gap-samples", "10"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["upsilon_ok"], true);
    assert_eq!(report["gap_ok"], true);
    assert!(report["true_outside"].is_u64());
}

#[test]
fn flags_override_file_and_env_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_zerosum-ps"))
        .args(["run", "--config", "c.toml", "--episodes", "2", "--seeds", "3", "--p2", "random"])
        .current_dir(dir.path())
        .env("ZSPS_OUT_DIR", dir.path().join("env_out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("env_out/regret_ps_vs_random.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn make_game_then_solve_game() {
    let dir = tempfile::tempdir().unwrap();
    let out = zsps(&["make-game", "--random", "3,2,2", "--horizon", "2", "--seed", "4", "-o", "g.json"], dir.path());
    assert!(out.status.success());
    let out = zsps(&["solve-game", "g.json"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap().abs() <= 2.0);
    assert_eq!(v["mu"].as_array().unwrap().len(), 2);

    let out = zsps(&["make-game", "--predator-prey", "2x2", "--horizon", "3", "-o", "pp.json"], dir.path());
    assert!(out.status.success());
    let toml = "game = \"file\"\ngame_path = \"pp.json\"\nprior = \"joint\"\nhorizon = 3\nepisodes = 2\nnum_seeds = 1\n";
    fs::write(dir.path().join("c.toml"), toml).unwrap();
    assert!(zsps(&["run", "--config", "c.toml", "--out", "o"], dir.path()).status.success());
    let bad = toml.replace("horizon = 3", "horizon = 4");
    fs::write(dir.path().join("c.toml"), bad).unwrap();
    assert_eq!(zsps(&["run", "--config", "c.toml", "--out", "o"], dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_runs_each_episode_count() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let out = zsps(
        &["sweep", "--config", "c.toml", "--out", "s", "--episodes-grid", "2,5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 2);
    assert!(dir.path().join("s/k5/regret_ps_vs_fp.csv").is_file());
}
