//! End-to-end smoke tests of the installed binary: subcommand plumbing,
//! output files, exit codes, and the file-based model path.

use std::process::Command;

fn rbm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbm"))
}

#[test]
fn table1_check_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbm()
        .args(["table1", "--check", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert!(records.starts_with("case,var,var_weighted"));
    assert_eq!(records.lines().count(), 5);
    assert!(dir.path().join("meta.json").exists());
}

#[test]
fn failed_check_exits_two() {
    // the variance table at 49 nodes is far from the 61-node reference
    let dir = tempfile::tempdir().unwrap();
    let out = rbm()
        .args(["table1", "--check", "--nodes", "49", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn operational_error_exits_one() {
    let out = rbm()
        .args(["converge", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_trajectory_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
[model]
kind = "heat1d"
nodes = 31

[sweep]
realizations = 2
"#,
    )
    .unwrap();
    let out = rbm()
        .args(["simulate", "--h-exponent", "6", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = std::fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x_1,"));
    // 0.5 / 2^-6 = 32 steps -> 33 node rows plus the header
    assert_eq!(traj.lines().count(), 34);
    let sched = std::fs::read_to_string(dir.path().join("out/schedule.csv")).unwrap();
    assert!(sched.starts_with("k,t_start,t_end,subset_id"));
    assert_eq!(sched.lines().count(), 33);
}

#[test]
fn optimize_writes_control_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
[model]
kind = "heat1d"
nodes = 31
"#,
    )
    .unwrap();
    let out = rbm()
        .args(["optimize", "--h-exponent", "6", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["control.csv", "control_reference.csv", "history.csv", "records.csv", "meta.json"] {
        assert!(dir.path().join("out").join(name).exists(), "{name} missing");
    }
    let history = std::fs::read_to_string(dir.path().join("out/history.csv")).unwrap();
    assert!(history.starts_with("iteration,cost,gradient_norm"));
}

#[test]
fn converge_with_identical_seeds_writes_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
[model]
kind = "heat1d"
nodes = 31

[sweep]
h_exponents = [5, 6, 7]
realizations = 3
metrics = "forward"
"#,
    )
    .unwrap();
    let run = |out: &std::path::Path, threads: &str| {
        let st = rbm()
            .args(["converge", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(st.success());
    };
    run(&dir.path().join("a"), "1");
    run(&dir.path().join("b"), "2");
    let col_without_times = |p: &std::path::Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                l.split(',')
                    .take(9) // drop the wall-clock columns
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    };
    assert_eq!(
        col_without_times(&dir.path().join("a/records.csv")),
        col_without_times(&dir.path().join("b/records.csv"))
    );
}

#[test]
fn files_model_with_splitting_spec_runs() {
    use rbm_core::linalg::{mm, CsrMatrix};
    let dir = tempfile::tempdir().unwrap();
    // two-part diagonal splitting stored as matrix-market files + JSON spec
    let a1 = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1.0f64)]);
    let a2 = CsrMatrix::from_triplets(2, 2, &[(1, 1, -2.0f64)]);
    mm::write_csr(dir.path().join("a1.mtx"), &a1).unwrap();
    mm::write_csr(dir.path().join("a2.mtx"), &a2).unwrap();
    let x0 = rbm_core::linalg::DenseMatrix::from_rows(&[vec![1.0f64], vec![0.5]]);
    mm::write_dense(dir.path().join("x0.mtx"), &x0).unwrap();
    let a = a1.add(&a2);
    mm::write_csr(dir.path().join("a.mtx"), &a).unwrap();
    std::fs::write(
        dir.path().join("split.json"),
        r#"{"parts": ["a1.mtx", "a2.mtx"],
            "subsets": [{"ids": [0], "p": 0.5}, {"ids": [1], "p": 0.5}]}"#,
    )
    .unwrap();
    let cfg = format!(
        r#"
[model]
kind = "files"
a = "{a}"
x0 = "{x0}"
splitting = "{split}"

[sweep]
realizations = 2
metrics = "forward"
"#,
        a = dir.path().join("a.mtx").display(),
        x0 = dir.path().join("x0.mtx").display(),
        split = dir.path().join("split.json").display(),
    );
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = rbm()
        .args(["simulate", "--h-exponent", "4", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn commutative_and_particle_checks_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rbm()
        .args(["commutative-check", "--out"])
        .arg(dir.path().join("c"))
        .status()
        .unwrap()
        .success());
    assert!(rbm()
        .args(["particle-check", "--pairs", "4:2,6:3", "--out"])
        .arg(dir.path().join("p"))
        .status()
        .unwrap()
        .success());
}
