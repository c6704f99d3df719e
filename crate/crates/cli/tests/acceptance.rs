//! Acceptance suite: each numbered test prints a pass/fail line for its
//! criterion and asserts it at the stated tolerance. Run with
//! `cargo test -p rbm-cli --test acceptance -- --nocapture` to see the lines.

use std::sync::{Mutex, MutexGuard, OnceLock};

use rbm_cli::config::{build_model, Config, ModelConfig};
use rbm_cli::experiments::{
    commuting_diagonal_model, run_commutative_check, run_convergence, run_mesh_study,
    run_particle_check, run_timing, run_variance_table, variance_table_check, ConvergenceReport,
};

use rbm_core::dynamics::{solve_forward, ControlSignal, LtiSystem, OperatorSource};
use rbm_core::linalg::{CsrMatrix, DenseMatrix, Vector};
use rbm_core::optimizer::{cost, gradient, minimize, CostSpec, MinimizeOptions};
use rbm_core::sampling::{draw_schedule, SeedSpec, TimeGrid};
use rbm_core::splitting::{assemble_all, SubsetTable};

fn verdict(criterion: u32, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:>2}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// The criteria run serially so the wall-clock timing comparison is not
/// polluted by concurrent tests saturating the cores.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Criteria 2-5 share one sweep on the heat-rod defaults (case i, N = 61,
/// h = 2^-5..2^-13, 25 realizations, master seed 42).
fn shared_sweep() -> &'static ConvergenceReport {
    static SWEEP: OnceLock<ConvergenceReport> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let cfg = Config::default();
        let model = build_model(&cfg.model).expect("default model builds");
        run_convergence(&model, &cfg.sweep).expect("sweep runs")
    })
}

#[test]
fn criterion_01_variance_table() {
    let _serial = serial();
    let start = std::time::Instant::now();
    let rows = run_variance_table(61, 1.5, 0.1).unwrap();
    let failures = variance_table_check(&rows);
    let pass = failures.is_empty();
    verdict(
        1,
        pass,
        &format!(
            "variance table (Var, Var_W per case, 1% tolerance) in {:.2}s: {:?}",
            start.elapsed().as_secs_f64(),
            rows.iter()
                .map(|r| (r.case, r.var, r.var_weighted))
                .collect::<Vec<_>>()
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_02_forward_error_rate() {
    let _serial = serial();
    let report = shared_sweep();
    let slope = report.slope("state_error").unwrap();
    let pass = (0.35..=0.65).contains(&slope);
    verdict(
        2,
        pass,
        &format!("forward max-node error slope {slope:.3} in [0.35, 0.65]"),
    );
    assert!(pass, "state error slope {slope}");
}

#[test]
fn criterion_03_control_error_rate_and_coercivity() {
    let _serial = serial();
    let report = shared_sweep();
    let slope = report.slope("control_error").unwrap();
    let slope_ok = (0.35..=0.65).contains(&slope);
    let mut coercivity_ok = true;
    for r in &report.records {
        if let (Some(l2sq), Some(bound)) = (r.control_l2_sq, r.coercivity_bound) {
            if l2sq > bound * (1.0 + 1e-9) {
                coercivity_ok = false;
            }
        }
    }
    let pass = slope_ok && coercivity_ok;
    verdict(
        3,
        pass,
        &format!(
            "control error slope {slope:.3} in [0.35, 0.65]; minimizer norms within the coercivity bound: {coercivity_ok}"
        ),
    );
    assert!(pass, "slope {slope}, coercivity_ok {coercivity_ok}");
}

#[test]
fn criterion_04_nogap_rate() {
    let _serial = serial();
    // The randomized-optimum cost gap |J_h(w, u*_h(w)) - J(u*)| is dominated
    // by the term quadratic in the state error throughout the mandated step
    // range (the linear term time-averages the fast-mixing operator noise
    // down to ~1e-4 relative), so its fitted slope sits near 0.7-0.9 rather
    // than the asymptotic 0.5, which this criterion's window encodes. The
    // window is asserted as specified; the measured value is printed either
    // way. See the analysis notes shipped with the run summaries.
    let report = shared_sweep();
    let slope = report.slope("nogap").unwrap();
    let pass = (0.35..=0.65).contains(&slope);
    verdict(
        4,
        pass,
        &format!("cost no-gap slope {slope:.3} vs window [0.35, 0.65]"),
    );
    assert!(pass, "nogap slope {slope} outside [0.35, 0.65]");
}

#[test]
fn criterion_05_suboptimality_rate() {
    let _serial = serial();
    let report = shared_sweep();
    let slope = report.slope("suboptimality").unwrap();
    let nogap = report.slope("nogap").unwrap();
    let pass = (0.8..=1.2).contains(&slope);
    verdict(
        5,
        pass,
        &format!(
            "suboptimality slope {slope:.3} in [0.8, 1.2] (no-gap slope {nogap:.3}, ratio {:.2})",
            slope / nogap
        ),
    );
    assert!(pass, "suboptimality slope {slope}");
}

#[test]
fn criterion_06_exact_expectation_bounds() {
    let _serial = serial();
    let start = std::time::Instant::now();
    let (d, t, x0) = commuting_diagonal_model();
    let rows = run_commutative_check(&d, &t, &x0, &[2, 4, 6], 1.0, 0.1).unwrap();
    let pass = rows.iter().all(|r| r.pass);
    verdict(
        6,
        pass,
        &format!(
            "exact enumerated E|e_h(T)|^2 under growth and commuting-splitting bounds (zero tolerance) in {:.2}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass, "{rows:?}");
}

#[test]
fn criterion_07_gradient_exactness() {
    let _serial = serial();
    use rand::Rng;
    use rand::SeedableRng;
    let start = std::time::Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7001);
    let n = 10;
    // random dissipative system: A = -G G^T / n - 0.1 I
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mut a = DenseMatrix::zeros(n, n);
    a.add_scaled(-1.0 / n as f64, &g.matmul(&g.transpose()));
    for i in 0..n {
        a.set(i, i, a.get(i, i) - 0.1);
    }
    let sys = LtiSystem::new(
        CsrMatrix::from_dense(&a),
        DenseMatrix::from_fn(n, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0),
        Vector::from_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0),
    )
    .unwrap();
    let qh = DenseMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mut qm = qh.matmul(&qh.transpose());
    qm.scale(0.1);
    let spec = CostSpec::new(
        CsrMatrix::from_dense(&qm),
        DenseMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]),
        0.8,
    );
    let grid = TimeGrid::uniform(0.8f64, 16).unwrap();
    let mut u = ControlSignal::zeros(&grid, 2);
    for v in u.values.iter_mut() {
        v[0] = rng.random::<f64>() * 2.0 - 1.0;
        v[1] = rng.random::<f64>() * 2.0 - 1.0;
    }
    let g = gradient(&sys, &spec, &grid, &u, OperatorSource::Fixed).unwrap();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut v = ControlSignal::zeros(&grid, 2);
        for val in v.values.iter_mut() {
            val[0] = rng.random::<f64>() * 2.0 - 1.0;
            val[1] = rng.random::<f64>() * 2.0 - 1.0;
        }
        let mut up = u.clone();
        up.axpy(eps, &v);
        let mut um = u.clone();
        um.axpy(-eps, &v);
        let jp = cost(&sys, &spec, &grid, &up, OperatorSource::Fixed).unwrap();
        let jm = cost(&sys, &spec, &grid, &um, OperatorSource::Fixed).unwrap();
        let fd = (jp - jm) / (2.0 * eps);
        let an = g.l2_inner(&v);
        worst = worst.max((fd - an).abs() / fd.abs().max(1e-12));
    }
    let pass = worst <= 1e-6;
    verdict(
        7,
        pass,
        &format!(
            "adjoint vs central-difference gradient, 20 directions, worst rel err {worst:.2e} <= 1e-6 in {:.2}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass, "worst relative error {worst}");
}

#[test]
fn criterion_08_particle_mapping() {
    let _serial = serial();
    let start = std::time::Instant::now();
    let rows = run_particle_check(&[(4, 2), (6, 2), (6, 3), (8, 4)]).unwrap();
    let expected_counts = [3u64, 15, 10, 35];
    let mut pass = true;
    for (row, expect) in rows.iter().zip(expected_counts) {
        if row.partitions != expect || !row.inclusion_exact || row.assembly_max_err > 1e-12 {
            pass = false;
        }
    }
    verdict(
        8,
        pass,
        &format!(
            "partition counts and exact rational inclusion probabilities in {:.2}s: {:?}",
            start.elapsed().as_secs_f64(),
            rows.iter()
                .map(|r| (r.particles, r.batch, r.partitions, r.inclusion_exact))
                .collect::<Vec<_>>()
        ),
    );
    assert!(pass, "{rows:?}");
}

#[test]
fn criterion_09_deterministic_degeneracy() {
    let _serial = serial();
    let start = std::time::Instant::now();
    let cfg = Config::default();
    let model = build_model(&cfg.model).unwrap();
    let det_table = SubsetTable::deterministic(model.decomposition.part_count()).unwrap();
    let ops = assemble_all(&model.decomposition, &det_table).unwrap();
    let grid = TimeGrid::uniform(0.5f64, 128).unwrap();
    let schedule = draw_schedule(&grid, &det_table, SeedSpec::new(42, 0));
    let source = OperatorSource::Scheduled {
        schedule: &schedule,
        assembled: &ops,
    };
    let x_fixed = solve_forward(&model.system, &grid, None, OperatorSource::Fixed).unwrap();
    let x_sched = solve_forward(&model.system, &grid, None, source).unwrap();
    let mut bitwise = true;
    for k in 0..x_fixed.states.len() {
        for i in 0..x_fixed.state_dim() {
            if x_fixed.states[k][i].to_bits() != x_sched.states[k][i].to_bits() {
                bitwise = false;
            }
        }
    }
    let spec = model.cost.as_ref().unwrap();
    let opts = MinimizeOptions::default();
    let o_fixed = minimize(&model.system, spec, &grid, OperatorSource::Fixed, None, &opts).unwrap();
    let o_sched = minimize(&model.system, spec, &grid, source, None, &opts).unwrap();
    let mut opt_bitwise = o_fixed.cost.to_bits() == o_sched.cost.to_bits()
        && o_fixed.iterations == o_sched.iterations;
    for k in 0..o_fixed.control.values.len() {
        if o_fixed.control.values[k][0].to_bits() != o_sched.control.values[k][0].to_bits() {
            opt_bitwise = false;
        }
    }
    let err = rbm_core::dynamics::error_trajectory(&x_sched, &x_fixed).unwrap();
    let ctrl_gap = o_fixed.control.l2_distance(&o_sched.control);
    let pass = bitwise && opt_bitwise && err.max == 0.0 && ctrl_gap == 0.0;
    verdict(
        9,
        pass,
        &format!(
            "degenerate table reproduces solve and optimizer bitwise (state err {}, control gap {}) in {:.2}s",
            err.max,
            ctrl_gap,
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_mesh_refinement() {
    let _serial = serial();
    let start = std::time::Instant::now();
    let cfg = Config::default();
    let rows = run_mesh_study(&[31, 61, 121], 9, &cfg.sweep).unwrap();
    let weighted: Vec<f64> = rows.iter().map(|r| r.state_over_sqrt_var_weighted).collect();
    let unweighted: Vec<f64> = rows.iter().map(|r| r.state_over_sqrt_var).collect();
    let spread = weighted.iter().cloned().fold(f64::MIN, f64::max)
        / weighted.iter().cloned().fold(f64::MAX, f64::min);
    let nonincreasing = unweighted.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let pass = spread < 2.0 && nonincreasing;
    verdict(
        10,
        pass,
        &format!(
            "error/sqrt(Var_W) spread {spread:.3} < 2 across N in {{31,61,121}}; error/sqrt(Var) nonincreasing: {nonincreasing} ({:.1}s)",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass, "spread {spread}, nonincreasing {nonincreasing}");
}

#[test]
fn criterion_11_timing_block_model() {
    let _serial = serial();
    let start = std::time::Instant::now();
    let model = build_model(&ModelConfig::BlockSplit {
        dimension: 96,
        blocks: 16,
        horizon: 1.0,
    })
    .unwrap();
    let rows = run_timing(&model, 9, 5, 42).unwrap();
    let original = rows.iter().find(|r| r.solver == "original").unwrap();
    let randomized = rows.iter().find(|r| r.solver == "randomized").unwrap();
    let ratio = randomized.step_median_s / original.step_median_s;
    let pass = ratio < 1.0;
    verdict(
        11,
        pass,
        &format!(
            "randomized/original stepping ratio {ratio:.3} < 1 on the dense block model (N=96, P=16) in {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass, "ratio {ratio}");
}
