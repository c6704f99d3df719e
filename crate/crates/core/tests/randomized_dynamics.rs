//! Integration tests across sampling, dynamics, and the optimizer: Monte
//! Carlo consistency of the variance, trajectory bounds under sampled
//! schedules, adjoint gradients against finite differences, and the
//! optimality-gap ordering between the original and randomized problems.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rbm_core::dynamics::{
    error_trajectory, solve_forward, uniform_state_bound, CnSolver, ControlSignal, LtiSystem,
    OperatorSource,
};
use rbm_core::linalg::{operator_norm, CsrMatrix, DenseMatrix, DiffOp, LinearOp, Vector};
use rbm_core::models::{build_heat1d, Heat1dConfig, HeatCase};
use rbm_core::optimizer::{
    cost, cost_along, gradient, minimize, CostSpec, MinimizeOptions,
};
use rbm_core::sampling::{draw_schedule, SeedSpec, TimeGrid};
use rbm_core::splitting::{assemble_all, variance, Decomposition, SubsetTable};

fn heat_case_i() -> rbm_core::models::Heat1dModel<f64> {
    build_heat1d(&Heat1dConfig {
        case: HeatCase::I,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn monte_carlo_operator_distance_matches_variance() {
    // sample mean of ||A_h(t) - A||^2 over >= 10^4 draws within 5 standard
    // errors of the exact variance
    let a1 = CsrMatrix::from_triplets(3, 3, &[(0, 0, -1.0), (1, 1, -0.25)]);
    let a2 = CsrMatrix::from_triplets(3, 3, &[(1, 1, -0.5), (2, 2, -2.0)]);
    let d = Decomposition::from_parts(vec![a1, a2]).unwrap();
    let t = SubsetTable::new(2, &[(vec![0], 0.3), (vec![1], 0.7)]).unwrap();
    let ops = assemble_all(&d, &t).unwrap();
    let exact = variance(&d, &t).unwrap();

    // precompute the squared distance per subset, then draw indices
    let sq: Vec<f64> = ops
        .iter()
        .map(|op| {
            let diff = DiffOp {
                a: &op.matrix,
                b: d.matrix(),
            };
            let s = operator_norm(&diff, 1e-11).unwrap();
            s * s
        })
        .collect();
    let draws = 20_000usize;
    let grid = TimeGrid::uniform(1.0f64, draws).unwrap();
    let schedule = draw_schedule(&grid, &t, SeedSpec::new(123, 0));
    let samples: Vec<f64> = schedule
        .indices()
        .iter()
        .map(|&i| sq[i as usize])
        .collect();
    let mean: f64 = samples.iter().sum::<f64>() / draws as f64;
    let var_of_samples: f64 =
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    let se = (var_of_samples / draws as f64).sqrt();
    assert!(
        (mean - exact).abs() <= 5.0 * se.max(1e-12),
        "mean {mean}, exact {exact}, se {se}"
    );
}

#[test]
fn heat_trajectories_respect_the_state_bound() {
    // max_k |x_h(t_k)| <= |x0| + |Bu|_L1 + 1e-8 over 25 sampled schedules
    let model = heat_case_i();
    let ops = assemble_all(&model.decomposition, &model.table).unwrap();
    let grid = TimeGrid::uniform(0.5f64, 256).unwrap();
    let bound = uniform_state_bound(&model.system, None);
    for r in 0..25 {
        let schedule = draw_schedule(&grid, &model.table, SeedSpec::new(99, r));
        let x = solve_forward(
            &model.system,
            &grid,
            None,
            OperatorSource::Scheduled {
                schedule: &schedule,
                assembled: &ops,
            },
        )
        .unwrap();
        let max = x.max_node_norm();
        assert!(max <= bound + 1e-8, "realization {r}: {max} > {bound}");
    }
}

#[test]
fn heat_decay_is_monotone_in_the_weighted_norm() {
    // with u = 0 the norm induced by the decomposition's inner-product weight
    // is nonincreasing along both the original and the randomized dynamics
    let model = heat_case_i();
    let ops = assemble_all(&model.decomposition, &model.table).unwrap();
    let grid = TimeGrid::uniform(0.5f64, 128).unwrap();
    let weights = model.decomposition.inner_product_weights().unwrap();
    let wnorm = |v: &Vector<f64>| -> f64 {
        v.iter()
            .zip(weights.iter())
            .map(|(&x, &w)| w * x * x)
            .sum::<f64>()
            .sqrt()
    };
    let mut check = |x: &rbm_core::dynamics::Trajectory<f64>| {
        for k in 1..x.states.len() {
            let (prev, cur) = (wnorm(&x.states[k - 1]), wnorm(&x.states[k]));
            assert!(cur <= prev * (1.0 + 1e-10), "step {k}: {prev} -> {cur}");
        }
    };
    let x = solve_forward(&model.system, &grid, None, OperatorSource::Fixed).unwrap();
    check(&x);
    for r in 0..5 {
        let schedule = draw_schedule(&grid, &model.table, SeedSpec::new(5, r));
        let xh = solve_forward(
            &model.system,
            &grid,
            None,
            OperatorSource::Scheduled {
                schedule: &schedule,
                assembled: &ops,
            },
        )
        .unwrap();
        check(&xh);
    }
}

#[test]
fn deterministic_table_reproduces_everything_bitwise() {
    // the full-index-set table gives the original trajectory, optimizer
    // iterates, and cost, bit for bit
    let model = heat_case_i();
    let det_table = SubsetTable::deterministic(2).unwrap();
    let ops = assemble_all(&model.decomposition, &det_table).unwrap();
    let grid = TimeGrid::uniform(0.5f64, 64).unwrap();
    let schedule = draw_schedule(&grid, &det_table, SeedSpec::new(0, 0));
    let source = OperatorSource::Scheduled {
        schedule: &schedule,
        assembled: &ops,
    };
    let x_fixed = solve_forward(&model.system, &grid, None, OperatorSource::Fixed).unwrap();
    let x_sched = solve_forward(&model.system, &grid, None, source).unwrap();
    for k in 0..x_fixed.states.len() {
        assert_eq!(&x_fixed.states[k][..], &x_sched.states[k][..]);
    }
    let err = error_trajectory(&x_sched, &x_fixed).unwrap();
    assert_eq!(err.max, 0.0);

    let opts = MinimizeOptions::default();
    let r_fixed = minimize(
        &model.system,
        &model.cost,
        &grid,
        OperatorSource::Fixed,
        None,
        &opts,
    )
    .unwrap();
    let r_sched = minimize(&model.system, &model.cost, &grid, source, None, &opts).unwrap();
    assert_eq!(r_fixed.cost.to_bits(), r_sched.cost.to_bits());
    assert_eq!(r_fixed.iterations, r_sched.iterations);
    for k in 0..r_fixed.control.values.len() {
        assert_eq!(
            r_fixed.control.values[k][0].to_bits(),
            r_sched.control.values[k][0].to_bits()
        );
    }
}

fn random_dissipative_system(
    n: usize,
    q_inputs: usize,
    rng: &mut ChaCha8Rng,
) -> (LtiSystem<f64>, Decomposition<f64>, SubsetTable<f64>) {
    // A = -G G^T / n - 0.1 I, split in two scaled halves
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mut a = DenseMatrix::zeros(n, n);
    a.add_scaled(-1.0 / n as f64, &g.matmul(&g.transpose()));
    for i in 0..n {
        a.set(i, i, a.get(i, i) - 0.1);
    }
    let a = CsrMatrix::from_dense(&a);
    let a1 = a.map_values(|v| 0.6 * v);
    let a2 = a.map_values(|v| 0.4 * v);
    let d = Decomposition::from_parts(vec![a1, a2]).unwrap();
    let b = DenseMatrix::from_fn(n, q_inputs, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let x0 = Vector::from_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
    let table = SubsetTable::uniform_singletons(2).unwrap();
    let sys = LtiSystem::new(d.matrix().clone(), b, x0).unwrap();
    (sys, d, table)
}

#[test]
fn adjoint_gradient_matches_central_differences() {
    // N = 10 random dissipative system, 20 random directions, relative error
    // <= 1e-6 with eps = 1e-5, for both the fixed and the scheduled operator
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (sys, d, table) = random_dissipative_system(10, 2, &mut rng);
    let ops = assemble_all(&d, &table).unwrap();
    let grid = TimeGrid::uniform(0.8f64, 12).unwrap();
    let schedule = draw_schedule(&grid, &table, SeedSpec::new(77, 0));
    let qh = DenseMatrix::from_fn(10, 10, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mut qm = qh.matmul(&qh.transpose());
    qm.scale(0.1);
    let spec = CostSpec::new(
        CsrMatrix::from_dense(&qm),
        DenseMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]),
        0.8,
    );
    let mut u = ControlSignal::zeros(&grid, 2);
    for v in u.values.iter_mut() {
        for j in 0..2 {
            v[j] = rng.random::<f64>() * 2.0 - 1.0;
        }
    }
    for source in [
        OperatorSource::Fixed,
        OperatorSource::Scheduled {
            schedule: &schedule,
            assembled: &ops,
        },
    ] {
        let g = gradient(&sys, &spec, &grid, &u, source).unwrap();
        let eps = 1e-5;
        for _ in 0..20 {
            let mut v = ControlSignal::zeros(&grid, 2);
            for val in v.values.iter_mut() {
                for j in 0..2 {
                    val[j] = rng.random::<f64>() * 2.0 - 1.0;
                }
            }
            let mut up = u.clone();
            up.axpy(eps, &v);
            let mut um = u.clone();
            um.axpy(-eps, &v);
            let jp = cost(&sys, &spec, &grid, &up, source).unwrap();
            let jm = cost(&sys, &spec, &grid, &um, source).unwrap();
            let fd = (jp - jm) / (2.0 * eps);
            let an = g.l2_inner(&v);
            assert!(
                (fd - an).abs() <= 1e-6 * fd.abs().max(1e-10),
                "fd {fd} vs adjoint {an}"
            );
        }
    }
}

#[test]
fn optimality_gap_ordering_on_a_fixed_realization() {
    // J(u*) <= J(u*_h) and J_h(u*_h) <= J_h(u*); both minimizers solved
    // tightly so the ordering holds to rounding slack
    let model = heat_case_i();
    let ops = assemble_all(&model.decomposition, &model.table).unwrap();
    let grid = TimeGrid::uniform(0.5f64, 128).unwrap();
    let schedule = draw_schedule(&grid, &model.table, SeedSpec::new(31, 4));
    let source = OperatorSource::Scheduled {
        schedule: &schedule,
        assembled: &ops,
    };
    let opts = MinimizeOptions {
        tol: 1e-12,
        ..Default::default()
    };
    let star = minimize(
        &model.system,
        &model.cost,
        &grid,
        OperatorSource::Fixed,
        None,
        &opts,
    )
    .unwrap();
    let star_h = minimize(&model.system, &model.cost, &grid, source, None, &opts).unwrap();

    // J(u*_h): original dynamics driven by the randomized minimizer
    let solver = CnSolver::new(&model.system, &grid, OperatorSource::Fixed).unwrap();
    let x = solver.solve_forward(Some(&star_h.control)).unwrap();
    let j_of_uh = cost_along(&model.cost, &x, &star_h.control);
    assert!(star.cost <= j_of_uh * (1.0 + 1e-9) + 1e-12);

    // J_h(u*): randomized dynamics driven by the original minimizer
    let solver_h = CnSolver::new(&model.system, &grid, source).unwrap();
    let xh = solver_h.solve_forward(Some(&star.control)).unwrap();
    let jh_of_u = cost_along(&model.cost, &xh, &star.control);
    assert!(star_h.cost <= jh_of_u * (1.0 + 1e-9) + 1e-12);
}

#[test]
fn coercivity_bound_holds_for_randomized_minimizers() {
    let model = heat_case_i();
    let ops = assemble_all(&model.decomposition, &model.table).unwrap();
    let grid = TimeGrid::uniform(0.5f64, 128).unwrap();
    for r in 0..5 {
        let schedule = draw_schedule(&grid, &model.table, SeedSpec::new(8, r));
        let source = OperatorSource::Scheduled {
            schedule: &schedule,
            assembled: &ops,
        };
        let bound =
            rbm_core::optimizer::coercivity_bound(&model.system, &model.cost, &grid, source)
                .unwrap();
        let res = minimize(
            &model.system,
            &model.cost,
            &grid,
            source,
            None,
            &MinimizeOptions::default(),
        )
        .unwrap();
        let l2 = res.control.l2_norm();
        assert!(
            l2 * l2 <= bound * (1.0 + 1e-9),
            "realization {r}: |u|^2 = {} > bound {bound}",
            l2 * l2
        );
    }
}

#[test]
fn evolution_contraction_in_the_weighted_norm() {
    // scheduled evolution operators of the heat splitting contract in the
    // trapezoid-weighted norm (explicitly: ||H^{1/2} S H^{-1/2}|| <= 1)
    let model = heat_case_i();
    let ops = assemble_all(&model.decomposition, &model.table).unwrap();
    let grid = TimeGrid::uniform(0.5f64, 8).unwrap();
    let weights = model.decomposition.inner_product_weights().unwrap();
    for r in 0..3 {
        let schedule = draw_schedule(&grid, &model.table, SeedSpec::new(17, r));
        let e = rbm_core::sampling::evolution_operator(&schedule, &ops, 0.5 - 1e-12, 0.0).unwrap();
        let n = e.rows();
        let mut weighted = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                weighted.set(i, j, weights[i].sqrt() * e.get(i, j) / weights[j].sqrt());
            }
        }
        let norm = operator_norm(&weighted, 1e-10).unwrap();
        assert!(norm <= 1.0 + 1e-9, "realization {r}: {norm}");
    }
}

#[test]
fn empty_subset_freezes_the_state() {
    // a table containing the empty subset yields the zero operator on those
    // intervals: with u = 0 the state does not move there
    let a1 = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1.0)]);
    let a2 = CsrMatrix::from_triplets(2, 2, &[(1, 1, -2.0)]);
    let d = Decomposition::from_parts(vec![a1, a2]).unwrap();
    let t = SubsetTable::new(
        2,
        &[(vec![], 0.2), (vec![0], 0.4), (vec![1], 0.4)],
    )
    .unwrap();
    let ops = assemble_all(&d, &t).unwrap();
    assert_eq!(ops[0].matrix.nnz(), 0);
    let sys = LtiSystem::new(
        d.matrix().clone(),
        DenseMatrix::zeros(2, 1),
        Vector::from_vec(vec![1.0, 1.0]),
    )
    .unwrap();
    let grid = TimeGrid::uniform(1.0f64, 2).unwrap();
    let schedule = rbm_core::sampling::Schedule::new(grid.clone(), vec![0, 1], &t).unwrap();
    let x = solve_forward(
        &sys,
        &grid,
        None,
        OperatorSource::Scheduled {
            schedule: &schedule,
            assembled: &ops,
        },
    )
    .unwrap();
    assert_eq!(&x.states[1][..], &x.states[0][..]);
    // the second interval activates subset {0}, moving only component 0
    assert!(x.states[2][0] < x.states[1][0]);
    assert_eq!(x.states[2][1], x.states[1][1]);
}
