//! The quadratic cost functional, its adjoint-based gradient, and gradient
//! descent with an exact line search.

use std::fmt::Write as _;

use crate::dynamics::{CnSolver, ControlSignal, LtiSystem, OperatorSource, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_min_eigenvalue, CsrMatrix, DenseMatrix, Vector};
use crate::sampling::TimeGrid;
use crate::scalar::Scalar;

/// Quadratic cost data: state weight Q (symmetric PSD), control weight R
/// (symmetric PD), optional target trajectory, horizon.
#[derive(Debug, Clone)]
pub struct CostSpec<T> {
    pub q: CsrMatrix<T>,
    pub r: DenseMatrix<T>,
    pub x_d: Option<Trajectory<T>>,
    pub horizon: T,
}

impl<T: Scalar> CostSpec<T> {
    pub fn new(q: CsrMatrix<T>, r: DenseMatrix<T>, horizon: T) -> Self {
        Self {
            q,
            r,
            x_d: None,
            horizon,
        }
    }

    pub fn with_target(mut self, x_d: Trajectory<T>) -> Self {
        self.x_d = Some(x_d);
        self
    }
}

/// Strong-convexity modulus of the cost in the control: the smallest
/// eigenvalue of R. Errors when R is not symmetric positive definite.
pub fn alpha_convexity_constant<T: Scalar>(spec: &CostSpec<T>) -> Result<T> {
    if !spec.r.is_symmetric(T::of(1e-12)) {
        return Err(Error::InvalidArgument("control weight R must be symmetric".into()));
    }
    let alpha = symmetric_min_eigenvalue(&spec.r, T::of(1e-12))?;
    if alpha <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "control weight R must be positive definite (lambda_min = {alpha:e})"
        )));
    }
    Ok(alpha)
}

/// Trapezoid-rule value of the cost along an already-solved trajectory.
pub fn cost_along<T: Scalar>(
    spec: &CostSpec<T>,
    x: &Trajectory<T>,
    u: &ControlSignal<T>,
) -> T {
    let w = x.grid.trapezoid_weights();
    let n = x.state_dim();
    let mut qz = vec![T::zero(); n];
    let mut ru = vec![T::zero(); u.input_dim()];
    let mut z = vec![T::zero(); n];
    let mut acc = T::zero();
    for (k, wk) in w.iter().enumerate() {
        for i in 0..n {
            z[i] = x.states[k][i]
                - spec
                    .x_d
                    .as_ref()
                    .map(|xd| xd.states[k][i])
                    .unwrap_or_else(T::zero);
        }
        spec.q.matvec(&z, &mut qz);
        let mut zqz = T::zero();
        for i in 0..n {
            zqz += z[i] * qz[i];
        }
        spec.r.matvec(&u.values[k], &mut ru);
        let mut uru = T::zero();
        for j in 0..u.input_dim() {
            uru += u.values[k][j] * ru[j];
        }
        acc += *wk * (zqz + uru);
    }
    acc * T::half()
}

/// Solve the dynamics for `u` and evaluate the cost.
pub fn cost<T: Scalar>(
    sys: &LtiSystem<T>,
    spec: &CostSpec<T>,
    grid: &TimeGrid<T>,
    u: &ControlSignal<T>,
    source: OperatorSource<T>,
) -> Result<T> {
    let solver = CnSolver::new(sys, grid, source)?;
    let x = solver.solve_forward(Some(u))?;
    Ok(cost_along(spec, &x, u))
}

/// Gradient of the discrete cost in the trapezoid-weighted inner product:
/// nodewise R u_k + B^T (combination of the adjacent interval multipliers).
/// Exact for the discrete cost by construction of the discrete adjoint.
pub fn gradient_from_adjoint<T: Scalar>(
    solver: &CnSolver<T>,
    spec: &CostSpec<T>,
    u: &ControlSignal<T>,
    x: &Trajectory<T>,
) -> Result<ControlSignal<T>> {
    let psi = solver.solve_adjoint(&spec.q, x, spec.x_d.as_ref())?;
    let grid = solver.grid();
    let kk = grid.intervals();
    let w = grid.trapezoid_weights();
    let q_dim = u.input_dim();
    let n = solver.system().dim();
    let mut g = ControlSignal::zeros(grid, q_dim);
    let mut combo = vec![T::zero(); n];
    let mut bt = vec![T::zero(); q_dim];
    let mut ru = vec![T::zero(); q_dim];
    for k in 0..=kk {
        for c in combo.iter_mut() {
            *c = T::zero();
        }
        let two_w = w[k] * T::two();
        if k >= 1 {
            let c1 = grid.step(k - 1) / two_w;
            for (ci, &p) in combo.iter_mut().zip(psi.costates[k - 1].iter()) {
                *ci += c1 * p;
            }
        }
        if k < kk {
            let c2 = grid.step(k) / two_w;
            for (ci, &p) in combo.iter_mut().zip(psi.costates[k].iter()) {
                *ci += c2 * p;
            }
        }
        solver.system().b.matvec_transpose(&combo, &mut bt);
        spec.r.matvec(&u.values[k], &mut ru);
        for j in 0..q_dim {
            g.values[k][j] = ru[j] + bt[j];
        }
    }
    Ok(g)
}

/// One-shot gradient of the cost at `u`.
pub fn gradient<T: Scalar>(
    sys: &LtiSystem<T>,
    spec: &CostSpec<T>,
    grid: &TimeGrid<T>,
    u: &ControlSignal<T>,
    source: OperatorSource<T>,
) -> Result<ControlSignal<T>> {
    let solver = CnSolver::new(sys, grid, source)?;
    let x = solver.solve_forward(Some(u))?;
    gradient_from_adjoint(&solver, spec, u, &x)
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions<T> {
    /// stop when the relative cost decrease falls below this
    pub tol: T,
    pub max_iterations: usize,
    /// secondary stop on the weighted gradient norm
    pub gradient_floor: T,
}

impl<T: Scalar> Default for MinimizeOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-6),
            max_iterations: 10_000,
            gradient_floor: T::of(1e-14),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptResult<T> {
    pub control: ControlSignal<T>,
    pub cost: T,
    pub iterations: usize,
    pub gradient_norms: Vec<T>,
    pub cost_history: Vec<T>,
    pub converged: bool,
}

impl<T: Scalar> OptResult<T> {
    /// CSV rows `iteration, cost, gradient_norm`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,cost,gradient_norm\n");
        for (i, j) in self.cost_history.iter().enumerate() {
            let g = self
                .gradient_norms
                .get(i)
                .map(|g| g.to_f64_lossy())
                .unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{},{}", i, j.to_f64_lossy(), g);
        }
        out
    }
}

/// Gradient descent with exact line search on the quadratic cost:
/// beta = <g,g> / <g,Hg> where <g,Hg> comes from one homogeneous forward
/// solve driven by g. Terminates on relative cost decrease below `tol`.
pub fn minimize<T: Scalar>(
    sys: &LtiSystem<T>,
    spec: &CostSpec<T>,
    grid: &TimeGrid<T>,
    source: OperatorSource<T>,
    u_init: Option<ControlSignal<T>>,
    opts: &MinimizeOptions<T>,
) -> Result<OptResult<T>> {
    let solver = CnSolver::new(sys, grid, source)?;
    minimize_with_solver(&solver, spec, u_init, opts)
}

/// Same descent, reusing an existing solver (and its step factors).
pub fn minimize_with_solver<T: Scalar>(
    solver: &CnSolver<T>,
    spec: &CostSpec<T>,
    u_init: Option<ControlSignal<T>>,
    opts: &MinimizeOptions<T>,
) -> Result<OptResult<T>> {
    let sys = solver.system();
    let grid = solver.grid();
    alpha_convexity_constant(spec)?;
    if (grid.t_final() - spec.horizon).abs() > T::of(1e-12) * spec.horizon.max(T::one()) {
        return Err(Error::Dimension(format!(
            "grid horizon {} differs from cost horizon {}",
            grid.t_final(),
            spec.horizon
        )));
    }
    let q_dim = sys.input_dim();
    let mut u = u_init.unwrap_or_else(|| ControlSignal::zeros(grid, q_dim));
    if u.grid.nodes() != grid.nodes() || u.input_dim() != q_dim {
        return Err(Error::Dimension("initial control does not fit grid/system".into()));
    }
    let w = grid.trapezoid_weights();
    let zero_state = Vector::zeros(sys.dim());

    let mut x = solver.solve_forward(Some(&u))?;
    let mut j_prev = cost_along(spec, &x, &u);
    let mut cost_history = vec![j_prev];
    let mut gradient_norms = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;

    while iterations < opts.max_iterations {
        let g = gradient_from_adjoint(&solver, spec, &u, &x)?;
        let gn2 = g.l2_inner(&g);
        gradient_norms.push(gn2.sqrt());
        if gn2.sqrt() <= opts.gradient_floor {
            converged = true;
            break;
        }
        // curvature along g: homogeneous trajectory driven by g
        let y = solver.solve_forward_from(&zero_state, Some(&g))?;
        let mut denom = T::zero();
        let n = sys.dim();
        let mut qy = vec![T::zero(); n];
        let mut rg = vec![T::zero(); q_dim];
        for (k, wk) in w.iter().enumerate() {
            spec.q.matvec(&y.states[k], &mut qy);
            let mut yqy = T::zero();
            for i in 0..n {
                yqy += y.states[k][i] * qy[i];
            }
            spec.r.matvec(&g.values[k], &mut rg);
            let mut grg = T::zero();
            for jj in 0..q_dim {
                grg += g.values[k][jj] * rg[jj];
            }
            denom += *wk * (yqy + grg);
        }
        if denom <= T::zero() {
            converged = true;
            break;
        }
        let beta = gn2 / denom;
        u.axpy(-beta, &g);
        iterations += 1;
        x = solver.solve_forward(Some(&u))?;
        let j_new = cost_along(spec, &x, &u);
        cost_history.push(j_new);
        let decreased = (j_prev - j_new).abs() <= opts.tol * j_prev.abs();
        j_prev = j_new;
        if decreased {
            converged = true;
            break;
        }
    }
    Ok(OptResult {
        control: u,
        cost: j_prev,
        iterations,
        gradient_norms,
        cost_history,
        converged,
    })
}

/// Uniform L2 bound on every minimizer: (2/alpha) * J(0), from comparing the
/// minimizer against the zero control.
pub fn coercivity_bound<T: Scalar>(
    sys: &LtiSystem<T>,
    spec: &CostSpec<T>,
    grid: &TimeGrid<T>,
    source: OperatorSource<T>,
) -> Result<T> {
    let alpha = alpha_convexity_constant(spec)?;
    let zero = ControlSignal::zeros(grid, sys.input_dim());
    let j0 = cost(sys, spec, grid, &zero, source)?;
    Ok(T::two() / alpha * j0)
}
