//! Crank-Nicolson integration of the original and randomized dynamics,
//! the exact discrete adjoint of that recursion, and trajectory utilities.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{lu_factorize, CsrMatrix, DenseMatrix, LuFactors, Vector};
use crate::sampling::{Schedule, TimeGrid};
use crate::scalar::Scalar;
use crate::splitting::SubsetOperator;

/// E x' = A x + B u with initial state x0. E defaults to the identity and
/// must be symmetric positive definite when given.
#[derive(Debug, Clone)]
pub struct LtiSystem<T> {
    pub e: Option<CsrMatrix<T>>,
    pub a: CsrMatrix<T>,
    pub b: DenseMatrix<T>,
    pub x0: Vector<T>,
}

impl<T: Scalar> LtiSystem<T> {
    pub fn new(a: CsrMatrix<T>, b: DenseMatrix<T>, x0: Vector<T>) -> Result<Self> {
        let sys = Self { e: None, a, b, x0 };
        sys.check_dims()?;
        Ok(sys)
    }

    pub fn with_mass_matrix(mut self, e: CsrMatrix<T>) -> Result<Self> {
        if e.rows() != self.dim() || e.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "mass matrix is {}x{}, expected {n}x{n}",
                e.rows(),
                e.cols(),
                n = self.dim()
            )));
        }
        self.e = Some(e);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    fn check_dims(&self) -> Result<()> {
        if !self.a.is_square() {
            return Err(Error::Dimension("system matrix must be square".into()));
        }
        if self.b.rows() != self.dim() {
            return Err(Error::Dimension(format!(
                "input matrix has {} rows, state dimension is {}",
                self.b.rows(),
                self.dim()
            )));
        }
        if self.x0.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, state dimension is {}",
                self.x0.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// y = E x (identity shortcut when no mass matrix is set).
    fn mass_apply(&self, x: &[T], y: &mut [T]) {
        match &self.e {
            None => y.copy_from_slice(x),
            Some(e) => e.matvec(x, y),
        }
    }

    fn mass_apply_transpose(&self, x: &[T], y: &mut [T]) {
        match &self.e {
            None => y.copy_from_slice(x),
            Some(e) => e.matvec_transpose(x, y),
        }
    }
}

/// Which operator drives each time interval: the fixed system matrix or the
/// scheduled subset operators.
#[derive(Clone, Copy)]
pub enum OperatorSource<'a, T> {
    Fixed,
    Scheduled {
        schedule: &'a Schedule<T>,
        assembled: &'a [SubsetOperator<T>],
    },
}

const FIXED_KEY: u32 = u32::MAX;

impl<'a, T: Scalar> OperatorSource<'a, T> {
    fn key(&self, interval: usize) -> u32 {
        match self {
            OperatorSource::Fixed => FIXED_KEY,
            OperatorSource::Scheduled { schedule, .. } => schedule.indices()[interval],
        }
    }

    fn matrix(&self, sys: &'a LtiSystem<T>, interval: usize) -> &'a CsrMatrix<T> {
        match self {
            OperatorSource::Fixed => &sys.a,
            OperatorSource::Scheduled {
                schedule,
                assembled,
            } => &assembled[schedule.subset_at_interval(interval)].matrix,
        }
    }
}

/// Grid-sampled state trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub grid: TimeGrid<T>,
    pub states: Vec<Vector<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn state_dim(&self) -> usize {
        self.states.first().map(|s| s.len()).unwrap_or(0)
    }

    pub fn at(&self, k: usize) -> &Vector<T> {
        &self.states[k]
    }

    pub fn terminal(&self) -> &Vector<T> {
        self.states.last().unwrap()
    }

    pub fn max_node_norm(&self) -> T {
        self.states
            .iter()
            .map(|s| s.norm())
            .fold(T::zero(), T::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 0..self.state_dim() {
            let _ = write!(out, ",x_{}", j + 1);
        }
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            let _ = write!(out, "{}", self.grid.nodes()[k].to_f64_lossy());
            for v in s.iter() {
                let _ = write!(out, ",{}", v.to_f64_lossy());
            }
            out.push('\n');
        }
        out
    }
}

/// Costate trajectory of the discrete adjoint. The value stored at node k is
/// the multiplier of the step on [t_k, t_{k+1}); the terminal node holds the
/// exact zero end condition.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory<T> {
    pub grid: TimeGrid<T>,
    pub costates: Vec<Vector<T>>,
}

impl<T: Scalar> AdjointTrajectory<T> {
    pub fn at(&self, k: usize) -> &Vector<T> {
        &self.costates[k]
    }
}

/// Grid-sampled control values in R^q.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal<T> {
    pub grid: TimeGrid<T>,
    pub values: Vec<Vector<T>>,
}

impl<T: Scalar> ControlSignal<T> {
    pub fn zeros(grid: &TimeGrid<T>, q: usize) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Vector::zeros(q); grid.intervals() + 1],
        }
    }

    pub fn constant(grid: &TimeGrid<T>, value: Vector<T>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.intervals() + 1],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.values.first().map(|v| v.len()).unwrap_or(0)
    }

    /// Trapezoid-rule L2 norm over [0, T].
    pub fn l2_norm(&self) -> T {
        self.l2_inner(self).sqrt()
    }

    pub fn l2_inner(&self, other: &Self) -> T {
        let w = self.grid.trapezoid_weights();
        let mut acc = T::zero();
        for (k, wk) in w.iter().enumerate() {
            acc += *wk * self.values[k].dot(&other.values[k]);
        }
        acc
    }

    pub fn l2_distance(&self, other: &Self) -> T {
        let w = self.grid.trapezoid_weights();
        let mut acc = T::zero();
        for (k, wk) in w.iter().enumerate() {
            let d = self.values[k].sub(&other.values[k]);
            acc += *wk * d.dot(&d);
        }
        acc.sqrt()
    }

    /// self += alpha * other, nodewise.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            v.axpy(alpha, o);
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 0..self.input_dim() {
            let _ = write!(out, ",u_{}", j + 1);
        }
        out.push('\n');
        for (k, v) in self.values.iter().enumerate() {
            let _ = write!(out, "{}", self.grid.nodes()[k].to_f64_lossy());
            for u in v.iter() {
                let _ = write!(out, ",{}", u.to_f64_lossy());
            }
            out.push('\n');
        }
        out
    }
}

/// Prebuilt LU factors of the step matrices E - (h/2) A_op, keyed by
/// (operator, step size). Built once and shared read-only across solves,
/// realizations, and threads.
pub struct StepFactors<T> {
    map: HashMap<(u32, u64), LuFactors<T>>,
    /// wall-clock time spent factoring, reported separately from stepping
    pub factorization_time: std::time::Duration,
}

impl<T: Scalar> StepFactors<T> {
    fn factor_step(
        sys: &LtiSystem<T>,
        e_dense: &DenseMatrix<T>,
        op: &CsrMatrix<T>,
        h: T,
    ) -> Result<LuFactors<T>> {
        let n = sys.dim();
        let mut step = e_dense.clone();
        let half_h = h * T::half();
        for i in 0..n {
            for (j, v) in op.row_entries(i) {
                step.set(i, j, step.get(i, j) - half_h * v);
            }
        }
        lu_factorize(&step)
    }

    fn e_dense(sys: &LtiSystem<T>) -> DenseMatrix<T> {
        match &sys.e {
            None => DenseMatrix::identity(sys.dim()),
            Some(e) => e.to_dense(),
        }
    }

    /// Factor exactly the (operator, step) pairs one source and grid visit.
    pub fn for_source(
        sys: &LtiSystem<T>,
        grid: &TimeGrid<T>,
        source: OperatorSource<T>,
    ) -> Result<Self> {
        let start = std::time::Instant::now();
        let e_dense = Self::e_dense(sys);
        let mut map = HashMap::new();
        for k in 0..grid.intervals() {
            let h = grid.step(k);
            let key = (source.key(k), h.to_f64_lossy().to_bits());
            if map.contains_key(&key) {
                continue;
            }
            let lu = Self::factor_step(sys, &e_dense, source.matrix(sys, k), h)?;
            map.insert(key, lu);
        }
        Ok(Self {
            map,
            factorization_time: start.elapsed(),
        })
    }

    /// Factor every supported subset operator (and optionally the fixed
    /// system matrix) for every distinct step of the grid, so one set of
    /// factors serves all schedules drawn on that grid.
    pub fn for_all_subsets(
        sys: &LtiSystem<T>,
        grid: &TimeGrid<T>,
        assembled: &[SubsetOperator<T>],
        include_fixed: bool,
    ) -> Result<Self> {
        let start = std::time::Instant::now();
        let e_dense = Self::e_dense(sys);
        let mut steps: Vec<u64> = (0..grid.intervals())
            .map(|k| grid.step(k).to_f64_lossy().to_bits())
            .collect();
        steps.sort_unstable();
        steps.dedup();
        let mut map = HashMap::new();
        for &hbits in &steps {
            let h = T::of(f64::from_bits(hbits));
            for (idx, op) in assembled.iter().enumerate() {
                map.insert(
                    (idx as u32, hbits),
                    Self::factor_step(sys, &e_dense, &op.matrix, h)?,
                );
            }
            if include_fixed {
                map.insert(
                    (FIXED_KEY, hbits),
                    Self::factor_step(sys, &e_dense, &sys.a, h)?,
                );
            }
        }
        Ok(Self {
            map,
            factorization_time: start.elapsed(),
        })
    }

    pub fn factor_count(&self) -> usize {
        self.map.len()
    }
}

/// Crank-Nicolson stepper over one grid and operator source, backed by
/// shared step factors. Forward and adjoint solves reuse the same LUs.
pub struct CnSolver<'a, T: Scalar> {
    sys: &'a LtiSystem<T>,
    grid: &'a TimeGrid<T>,
    source: OperatorSource<'a, T>,
    factors: std::sync::Arc<StepFactors<T>>,
}

impl<'a, T: Scalar> CnSolver<'a, T> {
    pub fn new(
        sys: &'a LtiSystem<T>,
        grid: &'a TimeGrid<T>,
        source: OperatorSource<'a, T>,
    ) -> Result<Self> {
        let factors = std::sync::Arc::new(StepFactors::for_source(sys, grid, source)?);
        Self::with_factors(sys, grid, source, factors)
    }

    /// Reuse prebuilt factors; verifies every step the source visits is
    /// covered.
    pub fn with_factors(
        sys: &'a LtiSystem<T>,
        grid: &'a TimeGrid<T>,
        source: OperatorSource<'a, T>,
        factors: std::sync::Arc<StepFactors<T>>,
    ) -> Result<Self> {
        sys.check_dims()?;
        if let OperatorSource::Scheduled { schedule, .. } = &source {
            if schedule.grid().nodes() != grid.nodes() {
                return Err(Error::Dimension(
                    "schedule grid differs from the solver grid".into(),
                ));
            }
        }
        for k in 0..grid.intervals() {
            let key = (source.key(k), grid.step(k).to_f64_lossy().to_bits());
            if !factors.map.contains_key(&key) {
                return Err(Error::InvalidArgument(format!(
                    "step factors missing for operator key {} at interval {k}",
                    key.0
                )));
            }
        }
        Ok(Self {
            sys,
            grid,
            source,
            factors,
        })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        self.grid
    }

    pub fn system(&self) -> &LtiSystem<T> {
        self.sys
    }

    pub fn factor_count(&self) -> usize {
        self.factors.factor_count()
    }

    pub fn factorization_time(&self) -> std::time::Duration {
        self.factors.factorization_time
    }

    fn lu_for(&self, interval: usize) -> &LuFactors<T> {
        let h = self.grid.step(interval);
        let key = (self.source.key(interval), h.to_f64_lossy().to_bits());
        self.factors.map.get(&key).expect("step factor prebuilt")
    }

    /// March the CN recursion from the system's initial state.
    pub fn solve_forward(&self, u: Option<&ControlSignal<T>>) -> Result<Trajectory<T>> {
        self.solve_forward_from(&self.sys.x0, u)
    }

    /// March the CN recursion from an arbitrary initial state:
    /// (E - h/2 A_k) x_k = (E + h/2 A_k) x_{k-1} + h B (u_{k-1}+u_k)/2.
    pub fn solve_forward_from(
        &self,
        x0: &Vector<T>,
        u: Option<&ControlSignal<T>>,
    ) -> Result<Trajectory<T>> {
        let n = self.sys.dim();
        if x0.len() != n {
            return Err(Error::Dimension("initial state dimension mismatch".into()));
        }
        if let Some(u) = u {
            if u.grid.nodes() != self.grid.nodes() {
                return Err(Error::Dimension("control grid differs from solver grid".into()));
            }
            if u.input_dim() != self.sys.input_dim() {
                return Err(Error::Dimension(format!(
                    "control dimension {} does not match input dimension {}",
                    u.input_dim(),
                    self.sys.input_dim()
                )));
            }
        }
        let kk = self.grid.intervals();
        let mut states = Vec::with_capacity(kk + 1);
        states.push(x0.clone());
        let mut rhs = vec![T::zero(); n];
        let mut bu = vec![T::zero(); n];
        let mut ubar = Vector::zeros(self.sys.input_dim());
        for k in 0..kk {
            let h = self.grid.step(k);
            let half_h = h * T::half();
            let prev = states.last().unwrap();
            self.sys.mass_apply(prev, &mut rhs);
            let op = self.source.matrix(self.sys, k);
            op.matvec_add(half_h, prev, &mut rhs);
            if let Some(u) = u {
                for (j, ub) in ubar.iter_mut().enumerate() {
                    *ub = (u.values[k][j] + u.values[k + 1][j]) * T::half();
                }
                self.sys.b.matvec(&ubar, &mut bu);
                for (r, &b) in rhs.iter_mut().zip(&bu) {
                    *r += h * b;
                }
            }
            self.lu_for(k).solve_in_place(&mut rhs);
            states.push(Vector::from_vec(rhs.clone()));
        }
        Ok(Trajectory {
            grid: self.grid.clone(),
            states,
        })
    }

    /// Exact discrete adjoint of the forward recursion with the trapezoid
    /// cost: backward sweep of
    /// (E - h_k/2 A_k)^T phi_k = (E + h_{k+1}/2 A_{k+1})^T phi_{k+1} + w_k Q z_k,
    /// seeded by (E - h_K/2 A_K)^T phi_K = w_K Q z_K, with z = x - x_d.
    pub fn solve_adjoint(
        &self,
        q: &CsrMatrix<T>,
        x: &Trajectory<T>,
        x_d: Option<&Trajectory<T>>,
    ) -> Result<AdjointTrajectory<T>> {
        let n = self.sys.dim();
        if x.grid.nodes() != self.grid.nodes() {
            return Err(Error::Dimension("trajectory grid differs from solver grid".into()));
        }
        if q.rows() != n || q.cols() != n {
            return Err(Error::Dimension("state weight dimension mismatch".into()));
        }
        if let Some(xd) = x_d {
            if xd.grid.nodes() != self.grid.nodes() || xd.state_dim() != n {
                return Err(Error::Dimension("target trajectory mismatch".into()));
            }
        }
        let kk = self.grid.intervals();
        let w = self.grid.trapezoid_weights();
        let mut costates = vec![Vector::zeros(n); kk + 1];
        let mut rhs = vec![T::zero(); n];
        let mut z = vec![T::zero(); n];
        let mut tmp = vec![T::zero(); n];
        let mut phi_next: Option<usize> = None; // index into costates
        for k in (1..=kk).rev() {
            // z_k = x_k - x_d(t_k)
            for i in 0..n {
                z[i] = x.states[k][i]
                    - x_d.map(|xd| xd.states[k][i]).unwrap_or_else(T::zero);
            }
            q.matvec(&z, &mut rhs);
            for r in rhs.iter_mut() {
                *r *= w[k];
            }
            if let Some(next_idx) = phi_next {
                // rhs += (E + h_{k+1}/2 A_{k+1})^T phi_{k+1}
                let phi = &costates[next_idx];
                self.sys.mass_apply_transpose(phi, &mut tmp);
                for (r, &t) in rhs.iter_mut().zip(&tmp) {
                    *r += t;
                }
                let h_next = self.grid.step(k);
                let op_next = self.source.matrix(self.sys, k);
                op_next.matvec_transpose_add(h_next * T::half(), phi, &mut rhs);
            }
            self.lu_for(k - 1).solve_transpose_in_place(&mut rhs);
            costates[k - 1] = Vector::from_vec(rhs.clone());
            phi_next = Some(k - 1);
        }
        // costates[kk] stays exactly zero: the end condition phi(T) = 0
        Ok(AdjointTrajectory {
            grid: self.grid.clone(),
            costates,
        })
    }
}

/// One-shot forward solve (builds the step factors, solves, discards them).
pub fn solve_forward<T: Scalar>(
    sys: &LtiSystem<T>,
    grid: &TimeGrid<T>,
    u: Option<&ControlSignal<T>>,
    source: OperatorSource<T>,
) -> Result<Trajectory<T>> {
    CnSolver::new(sys, grid, source)?.solve_forward(u)
}

/// One-shot adjoint solve.
pub fn solve_adjoint<T: Scalar>(
    sys: &LtiSystem<T>,
    grid: &TimeGrid<T>,
    q: &CsrMatrix<T>,
    x: &Trajectory<T>,
    x_d: Option<&Trajectory<T>>,
    source: OperatorSource<T>,
) -> Result<AdjointTrajectory<T>> {
    CnSolver::new(sys, grid, source)?.solve_adjoint(q, x, x_d)
}

/// Per-node Euclidean error norms between two trajectories on one grid.
#[derive(Debug, Clone)]
pub struct ErrorReport<T> {
    pub node_errors: Vec<T>,
    pub max: T,
    /// max error divided by the reference trajectory's max node norm
    pub max_relative: T,
    pub reference_max: T,
}

pub fn error_trajectory<T: Scalar>(
    xh: &Trajectory<T>,
    x: &Trajectory<T>,
) -> Result<ErrorReport<T>> {
    if xh.grid.nodes() != x.grid.nodes() || xh.state_dim() != x.state_dim() {
        return Err(Error::Dimension(
            "error_trajectory needs matching grids and state dimensions".into(),
        ));
    }
    let node_errors: Vec<T> = xh
        .states
        .iter()
        .zip(&x.states)
        .map(|(a, b)| a.sub(b).norm())
        .collect();
    let max = node_errors.iter().copied().fold(T::zero(), T::max);
    let reference_max = x.max_node_norm();
    let max_relative = if reference_max > T::zero() {
        max / reference_max
    } else {
        max
    };
    Ok(ErrorReport {
        node_errors,
        max,
        max_relative,
        reference_max,
    })
}

/// |x0| + |B u|_{L1(0,T)}: every trajectory of a dissipative (randomized or
/// original) system stays below this.
pub fn uniform_state_bound<T: Scalar>(sys: &LtiSystem<T>, u: Option<&ControlSignal<T>>) -> T {
    let mut bound = sys.x0.norm();
    if let Some(u) = u {
        let w = u.grid.trapezoid_weights();
        let mut bu = vec![T::zero(); sys.dim()];
        for (k, wk) in w.iter().enumerate() {
            sys.b.matvec(&u.values[k], &mut bu);
            let norm = bu.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
            bound += *wk * norm;
        }
    }
    bound
}
