//! Time grids, random schedule draws, the piecewise-constant randomized
//! operator, evolution operators, and exhaustive expectation enumeration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{matrix_exponential, CsrMatrix, DenseMatrix, Vector};
use crate::scalar::Scalar;
use crate::splitting::{SubsetOperator, SubsetTable};

/// Strictly increasing time nodes t_0 = 0 < ... < t_K = T.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    nodes: Vec<T>,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("grid needs at least two nodes".into()));
        }
        if nodes[0] != T::zero() {
            return Err(Error::InvalidArgument("grid must start at t = 0".into()));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("grid nodes must strictly increase".into()));
        }
        Ok(Self { nodes })
    }

    /// Uniform grid t_k = k T / K; the final node is set to T exactly.
    pub fn uniform(t_final: T, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidArgument("interval count must be positive".into()));
        }
        if t_final <= T::zero() {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let k = T::of_usize(intervals);
        let mut nodes: Vec<T> = (0..=intervals)
            .map(|i| t_final * T::of_usize(i) / k)
            .collect();
        *nodes.last_mut().unwrap() = t_final;
        Self::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t_final(&self) -> T {
        *self.nodes.last().unwrap()
    }

    /// Step length of interval k (0-based: [t_k, t_{k+1})).
    pub fn step(&self, k: usize) -> T {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn max_step(&self) -> T {
        (0..self.intervals())
            .map(|k| self.step(k))
            .fold(T::zero(), T::max)
    }

    /// Index k with t in [t_k, t_{k+1}); errors at or beyond T.
    pub fn interval_of(&self, t: T) -> Result<usize> {
        if t < T::zero() || t >= self.t_final() {
            return Err(Error::TimeOutOfRange {
                t: t.to_f64_lossy(),
                t_end: self.t_final().to_f64_lossy(),
            });
        }
        // binary search for the last node <= t
        let mut lo = 0usize;
        let mut hi = self.intervals();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.nodes[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Trapezoid quadrature weights over the nodes.
    pub fn trapezoid_weights(&self) -> Vec<T> {
        let k = self.intervals();
        let mut w = vec![T::zero(); k + 1];
        for i in 0..k {
            let half = self.step(i) * T::half();
            w[i] += half;
            w[i + 1] += half;
        }
        w
    }
}

/// Reproducible stream selector: one master seed, one stream per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSpec {
    pub master: u64,
    pub realization: u64,
}

impl SeedSpec {
    pub fn new(master: u64, realization: u64) -> Self {
        Self { master, realization }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.realization);
        rng
    }
}

/// A drawn sequence of supported-subset indices, one per grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    grid: TimeGrid<T>,
    indices: Vec<u32>,
}

impl<T: Scalar> Schedule<T> {
    pub fn new(grid: TimeGrid<T>, indices: Vec<u32>, table: &SubsetTable<T>) -> Result<Self> {
        if indices.len() != grid.intervals() {
            return Err(Error::Dimension(format!(
                "schedule length {} does not match {} grid intervals",
                indices.len(),
                grid.intervals()
            )));
        }
        if let Some(&bad) = indices
            .iter()
            .find(|&&i| (i as usize) >= table.supported_count())
        {
            return Err(Error::InvalidSubset(format!(
                "schedule references unsupported subset {bad}"
            )));
        }
        Ok(Self { grid, indices })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn subset_at_interval(&self, k: usize) -> usize {
        self.indices[k] as usize
    }

    /// CSV rows `k, t_start, t_end, subset_id` for audit and replay.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t_start,t_end,subset_id\n");
        for k in 0..self.indices.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                k,
                self.grid.nodes()[k].to_f64_lossy(),
                self.grid.nodes()[k + 1].to_f64_lossy(),
                self.indices[k]
            ));
        }
        out
    }
}

/// Draw i.i.d. subset indices with the table's probabilities by inverse CDF
/// over the supported subsets in table order. Deterministic given the seed.
pub fn draw_schedule<T: Scalar>(
    grid: &TimeGrid<T>,
    table: &SubsetTable<T>,
    seed: SeedSpec,
) -> Schedule<T> {
    let mut rng = seed.rng();
    let cumulative: Vec<f64> = table
        .probs()
        .iter()
        .scan(0.0f64, |acc, p| {
            *acc += p.to_f64_lossy();
            Some(*acc)
        })
        .collect();
    let indices = (0..grid.intervals())
        .map(|_| {
            let u: f64 = rng.random();
            let mut idx = cumulative.partition_point(|&c| c <= u);
            if idx >= cumulative.len() {
                idx = cumulative.len() - 1;
            }
            idx as u32
        })
        .collect();
    Schedule {
        grid: grid.clone(),
        indices,
    }
}

/// The randomized operator at time t: the assembled matrix of the subset
/// active on the interval containing t (left-closed intervals).
pub fn operator_at<'a, T: Scalar>(
    schedule: &Schedule<T>,
    assembled: &'a [SubsetOperator<T>],
    t: T,
) -> Result<&'a CsrMatrix<T>> {
    let k = schedule.grid().interval_of(t)?;
    Ok(&assembled[schedule.subset_at_interval(k)].matrix)
}

/// Evolution operator over [s, t]: the product of subset-matrix exponentials
/// across the sub-grid of [s, t], later segments applied on the left.
pub fn evolution_operator<T: Scalar>(
    schedule: &Schedule<T>,
    assembled: &[SubsetOperator<T>],
    t: T,
    s: T,
) -> Result<DenseMatrix<T>> {
    if s > t {
        return Err(Error::InvalidArgument(format!(
            "evolution operator needs s <= t, got s={s} > t={t}"
        )));
    }
    let dim = assembled
        .first()
        .map(|op| op.matrix.rows())
        .unwrap_or(0);
    let mut result = DenseMatrix::identity(dim);
    if s == t {
        return Ok(result);
    }
    let grid = schedule.grid();
    // segments of [s, t] cut by the grid nodes
    let mut seg_start = s;
    let mut k = grid.interval_of(s)?;
    let mut memo: std::collections::HashMap<(usize, u64), DenseMatrix<T>> =
        std::collections::HashMap::new();
    loop {
        let node_end = grid.nodes()[k + 1];
        let seg_end = if node_end < t { node_end } else { t };
        let len = seg_end - seg_start;
        if len > T::zero() {
            let subset = schedule.subset_at_interval(k);
            let key = (subset, len.to_f64_lossy().to_bits());
            let e = match memo.get(&key) {
                Some(e) => e.clone(),
                None => {
                    let mut scaled = assembled[subset].matrix.to_dense();
                    scaled.scale(len);
                    let e = matrix_exponential(&scaled)?;
                    memo.insert(key, e.clone());
                    e
                }
            };
            result = e.matmul(&result);
        }
        if seg_end >= t {
            break;
        }
        seg_start = seg_end;
        k += 1;
    }
    Ok(result)
}

/// Values that can be averaged with scalar weights.
pub trait Accumulate<T: Scalar>: Clone {
    fn zeros_like(&self) -> Self;
    fn add_weighted(&mut self, weight: T, term: &Self);
}

impl<T: Scalar> Accumulate<T> for T {
    fn zeros_like(&self) -> Self {
        T::zero()
    }
    fn add_weighted(&mut self, weight: T, term: &Self) {
        *self += weight * *term;
    }
}

impl<T: Scalar> Accumulate<T> for Vector<T> {
    fn zeros_like(&self) -> Self {
        Vector::zeros(self.len())
    }
    fn add_weighted(&mut self, weight: T, term: &Self) {
        self.axpy(weight, term);
    }
}

impl<T: Scalar> Accumulate<T> for DenseMatrix<T> {
    fn zeros_like(&self) -> Self {
        DenseMatrix::zeros(self.rows(), self.cols())
    }
    fn add_weighted(&mut self, weight: T, term: &Self) {
        self.add_scaled(weight, term);
    }
}

pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Exact expectation over every schedule: sum of f(schedule) weighted by the
/// product probability. The oracle behind every Monte Carlo estimate; errors
/// when the schedule count exceeds the enumeration limit.
pub fn enumerate_expectation<T: Scalar, V: Accumulate<T>>(
    grid: &TimeGrid<T>,
    table: &SubsetTable<T>,
    mut f: impl FnMut(&Schedule<T>) -> Result<V>,
) -> Result<V> {
    let s = table.supported_count() as u128;
    let k = grid.intervals() as u32;
    let count = s
        .checked_pow(k)
        .ok_or(Error::EnumerationTooLarge {
            count: u128::MAX,
            limit: ENUMERATION_LIMIT,
        })?;
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let kk = grid.intervals();
    let mut indices = vec![0u32; kk];
    let mut acc: Option<V> = None;
    loop {
        let schedule = Schedule {
            grid: grid.clone(),
            indices: indices.clone(),
        };
        let weight = indices
            .iter()
            .fold(T::one(), |w, &i| w * table.prob(i as usize));
        let value = f(&schedule)?;
        match &mut acc {
            None => {
                let mut zero = value.zeros_like();
                zero.add_weighted(weight, &value);
                acc = Some(zero);
            }
            Some(a) => a.add_weighted(weight, &value),
        }
        // odometer increment
        let mut pos = 0usize;
        loop {
            if pos == kk {
                return Ok(acc.unwrap());
            }
            indices[pos] += 1;
            if (indices[pos] as usize) < table.supported_count() {
                break;
            }
            indices[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator_norm;
    use crate::splitting::{assemble_all, Decomposition};

    fn diag_decomposition() -> (Decomposition<f64>, SubsetTable<f64>) {
        let a1 = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1.0)]);
        let a2 = CsrMatrix::from_triplets(2, 2, &[(1, 1, -2.0)]);
        let d = Decomposition::from_parts(vec![a1, a2]).unwrap();
        let t = SubsetTable::uniform_singletons(2).unwrap();
        (d, t)
    }

    #[test]
    fn uniform_grid_dyadic_spacing() {
        // T = 1/2, K = 16 gives h = 2^-5
        let g = TimeGrid::uniform(0.5f64, 16).unwrap();
        assert_eq!(g.max_step(), 2f64.powi(-5));
        assert_eq!(g.t_final(), 0.5);
    }

    #[test]
    fn single_interval_grid() {
        let g = TimeGrid::uniform(1.0f64, 1).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.0]);
    }

    #[test]
    fn small_grid_nodes() {
        let g = TimeGrid::uniform(2.0f64, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn zero_intervals_rejected() {
        assert!(TimeGrid::uniform(1.0f64, 0).is_err());
    }

    #[test]
    fn schedule_is_deterministic_given_seed() {
        let (_, t) = diag_decomposition();
        let g = TimeGrid::uniform(1.0f64, 32).unwrap();
        let s1 = draw_schedule(&g, &t, SeedSpec::new(7, 3));
        let s2 = draw_schedule(&g, &t, SeedSpec::new(7, 3));
        assert_eq!(s1, s2);
        let s3 = draw_schedule(&g, &t, SeedSpec::new(7, 4));
        assert_ne!(s1.indices(), s3.indices());
    }

    #[test]
    fn single_subset_table_draws_constant() {
        let t = SubsetTable::<f64>::deterministic(3).unwrap();
        let g = TimeGrid::uniform(1.0f64, 10).unwrap();
        let s = draw_schedule(&g, &t, SeedSpec::new(1, 0));
        assert!(s.indices().iter().all(|&i| i == 0));
    }

    #[test]
    fn empirical_frequencies_near_half() {
        // law of large numbers at 4 sigma for Bernoulli(1/2) over 10^4 draws
        let (_, t) = diag_decomposition();
        let g = TimeGrid::uniform(1.0f64, 10_000).unwrap();
        for seed in [0u64, 1, 42] {
            let s = draw_schedule(&g, &t, SeedSpec::new(seed, 0));
            let freq = s.indices().iter().filter(|&&i| i == 0).count() as f64 / 10_000.0;
            assert!((0.48..=0.52).contains(&freq), "freq {freq} at seed {seed}");
        }
    }

    #[test]
    fn operator_at_uses_left_closed_intervals() {
        let (d, t) = diag_decomposition();
        let ops = assemble_all(&d, &t).unwrap();
        let g = TimeGrid::uniform(1.0f64, 2).unwrap();
        let s = Schedule::new(g, vec![0, 1], &t).unwrap();
        // exactly at the interior node the second subset applies
        let m = operator_at(&s, &ops, 0.5).unwrap();
        assert_eq!(m.get(1, 1), -4.0);
        // t = T is outside the half-open domain
        assert!(operator_at(&s, &ops, 1.0).is_err());
        // single-interval schedules are constant on [0, T)
        let g1 = TimeGrid::uniform(1.0f64, 1).unwrap();
        let s1 = Schedule::new(g1, vec![0], &t).unwrap();
        assert_eq!(operator_at(&s1, &ops, 0.999).unwrap().get(0, 0), -2.0);
    }

    #[test]
    fn evolution_operator_identity_at_s_equals_t() {
        let (d, t) = diag_decomposition();
        let ops = assemble_all(&d, &t).unwrap();
        let g = TimeGrid::uniform(1.0f64, 4).unwrap();
        let s = draw_schedule(&g, &t, SeedSpec::new(0, 0));
        let e = evolution_operator(&s, &ops, 0.25, 0.25).unwrap();
        assert_eq!(e, DenseMatrix::identity(2));
    }

    #[test]
    fn deterministic_scheme_matches_full_exponential() {
        let (d, _) = diag_decomposition();
        let t = SubsetTable::deterministic(2).unwrap();
        let ops = assemble_all(&d, &t).unwrap();
        let g = TimeGrid::uniform(1.0f64, 1).unwrap();
        let s = Schedule::new(g, vec![0], &t).unwrap();
        let e = evolution_operator(&s, &ops, 0.7, 0.1).unwrap();
        let mut scaled = d.matrix().to_dense();
        scaled.scale(0.6);
        let expect = matrix_exponential(&scaled).unwrap();
        for i in 0..2 {
            assert!((e.get(i, i) - expect.get(i, i)).abs() < 1e-12);
        }
    }

    #[test]
    fn commuting_diagonal_product_matches_entrywise_exponential() {
        // schedule (1,2) on (0,h,2h) with diagonal parts: the product of the
        // two exponentials equals the exponential of the summed generators,
        // checked against entrywise scalar exponentials.
        let (d, t) = diag_decomposition();
        let ops = assemble_all(&d, &t).unwrap();
        let h = 0.5f64;
        let g = TimeGrid::uniform(1.0f64, 2).unwrap();
        let s = Schedule::new(g, vec![0, 1], &t).unwrap();
        let e = evolution_operator(&s, &ops, 1.0 - 1e-14, 0.0).unwrap();
        // up to the 1e-14 end trim, e = exp(2*A2*h) exp(2*A1*h)
        let expect0 = (-2.0f64 * h).exp();
        let expect1 = (-4.0f64 * h).exp();
        assert!((e.get(0, 0) - expect0).abs() < 1e-10);
        assert!((e.get(1, 1) - expect1).abs() < 1e-10);
    }

    #[test]
    fn semigroup_property_along_one_schedule() {
        let (d, t) = diag_decomposition();
        let ops = assemble_all(&d, &t).unwrap();
        let g = TimeGrid::uniform(1.0f64, 4).unwrap();
        let s = draw_schedule(&g, &t, SeedSpec::new(3, 0));
        let t_end = 1.0 - 1e-12;
        let full = evolution_operator(&s, &ops, t_end, 0.0).unwrap();
        let first = evolution_operator(&s, &ops, 0.5, 0.0).unwrap();
        let second = evolution_operator(&s, &ops, t_end, 0.5).unwrap();
        let prod = second.matmul(&first);
        for i in 0..2 {
            for j in 0..2 {
                assert!((full.get(i, j) - prod.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn contraction_under_dissipative_parts() {
        let (d, t) = diag_decomposition();
        let ops = assemble_all(&d, &t).unwrap();
        let g = TimeGrid::uniform(1.0f64, 8).unwrap();
        for r in 0..5 {
            let s = draw_schedule(&g, &t, SeedSpec::new(11, r));
            let e = evolution_operator(&s, &ops, 1.0 - 1e-12, 0.0).unwrap();
            let n = operator_norm(&e, 1e-10).unwrap();
            assert!(n <= 1.0 + 1e-9, "norm {n}");
        }
    }

    #[test]
    fn enumeration_total_probability_is_one() {
        let (_, t) = diag_decomposition();
        let g = TimeGrid::uniform(1.0f64, 6).unwrap();
        let total = enumerate_expectation(&g, &t, |_| Ok(1.0f64)).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumerated_mean_operator_is_a() {
        let (d, t) = diag_decomposition();
        let ops = assemble_all(&d, &t).unwrap();
        let g = TimeGrid::uniform(1.0f64, 4).unwrap();
        for probe in [0.0, 0.3, 0.9] {
            let mean = enumerate_expectation(&g, &t, |s| {
                Ok(operator_at(s, &ops, probe)?.to_dense())
            })
            .unwrap();
            let a = d.matrix().to_dense();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((mean.get(i, j) - a.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn enumerated_mean_squared_distance_is_variance() {
        let (d, t) = diag_decomposition();
        let ops = assemble_all(&d, &t).unwrap();
        let g = TimeGrid::uniform(1.0f64, 4).unwrap();
        let var = crate::splitting::variance(&d, &t).unwrap();
        let mean = enumerate_expectation(&g, &t, |s| {
            let m = operator_at(s, &ops, 0.1)?;
            let diff = DiffOpLocal {
                a: m,
                b: d.matrix(),
            };
            let n = operator_norm(&diff, 1e-10)?;
            Ok(n * n)
        })
        .unwrap();
        assert!((mean - var).abs() < 1e-8 * var.max(1.0));
    }

    // minimal local copy to avoid importing the splitting test helper
    struct DiffOpLocal<'a> {
        a: &'a CsrMatrix<f64>,
        b: &'a CsrMatrix<f64>,
    }
    impl<'a> crate::linalg::LinearOp<f64> for DiffOpLocal<'a> {
        fn op_rows(&self) -> usize {
            self.a.rows()
        }
        fn op_cols(&self) -> usize {
            self.a.cols()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            self.a.matvec(x, y);
            self.b.matvec_add(-1.0, x, y);
        }
        fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
            self.a.matvec_transpose(x, y);
            self.b.matvec_transpose_add(-1.0, x, y);
        }
    }

    #[test]
    fn enumeration_guard_trips() {
        let t = SubsetTable::<f64>::uniform_singletons(4).unwrap();
        let g = TimeGrid::uniform(1.0f64, 11).unwrap(); // 4^11 > 10^6
        let err = enumerate_expectation(&g, &t, |_| Ok(0.0f64)).unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { .. }));
    }

    #[test]
    fn schedule_csv_format() {
        let (_, t) = diag_decomposition();
        let g = TimeGrid::uniform(1.0f64, 2).unwrap();
        let s = Schedule::new(g, vec![1, 0], &t).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k,t_start,t_end,subset_id");
        assert_eq!(lines.next().unwrap(), "0,0,0.5,1");
        assert_eq!(lines.next().unwrap(), "1,0.5,1,0");
    }
}
