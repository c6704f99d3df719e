use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;
use crate::linalg::lu::LuFactors;
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::Scalar;

/// Anything that can act as a linear operator and its transpose.
pub trait LinearOp<T: Scalar> {
    fn op_rows(&self) -> usize;
    fn op_cols(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
    fn apply_transpose(&self, x: &[T], y: &mut [T]);
}

impl<T: Scalar> LinearOp<T> for DenseMatrix<T> {
    fn op_rows(&self) -> usize {
        self.rows()
    }
    fn op_cols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec(x, y);
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        self.matvec_transpose(x, y);
    }
}

impl<T: Scalar> LinearOp<T> for CsrMatrix<T> {
    fn op_rows(&self) -> usize {
        self.rows()
    }
    fn op_cols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec(x, y);
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        self.matvec_transpose(x, y);
    }
}

/// Difference of two sparse operators, `a - b`, applied without forming it.
pub struct DiffOp<'a, T> {
    pub a: &'a CsrMatrix<T>,
    pub b: &'a CsrMatrix<T>,
}

impl<'a, T: Scalar> LinearOp<T> for DiffOp<'a, T> {
    fn op_rows(&self) -> usize {
        self.a.rows()
    }
    fn op_cols(&self) -> usize {
        self.a.cols()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.a.matvec(x, y);
        self.b.matvec_add(-T::one(), x, y);
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        self.a.matvec_transpose(x, y);
        self.b.matvec_transpose_add(-T::one(), x, y);
    }
}

/// `op * W` where `W` is given as precomputed LU factors of `W^{-1}`
/// (a resolvent weight applied by solving, never by forming the inverse).
pub struct ResolventWeightedOp<'a, T: Scalar, O: LinearOp<T>> {
    pub op: &'a O,
    pub w_inv: &'a LuFactors<T>,
    _marker: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar, O: LinearOp<T>> ResolventWeightedOp<'a, T, O> {
    pub fn new(op: &'a O, w_inv: &'a LuFactors<T>) -> Self {
        Self {
            op,
            w_inv,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<'a, T: Scalar, O: LinearOp<T>> LinearOp<T> for ResolventWeightedOp<'a, T, O> {
    fn op_rows(&self) -> usize {
        self.op.op_rows()
    }
    fn op_cols(&self) -> usize {
        self.w_inv.dim()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        let mut z = x.to_vec();
        self.w_inv.solve_in_place(&mut z);
        self.op.apply(&z, y);
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        self.op.apply_transpose(x, y);
        self.w_inv.solve_transpose_in_place(y);
    }
}

/// `op * W` for a dense weighting matrix `W`.
pub struct MatrixWeightedOp<'a, T: Scalar, O: LinearOp<T>> {
    pub op: &'a O,
    pub w: &'a DenseMatrix<T>,
    _marker: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar, O: LinearOp<T>> MatrixWeightedOp<'a, T, O> {
    pub fn new(op: &'a O, w: &'a DenseMatrix<T>) -> Self {
        Self {
            op,
            w,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<'a, T: Scalar, O: LinearOp<T>> LinearOp<T> for MatrixWeightedOp<'a, T, O> {
    fn op_rows(&self) -> usize {
        self.op.op_rows()
    }
    fn op_cols(&self) -> usize {
        self.w.cols()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        let mut z = vec![T::zero(); self.w.rows()];
        self.w.matvec(x, &mut z);
        self.op.apply(&z, y);
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        let mut z = vec![T::zero(); self.op.op_cols()];
        self.op.apply_transpose(x, &mut z);
        self.w.matvec_transpose(&z, y);
    }
}

pub const NORM_DEFAULT_TOL: f64 = 1e-10;
pub const NORM_ITERATION_CAP: usize = 50_000;
pub const NORM_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Largest singular value via power iteration on `m^T m`.
///
/// Deterministic: the start vector comes from a fixed-seed generator with
/// strictly positive entries. The estimate is the max over two independent
/// starts, which guards against an unlucky initial vector.
pub fn operator_norm<T: Scalar>(op: &impl LinearOp<T>, tol: T) -> Result<T> {
    let mut best = T::zero();
    for stream in 0..2u64 {
        let s = power_iteration_norm(op, tol, NORM_ITERATION_CAP, NORM_SEED, stream)?;
        best = best.max(s);
    }
    Ok(best)
}

fn power_iteration_norm<T: Scalar>(
    op: &impl LinearOp<T>,
    tol: T,
    cap: usize,
    seed: u64,
    stream: u64,
) -> Result<T> {
    let n = op.op_cols();
    let m = op.op_rows();
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "operator_norm requires nonzero dimensions".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut v: Vec<T> = (0..n)
        .map(|_| T::of(rng.random::<f64>() + 0.1))
        .collect();
    normalize(&mut v);
    let mut w = vec![T::zero(); m];
    let mut back = vec![T::zero(); n];
    let mut prev = T::zero();
    let mut sigma = T::zero();
    for it in 0..cap {
        op.apply(&v, &mut w);
        sigma = norm(&w);
        if sigma == T::zero() {
            return Ok(T::zero());
        }
        if (sigma - prev).abs() <= tol * sigma.max(T::min_positive_value()) && it > 0 {
            return Ok(sigma);
        }
        prev = sigma;
        op.apply_transpose(&w, &mut back);
        let nb = norm(&back);
        if nb == T::zero() {
            return Ok(sigma);
        }
        for (vi, bi) in v.iter_mut().zip(&back) {
            *vi = *bi / nb;
        }
    }
    Err(Error::NonConvergence {
        what: "operator norm power iteration",
        iterations: cap,
        estimate: sigma.to_f64_lossy(),
        gap: (sigma - prev).abs().to_f64_lossy(),
    })
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let n = norm(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x = *x / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_norm_is_one() {
        let m = DenseMatrix::<f64>::identity(5);
        let s = operator_norm(&m, 1e-10).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_norm_is_max_abs_entry() {
        let m = DenseMatrix::diag(&[-1.0f64, -2.0]);
        let s = operator_norm(&m, 1e-10).unwrap();
        assert!((s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn nilpotent_norm() {
        // [[0,2],[0,0]]: A^T A = diag(0,4), largest eigenvalue 4 by hand, so
        // the norm is 2.
        let m = DenseMatrix::from_rows(&[vec![0.0f64, 2.0], vec![0.0, 0.0]]);
        let s = operator_norm(&m, 1e-10).unwrap();
        assert!((s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_norm_is_zero() {
        let m = DenseMatrix::<f64>::zeros(3, 3);
        assert_eq!(operator_norm(&m, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn homogeneity_under_scaling() {
        let m = DenseMatrix::from_rows(&[vec![1.0f64, 2.0], vec![-0.5, 0.3]]);
        let base = operator_norm(&m, 1e-12).unwrap();
        for alpha in [-3.5f64, 0.25, 7.0] {
            let mut sm = m.clone();
            sm.scale(alpha);
            let s = operator_norm(&sm, 1e-12).unwrap();
            assert!((s - alpha.abs() * base).abs() < 1e-8 * base.max(1.0));
        }
    }
}
