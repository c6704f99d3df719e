use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;
use crate::linalg::vector::Vector;
use crate::scalar::Scalar;

/// LU factorization with partial pivoting, PA = LU.
///
/// `lu` packs the unit-lower and upper factors; `pivots[k]` is the row swapped
/// with row `k` during elimination (LAPACK-style successive swaps).
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    pivots: Vec<usize>,
    n: usize,
}

/// Factor a square matrix. Fails on a pivot that is zero to working
/// precision relative to the matrix scale.
pub fn lu_factorize<T: Scalar>(m: &DenseMatrix<T>) -> Result<LuFactors<T>> {
    m.require_square("lu_factorize input")?;
    let n = m.rows();
    let mut lu = m.clone();
    let mut pivots = vec![0usize; n];
    let scale = m.max_abs().max(T::one());
    let tiny = scale * T::epsilon() * T::of_usize(n.max(1));
    for k in 0..n {
        let mut p = k;
        let mut pmax = lu.get(k, k).abs();
        for i in (k + 1)..n {
            let v = lu.get(i, k).abs();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax <= tiny {
            return Err(Error::SingularPivot {
                index: k,
                pivot: pmax.to_f64_lossy(),
            });
        }
        pivots[k] = p;
        if p != k {
            for j in 0..n {
                let a = lu.get(k, j);
                lu.set(k, j, lu.get(p, j));
                lu.set(p, j, a);
            }
        }
        let inv_piv = T::one() / lu.get(k, k);
        for i in (k + 1)..n {
            let lik = lu.get(i, k) * inv_piv;
            lu.set(i, k, lik);
            if lik != T::zero() {
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - lik * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
    }
    Ok(LuFactors { lu, pivots, n })
}

impl<T: Scalar> LuFactors<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        debug_assert_eq!(b.len(), self.n);
        for k in 0..self.n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
        }
        // Ly = Pb (unit lower)
        for i in 1..self.n {
            let row = self.lu.row(i);
            let mut acc = b[i];
            for j in 0..i {
                acc -= row[j] * b[j];
            }
            b[i] = acc;
        }
        // Ux = y
        for i in (0..self.n).rev() {
            let row = self.lu.row(i);
            let mut acc = b[i];
            for j in (i + 1)..self.n {
                acc -= row[j] * b[j];
            }
            b[i] = acc / row[i];
        }
    }

    /// Solve A^T x = b in place (reuses the same factors).
    pub fn solve_transpose_in_place(&self, b: &mut [T]) {
        debug_assert_eq!(b.len(), self.n);
        // A^T = U^T L^T P, solve U^T z = b (lower, non-unit)
        for i in 0..self.n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.lu.get(j, i) * b[j];
            }
            b[i] = acc / self.lu.get(i, i);
        }
        // L^T w = z (upper, unit)
        for i in (0..self.n).rev() {
            let mut acc = b[i];
            for j in (i + 1)..self.n {
                acc -= self.lu.get(j, i) * b[j];
            }
            b[i] = acc;
        }
        // x = P^T w: undo swaps in reverse order
        for k in (0..self.n).rev() {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }

    pub fn solve(&self, b: &Vector<T>) -> Vector<T> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_transpose(&self, b: &Vector<T>) -> Vector<T> {
        let mut x = b.clone();
        self.solve_transpose_in_place(&mut x);
        x
    }

    /// Solve against every column of a dense right-hand side.
    pub fn solve_matrix(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(b.rows(), self.n);
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        let mut col = vec![T::zero(); self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                col[i] = b.get(i, j);
            }
            self.solve_in_place(&mut col);
            for i in 0..self.n {
                out.set(i, j, col[i]);
            }
        }
        out
    }
}
