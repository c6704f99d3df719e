use crate::linalg::dense::DenseMatrix;
use crate::scalar::Scalar;

/// Compressed sparse row matrix.
///
/// Invariants: row offsets nondecreasing, column indices strictly increasing
/// within a row, no explicitly stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Build from (row, col, value) triplets. Duplicates are summed, exact
    /// zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            assert!(i < rows && j < cols, "triplet out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.drop_zeros();
        m
    }

    pub fn from_dense(d: &DenseMatrix<T>) -> Self {
        let mut indptr = vec![0usize; d.rows() + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..d.rows() {
            for j in 0..d.cols() {
                let v = d.get(i, j);
                if v != T::zero() {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr[i + 1] = indices.len();
        }
        Self {
            rows: d.rows(),
            cols: d.cols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                d.set(i, self.indices[k], self.values[k]);
            }
        }
        d
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != T::zero()) {
            return;
        }
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.values[k] != T::zero() {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        for k in self.indptr[i]..self.indptr[i + 1] {
            if self.indices[k] == j {
                return self.values[k];
            }
        }
        T::zero()
    }

    /// y = A x
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = T::zero();
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[i] = acc;
        }
    }

    /// y += alpha * A x
    pub fn matvec_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        for i in 0..self.rows {
            let mut acc = T::zero();
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[i] += alpha * acc;
        }
    }

    /// y = A^T x
    pub fn matvec_transpose(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for v in y.iter_mut() {
            *v = T::zero();
        }
        for i in 0..self.rows {
            let xi = x[i];
            if xi == T::zero() {
                continue;
            }
            for k in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[k]] += self.values[k] * xi;
            }
        }
    }

    /// y += alpha * A^T x
    pub fn matvec_transpose_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        for i in 0..self.rows {
            let xi = alpha * x[i];
            if xi == T::zero() {
                continue;
            }
            for k in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[k]] += self.values[k] * xi;
            }
        }
    }

    /// self + alpha * other, merged row by row in column order.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.rows {
            let (mut ka, enda) = (self.indptr[i], self.indptr[i + 1]);
            let (mut kb, endb) = (other.indptr[i], other.indptr[i + 1]);
            while ka < enda || kb < endb {
                let ja = if ka < enda { self.indices[ka] } else { usize::MAX };
                let jb = if kb < endb { other.indices[kb] } else { usize::MAX };
                if ja < jb {
                    indices.push(ja);
                    values.push(self.values[ka]);
                    ka += 1;
                } else if jb < ja {
                    indices.push(jb);
                    values.push(alpha * other.values[kb]);
                    kb += 1;
                } else {
                    indices.push(ja);
                    values.push(self.values[ka] + alpha * other.values[kb]);
                    ka += 1;
                    kb += 1;
                }
            }
            indptr[i + 1] = indices.len();
        }
        let mut m = Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        };
        m.drop_zeros();
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(T::one(), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(-T::one(), other)
    }

    /// Entrywise map over stored values.
    pub fn map_values(&self, mut f: impl FnMut(T) -> T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = f(*v);
        }
        out.drop_zeros();
        out
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                triplets.push((self.indices[k], i, self.values[k]));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets)
    }

    pub fn symmetric_part(&self) -> Self {
        self.add(&self.transpose()).map_values(|v| v * T::half())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Structural invariants from the type contract; used by tests and IO.
    pub fn check_invariants(&self) -> bool {
        if self.indptr.len() != self.rows + 1 || self.indptr[0] != 0 {
            return false;
        }
        if *self.indptr.last().unwrap() != self.indices.len() {
            return false;
        }
        for i in 0..self.rows {
            if self.indptr[i] > self.indptr[i + 1] {
                return false;
            }
            let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
            if !row.windows(2).all(|w| w[0] < w[1]) {
                return false;
            }
        }
        self.values.iter().all(|&v| v != T::zero())
    }
}
