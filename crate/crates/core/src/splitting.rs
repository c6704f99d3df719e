//! Matrix decompositions A = sum of A_m, subset probability tables with the
//! derived inclusion probabilities, assembled subset operators, and the
//! variance functionals that govern every error estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    lu_factorize, operator_norm, symmetric_max_eigenvalue, CsrMatrix, DenseMatrix, DiffOp,
    MatrixWeightedOp, ResolventWeightedOp, Vector,
};
use crate::scalar::Scalar;

/// Tolerance on the probability-sum constraint.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// A splitting of a square matrix into parts that sum back to it.
///
/// `inner_product_weights`, when present, holds the diagonal of an SPD matrix
/// H defining the inner product in which the parts are dissipative. The
/// finite-difference heat stencils with one-sided boundary rows need the
/// trapezoid weight for this; symmetric splittings leave it empty.
#[derive(Debug, Clone)]
pub struct Decomposition<T> {
    a: CsrMatrix<T>,
    parts: Vec<CsrMatrix<T>>,
    inner_product_weights: Option<Vector<T>>,
}

impl<T: Scalar> Decomposition<T> {
    /// Build from parts; the full matrix is the in-order left fold of the
    /// parts, so a subset operator over all parts with unit inclusion
    /// probabilities reproduces it bit for bit.
    pub fn from_parts(parts: Vec<CsrMatrix<T>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("decomposition needs at least one part".into()));
        }
        let n = parts[0].rows();
        for (m, p) in parts.iter().enumerate() {
            if !p.is_square() || p.rows() != n {
                return Err(Error::Dimension(format!(
                    "part {m} is {}x{}, expected {n}x{n}",
                    p.rows(),
                    p.cols()
                )));
            }
        }
        let mut a = parts[0].clone();
        for p in &parts[1..] {
            a = a.add(p);
        }
        Ok(Self {
            a,
            parts,
            inner_product_weights: None,
        })
    }

    /// Build from an explicitly given full matrix, checking that the parts
    /// sum back to it within `1e-10 * max |a|`.
    pub fn from_matrix_and_parts(a: CsrMatrix<T>, parts: Vec<CsrMatrix<T>>) -> Result<Self> {
        let d = Self::from_parts(parts)?;
        let residual = d.a.add_scaled(-T::one(), &a).max_abs();
        let tol = T::of(1e-10) * a.max_abs().max(T::one());
        if residual > tol {
            return Err(Error::InvalidArgument(format!(
                "parts do not sum to the given matrix: residual {residual:e} > {tol:e}"
            )));
        }
        Ok(Self { a, ..d })
    }

    pub fn with_inner_product_weights(mut self, weights: Vector<T>) -> Self {
        assert_eq!(weights.len(), self.dim());
        self.inner_product_weights = Some(weights);
        self
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.a
    }

    pub fn parts(&self) -> &[CsrMatrix<T>] {
        &self.parts
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn inner_product_weights(&self) -> Option<&Vector<T>> {
        self.inner_product_weights.as_ref()
    }
}

/// Subsets of part indices with their selection probabilities and the derived
/// inclusion probability of each part. Only supported subsets are stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetTable<T> {
    part_count: usize,
    subsets: Vec<Vec<usize>>,
    probs: Vec<T>,
    pis: Vec<T>,
}

impl<T: Scalar> SubsetTable<T> {
    /// Validates the probability sum, derives inclusion probabilities, merges
    /// duplicate subsets, and drops zero-probability subsets.
    pub fn new(part_count: usize, spec: &[(Vec<usize>, T)]) -> Result<Self> {
        let mut canonical: Vec<(Vec<usize>, T)> = Vec::new();
        let mut sum = 0.0f64;
        for (subset, p) in spec {
            if p.to_f64_lossy() < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "negative probability {p} for subset {subset:?}"
                )));
            }
            let mut ids = subset.clone();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != subset.len() {
                return Err(Error::InvalidSubset(format!(
                    "subset {subset:?} contains duplicate part indices"
                )));
            }
            if let Some(&bad) = ids.iter().find(|&&m| m >= part_count) {
                return Err(Error::InvalidSubset(format!(
                    "part index {bad} out of range for {part_count} parts"
                )));
            }
            sum += p.to_f64_lossy();
            if let Some(existing) = canonical.iter_mut().find(|(s, _)| *s == ids) {
                existing.1 += *p;
            } else {
                canonical.push((ids, *p));
            }
        }
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::ProbabilitySum {
                sum,
                tol: PROBABILITY_SUM_TOL,
            });
        }
        canonical.retain(|(_, p)| *p > T::zero());
        let mut pis = vec![T::zero(); part_count];
        for (subset, p) in &canonical {
            for &m in subset {
                pis[m] += *p;
            }
        }
        let zero_parts: Vec<usize> = (0..part_count).filter(|&m| pis[m] <= T::zero()).collect();
        if !zero_parts.is_empty() {
            return Err(Error::ZeroInclusion { parts: zero_parts });
        }
        let (subsets, probs) = canonical.into_iter().unzip();
        Ok(Self {
            part_count,
            subsets,
            probs,
            pis,
        })
    }

    /// One singleton subset per part, uniform probability 1/M.
    pub fn uniform_singletons(part_count: usize) -> Result<Self> {
        let p = T::one() / T::of_usize(part_count);
        let spec: Vec<(Vec<usize>, T)> = (0..part_count).map(|m| (vec![m], p)).collect();
        Self::new(part_count, &spec)
    }

    /// All subsets of the given size, uniform probability 1/C(M, size).
    pub fn uniform_subsets_of_size(part_count: usize, size: usize) -> Result<Self> {
        if size == 0 || size > part_count {
            return Err(Error::InvalidArgument(format!(
                "subset size {size} incompatible with {part_count} parts"
            )));
        }
        let subsets = combinations(part_count, size);
        let p = T::one() / T::of_usize(subsets.len());
        let spec: Vec<(Vec<usize>, T)> = subsets.into_iter().map(|s| (s, p)).collect();
        Self::new(part_count, &spec)
    }

    /// The degenerate scheme: the full index set with probability one.
    pub fn deterministic(part_count: usize) -> Result<Self> {
        Self::new(part_count, &[((0..part_count).collect(), T::one())])
    }

    pub fn part_count(&self) -> usize {
        self.part_count
    }

    pub fn supported_count(&self) -> usize {
        self.subsets.len()
    }

    pub fn subset(&self, idx: usize) -> &[usize] {
        &self.subsets[idx]
    }

    pub fn prob(&self, idx: usize) -> T {
        self.probs[idx]
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn inclusion_probabilities(&self) -> &[T] {
        &self.pis
    }
}

/// All size-k subsets of {0..n}, lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let needed = k - current.len();
        for i in start..=(n - needed) {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    if k <= n {
        rec(0, n, k, &mut current, &mut out);
    }
    out
}

/// The matrix a randomized step actually applies: the inclusion-scaled sum
/// of the parts selected by one subset.
#[derive(Debug, Clone)]
pub struct SubsetOperator<T> {
    pub subset_idx: usize,
    pub matrix: CsrMatrix<T>,
}

/// Assemble sum over m in S of A_m / pi_m, left-folded in sorted part order.
/// The empty subset yields the zero matrix.
pub fn assemble_subset_operator<T: Scalar>(
    d: &Decomposition<T>,
    table: &SubsetTable<T>,
    subset_idx: usize,
) -> Result<SubsetOperator<T>> {
    if subset_idx >= table.supported_count() {
        return Err(Error::InvalidSubset(format!(
            "subset index {subset_idx} out of range ({} supported)",
            table.supported_count()
        )));
    }
    if table.part_count() != d.part_count() {
        return Err(Error::Dimension(format!(
            "table has {} parts, decomposition has {}",
            table.part_count(),
            d.part_count()
        )));
    }
    let pis = table.inclusion_probabilities();
    let mut acc: Option<CsrMatrix<T>> = None;
    for &m in table.subset(subset_idx) {
        let scaled = d.parts()[m].map_values(|v| v / pis[m]);
        acc = Some(match acc {
            None => scaled,
            Some(a) => a.add(&scaled),
        });
    }
    Ok(SubsetOperator {
        subset_idx,
        matrix: acc.unwrap_or_else(|| CsrMatrix::zeros(d.dim(), d.dim())),
    })
}

/// Assemble every supported subset once.
pub fn assemble_all<T: Scalar>(
    d: &Decomposition<T>,
    table: &SubsetTable<T>,
) -> Result<Vec<SubsetOperator<T>>> {
    (0..table.supported_count())
        .map(|idx| assemble_subset_operator(d, table, idx))
        .collect()
}

/// || sum over subsets of p * A_subset  -  A ||. Zero (to rounding) for every
/// valid table because the inclusion scaling makes the expectation exact.
pub fn expectation_identity_residual<T: Scalar>(
    d: &Decomposition<T>,
    table: &SubsetTable<T>,
) -> Result<T> {
    let mut acc = CsrMatrix::zeros(d.dim(), d.dim());
    for idx in 0..table.supported_count() {
        let op = assemble_subset_operator(d, table, idx)?;
        acc = acc.add_scaled(table.prob(idx), &op.matrix);
    }
    let diff = acc.add_scaled(-T::one(), d.matrix());
    operator_norm(&diff, T::of(1e-10))
}

/// How a weighting matrix W is supplied to the weighted variance.
pub enum WeightSpec<'a, T> {
    Identity,
    /// Explicit invertible matrix.
    Matrix(&'a DenseMatrix<T>),
    /// W = (A - lambda I)^{-1}, applied by solving, never formed.
    Resolvent { lambda: T },
}

/// Probability-weighted mean squared operator-norm distance of the subset
/// operators from A.
pub fn variance<T: Scalar>(d: &Decomposition<T>, table: &SubsetTable<T>) -> Result<T> {
    variance_weighted(d, table, &WeightSpec::Identity)
}

/// Same with a right weight W: sum over subsets of p * ||(A_subset - A) W||^2.
pub fn variance_weighted<T: Scalar>(
    d: &Decomposition<T>,
    table: &SubsetTable<T>,
    weight: &WeightSpec<T>,
) -> Result<T> {
    let tol = T::of(1e-10);
    let resolvent_lu = match weight {
        WeightSpec::Resolvent { lambda } => {
            let mut shifted = d.matrix().to_dense();
            for i in 0..shifted.rows() {
                let v = shifted.get(i, i) - *lambda;
                shifted.set(i, i, v);
            }
            Some(lu_factorize(&shifted).map_err(|e| Error::SingularWeight(e.to_string()))?)
        }
        _ => None,
    };
    if let WeightSpec::Matrix(w) = weight {
        lu_factorize(w).map_err(|e| Error::SingularWeight(e.to_string()))?;
    }
    let mut total = T::zero();
    for idx in 0..table.supported_count() {
        let op = assemble_subset_operator(d, table, idx)?;
        let diff = DiffOp {
            a: &op.matrix,
            b: d.matrix(),
        };
        let s = match weight {
            WeightSpec::Identity => operator_norm(&diff, tol)?,
            WeightSpec::Matrix(w) => operator_norm(&MatrixWeightedOp::new(&diff, w), tol)?,
            WeightSpec::Resolvent { .. } => operator_norm(
                &ResolventWeightedOp::new(&diff, resolvent_lu.as_ref().unwrap()),
                tol,
            )?,
        };
        total += table.prob(idx) * s * s;
    }
    Ok(total)
}

/// The probability for selecting A_1 alone that minimizes the two-part
/// singleton variance: ||A_1|| / (||A_1|| + ||A_2||).
pub fn optimal_two_block_probability<T: Scalar>(
    a1: &CsrMatrix<T>,
    a2: &CsrMatrix<T>,
) -> Result<T> {
    let tol = T::of(1e-10);
    let n1 = operator_norm(a1, tol)?;
    let n2 = operator_norm(a2, tol)?;
    if n1 + n2 <= T::zero() {
        return Err(Error::InvalidArgument(
            "both blocks have zero norm; the optimal probability is undefined".into(),
        ));
    }
    Ok(n1 / (n1 + n2))
}

/// Dissipativity check tolerance: lambda_max <= 1e-8 * max(1, ||m||).
pub const DISSIPATIVITY_TOL_FACTOR: f64 = 1e-8;

/// Parts whose symmetric part (in the decomposition's inner product, when a
/// weight is attached) has a positive maximal eigenvalue beyond tolerance.
/// Empty means every part generates a contraction semigroup.
pub fn validate_dissipative<T: Scalar>(d: &Decomposition<T>) -> Result<Vec<(usize, T)>> {
    let eig_tol = T::of(1e-9);
    let mut violations = Vec::new();
    for (m, part) in d.parts().iter().enumerate() {
        let weighted = match d.inner_product_weights() {
            None => part.clone(),
            Some(h) => {
                // dissipative in <x,y>_H  <=>  sym(H A) negative semidefinite
                let mut triplets = Vec::with_capacity(part.nnz());
                for i in 0..part.rows() {
                    for (j, v) in part.row_entries(i) {
                        triplets.push((i, j, h[i] * v));
                    }
                }
                CsrMatrix::from_triplets(part.rows(), part.cols(), &triplets)
            }
        };
        let sym = weighted.symmetric_part();
        let lam = symmetric_max_eigenvalue(&sym, eig_tol)?;
        let norm = operator_norm(&weighted, T::of(1e-8))?;
        let tol = T::of(DISSIPATIVITY_TOL_FACTOR) * norm.max(T::one());
        if lam > tol {
            violations.push((m, lam));
        }
    }
    Ok(violations)
}

/// Serializable splitting description: Matrix Market file per part plus the
/// supported (subset, probability) pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplittingSpec {
    /// Matrix Market paths, one per part.
    pub parts: Vec<String>,
    pub subsets: Vec<SubsetSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetSpec {
    /// 0-based part indices.
    pub ids: Vec<usize>,
    pub p: f64,
}

impl SplittingSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("splitting spec JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("splitting spec serializes")
    }

    /// Load the referenced matrices (relative paths resolved against `base`).
    pub fn load<T: Scalar>(&self, base: &std::path::Path) -> Result<(Decomposition<T>, SubsetTable<T>)> {
        let mut parts = Vec::with_capacity(self.parts.len());
        for rel in &self.parts {
            let path = base.join(rel);
            parts.push(crate::linalg::mm::read_csr::<T>(&path)?);
        }
        let d = Decomposition::from_parts(parts)?;
        let spec: Vec<(Vec<usize>, T)> = self
            .subsets
            .iter()
            .map(|s| (s.ids.clone(), T::of(s.p)))
            .collect();
        let table = SubsetTable::new(d.part_count(), &spec)?;
        Ok((d, table))
    }
}
