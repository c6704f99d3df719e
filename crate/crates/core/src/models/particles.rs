//! Interacting particles as a splitting: one part per ordered interaction
//! pair, one supported subset per batch partition, each at probability 1/N_p.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::scalar::Scalar;
use crate::splitting::{Decomposition, SubsetTable};

const PARTITION_LIMIT: u128 = 100_000;

#[derive(Debug, Clone)]
pub enum CoefficientSpec<T> {
    /// a_ij identical for every pair
    Uniform(T),
    /// explicit coefficient matrix (diagonal ignored)
    Matrix(DenseMatrix<T>),
}

#[derive(Debug, Clone)]
pub struct ParticleConfig<T> {
    pub particles: usize,
    pub batch_size: usize,
    pub coefficients: CoefficientSpec<T>,
}

#[derive(Debug, Clone)]
pub struct ParticleModel<T> {
    pub decomposition: Decomposition<T>,
    pub table: SubsetTable<T>,
    /// all batch partitions, each a list of sorted batches
    pub partitions: Vec<Vec<Vec<usize>>>,
    pub partition_count: u64,
    /// how many partitions co-batch each ordered pair (same for all parts)
    pub inclusion_counts: Vec<u64>,
}

/// Part index of the ordered pair (i, j), i != j: row-major with the
/// diagonal removed.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

/// N! / ((P!)^{N/P} (N/P)!) with overflow-checked integer arithmetic.
pub fn partition_count(n: usize, p: usize) -> Result<u128> {
    if p < 2 || n % p != 0 {
        return Err(Error::InvalidArgument(format!(
            "batch size {p} must be >= 2 and divide the particle count {n}"
        )));
    }
    // multiply batch choices incrementally: prod over r of C(n - r p - 1, p - 1)
    // (anchor the smallest remaining index, choose its p-1 companions)
    let mut total: u128 = 1;
    let mut remaining = n;
    while remaining > 0 {
        let c = binomial((remaining - 1) as u128, (p - 1) as u128)?;
        total = total
            .checked_mul(c)
            .ok_or(Error::EnumerationTooLarge {
                count: u128::MAX,
                limit: PARTITION_LIMIT,
            })?;
        remaining -= p;
    }
    Ok(total)
}

fn binomial(n: u128, k: u128) -> Result<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul(n - i)
            .ok_or(Error::EnumerationTooLarge {
                count: u128::MAX,
                limit: PARTITION_LIMIT,
            })?;
        acc /= i + 1;
    }
    Ok(acc)
}

/// All partitions of {0..n} into batches of size p, anchored on the smallest
/// free index so each partition appears exactly once.
pub fn enumerate_partitions(n: usize, p: usize) -> Result<Vec<Vec<Vec<usize>>>> {
    let count = partition_count(n, p)?;
    if count > PARTITION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: PARTITION_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut free: Vec<usize> = (0..n).collect();
    let mut current: Vec<Vec<usize>> = Vec::new();
    fn rec(
        free: &mut Vec<usize>,
        p: usize,
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if free.is_empty() {
            out.push(current.clone());
            return;
        }
        let anchor = free[0];
        let rest: Vec<usize> = free[1..].to_vec();
        for combo in crate::splitting::combinations(rest.len(), p - 1) {
            let mut batch = vec![anchor];
            batch.extend(combo.iter().map(|&c| rest[c]));
            let mut next_free: Vec<usize> = rest
                .iter()
                .copied()
                .filter(|x| !batch.contains(x))
                .collect();
            current.push(batch);
            rec(&mut next_free, p, current, out);
            current.pop();
        }
    }
    rec(&mut free, p, &mut current, &mut out);
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

pub fn build_particles<T: Scalar>(cfg: &ParticleConfig<T>) -> Result<ParticleModel<T>> {
    let n = cfg.particles;
    let p = cfg.batch_size;
    let partitions = enumerate_partitions(n, p)?;
    let count = partitions.len() as u64;

    let coeff = |i: usize, j: usize| -> T {
        match &cfg.coefficients {
            CoefficientSpec::Uniform(a) => *a,
            CoefficientSpec::Matrix(m) => m.get(i, j),
        }
    };

    let scale = T::one() / T::of_usize(n - 1);
    let mut parts = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let a = coeff(i, j) * scale;
            parts.push(CsrMatrix::from_triplets(
                n,
                n,
                &[(i, i, -a), (i, j, a)],
            ));
        }
    }
    let decomposition = Decomposition::from_parts(parts)?;

    let prob = T::one() / T::of_usize(partitions.len());
    let mut spec = Vec::with_capacity(partitions.len());
    for partition in &partitions {
        let mut ids = Vec::new();
        for batch in partition {
            for &i in batch {
                for &j in batch {
                    if i != j {
                        ids.push(pair_index(n, i, j));
                    }
                }
            }
        }
        ids.sort_unstable();
        spec.push((ids, prob));
    }
    let table = SubsetTable::new(n * (n - 1), &spec)?;

    let mut inclusion_counts = vec![0u64; n * (n - 1)];
    for partition in &partitions {
        for batch in partition {
            for &i in batch {
                for &j in batch {
                    if i != j {
                        inclusion_counts[pair_index(n, i, j)] += 1;
                    }
                }
            }
        }
    }

    Ok(ParticleModel {
        decomposition,
        table,
        partitions,
        partition_count: count,
        inclusion_counts,
    })
}

impl<T: Scalar> ParticleModel<T> {
    /// Exact rational identity: every part's inclusion probability equals
    /// (P - 1)/(N - 1). Returns the offending part on failure.
    pub fn verify_inclusion_identity(&self, batch_size: usize) -> std::result::Result<(), usize> {
        let n = self.decomposition.dim();
        let expected = Ratio::new((batch_size - 1) as u64, (n - 1) as u64);
        for (m, &c) in self.inclusion_counts.iter().enumerate() {
            if Ratio::new(c, self.partition_count) != expected {
                return Err(m);
            }
        }
        Ok(())
    }
}
