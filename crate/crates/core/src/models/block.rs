//! Block splitting of symmetric diagonally dominant dense matrices into
//! P(P+1)/2 dissipative submatrices, plus a deterministic dense test system.

use crate::dynamics::LtiSystem;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, Vector};
use crate::optimizer::CostSpec;
use crate::scalar::Scalar;
use crate::splitting::{Decomposition, SubsetTable};

#[derive(Debug, Clone)]
pub struct BlockSplitConfig<T> {
    pub a: DenseMatrix<T>,
    pub e: Option<CsrMatrix<T>>,
    /// block count; must divide the matrix dimension
    pub p: usize,
}

/// Check strict rowwise diagonal dominance with negative diagonal:
/// -a_ii > sum of |a_ij| over j != i.
pub fn check_diagonal_dominance<T: Scalar>(a: &DenseMatrix<T>) -> Result<()> {
    a.require_square("block-split input")?;
    if !a.is_symmetric(T::of(1e-12)) {
        return Err(Error::InvalidArgument("block-split input must be symmetric".into()));
    }
    for i in 0..a.rows() {
        let mut off = T::zero();
        for j in 0..a.cols() {
            if j != i {
                off += a.get(i, j).abs();
            }
        }
        if -a.get(i, i) <= off {
            return Err(Error::NotDiagonallyDominant {
                row: i,
                diag: a.get(i, i).to_f64_lossy(),
                off_sum: off.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Split A into M = P(P+1)/2 parts indexed row-major over block pairs
/// (p, q) with q >= p; the table selects single parts uniformly.
///
/// Off-diagonal couplings become two-node matrices with -|a_ij| diagonals;
/// the dominance surplus a_ii + sum |a_ij| stays on the diagonal blocks, so
/// every part is dissipative by construction.
pub fn build_block_split<T: Scalar>(
    cfg: &BlockSplitConfig<T>,
) -> Result<(Decomposition<T>, SubsetTable<T>)> {
    check_diagonal_dominance(&cfg.a)?;
    let n = cfg.a.rows();
    let p_blocks = cfg.p;
    if p_blocks == 0 || n % p_blocks != 0 {
        return Err(Error::InvalidArgument(format!(
            "block count {p_blocks} must divide the dimension {n}"
        )));
    }
    let bs = n / p_blocks;
    let block = |p: usize| (p * bs)..((p + 1) * bs);

    let mut parts = Vec::with_capacity(p_blocks * (p_blocks + 1) / 2);
    for bp in 0..p_blocks {
        for bq in bp..p_blocks {
            let mut triplets: Vec<(usize, usize, T)> = Vec::new();
            if bp == bq {
                for i in block(bp) {
                    // dominance surplus of the full row
                    let mut surplus = cfg.a.get(i, i);
                    for j in 0..n {
                        if j != i {
                            surplus += cfg.a.get(i, j).abs();
                        }
                    }
                    triplets.push((i, i, surplus));
                    for j in (i + 1)..block(bp).end {
                        let c = cfg.a.get(i, j);
                        if c != T::zero() {
                            triplets.push((i, i, -c.abs()));
                            triplets.push((i, j, c));
                            triplets.push((j, i, c));
                            triplets.push((j, j, -c.abs()));
                        }
                    }
                }
            } else {
                for i in block(bp) {
                    for j in block(bq) {
                        let c = cfg.a.get(i, j);
                        if c != T::zero() {
                            triplets.push((i, i, -c.abs()));
                            triplets.push((i, j, c));
                            triplets.push((j, i, c));
                            triplets.push((j, j, -c.abs()));
                        }
                    }
                }
            }
            parts.push(CsrMatrix::from_triplets(n, n, &triplets));
        }
    }
    let m_parts = parts.len();
    let decomposition =
        Decomposition::from_matrix_and_parts(CsrMatrix::from_dense(&cfg.a), parts)?;
    let table = SubsetTable::uniform_singletons(m_parts)?;
    Ok((decomposition, table))
}

/// Deterministic dense symmetric dominant matrix with slowly decaying
/// off-diagonal couplings, the stand-in for externally supplied nonlocal
/// stiffness matrices in tests and timing runs.
pub fn synthetic_sdd<T: Scalar>(n: usize, coupling: T) -> DenseMatrix<T> {
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = T::of_usize(j - i);
            let v = coupling / d.powf(T::of(1.7));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let margin = T::of(1.05);
    for i in 0..n {
        let mut off = T::zero();
        for j in 0..n {
            if j != i {
                off += a.get(i, j).abs();
            }
        }
        a.set(i, i, -off * margin);
    }
    a
}

#[derive(Debug, Clone)]
pub struct SyntheticBlockModel<T> {
    pub system: LtiSystem<T>,
    pub cost: CostSpec<T>,
    pub decomposition: Decomposition<T>,
    pub table: SubsetTable<T>,
}

/// A complete dense test system on the rod [-L, L] with two interval
/// controls and full-domain observation, driven by the synthetic matrix.
pub fn synthetic_block_system<T: Scalar>(
    n: usize,
    p_blocks: usize,
    horizon: T,
) -> Result<SyntheticBlockModel<T>> {
    let a = synthetic_sdd(n, T::of(30.0));
    let (decomposition, table) = build_block_split(&BlockSplitConfig {
        a,
        e: None,
        p: p_blocks,
    })?;
    let l = T::of(5.0);
    let beta = T::of(0.4);
    let dx = T::two() * l / T::of_usize(n - 1);
    let coord = |i: usize| -l + dx * T::of_usize(i);
    let tol = T::of(1e-12) * l;
    let third = l / T::of(3.0);
    let two_thirds = third * T::two();
    let mut b = DenseMatrix::zeros(n, 2);
    for i in 0..n {
        let xi = coord(i);
        if xi >= -third - tol && xi <= tol {
            b.set(i, 0, T::one());
        }
        if xi >= third - tol && xi <= two_thirds + tol {
            b.set(i, 1, T::one());
        }
    }
    let x0 = Vector::from_fn(n, |i| {
        let xi = coord(i);
        (-beta * beta * xi * xi).exp() - (-beta * beta * l * l).exp()
    });
    let hundred = T::of(100.0);
    let mut q_triplets = Vec::with_capacity(n);
    for i in 0..n {
        let w = if i == 0 || i == n - 1 {
            dx * T::half()
        } else {
            dx
        };
        q_triplets.push((i, i, hundred * w));
    }
    let q = CsrMatrix::from_triplets(n, n, &q_triplets);
    let r = DenseMatrix::identity(2);
    let system = LtiSystem::new(decomposition.matrix().clone(), b, x0)?;
    let cost = CostSpec::new(q, r, horizon);
    Ok(SyntheticBlockModel {
        system,
        cost,
        decomposition,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::validate_dissipative;

    #[test]
    fn part_counts_by_block_count() {
        // M = P(P+1)/2: 4 -> 10, 8 -> 36, 16 -> 136, 32 -> 528
        for (p, m) in [(4usize, 10usize), (8, 36), (16, 136), (32, 528)] {
            let a = synthetic_sdd::<f64>(96, 1.0);
            let (d, t) = build_block_split(&BlockSplitConfig { a, e: None, p }).unwrap();
            assert_eq!(d.part_count(), m);
            assert_eq!(t.supported_count(), m);
            let pi = 2.0 / (p as f64 * (p as f64 + 1.0));
            // singleton scheme: inclusion probability = subset probability
            assert!((t.prob(0) - pi).abs() < 1e-15);
        }
    }

    #[test]
    fn parts_reconstruct_a() {
        let a = synthetic_sdd::<f64>(24, 2.0);
        let (d, _) = build_block_split(&BlockSplitConfig {
            a: a.clone(),
            e: None,
            p: 4,
        })
        .unwrap();
        let diff = d.matrix().add_scaled(-1.0, &CsrMatrix::from_dense(&a));
        assert!(diff.max_abs() <= 1e-10 * a.max_abs());
    }

    #[test]
    fn two_by_two_hand_example() {
        // A = [[-3,1],[1,-3]]: P=1 gives the single part A; P=2 gives
        // diag(-2,0), diag(0,-2) and [[-1,1],[1,-1]].
        let a = DenseMatrix::from_rows(&[vec![-3.0f64, 1.0], vec![1.0, -3.0]]);
        let (d1, _) = build_block_split(&BlockSplitConfig {
            a: a.clone(),
            e: None,
            p: 1,
        })
        .unwrap();
        assert_eq!(d1.part_count(), 1);
        assert_eq!(d1.parts()[0].to_dense(), a);

        let (d2, _) = build_block_split(&BlockSplitConfig { a, e: None, p: 2 }).unwrap();
        assert_eq!(d2.part_count(), 3);
        // row-major over (p,q) with q >= p: (0,0), (0,1), (1,1)
        assert_eq!(d2.parts()[0].to_dense(), DenseMatrix::diag(&[-2.0, 0.0]));
        assert_eq!(
            d2.parts()[1].to_dense(),
            DenseMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]])
        );
        assert_eq!(d2.parts()[2].to_dense(), DenseMatrix::diag(&[0.0, -2.0]));
    }

    #[test]
    fn dominance_violation_names_the_row() {
        let mut a = synthetic_sdd::<f64>(8, 1.0);
        a.set(3, 3, -0.01);
        let err = build_block_split(&BlockSplitConfig { a, e: None, p: 2 }).unwrap_err();
        match err {
            Error::NotDiagonallyDominant { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_part_is_dissipative() {
        let a = synthetic_sdd::<f64>(32, 3.0);
        let (d, _) = build_block_split(&BlockSplitConfig { a, e: None, p: 4 }).unwrap();
        assert!(validate_dissipative(&d).unwrap().is_empty());
    }
}
