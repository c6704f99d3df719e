//! Finite-difference heat rod with one-sided Neumann boundary rows, interval
//! control, and observation of the left half of the rod.

use crate::dynamics::LtiSystem;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, Vector};
use crate::optimizer::CostSpec;
use crate::scalar::Scalar;
use crate::splitting::{Decomposition, SubsetTable};

/// Which decomposition/probability scheme drives the randomization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatCase {
    /// two parts, singleton subsets at probability 1/2
    I,
    /// three parts, singleton subsets at probability 1/3
    II,
    /// four parts, singleton subsets at probability 1/4
    III,
    /// four parts, subsets {1,3} and {2,4} at probability 1/2
    IV,
}

impl HeatCase {
    pub fn part_count(self) -> usize {
        match self {
            HeatCase::I => 2,
            HeatCase::II => 3,
            HeatCase::III | HeatCase::IV => 4,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(HeatCase::I),
            "ii" | "2" => Ok(HeatCase::II),
            "iii" | "3" => Ok(HeatCase::III),
            "iv" | "4" => Ok(HeatCase::IV),
            other => Err(Error::InvalidArgument(format!("unknown case '{other}'"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HeatCase::I => "i",
            HeatCase::II => "ii",
            HeatCase::III => "iii",
            HeatCase::IV => "iv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Heat1dConfig<T> {
    pub nodes: usize,
    pub half_length: T,
    pub horizon: T,
    pub case: HeatCase,
}

impl<T: Scalar> Default for Heat1dConfig<T> {
    fn default() -> Self {
        Self {
            nodes: 61,
            half_length: T::of(1.5),
            horizon: T::half(),
            case: HeatCase::I,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Heat1dModel<T> {
    pub system: LtiSystem<T>,
    pub cost: CostSpec<T>,
    pub decomposition: Decomposition<T>,
    pub table: SubsetTable<T>,
}

/// Assemble the model.
///
/// The stencil spacing in the system matrix is `half_length / (nodes - 1)`
/// (the scale on which the reference variance table is defined), while the
/// node coordinates span the full rod `[-L, L]` with geometric spacing
/// `2 half_length / (nodes - 1)`; the control acts on `[-L/3, 0]` and the
/// state cost observes `[-L, 0]`.
pub fn build_heat1d<T: Scalar>(cfg: &Heat1dConfig<T>) -> Result<Heat1dModel<T>> {
    let n_nodes = cfg.nodes;
    if n_nodes < 3 {
        return Err(Error::InvalidArgument("need at least 3 nodes".into()));
    }
    let n = n_nodes - 1;
    let m_parts = cfg.case.part_count();
    if n % m_parts != 0 {
        return Err(Error::InvalidArgument(format!(
            "node count {} gives {} stencil blocks, not divisible into {} parts",
            n_nodes, n, m_parts
        )));
    }
    let l = cfg.half_length;
    let stencil_dx = l / T::of_usize(n);
    let scale = T::one() / (stencil_dx * stencil_dx);
    let node_dx = T::two() * l / T::of_usize(n);

    // parts: contiguous aggregates of the elementary two-node stencils
    let mut parts = Vec::with_capacity(m_parts);
    for m in 0..m_parts {
        let lo = n * m / m_parts + 1; // 1-based stencil index range [lo, hi]
        let hi = n * (m + 1) / m_parts;
        let mut triplets = Vec::new();
        for i in lo..=hi {
            // stencil i couples nodes i-1 and i (0-based)
            let (a11, a12, a21, a22) = if i == 1 {
                (-T::two(), T::two(), T::one(), -T::one())
            } else if i == n {
                (-T::one(), T::one(), T::two(), -T::two())
            } else {
                (-T::one(), T::one(), T::one(), -T::one())
            };
            let r = i - 1;
            triplets.push((r, r, a11 * scale));
            triplets.push((r, r + 1, a12 * scale));
            triplets.push((r + 1, r, a21 * scale));
            triplets.push((r + 1, r + 1, a22 * scale));
        }
        parts.push(CsrMatrix::from_triplets(n_nodes, n_nodes, &triplets));
    }
    // dissipative in the trapezoid-weighted inner product
    let mut weights = Vector::from_vec(vec![T::one(); n_nodes]);
    weights[0] = T::half();
    weights[n_nodes - 1] = T::half();
    let decomposition = Decomposition::from_parts(parts)?.with_inner_product_weights(weights);

    let table = match cfg.case {
        HeatCase::I | HeatCase::II | HeatCase::III => SubsetTable::uniform_singletons(m_parts)?,
        HeatCase::IV => SubsetTable::new(4, &[(vec![0, 2], T::half()), (vec![1, 3], T::half())])?,
    };

    let coord = |i: usize| -l + node_dx * T::of_usize(i);
    let tol = T::of(1e-12) * l;

    // control indicator on [-L/3, 0]
    let third = l / T::of(3.0);
    let mut b = DenseMatrix::zeros(n_nodes, 1);
    for i in 0..n_nodes {
        let xi = coord(i);
        if xi >= -third - tol && xi <= tol {
            b.set(i, 0, T::one());
        }
    }

    // initial profile
    let x0 = Vector::from_fn(n_nodes, |i| {
        let xi = coord(i);
        (-xi * xi).exp() + xi * xi * (-l * l).exp()
    });

    // state weight: 100 * trapezoid quadrature restricted to [-L, 0]
    let observed: Vec<usize> = (0..n_nodes).filter(|&i| coord(i) <= tol).collect();
    let hundred = T::of(100.0);
    let mut q_triplets = Vec::with_capacity(observed.len());
    for (pos, &i) in observed.iter().enumerate() {
        let w = if pos == 0 || pos == observed.len() - 1 {
            node_dx * T::half()
        } else {
            node_dx
        };
        q_triplets.push((i, i, hundred * w));
    }
    let q = CsrMatrix::from_triplets(n_nodes, n_nodes, &q_triplets);
    let r = DenseMatrix::identity(1);

    let system = LtiSystem::new(decomposition.matrix().clone(), b, x0)?;
    let cost = CostSpec::new(q, r, cfg.horizon);
    Ok(Heat1dModel {
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

    fn model(case: HeatCase) -> Heat1dModel<f64> {
        build_heat1d(&Heat1dConfig {
            case,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn corner_entry_matches_stencil_scale() {
        // stencil dx = L/(N-1) = 0.025, so [A]_00 = -2/dx^2 = -3200
        let m = model(HeatCase::I);
        assert!((m.system.a.get(0, 0) + 3200.0).abs() < 1e-9);
    }

    #[test]
    fn all_rows_sum_to_zero() {
        // interior stencil rows (1,-2,1) and boundary rows (-2,2), (2,-2)
        let m = model(HeatCase::I);
        let a = &m.system.a;
        for i in 0..61 {
            let s: f64 = a.row_entries(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-9, "row {i} sums to {s}");
        }
        assert!((a.get(0, 1) - 3200.0).abs() < 1e-9);
        assert!((a.get(60, 59) - 3200.0).abs() < 1e-9);
    }

    #[test]
    fn two_part_split_interface_entries() {
        // both halves own half the stiffness at the shared interface node:
        // each contributes -1/dx^2 = -1600 on the diagonal there
        let m = model(HeatCase::I);
        let parts = m.decomposition.parts();
        assert_eq!(parts.len(), 2);
        assert!((parts[0].get(30, 30) + 1600.0).abs() < 1e-9);
        assert!((parts[1].get(30, 30) + 1600.0).abs() < 1e-9);
        // part 1 occupies the leading 31x31 block, part 2 the trailing one
        assert_eq!(parts[0].get(31, 31), 0.0);
        assert_eq!(parts[1].get(29, 29), 0.0);
    }

    #[test]
    fn parts_are_dissipative_in_the_weighted_inner_product() {
        for case in [HeatCase::I, HeatCase::II, HeatCase::III, HeatCase::IV] {
            let m = model(case);
            let v = validate_dissipative(&m.decomposition).unwrap();
            assert!(v.is_empty(), "case {:?}: {:?}", case, v);
        }
    }

    #[test]
    fn divisibility_violation_is_rejected() {
        let err = build_heat1d(&Heat1dConfig::<f64> {
            nodes: 62, // n = 61 not divisible by 2
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn control_and_observation_supports() {
        let m = model(HeatCase::I);
        // nodes span [-L, L]; control nodes have coordinates in [-L/3, 0]
        let b = &m.system.b;
        let count = (0..61).filter(|&i| b.get(i, 0) != 0.0).count();
        assert_eq!(count, 11); // xi in {-0.5, ..., 0} at spacing 0.05
        assert_eq!(b.get(20, 0), 1.0);
        assert_eq!(b.get(30, 0), 1.0);
        assert_eq!(b.get(31, 0), 0.0);
        // observed nodes: [-L, 0] = first 31 nodes
        let q = &m.cost.q;
        assert!(q.get(30, 30) > 0.0);
        assert_eq!(q.get(31, 31), 0.0);
        // interior quadrature weight 100 * dx_geo
        assert!((q.get(10, 10) - 100.0 * 0.05).abs() < 1e-12);
        assert!((q.get(0, 0) - 50.0 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn initial_profile_values() {
        let m = model(HeatCase::I);
        // at xi = -L: e^{-L^2} + L^2 e^{-L^2}; derivative-free endpoints
        let l: f64 = 1.5;
        let expect = (-l * l).exp() + l * l * (-l * l).exp();
        assert!((m.system.x0[0] - expect).abs() < 1e-14);
        // at xi = 0 (node 30): 1 + 0
        assert!((m.system.x0[30] - 1.0).abs() < 1e-14);
    }
}
