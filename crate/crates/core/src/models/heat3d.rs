//! Heat cube: symmetric grid-graph Laplacian split into randomly grouped
//! two-node pair matrices, flux control on the top face, observation of one
//! side face.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::LtiSystem;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, Vector};
use crate::optimizer::CostSpec;
use crate::scalar::Scalar;
use crate::splitting::{Decomposition, SubsetTable};

#[derive(Debug, Clone)]
pub struct Heat3dConfig<T> {
    pub nodes_per_axis: usize,
    pub half_length: T,
    pub horizon: T,
    /// number of groups the pair matrices are divided into
    pub groups: usize,
    /// how many groups are active simultaneously in each interval
    pub simultaneous: usize,
    pub grouping_seed: u64,
}

impl<T: Scalar> Default for Heat3dConfig<T> {
    fn default() -> Self {
        Self {
            nodes_per_axis: 16,
            half_length: T::of(0.75),
            horizon: T::two(),
            groups: 6,
            simultaneous: 3,
            grouping_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Heat3dModel<T> {
    pub system: LtiSystem<T>,
    pub cost: CostSpec<T>,
    pub decomposition: Decomposition<T>,
    pub table: SubsetTable<T>,
    /// group sizes after the seeded shuffle (they differ by at most one)
    pub group_sizes: Vec<usize>,
}

/// Node pairs adjacent along one axis; every pair carries the uniform
/// coupling 1/dx^2. There are 3 (n-1) n^2 of them on an n^3 grid.
pub fn adjacent_pairs(n: usize) -> Vec<(usize, usize)> {
    let flat = |ix: usize, iy: usize, iz: usize| ix + n * (iy + n * iz);
    let mut pairs = Vec::with_capacity(3 * (n - 1) * n * n);
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                if ix + 1 < n {
                    pairs.push((flat(ix, iy, iz), flat(ix + 1, iy, iz)));
                }
                if iy + 1 < n {
                    pairs.push((flat(ix, iy, iz), flat(ix, iy + 1, iz)));
                }
                if iz + 1 < n {
                    pairs.push((flat(ix, iy, iz), flat(ix, iy, iz + 1)));
                }
            }
        }
    }
    pairs
}

pub fn build_heat3d<T: Scalar>(cfg: &Heat3dConfig<T>) -> Result<Heat3dModel<T>> {
    let n = cfg.nodes_per_axis;
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 nodes per axis".into()));
    }
    if cfg.simultaneous == 0 || cfg.simultaneous > cfg.groups {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= simultaneous ({}) <= groups ({})",
            cfg.simultaneous, cfg.groups
        )));
    }
    let total = n * n * n;
    let l = cfg.half_length;
    let dx = T::two() * l / T::of_usize(n - 1);
    let coupling = T::one() / (dx * dx);

    let mut pairs = adjacent_pairs(n);
    if cfg.groups > pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} groups exceed the {} nonzero pair matrices",
            cfg.groups,
            pairs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.grouping_seed);
    pairs.shuffle(&mut rng);

    // contiguous chunks of near-equal size
    let base = pairs.len() / cfg.groups;
    let extra = pairs.len() % cfg.groups;
    let mut parts = Vec::with_capacity(cfg.groups);
    let mut group_sizes = Vec::with_capacity(cfg.groups);
    let mut cursor = 0usize;
    for g in 0..cfg.groups {
        let size = base + usize::from(g < extra);
        group_sizes.push(size);
        let chunk = &pairs[cursor..cursor + size];
        cursor += size;
        let mut triplets = Vec::with_capacity(4 * size);
        for &(i, j) in chunk {
            triplets.push((i, i, -coupling));
            triplets.push((i, j, coupling));
            triplets.push((j, i, coupling));
            triplets.push((j, j, -coupling));
        }
        parts.push(CsrMatrix::from_triplets(total, total, &triplets));
    }
    let decomposition = Decomposition::from_parts(parts)?;
    let table = SubsetTable::uniform_subsets_of_size(cfg.groups, cfg.simultaneous)?;

    let coord = |i: usize| -l + dx * T::of_usize(i);
    let trap = |i: usize| {
        if i == 0 || i == n - 1 {
            T::half()
        } else {
            T::one()
        }
    };

    // flux control on the top face, trapezoid face weights over 1/dx
    let mut b = DenseMatrix::zeros(total, 1);
    let iz_top = n - 1;
    for iy in 0..n {
        for ix in 0..n {
            let i = ix + n * (iy + n * iz_top);
            b.set(i, 0, trap(ix) * trap(iy) / dx);
        }
    }

    // observation of the side face ix = 0; constants folded into Q and R so
    // the canonical half-weighted cost reproduces the unhalved face integral
    let q_scale = T::of(2000.0);
    let face_weight = dx * dx;
    let mut q_triplets = Vec::with_capacity(n * n);
    for iz in 0..n {
        for iy in 0..n {
            let i = 0 + n * (iy + n * iz);
            q_triplets.push((i, i, q_scale * face_weight * trap(iy) * trap(iz)));
        }
    }
    let q = CsrMatrix::from_triplets(total, total, &q_triplets);
    let r = DenseMatrix::from_rows(&[vec![T::two()]]);

    let denom = T::of(8.0) * l * l;
    let x0 = Vector::from_fn(total, |i| {
        let ix = i % n;
        let iy = (i / n) % n;
        let iz = i / (n * n);
        let (x, y, z) = (coord(ix), coord(iy), coord(iz));
        (-(x * x + y * y + z * z) / denom).exp()
    });

    let system = LtiSystem::new(decomposition.matrix().clone(), b, x0)?;
    let cost = CostSpec::new(q, r, cfg.horizon);
    Ok(Heat3dModel {
        system,
        cost,
        decomposition,
        table,
        group_sizes,
    })
}
