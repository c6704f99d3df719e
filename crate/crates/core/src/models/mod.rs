//! Benchmark model builders: heat rod, heat cube, block-split dense systems,
//! and the interacting-particle mapping, plus file-based system assembly.

pub mod block;
pub mod heat1d;
pub mod heat3d;
pub mod io;
pub mod particles;

pub use block::{
    build_block_split, check_diagonal_dominance, synthetic_block_system, synthetic_sdd,
    BlockSplitConfig, SyntheticBlockModel,
};
pub use heat1d::{build_heat1d, Heat1dConfig, Heat1dModel, HeatCase};
pub use heat3d::{build_heat3d, Heat3dConfig, Heat3dModel};
pub use io::{load_system, ProfileParams, SystemPaths};
pub use particles::{
    build_particles, enumerate_partitions, partition_count, CoefficientSpec, ParticleConfig,
    ParticleModel,
};
