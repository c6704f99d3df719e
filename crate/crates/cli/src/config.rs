//! TOML-backed experiment configuration with CLI overrides layered on top.

use serde::{Deserialize, Serialize};

use rbm_core::models::{
    build_block_split, build_heat1d, build_heat3d, load_system, synthetic_block_system,
    BlockSplitConfig, Heat1dConfig, Heat3dConfig, HeatCase, ProfileParams, SystemPaths,
};
use rbm_core::dynamics::LtiSystem;
use rbm_core::linalg::mm;
use rbm_core::optimizer::CostSpec;
use rbm_core::splitting::{Decomposition, SplittingSpec, SubsetTable};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub sweep: SweepConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Heat1d {
        #[serde(default = "default_heat1d_nodes")]
        nodes: usize,
        #[serde(default = "default_heat1d_half_length")]
        half_length: f64,
        #[serde(default = "default_heat1d_horizon")]
        horizon: f64,
        #[serde(default = "default_case")]
        case: String,
    },
    Heat3d {
        #[serde(default = "default_heat3d_nodes")]
        nodes_per_axis: usize,
        #[serde(default = "default_heat3d_half_length")]
        half_length: f64,
        #[serde(default = "default_heat3d_horizon")]
        horizon: f64,
        #[serde(default = "default_heat3d_groups")]
        groups: usize,
        #[serde(default = "default_heat3d_simultaneous")]
        simultaneous: usize,
        #[serde(default)]
        grouping_seed: u64,
    },
    /// Synthetic dense symmetric dominant system with block splitting.
    BlockSplit {
        #[serde(default = "default_block_dimension")]
        dimension: usize,
        #[serde(default = "default_block_count")]
        blocks: usize,
        #[serde(default = "default_block_horizon")]
        horizon: f64,
    },
    /// System assembled from Matrix Market / CSV files.
    Files {
        a: String,
        #[serde(default)]
        e: Option<String>,
        #[serde(default)]
        b: Option<String>,
        #[serde(default)]
        x0: Option<String>,
        #[serde(default)]
        coords: Option<String>,
        #[serde(default)]
        q: Option<String>,
        #[serde(default)]
        r: Option<String>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        half_length: Option<f64>,
        #[serde(default)]
        horizon: Option<f64>,
        /// splitting spec JSON; absent means block splitting with `blocks`
        #[serde(default)]
        splitting: Option<String>,
        #[serde(default)]
        blocks: Option<usize>,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Heat1d {
            nodes: 61,
            half_length: 1.5,
            horizon: 0.5,
            case: "i".into(),
        }
    }
}

fn default_heat1d_nodes() -> usize {
    61
}
fn default_heat1d_half_length() -> f64 {
    1.5
}
fn default_heat1d_horizon() -> f64 {
    0.5
}
fn default_case() -> String {
    "i".into()
}
fn default_heat3d_nodes() -> usize {
    8
}
fn default_heat3d_half_length() -> f64 {
    0.75
}
fn default_heat3d_horizon() -> f64 {
    2.0
}
fn default_heat3d_groups() -> usize {
    6
}
fn default_heat3d_simultaneous() -> usize {
    3
}
fn default_block_dimension() -> usize {
    96
}
fn default_block_count() -> usize {
    16
}
fn default_block_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// h = 2^-e per exponent e
    pub h_exponents: Vec<u32>,
    pub realizations: u64,
    pub master_seed: u64,
    pub optimizer_tol: f64,
    pub reference_tol: f64,
    /// lambda in the resolvent weight (A - lambda I)^{-1}
    pub resolvent_shift: f64,
    /// "forward" computes only state errors; "full" optimizes as well
    pub metrics: String,
    pub threads: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            h_exponents: vec![5, 7, 9, 11, 13],
            realizations: 25,
            master_seed: 42,
            optimizer_tol: 1e-6,
            reference_tol: 1e-10,
            resolvent_shift: 0.1,
            metrics: "full".into(),
            threads: None,
        }
    }
}

/// A fully assembled model ready for the experiment engine.
pub struct BuiltModel {
    pub label: String,
    pub system: LtiSystem<f64>,
    pub cost: Option<CostSpec<f64>>,
    pub decomposition: Decomposition<f64>,
    pub table: SubsetTable<f64>,
}

pub fn build_model(cfg: &ModelConfig) -> anyhow::Result<BuiltModel> {
    match cfg {
        ModelConfig::Heat1d {
            nodes,
            half_length,
            horizon,
            case,
        } => {
            let case = HeatCase::parse(case)?;
            let m = build_heat1d(&Heat1dConfig {
                nodes: *nodes,
                half_length: *half_length,
                horizon: *horizon,
                case,
            })?;
            Ok(BuiltModel {
                label: format!("heat1d-case-{}-n{}", case.label(), nodes),
                system: m.system,
                cost: Some(m.cost),
                decomposition: m.decomposition,
                table: m.table,
            })
        }
        ModelConfig::Heat3d {
            nodes_per_axis,
            half_length,
            horizon,
            groups,
            simultaneous,
            grouping_seed,
        } => {
            let m = build_heat3d(&Heat3dConfig {
                nodes_per_axis: *nodes_per_axis,
                half_length: *half_length,
                horizon: *horizon,
                groups: *groups,
                simultaneous: *simultaneous,
                grouping_seed: *grouping_seed,
            })?;
            Ok(BuiltModel {
                label: format!("heat3d-n{}-m{}-p{}", nodes_per_axis, groups, simultaneous),
                system: m.system,
                cost: Some(m.cost),
                decomposition: m.decomposition,
                table: m.table,
            })
        }
        ModelConfig::BlockSplit {
            dimension,
            blocks,
            horizon,
        } => {
            let m = synthetic_block_system(*dimension, *blocks, *horizon)?;
            Ok(BuiltModel {
                label: format!("block-n{}-p{}", dimension, blocks),
                system: m.system,
                cost: Some(m.cost),
                decomposition: m.decomposition,
                table: m.table,
            })
        }
        ModelConfig::Files {
            a,
            e,
            b,
            x0,
            coords,
            q,
            r,
            beta,
            half_length,
            horizon,
            splitting,
            blocks,
        } => {
            let paths = SystemPaths {
                a: a.into(),
                e: e.as_ref().map(Into::into),
                b: b.as_ref().map(Into::into),
                x0: x0.as_ref().map(Into::into),
                coords: coords.as_ref().map(Into::into),
                q: q.as_ref().map(Into::into),
                r: r.as_ref().map(Into::into),
            };
            let profile = match (beta, half_length) {
                (Some(beta), Some(half_length)) => Some(ProfileParams {
                    beta: *beta,
                    half_length: *half_length,
                }),
                _ => None,
            };
            let (system, cost) = load_system::<f64>(&paths, profile, *horizon)?;
            let (decomposition, table) = if let Some(spec_path) = splitting {
                let spec_path = std::path::PathBuf::from(spec_path);
                let text = std::fs::read_to_string(&spec_path)
                    .map_err(|err| anyhow::anyhow!("{}: {err}", spec_path.display()))?;
                let spec = SplittingSpec::from_json(&text)?;
                let base = spec_path.parent().unwrap_or(std::path::Path::new("."));
                spec.load::<f64>(base)?
            } else {
                let p = blocks.ok_or_else(|| {
                    anyhow::anyhow!("files model needs either `splitting` or `blocks`")
                })?;
                let dense = mm::read_dense::<f64>(std::path::Path::new(a))?;
                build_block_split(&BlockSplitConfig {
                    a: dense,
                    e: None,
                    p,
                })?
            };
            Ok(BuiltModel {
                label: "files".into(),
                system,
                cost,
                decomposition,
                table,
            })
        }
    }
}
