//! Experiment configuration: a declarative TOML file, a preset name, or
//! both (explicit sections replace the preset's). Command-line flags
//! override scalar settings. Unknown keys are rejected so typos cannot
//! silently change an experiment, and the fully resolved configuration can
//! be dumped for auditing.

use serde::{Deserialize, Serialize};

use fabricsim::netsim::{ClusterConfig, TransportConfig};
use fabricsim::perfmodel::{LinkParams, MemoryParams, SchedulingParams, TransferMode};
use fabricsim::presets::{self, PipelineDefaults};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentFile {
    /// beff | swe-solve | swe-scaling | model-eval
    pub workload: Option<String>,
    pub out_dir: Option<String>,
    pub trace: Option<bool>,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub beff: BeffSection,
    #[serde(default)]
    pub swe: SweSection,
    #[serde(default)]
    pub scaling: ScalingSection,
    #[serde(default)]
    pub model: ModelSection,
}

/// Either a preset name, or complete parameter sections, or a preset with
/// whole sections replaced.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ClusterSection {
    pub preset: Option<String>,
    pub link: Option<LinkParams>,
    pub scheduling: Option<SchedulingParams>,
    pub memory: Option<MemoryParams>,
    pub transport: Option<TransportConfig>,
    pub mode: Option<TransferMode>,
    pub pipeline: Option<PipelineDefaults>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BeffSection {
    pub nodes: Option<usize>,
    pub repetitions: Option<u32>,
    /// Explicit size list; defaults to powers of two, 64 B to 4 MiB.
    pub sizes: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweSection {
    pub nx: Option<u32>,
    pub ny: Option<u32>,
    pub sea_side: Option<fabricsim::mesh::SeaSide>,
    /// Load the mesh from a file instead of generating it.
    pub mesh_file: Option<String>,
    pub k: Option<u32>,
    pub method: Option<fabricsim::mesh::PartitionMethod>,
    pub steps: Option<u64>,
    pub dt: Option<f64>,
    pub depth: Option<f64>,
    pub sea: Option<fabricsim::swe::SeaForcing>,
    pub snapshot_every: Option<u64>,
    pub check_oracle: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScalingSection {
    /// weak | strong
    pub kind: Option<String>,
    pub k_list: Option<Vec<u32>>,
    pub elements_per_partition: Option<u64>,
    pub mesh_elements: Option<u64>,
    pub method: Option<fabricsim::mesh::PartitionMethod>,
    pub steps: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModelSection {
    pub sizes: Option<Vec<u64>>,
}

impl ExperimentFile {
    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {path}: {e}")))
    }
}

/// Fully materialized cluster parameters after preset resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedCluster {
    pub preset: Option<String>,
    pub link: LinkParams,
    pub scheduling: SchedulingParams,
    pub memory: MemoryParams,
    pub transport: TransportConfig,
    pub mode: TransferMode,
    pub pipeline: PipelineDefaults,
}

impl ResolvedCluster {
    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            link: self.link,
            scheduling: self.scheduling,
            memory: self.memory,
            transport: self.transport,
        }
    }

    pub fn as_preset(&self) -> presets::ClusterPreset {
        presets::ClusterPreset {
            name: "resolved",
            link: self.link,
            scheduling: self.scheduling,
            memory: self.memory,
            transport: self.transport,
            mode: self.mode,
            pipeline: self.pipeline,
            notes: "resolved experiment configuration",
        }
    }
}

/// Resolve a preset name plus optional section overrides into a complete,
/// validated cluster description.
pub fn resolve_cluster(
    section: &ClusterSection,
    preset_flag: Option<&str>,
) -> Result<ResolvedCluster, CliError> {
    let preset_name = preset_flag.map(str::to_string).or_else(|| section.preset.clone());
    let base = match &preset_name {
        Some(name) => Some(presets::by_name(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset `{name}` (available: {})",
                presets::names().join(", ")
            ))
        })?),
        None => None,
    };
    macro_rules! field {
        ($name:ident) => {
            section.$name.or(base.as_ref().map(|p| p.$name)).ok_or_else(|| {
                CliError::Config(format!(
                    "cluster.{} missing: give a preset or the full section",
                    stringify!($name)
                ))
            })
        };
    }
    let resolved = ResolvedCluster {
        preset: preset_name,
        link: field!(link)?,
        scheduling: field!(scheduling)?,
        memory: field!(memory)?,
        transport: field!(transport)?,
        mode: field!(mode)?,
        pipeline: field!(pipeline)?,
    };
    resolved
        .cluster_config()
        .validate()
        .map_err(CliError::Config)?;
    Ok(resolved)
}
