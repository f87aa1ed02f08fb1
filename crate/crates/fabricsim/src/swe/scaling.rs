//! Weak and strong scaling experiments.
//!
//! Each point partitions a generated mesh, measures the per-step halo
//! latency in the network simulator (timing only, no solver state), runs
//! the pipeline timing model on the measurement, and puts the simulated
//! throughput next to the closed-form prediction.

use crate::mesh::{
    generate_rect_mesh, partition, partition_stats, Mesh, PartitionMethod, PartitionStats,
    Partitioning, SeaSide, WorstCaseStats,
};
use crate::netsim::{CommandDescriptor, RunLimit, SimTime, Simulator, PS_PER_SEC};
use crate::perfmodel::{self, DataPath};
use crate::presets::ClusterPreset;

use super::timing::{achieved_flops, PipelineConfig, StepTiming};
use super::SweError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingKind {
    /// Fixed work per partition: the mesh grows with the part count.
    Weak,
    /// Fixed mesh, growing part count.
    Strong,
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub kind: ScalingKind,
    pub k_list: Vec<u32>,
    /// Weak scaling: target elements per partition.
    pub elements_per_partition: u64,
    /// Strong scaling: target total elements of the fixed mesh.
    pub mesh_elements: u64,
    pub method: PartitionMethod,
    /// Steps simulated per point; the last step is reported.
    pub steps: u32,
}

impl ScalingConfig {
    pub fn weak(k_list: Vec<u32>) -> Self {
        Self {
            kind: ScalingKind::Weak,
            k_list,
            elements_per_partition: 6500,
            mesh_elements: 108_000,
            method: PartitionMethod::CoordinateBisection,
            steps: 4,
        }
    }

    pub fn strong(k_list: Vec<u32>) -> Self {
        Self { kind: ScalingKind::Strong, ..Self::weak(k_list) }
    }
}

/// One row of the scaling table.
#[derive(Debug, Clone, Copy)]
pub struct ScalingRow {
    pub k: u32,
    pub n_max: u32,
    /// Simulated throughput, FLOP/s, gated by the slowest partition.
    pub sim_flops: f64,
    /// Closed-form prediction for the worst-case partition.
    pub model_flops: f64,
    /// sim_flops(k) / (k * sim_flops(1)).
    pub efficiency: f64,
    /// Largest per-partition stall fraction in the reported step.
    pub stall_fraction: f64,
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("k,n_max,sim_flops,model_flops,efficiency,stall_fraction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k, r.n_max, r.sim_flops, r.model_flops, r.efficiency, r.stall_fraction
        ));
    }
    out
}

/// Generate a roughly square rectangular mesh with at least `elements`
/// elements (two per cell).
pub fn mesh_for_elements(elements: u64) -> Mesh {
    let cells = elements.div_ceil(2).max(1);
    let ny = ((cells as f64).sqrt().floor() as u32).max(1);
    let nx = (cells as u32).div_ceil(ny);
    generate_rect_mesh(nx, ny, SeaSide::East)
}

pub fn run_scaling(cfg: &ScalingConfig, preset: &ClusterPreset) -> Result<Vec<ScalingRow>, SweError> {
    if cfg.k_list.is_empty() {
        return Err(SweError::Config("k_list must not be empty".into()));
    }
    if cfg.steps == 0 {
        return Err(SweError::Config("steps must be >= 1".into()));
    }
    let pipeline = PipelineConfig::from_preset(&preset.pipeline);

    let strong_mesh = match cfg.kind {
        ScalingKind::Strong => Some(mesh_for_elements(cfg.mesh_elements)),
        ScalingKind::Weak => None,
    };
    // single-partition reference for the efficiency column
    let reference_flops = {
        let mesh = match cfg.kind {
            ScalingKind::Weak => mesh_for_elements(cfg.elements_per_partition),
            ScalingKind::Strong => mesh_for_elements(cfg.mesh_elements),
        };
        let point = measure_point(&mesh, 1, cfg, preset, &pipeline)?;
        point.sim_flops
    };

    let mut rows = Vec::with_capacity(cfg.k_list.len());
    for &k in &cfg.k_list {
        let weak_mesh;
        let mesh = match cfg.kind {
            ScalingKind::Weak => {
                weak_mesh = mesh_for_elements(cfg.elements_per_partition * k as u64);
                &weak_mesh
            }
            ScalingKind::Strong => strong_mesh.as_ref().unwrap(),
        };
        let point = measure_point(mesh, k, cfg, preset, &pipeline)?;
        rows.push(ScalingRow {
            k,
            n_max: point.n_max,
            sim_flops: point.sim_flops,
            model_flops: point.model_flops,
            efficiency: point.sim_flops / (k as f64 * reference_flops),
            stall_fraction: point.stall_fraction,
        });
    }
    Ok(rows)
}

/// Everything measured and modeled for one (mesh, k) scaling point.
#[derive(Debug, Clone, Copy)]
pub struct ScalingPoint {
    pub n_max: u32,
    pub sim_flops: f64,
    pub model_flops: f64,
    pub stall_fraction: f64,
    /// Simulated per-step communication latency of the slowest partition.
    pub worst_l_comm: f64,
    pub worst_timing: StepTiming,
}

pub fn measure_point(
    mesh: &Mesh,
    k: u32,
    cfg: &ScalingConfig,
    preset: &ClusterPreset,
    pipeline: &PipelineConfig,
) -> Result<ScalingPoint, SweError> {
    let partitioning = partition(mesh, k, cfg.method)?;
    let (stats, worst) = partition_stats(&partitioning, mesh, preset.pipeline.bytes_per_element);
    let total_elements = mesh.element_count() as u64;

    let l_comms = if k == 1 {
        vec![0.0]
    } else {
        measure_halo_latencies(&partitioning, &stats, preset, pipeline, cfg.steps)?
    };
    let timings: Vec<StepTiming> = stats
        .iter()
        .zip(&l_comms)
        .map(|(s, &l)| StepTiming::from_comm_latency(s, pipeline, l))
        .collect();
    let slowest = timings
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cycles.partial_cmp(&b.1.total_cycles).unwrap())
        .unwrap()
        .0;
    let worst_timing = timings[slowest];
    let worst_l_comm = l_comms[slowest];
    let stall_fraction = timings.iter().map(|t| t.stall_fraction).fold(0.0, f64::max);
    let sim_flops = achieved_flops(pipeline, total_elements, worst_timing.total_cycles);

    let model_flops = {
        let params = model_params(&stats, &worst, pipeline, preset, total_elements);
        let l_comm = perfmodel::comm_latency(
            &params,
            &preset.scheduling,
            &preset.memory,
            preset.mode.scheduling,
            worst.max_halo_bytes,
        );
        perfmodel::app_throughput(&params, l_comm)
    };
    Ok(ScalingPoint {
        n_max: worst.max_neighbors,
        sim_flops,
        model_flops,
        stall_fraction,
        worst_l_comm,
        worst_timing,
    })
}

/// Closed-form model inputs for the worst-case partition: the largest
/// compute load, the largest send/receive counts and the highest neighbor
/// count over all parts, with the link-level ping-ping latency of the
/// largest per-neighbor message.
pub fn model_params(
    stats: &[PartitionStats],
    worst: &WorstCaseStats,
    pipeline: &PipelineConfig,
    preset: &ClusterPreset,
    total_elements: u64,
) -> perfmodel::AppModelParams {
    let max_core = stats.iter().map(|s| s.core_elements).max().unwrap_or(0);
    let pingping = perfmodel::link_latency(worst.max_halo_bytes, &preset.link);
    perfmodel::AppModelParams {
        clock_hz: pipeline.clock_hz,
        flop_per_element: pipeline.flop_per_element,
        total_elements,
        core_elements: max_core,
        external_delay_cycles: pipeline.external_delay_cycles,
        send_elements: worst.max_send_elements,
        recv_elements: worst.max_recv_elements,
        pipeline_fill_cycles: pipeline.pipeline_fill_cycles,
        max_neighbors: worst.max_neighbors,
        pingping_latency: pingping,
    }
}

/// Timing-only halo exchange: one simulator node per partition, per-step
/// sends sized from the send lists, receives issued on arrival. Returns
/// the per-partition communication latency of the last simulated step
/// (drain of the received elements included).
fn measure_halo_latencies(
    partitioning: &Partitioning,
    stats: &[PartitionStats],
    preset: &ClusterPreset,
    pipeline: &PipelineConfig,
    steps: u32,
) -> Result<Vec<f64>, SweError> {
    let k = partitioning.part_count();
    let mut sim = Simulator::new(k, preset.cluster_config())?;
    let origin = preset.mode.scheduling;
    let bytes_per_element = preset.pipeline.bytes_per_element;
    let mut step_start = SimTime::ZERO;
    let mut last = vec![0.0f64; k];

    for _ in 0..steps {
        let mut handles = Vec::new();
        for (p, part_stats) in stats.iter().enumerate() {
            let drain =
                SimTime::from_secs(part_stats.send_elements as f64 / pipeline.clock_hz).as_ps();
            for (&q, list) in &partitioning.parts[p].send_lists {
                sim.post_command_at(
                    p,
                    CommandDescriptor::send(
                        q as usize,
                        0,
                        list.len() as u64 * bytes_per_element,
                        DataPath::Buffered,
                        origin,
                    ),
                    step_start + drain,
                )?;
            }
        }
        for p in 0..k {
            for (&q, list) in &partitioning.parts[p].recv_lists {
                let h = sim.post_recv_on_arrival(
                    p,
                    q as usize,
                    0,
                    list.len() as u64 * bytes_per_element,
                    origin,
                )?;
                handles.push((p, h));
            }
        }
        sim.run_until(RunLimit::Quiescence)?;

        let mut last_done = vec![step_start; k];
        for (p, h) in handles {
            let done = sim.completion(h).expect("receive incomplete");
            last_done[p] = last_done[p].max(done);
        }
        let mut worst_total = 0.0f64;
        for (p, s) in stats.iter().enumerate() {
            let arrival = (last_done[p] - step_start) as f64 / PS_PER_SEC as f64;
            last[p] = arrival + s.recv_elements as f64 / pipeline.clock_hz;
            let t = StepTiming::from_comm_latency(s, pipeline, last[p]);
            worst_total = worst_total.max(t.total_cycles);
        }
        let step_ps = SimTime::from_secs(worst_total / pipeline.clock_hz).as_ps();
        step_start = SimTime(sim.now().as_ps().max((step_start + step_ps).as_ps()));
    }
    Ok(last)
}
