//! Shallow-water workload: a finite-volume solver on partitioned meshes
//! used as the correctness oracle for the distributed halo exchange, plus
//! the cycle-level pipeline-timing model and scaling experiments.

mod distributed;
mod scaling;
mod solver;
mod timing;

pub use distributed::{
    DistributedConfig, DistributedSolver, ReceiveScheme, SOLVER_BYTES_PER_ELEMENT,
};
pub use scaling::{
    measure_point, mesh_for_elements, model_params, run_scaling, scaling_csv, ScalingConfig,
    ScalingKind, ScalingPoint, ScalingRow,
};
pub use solver::{
    check_cfl, initial_column, initial_rest, max_stable_dt, step_reference, total_mass,
    ElementState, SeaForcing, SolverConfig,
};
pub use timing::{achieved_flops, simulate_timing, PipelineConfig, StepTiming};

use crate::mesh::{ElementId, MeshError, PartitionId};
use crate::netsim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum SweError {
    #[error("time step {dt} violates the CFL bound (maximum stable step {max_dt})")]
    CflViolation { dt: f64, max_dt: f64 },
    #[error("non-finite state at step {step}, element {element}")]
    NonFinite { step: u64, element: ElementId },
    #[error("halo mismatch at step {step}, partition {partition}, neighbor {neighbor}: {detail}")]
    HaloMismatch { step: u64, partition: PartitionId, neighbor: PartitionId, detail: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// State snapshot as CSV: element id, depth, momenta.
pub fn snapshot_csv(states: &[ElementState]) -> String {
    let mut out = String::from("element,h,hu,hv\n");
    for (e, s) in states.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", e, s.h, s.hu, s.hv));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rect_mesh, partition, PartitionMethod, SeaSide};
    use crate::presets;

    fn lake_config() -> SolverConfig {
        SolverConfig::new(0.02, SeaForcing::Constant { depth: 2.0 })
    }

    #[test]
    fn lake_at_rest_is_exact() {
        let mesh = generate_rect_mesh(8, 6, SeaSide::Closed);
        let states = initial_rest(&mesh, 2.0);
        let cfg = lake_config();
        check_cfl(&mesh, &states, &cfg).unwrap();
        let mut s = states.clone();
        for step in 0..50 {
            s = step_reference(&mesh, &s, &cfg, step).unwrap();
        }
        for (a, b) in s.iter().zip(&states) {
            assert_eq!(a.h.to_bits(), b.h.to_bits());
            assert_eq!(a.hu.to_bits(), b.hu.to_bits());
            assert_eq!(a.hv.to_bits(), b.hv.to_bits());
        }
    }

    #[test]
    fn closed_basin_conserves_mass() {
        let mesh = generate_rect_mesh(10, 8, SeaSide::Closed);
        let mut s = initial_column(&mesh, 3.0, 7.0, 2.0, 2.5);
        let cfg = lake_config();
        check_cfl(&mesh, &s, &cfg).unwrap();
        let m0 = total_mass(&mesh, &s);
        let mut prev = m0;
        for step in 0..1000 {
            s = step_reference(&mesh, &s, &cfg, step).unwrap();
            let m = total_mass(&mesh, &s);
            assert!(((m - prev) / m0).abs() <= 1e-12, "step {step}: per-step drift");
            prev = m;
        }
        assert!(((prev - m0) / m0).abs() <= 1e-10, "total drift {}", (prev - m0) / m0);
    }

    #[test]
    fn dam_break_keeps_mirror_symmetry() {
        // even nx plus parity-alternating diagonals make the mesh
        // mirror-symmetric about the vertical centerline
        let nx = 10u32;
        let ny = 7u32;
        let mesh = generate_rect_mesh(nx, ny, SeaSide::Closed);
        let mut s = initial_column(&mesh, 4.0, 6.0, 2.0, 2.6);
        let cfg = lake_config();
        check_cfl(&mesh, &s, &cfg).unwrap();
        for step in 0..60 {
            s = step_reference(&mesh, &s, &cfg, step).unwrap();
        }
        // element 2*(j*nx+i)+t mirrors to 2*(j*nx+(nx-1-i))+t
        for j in 0..ny {
            for i in 0..nx {
                for t in 0..2u32 {
                    let e = 2 * (j * nx + i) + t;
                    let m = 2 * (j * nx + (nx - 1 - i)) + t;
                    let a = s[e as usize];
                    let b = s[m as usize];
                    assert!((a.h - b.h).abs() <= 1e-12 * a.h.abs().max(1.0), "h at {e}/{m}");
                    assert!((a.hu + b.hu).abs() <= 1e-12, "hu at {e}/{m}");
                    assert!((a.hv - b.hv).abs() <= 1e-12, "hv at {e}/{m}");
                }
            }
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let mesh = generate_rect_mesh(4, 4, SeaSide::Closed);
        let states = initial_rest(&mesh, 2.0);
        let cfg = SolverConfig::new(1.0, SeaForcing::Constant { depth: 2.0 });
        match check_cfl(&mesh, &states, &cfg) {
            Err(SweError::CflViolation { dt, max_dt }) => {
                assert_eq!(dt, 1.0);
                assert!(max_dt < 1.0);
            }
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn distributed_matches_reference_bitwise() {
        let preset = presets::by_name("direct-udp-pl").unwrap();
        let mesh = generate_rect_mesh(8, 8, SeaSide::East);
        let cfg = SolverConfig::new(
            0.02,
            SeaForcing::Tidal { mean: 2.0, amplitude: 0.2, period: 40.0 },
        );
        let initial = initial_rest(&mesh, 2.0);
        let mut reference = initial.clone();
        for step in 0..40 {
            reference = step_reference(&mesh, &reference, &cfg, step).unwrap();
        }
        for k in [1u32, 2, 4] {
            let p = partition(&mesh, k, PartitionMethod::CoordinateBisection).unwrap();
            let mut solver = DistributedSolver::new(
                &mesh,
                &p,
                cfg,
                PipelineConfig::from_preset(&preset.pipeline),
                preset.cluster_config(),
                DistributedConfig::default(),
                initial.clone(),
            )
            .unwrap();
            solver.run(40).unwrap();
            for (e, (a, b)) in solver.states().iter().zip(&reference).enumerate() {
                assert_eq!(a.h.to_bits(), b.h.to_bits(), "k={k} element {e}");
                assert_eq!(a.hu.to_bits(), b.hu.to_bits(), "k={k} element {e}");
                assert_eq!(a.hv.to_bits(), b.hv.to_bits(), "k={k} element {e}");
            }
        }
    }

    #[test]
    fn corrupted_receive_order_is_detected() {
        let preset = presets::by_name("direct-udp-pl").unwrap();
        let mesh = generate_rect_mesh(6, 6, SeaSide::Closed);
        let cfg = lake_config();
        let initial = initial_column(&mesh, 2.0, 4.0, 2.0, 2.4);
        let p = partition(&mesh, 2, PartitionMethod::CoordinateBisection).unwrap();
        // with id validation the corruption is caught and named
        let mut solver = DistributedSolver::new(
            &mesh,
            &p,
            cfg,
            PipelineConfig::from_preset(&preset.pipeline),
            preset.cluster_config(),
            DistributedConfig::default(),
            initial.clone(),
        )
        .unwrap();
        solver.corrupt_recv_order = Some((1, 0));
        match solver.run(3) {
            Err(SweError::HaloMismatch { step, partition, neighbor, .. }) => {
                assert_eq!(step, 0);
                assert_eq!(partition, 1);
                assert_eq!(neighbor, 0);
            }
            other => panic!("expected halo mismatch, got {other:?}"),
        }
        // without validation the run continues but diverges from the oracle
        let mut unchecked = DistributedSolver::new(
            &mesh,
            &p,
            cfg,
            PipelineConfig::from_preset(&preset.pipeline),
            preset.cluster_config(),
            DistributedConfig { validate_ids: false, ..Default::default() },
            initial.clone(),
        )
        .unwrap();
        unchecked.corrupt_recv_order = Some((1, 0));
        unchecked.run(5).unwrap();
        let mut reference = initial;
        for step in 0..5 {
            reference = step_reference(&mesh, &reference, &cfg, step).unwrap();
        }
        let diverged = unchecked
            .states()
            .iter()
            .zip(&reference)
            .any(|(a, b)| a.h.to_bits() != b.h.to_bits());
        assert!(diverged, "corrupted binding should diverge from the oracle");
    }

    #[test]
    fn streamed_direct_receive_trips_on_interleaving() {
        let preset = presets::by_name("direct-udp-pl").unwrap();
        // 3x3 block partitioning gives the center partition 4 neighbors
        let mesh = generate_rect_mesh(12, 12, SeaSide::Closed);
        let cfg = lake_config();
        let initial = initial_column(&mesh, 4.0, 8.0, 2.0, 2.4);
        let p = partition(&mesh, 9, PartitionMethod::CoordinateBisection).unwrap();
        let mut solver = DistributedSolver::new(
            &mesh,
            &p,
            cfg,
            PipelineConfig::from_preset(&preset.pipeline),
            preset.cluster_config(),
            DistributedConfig {
                scheme: ReceiveScheme::StreamedDirect,
                ..Default::default()
            },
            initial,
        )
        .unwrap();
        match solver.run(2) {
            Err(SweError::HaloMismatch { .. }) => {}
            other => panic!("expected ordering hazard, got {other:?}"),
        }
    }

    #[test]
    fn zero_comm_timing_is_compute_bound() {
        let preset = presets::by_name("direct-udp-pl").unwrap();
        let mesh = generate_rect_mesh(10, 10, SeaSide::Closed);
        let p = partition(&mesh, 1, PartitionMethod::CoordinateBisection).unwrap();
        let (stats, _) = crate::mesh::partition_stats(&p, &mesh, 32);
        let pipe = PipelineConfig::from_preset(&preset.pipeline);
        let t = simulate_timing(&stats[0], &pipe, &[0.0]);
        assert_eq!(t[0].stall_cycles, 0.0);
        assert_eq!(
            t[0].total_cycles,
            (200 + pipe.external_delay_cycles + pipe.pipeline_fill_cycles) as f64
        );
    }
}
