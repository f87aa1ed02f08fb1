//! Randomized solver properties: for arbitrary smooth initial states on a
//! closed basin, mass is conserved and a two-partition distributed run
//! stays bitwise equal to the reference.

use fabricsim::mesh::{generate_rect_mesh, partition, PartitionMethod, SeaSide};
use fabricsim::presets;
use fabricsim::swe::*;
use proptest::prelude::*;

fn state_strategy(n: usize) -> impl Strategy<Value = Vec<ElementState>> {
    proptest::collection::vec(
        (1.0f64..3.0, -0.4f64..0.4, -0.4f64..0.4)
            .prop_map(|(h, hu, hv)| ElementState { h, hu, hv }),
        n,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_states_conserve_mass_and_partition_cleanly(
        states in state_strategy(2 * 6 * 4),
        k in 2u32..5,
    ) {
        let mesh = generate_rect_mesh(6, 4, SeaSide::Closed);
        let cfg = SolverConfig::new(0.01, SeaForcing::Constant { depth: 2.0 });
        prop_assume!(check_cfl(&mesh, &states, &cfg).is_ok());

        let mass0 = total_mass(&mesh, &states);
        let mut reference = states.clone();
        for step in 0..8 {
            reference = step_reference(&mesh, &reference, &cfg, step).unwrap();
            let drift = ((total_mass(&mesh, &reference) - mass0) / mass0).abs();
            prop_assert!(drift <= 1e-12, "step {step}: drift {drift:.3e}");
        }

        let preset = presets::by_name("direct-udp-pl").unwrap();
        let parts = partition(&mesh, k, PartitionMethod::GreedyBfs).unwrap();
        let mut solver = DistributedSolver::new(
            &mesh,
            &parts,
            cfg,
            PipelineConfig::from_preset(&preset.pipeline),
            preset.cluster_config(),
            DistributedConfig::default(),
            states,
        )
        .unwrap();
        solver.run(8).unwrap();
        for (e, (a, b)) in solver.states().iter().zip(&reference).enumerate() {
            prop_assert!(
                a.h.to_bits() == b.h.to_bits()
                    && a.hu.to_bits() == b.hu.to_bits()
                    && a.hv.to_bits() == b.hv.to_bits(),
                "element {e} diverged"
            );
        }
    }
}
