//! Deterministic discrete-event simulation and analytic performance models
//! for clusters of accelerators that talk to each other through on-board
//! network ports and a communication-offload engine.
//!
//! The crate has three layers:
//!
//! * [`perfmodel`]: closed-form latency and throughput models (pure
//!   functions, also used as the oracle for the simulator),
//! * [`netsim`]: an event-driven simulator of nodes, links, transports and
//!   per-node offload engines with integer-picosecond time,
//! * workloads on top: the [`beff`] ring benchmark, [`mesh`] partitioning
//!   with halo bookkeeping, and the [`swe`] shallow-water workload with its
//!   pipeline-timing model.
//!
//! Everything is deterministic: identical configuration produces bitwise
//! identical results, traces and CSV files.
//!
//! The `book/` directory of the repository contains a guide with worked
//! examples; its code snippets compile and run as part of `cargo test`.

pub mod beff;
pub mod mesh;
pub mod netsim;
pub mod perfmodel;
pub mod presets;
pub mod swe;

pub use netsim::SimTime;

// Book chapters double as doc-tests so the guide cannot drift out of sync
// with the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(latency_models, "../../../book/src/latency-models.md");
    chapter!(transports, "../../../book/src/transports.md");
    chapter!(simulator, "../../../book/src/simulator.md");
    chapter!(ring_benchmark, "../../../book/src/ring-benchmark.md");
    chapter!(meshes, "../../../book/src/meshes.md");
    chapter!(shallow_water, "../../../book/src/shallow-water.md");
    chapter!(pipeline_timing, "../../../book/src/pipeline-timing.md");
    chapter!(scaling, "../../../book/src/scaling.md");
    chapter!(presets, "../../../book/src/presets.md");
    chapter!(cli, "../../../book/src/cli.md");
}
