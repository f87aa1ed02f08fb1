//! Deterministic discrete-event simulator of nodes, links, a switch
//! fabric, transports, and a per-node communication-offload engine.
//!
//! Each node owns an offload engine that processes send/receive commands,
//! a NIC that serializes segments onto a full-duplex link, a receive-side
//! copy engine for the buffered path, and a stream consumer for the
//! streamed path. Command issue latency depends on whether commands come
//! from the host runtime or from on-fabric logic.
//!
//! A simulation instance is single-threaded and owns all of its state.
//! Instances are independent; parameter sweeps can run them concurrently.

mod queue;
mod sim;
mod time;

pub use queue::EventQueue;
pub use sim::{
    ClusterConfig, CommandDescriptor, CommandHandle, CommandOp, MessageId, MessageView, NodeId,
    RunLimit, SimError, SimStats, Simulator, StreamChunk, Tag, TransportConfig, TransportKind,
    Unmatched, UnmatchedKind,
};
pub use time::{ps_from_secs, wire_time_ps, SimTime, PS_PER_SEC};
