//! Closed-form performance models for offloaded point-to-point communication
//! and for the pipelined stencil workload driven by it.
//!
//! All functions here are pure: no state, no I/O, bitwise-reproducible
//! results for identical inputs. They serve double duty as a standalone
//! calculator (see the `model` CLI subcommand) and as the oracle the
//! event-driven simulator in [`crate::netsim`] is validated against.

use serde::{Deserialize, Serialize};

/// Which data path a transfer takes through the offload engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataPath {
    /// Data lands in a global-memory receive buffer and is copied out by a
    /// matching receive command (blocking-MPI-like).
    Buffered,
    /// Data is forwarded directly into the consumer's stream as it arrives.
    Streamed,
}

/// Where communication commands are issued from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheduling {
    /// Commands go through a runtime kernel invocation on the host.
    Host,
    /// Commands are issued by on-fabric control logic.
    Pl,
}

/// Data path plus command scheduling origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferMode {
    pub path: DataPath,
    pub scheduling: Scheduling,
}

impl TransferMode {
    pub const fn new(path: DataPath, scheduling: Scheduling) -> Self {
        Self { path, scheduling }
    }

    /// All four path/scheduling combinations, in a fixed order.
    pub const ALL: [TransferMode; 4] = [
        TransferMode::new(DataPath::Buffered, Scheduling::Host),
        TransferMode::new(DataPath::Buffered, Scheduling::Pl),
        TransferMode::new(DataPath::Streamed, Scheduling::Host),
        TransferMode::new(DataPath::Streamed, Scheduling::Pl),
    ];
}

impl std::fmt::Display for TransferMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let path = match self.path {
            DataPath::Buffered => "buffered",
            DataPath::Streamed => "streamed",
        };
        let sched = match self.scheduling {
            Scheduling::Host => "host",
            Scheduling::Pl => "pl",
        };
        write!(f, "{path}/{sched}")
    }
}

/// Physical link between two endpoints, possibly through a switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Link serialization rate in bytes per second.
    pub raw_bandwidth: f64,
    /// Fixed wire/PHY latency in seconds, one way.
    pub base_latency: f64,
    /// Number of switch traversals on the path.
    pub switch_hops: u32,
    /// Extra latency per switch traversal, seconds.
    pub per_hop_latency: f64,
    /// Header and framing bytes added to every frame on the wire.
    pub frame_overhead: u64,
    /// Payload bytes carried per frame.
    pub mtu_payload: u64,
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        if !self.raw_bandwidth.is_finite() || self.raw_bandwidth <= 0.0 {
            return Err(InvalidParams::new("link.raw_bandwidth must be > 0"));
        }
        if self.mtu_payload == 0 {
            return Err(InvalidParams::new("link.mtu_payload must be > 0"));
        }
        if self.base_latency < 0.0 || self.per_hop_latency < 0.0 {
            return Err(InvalidParams::new("link latencies must be >= 0"));
        }
        Ok(())
    }

    /// One-way propagation delay: base latency plus switch traversals.
    pub fn propagation(&self) -> f64 {
        self.base_latency + self.switch_hops as f64 * self.per_hop_latency
    }

    /// Bytes on the wire for a message payload, including per-frame
    /// overhead. A zero-byte message still occupies one frame.
    pub fn wire_bytes(&self, message_size: u64) -> u64 {
        message_size + self.frame_count(message_size) * self.frame_overhead
    }

    /// Number of frames a message is segmented into (at least one).
    pub fn frame_count(&self, message_size: u64) -> u64 {
        message_size.div_ceil(self.mtu_payload).max(1)
    }

    /// Payload goodput of the link: raw bandwidth scaled by the payload
    /// fraction of each full frame.
    pub fn goodput(&self) -> f64 {
        self.raw_bandwidth * self.mtu_payload as f64
            / (self.mtu_payload + self.frame_overhead) as f64
    }
}

/// Latency to issue a communication command, by scheduling origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulingParams {
    /// Seconds for a command issued through a host runtime kernel invocation.
    pub host_invoke_latency: f64,
    /// Seconds for a command processed directly by on-fabric logic.
    pub pl_command_latency: f64,
}

impl SchedulingParams {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        if self.pl_command_latency < 0.0 {
            return Err(InvalidParams::new("scheduling.pl_command_latency must be >= 0"));
        }
        if self.host_invoke_latency < self.pl_command_latency {
            return Err(InvalidParams::new(
                "scheduling.host_invoke_latency must be >= pl_command_latency",
            ));
        }
        Ok(())
    }

    /// Command latency for the given origin.
    pub fn command_latency(&self, origin: Scheduling) -> f64 {
        match origin {
            Scheduling::Host => self.host_invoke_latency,
            Scheduling::Pl => self.pl_command_latency,
        }
    }
}

/// Global-memory copy characteristics on the receiving side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Copy rate out of the receive buffer, bytes per second.
    pub mem_bandwidth: f64,
    /// Fixed setup cost per copy, seconds.
    pub copy_setup_latency: f64,
}

impl MemoryParams {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        if !self.mem_bandwidth.is_finite() || self.mem_bandwidth <= 0.0 {
            return Err(InvalidParams::new("memory.mem_bandwidth must be > 0"));
        }
        if self.copy_setup_latency < 0.0 {
            return Err(InvalidParams::new("memory.copy_setup_latency must be >= 0"));
        }
        Ok(())
    }
}

/// Inputs to the application throughput and communication latency models.
///
/// Element counts describe the worst-case partition of a mesh: the one with
/// the most neighbors and the largest number of sent or received elements
/// per time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppModelParams {
    /// Kernel clock frequency in Hz.
    pub clock_hz: f64,
    /// Floating-point operations per mesh element and time step.
    pub flop_per_element: f64,
    /// Total elements in the mesh (all partitions).
    pub total_elements: u64,
    /// Elements of the partition with no remote-facing edge; processing
    /// them is the slack available to hide communication.
    pub core_elements: u64,
    /// Extra per-step pipeline delay in cycles (memory access patterns,
    /// inherited from the pipeline design; configured, not derived).
    pub external_delay_cycles: u64,
    /// Elements sent to neighbors per step (sum over neighbors).
    pub send_elements: u64,
    /// Elements received from neighbors per step (sum over neighbors).
    pub recv_elements: u64,
    /// Pipeline fill/flush cycles per step.
    pub pipeline_fill_cycles: u64,
    /// Largest number of neighbor partitions any partition has.
    pub max_neighbors: u32,
    /// Link-level ping-ping latency of the largest per-neighbor message,
    /// seconds. Command issue and copy costs are charged separately.
    pub pingping_latency: f64,
}

impl AppModelParams {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        if !self.clock_hz.is_finite() || self.clock_hz <= 0.0 {
            return Err(InvalidParams::new("app.clock_hz must be > 0"));
        }
        if self.core_elements + self.send_elements > self.total_elements {
            return Err(InvalidParams::new(
                "app.core_elements + send_elements must not exceed total_elements",
            ));
        }
        if self.pingping_latency < 0.0 {
            return Err(InvalidParams::new("app.pingping_latency must be >= 0"));
        }
        Ok(())
    }

    /// Total floating-point operations per time step. Deliberately based on
    /// the global element count and a fixed per-element cost, independent of
    /// the partitioning, so scaling runs stay comparable.
    pub fn flop_total(&self) -> f64 {
        self.flop_per_element * self.total_elements as f64
    }
}

/// Parameter validation error.
#[derive(Debug, Clone, thiserror::Error)]
#[error("invalid parameters: {reason}")]
pub struct InvalidParams {
    pub reason: String,
}

impl InvalidParams {
    fn new(reason: &str) -> Self {
        Self { reason: reason.to_string() }
    }
}

/// One-way link latency for a message: propagation plus serialization of
/// the payload and all frame overhead.
pub fn link_latency(message_size: u64, link: &LinkParams) -> f64 {
    link.propagation() + link.wire_bytes(message_size) as f64 / link.raw_bandwidth
}

/// Latency of the receive-side copy out of the global-memory buffer.
pub fn copy_latency(message_size: u64, mem: &MemoryParams) -> f64 {
    mem.copy_setup_latency + message_size as f64 / mem.mem_bandwidth
}

/// End-to-end transfer latency for a single message.
///
/// The buffered path pays two command issues (send and receive) plus the
/// receive-side copy; the streamed path pays one command issue and no copy,
/// since data is forwarded directly into the consumer stream.
pub fn transfer_latency(
    message_size: u64,
    mode: TransferMode,
    link: &LinkParams,
    sched: &SchedulingParams,
    mem: &MemoryParams,
) -> f64 {
    let l_cmd = sched.command_latency(mode.scheduling);
    let l_link = link_latency(message_size, link);
    match mode.path {
        DataPath::Buffered => 2.0 * l_cmd + copy_latency(message_size, mem) + l_link,
        DataPath::Streamed => l_cmd + l_link,
    }
}

/// Peak throughput of the buffered path: the link and the receive copy are
/// traversed in series, so rates combine harmonically.
pub fn buffered_peak_throughput(mem_bandwidth: f64, link_bandwidth: f64) -> f64 {
    1.0 / (1.0 / mem_bandwidth + 1.0 / link_bandwidth)
}

/// Throughput ceiling of a window-limited transport: the sender can keep at
/// most `window_bytes` unacknowledged, so sustained goodput cannot exceed
/// window/RTT, nor the link goodput itself.
pub fn windowed_throughput_cap(window_bytes: u64, rtt: f64, link_goodput: f64) -> f64 {
    link_goodput.min(window_bytes as f64 / rtt)
}

/// Per-step communication latency of the halo exchange.
///
/// Covers draining the sent elements out of the pipeline and the received
/// ones back in, one send and one receive command per neighbor, one
/// receive-side copy per neighbor, and the link-level ping-ping latency of
/// the largest per-neighbor message. `halo_bytes` is the size of that
/// largest message; `origin` selects which command latency applies.
pub fn comm_latency(
    p: &AppModelParams,
    sched: &SchedulingParams,
    mem: &MemoryParams,
    origin: Scheduling,
    halo_bytes: u64,
) -> f64 {
    let drain = (p.send_elements + p.recv_elements) as f64 / p.clock_hz;
    let commands = 2.0 * p.max_neighbors as f64 * sched.command_latency(origin);
    let copies = p.max_neighbors as f64 * copy_latency(halo_bytes, mem);
    drain + commands + copies + p.pingping_latency
}

/// Denominator of the application throughput model, in cycles: slack or
/// communication latency (whichever dominates), plus send/receive drains
/// and the pipeline fill.
fn step_cycles(p: &AppModelParams, l_comm: f64) -> f64 {
    let slack = (p.core_elements + p.external_delay_cycles) as f64;
    let comm_cycles = l_comm * p.clock_hz;
    slack.max(comm_cycles)
        + (p.send_elements + p.recv_elements + p.pipeline_fill_cycles) as f64
}

/// Application throughput in FLOP/s for a given per-step communication
/// latency.
pub fn app_throughput(p: &AppModelParams, l_comm: f64) -> f64 {
    p.clock_hz * p.flop_total() / step_cycles(p, l_comm)
}

/// Fraction of a time step the pipeline spends stalled waiting for halo
/// data, in [0, 1).
pub fn stall_fraction(p: &AppModelParams, l_comm: f64) -> f64 {
    let slack = (p.core_elements + p.external_delay_cycles) as f64;
    let stall = (l_comm * p.clock_hz - slack).max(0.0);
    stall / step_cycles(p, l_comm)
}
