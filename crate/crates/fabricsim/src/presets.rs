//! Shipped cluster presets.
//!
//! Each preset bundles link, scheduling, memory and transport parameters
//! plus pipeline defaults for the workload models. The values encode
//! measured characteristics of a 100 Gbit/s FPGA cluster fabric: ~30 us
//! per host runtime kernel invocation, sub-microsecond command processing
//! in fabric logic, roughly 1 us extra per Ethernet switch traversal, a
//! 14 GB/s global-memory copy path, and a host-MPI-over-PCIe baseline
//! whose small-message latency exceeds 120 us.

use serde::{Deserialize, Serialize};

use crate::netsim::{ClusterConfig, TransportConfig, TransportKind};
use crate::perfmodel::{
    DataPath, LinkParams, MemoryParams, Scheduling, SchedulingParams, TransferMode,
};

/// Pipeline-model defaults shipped with a preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineDefaults {
    /// Kernel clock of the synthesized design, Hz.
    pub clock_hz: f64,
    /// Pipeline fill/flush cycles per time step (placeholder; results that
    /// matter are robust to its exact value).
    pub pipeline_fill_cycles: u64,
    /// Extra per-step delay cycles from the memory subsystem (placeholder).
    pub external_delay_cycles: u64,
    /// FLOP per mesh element and step; fixed so throughput figures are
    /// comparable across runs.
    pub flop_per_element: f64,
    /// Wire bytes per halo element (three 8-byte state values, a 4-byte
    /// element id, padded to 32).
    pub bytes_per_element: u64,
}

/// A named, fully specified cluster configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterPreset {
    pub name: &'static str,
    pub link: LinkParams,
    pub scheduling: SchedulingParams,
    pub memory: MemoryParams,
    pub transport: TransportConfig,
    /// Default transfer mode for point-to-point traffic under this preset.
    pub mode: TransferMode,
    pub pipeline: PipelineDefaults,
    /// Where the numbers come from.
    pub notes: &'static str,
}

impl ClusterPreset {
    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            link: self.link,
            scheduling: self.scheduling,
            memory: self.memory,
            transport: self.transport,
        }
    }
}

const QSFP_BANDWIDTH: f64 = 12.5e9; // bytes/s, 100 Gbit/s line rate
const ETH_FRAME_OVERHEAD: u64 = 66; // MAC + IP + UDP-equivalent framing incl. inter-frame gap
const TCP_FRAME_OVERHEAD: u64 = 78; // as above with the larger TCP header
const ETH_MTU_PAYLOAD: u64 = 1472;
const TCP_MSS: u64 = 1460;
const JUMBO_MSS: u64 = 8960;

const SCHED_OFFLOAD: SchedulingParams = SchedulingParams {
    host_invoke_latency: 30.0e-6, // one runtime kernel invocation
    pl_command_latency: 0.3e-6,   // command processed by fabric logic
};

const MEM_HBM: MemoryParams = MemoryParams {
    mem_bandwidth: 14.0e9,
    copy_setup_latency: 0.5e-6,
};

fn direct_link(frame_overhead: u64, mtu_payload: u64) -> LinkParams {
    LinkParams {
        raw_bandwidth: QSFP_BANDWIDTH,
        base_latency: 2.0e-6,
        switch_hops: 0,
        per_hop_latency: 1.0e-6,
        frame_overhead,
        mtu_payload,
    }
}

fn switched_link(frame_overhead: u64, mtu_payload: u64) -> LinkParams {
    LinkParams { switch_hops: 1, ..direct_link(frame_overhead, mtu_payload) }
}

const PIPELINE_UDP: PipelineDefaults = PipelineDefaults {
    clock_hz: 274.0e6,
    pipeline_fill_cycles: 120,
    external_delay_cycles: 300,
    flop_per_element: 384.0,
    bytes_per_element: 32,
};

const PIPELINE_TCP: PipelineDefaults = PipelineDefaults { clock_hz: 252.0e6, ..PIPELINE_UDP };
const PIPELINE_BASE: PipelineDefaults = PipelineDefaults { clock_hz: 256.0e6, ..PIPELINE_UDP };

/// Delay from segment delivery to the ack reaching the sender for the TCP
/// presets: reverse-path propagation through the switch plus receive-stack
/// ack processing. Calibrated so the unscaled 64 KiB window sustains about
/// 8.5 GB/s through the switch.
const TCP_ACK_LATENCY: f64 = 4.585e-6;

fn tcp_transport(mss: u64, window_scaling: bool) -> TransportConfig {
    TransportConfig {
        kind: TransportKind::Windowed,
        mtu_payload: mss,
        frame_overhead: TCP_FRAME_OVERHEAD,
        window_bytes: 1 << 20,
        window_scaling,
        mss,
        ack_latency: Some(TCP_ACK_LATENCY),
    }
}

pub fn all() -> Vec<ClusterPreset> {
    vec![
        ClusterPreset {
            name: "direct-udp-pl",
            link: direct_link(ETH_FRAME_OVERHEAD, ETH_MTU_PAYLOAD),
            scheduling: SCHED_OFFLOAD,
            memory: MEM_HBM,
            transport: TransportConfig::datagram(ETH_MTU_PAYLOAD, ETH_FRAME_OVERHEAD),
            mode: TransferMode::new(DataPath::Streamed, Scheduling::Pl),
            pipeline: PIPELINE_UDP,
            notes: "UDP stack over a direct optical point-to-point link, streamed data \
                    path, commands scheduled from fabric logic; 64 B ping-ping under 3 us",
        },
        ClusterPreset {
            name: "switch-udp-pl",
            link: switched_link(ETH_FRAME_OVERHEAD, ETH_MTU_PAYLOAD),
            scheduling: SCHED_OFFLOAD,
            memory: MEM_HBM,
            transport: TransportConfig::datagram(ETH_MTU_PAYLOAD, ETH_FRAME_OVERHEAD),
            mode: TransferMode::new(DataPath::Streamed, Scheduling::Pl),
            pipeline: PIPELINE_UDP,
            notes: "UDP stack through the Ethernet switch; the switch traversal adds \
                    about 1 us over the direct link",
        },
        ClusterPreset {
            name: "switch-tcp-pl",
            link: switched_link(TCP_FRAME_OVERHEAD, TCP_MSS),
            scheduling: SCHED_OFFLOAD,
            memory: MEM_HBM,
            transport: tcp_transport(TCP_MSS, false),
            mode: TransferMode::new(DataPath::Streamed, Scheduling::Pl),
            pipeline: PIPELINE_TCP,
            notes: "TCP stack through the Ethernet switch without window scaling: the \
                    64 KiB window over the switch RTT caps large messages near 8.5 GB/s",
        },
        ClusterPreset {
            name: "switch-tcp-pl-optimized",
            link: switched_link(TCP_FRAME_OVERHEAD, JUMBO_MSS),
            scheduling: SCHED_OFFLOAD,
            memory: MEM_HBM,
            transport: tcp_transport(JUMBO_MSS, true),
            mode: TransferMode::new(DataPath::Streamed, Scheduling::Pl),
            pipeline: PIPELINE_TCP,
            notes: "TCP stack with window scaling and jumbo frames: the window no \
                    longer binds and large-message throughput reaches about 12.3 GB/s",
        },
        ClusterPreset {
            name: "buffered-host",
            link: direct_link(ETH_FRAME_OVERHEAD, ETH_MTU_PAYLOAD),
            scheduling: SCHED_OFFLOAD,
            memory: MEM_HBM,
            transport: TransportConfig::datagram(ETH_MTU_PAYLOAD, ETH_FRAME_OVERHEAD),
            mode: TransferMode::new(DataPath::Buffered, Scheduling::Host),
            pipeline: PIPELINE_BASE,
            notes: "buffered data path scheduled from the host: two ~30 us kernel \
                    invocations per transfer dominate small-message latency",
        },
        ClusterPreset {
            name: "mpi-pcie-baseline",
            link: LinkParams {
                raw_bandwidth: QSFP_BANDWIDTH,
                base_latency: 34.0e-6, // host MPI + PCIe staging path, one way
                switch_hops: 0,
                per_hop_latency: 1.0e-6,
                frame_overhead: ETH_FRAME_OVERHEAD,
                mtu_payload: ETH_MTU_PAYLOAD,
            },
            scheduling: SCHED_OFFLOAD,
            memory: MemoryParams {
                mem_bandwidth: 6.0e9,        // PCIe staging copies
                copy_setup_latency: 27.0e-6, // DMA setup and driver overhead per copy
            },
            transport: TransportConfig::datagram(ETH_MTU_PAYLOAD, ETH_FRAME_OVERHEAD),
            mode: TransferMode::new(DataPath::Buffered, Scheduling::Host),
            pipeline: PIPELINE_BASE,
            notes: "communication via host MPI and PCIe staging: kernel invocations, \
                    DMA setup and the host network path push 64 B latency above 120 us",
        },
    ]
}

pub fn by_name(name: &str) -> Option<ClusterPreset> {
    all().into_iter().find(|p| p.name == name)
}

/// Names of all shipped presets, in a fixed order.
pub fn names() -> Vec<&'static str> {
    all().iter().map(|p| p.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for p in all() {
            p.cluster_config().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(p.pipeline.clock_hz > 0.0);
        }
    }

    #[test]
    fn required_presets_exist() {
        for name in [
            "direct-udp-pl",
            "switch-udp-pl",
            "switch-tcp-pl",
            "switch-tcp-pl-optimized",
            "buffered-host",
            "mpi-pcie-baseline",
        ] {
            assert!(by_name(name).is_some(), "missing preset {name}");
        }
    }

    #[test]
    fn switched_differs_from_direct_only_by_hop() {
        let d = by_name("direct-udp-pl").unwrap();
        let s = by_name("switch-udp-pl").unwrap();
        assert_eq!(s.link.switch_hops, 1);
        assert_eq!(d.link.switch_hops, 0);
        assert_eq!(LinkParams { switch_hops: 0, ..s.link }, d.link);
    }
}
