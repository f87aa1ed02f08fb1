//! Effective-bandwidth ring benchmark.
//!
//! Nodes are arranged in a virtual ring and exchange messages with their
//! ring neighbors in ping-ping fashion: every node sends to and receives
//! from its neighbors simultaneously, full duplex. A sweep over message
//! sizes yields latency and throughput tables plus a scalar aggregate, and
//! each size is compared against the closed-form transfer-latency model.

use crate::netsim::{
    ClusterConfig, CommandDescriptor, RunLimit, SimError, SimTime, Simulator,
};
use crate::perfmodel::{self, DataPath, TransferMode};

#[derive(Debug, Clone)]
pub struct BeffConfig {
    /// Ring size; at least 2.
    pub node_count: usize,
    /// Message sizes to sweep, strictly increasing.
    pub message_sizes: Vec<u64>,
    /// Rounds per message size; the reported latency is the mean.
    pub repetitions: u32,
    pub mode: TransferMode,
    /// Keep the event trace of the run.
    pub trace: bool,
}

impl BeffConfig {
    pub fn new(node_count: usize, mode: TransferMode) -> Self {
        Self { node_count, message_sizes: default_sizes(), repetitions: 10, mode, trace: false }
    }

    pub fn validate(&self) -> Result<(), BeffError> {
        if self.node_count < 2 {
            return Err(BeffError::Config("node_count must be >= 2".into()));
        }
        if self.repetitions < 1 {
            return Err(BeffError::Config("repetitions must be >= 1".into()));
        }
        if self.message_sizes.is_empty() {
            return Err(BeffError::Config("message_sizes must not be empty".into()));
        }
        if !self.message_sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(BeffError::Config("message_sizes must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Power-of-two sizes from 64 B to 4 MiB.
pub fn default_sizes() -> Vec<u64> {
    (6..=22).map(|p| 1u64 << p).collect()
}

/// Result row for one message size.
#[derive(Debug, Clone, Copy)]
pub struct SizeResult {
    pub size: u64,
    /// Mean round completion time, seconds.
    pub latency: f64,
    /// Aggregate full-duplex throughput over all ring traffic, bytes/s.
    pub throughput: f64,
    /// Closed-form transfer latency for this size and mode.
    pub model_latency: f64,
    /// |simulated - model| / model.
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct BeffResult {
    pub per_size: Vec<SizeResult>,
    /// Arithmetic mean over sizes of the aggregate full-duplex throughput.
    pub effective_bandwidth: f64,
    /// Event trace, when requested in the config.
    pub trace: Option<String>,
}

impl BeffResult {
    /// CSV with the columns size_bytes, latency_s, throughput_Bps,
    /// model_latency_s, rel_error.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size_bytes,latency_s,throughput_Bps,model_latency_s,rel_error\n");
        for r in &self.per_size {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.size, r.latency, r.throughput, r.model_latency, r.rel_error
            ));
        }
        out
    }

    pub fn model_error_csv(&self) -> String {
        let mut out = String::from("size_bytes,rel_error\n");
        for r in &self.per_size {
            out.push_str(&format!("{},{}\n", r.size, r.rel_error));
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BeffError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("empty throughput table")]
    EmptyTable,
}

/// Ring neighbors of `node`: right then left, deduplicated (a 2-ring has a
/// single neighbor).
fn neighbors(node: usize, n: usize) -> Vec<(u32, usize)> {
    let right = (node + 1) % n;
    let left = (node + n - 1) % n;
    if right == left {
        vec![(0, right)]
    } else {
        vec![(0, right), (1, left)]
    }
}

/// Run the benchmark on a fresh simulator built from `cluster`.
pub fn run(cfg: &BeffConfig, cluster: &ClusterConfig) -> Result<BeffResult, BeffError> {
    cfg.validate()?;
    let mut sim = Simulator::new(cfg.node_count, *cluster)?;
    if cfg.trace {
        sim.enable_trace();
    }
    let mut per_size = Vec::with_capacity(cfg.message_sizes.len());
    let msgs_per_round: u64 =
        (0..cfg.node_count).map(|i| neighbors(i, cfg.node_count).len() as u64).sum();

    for &size in &cfg.message_sizes {
        let mut round_latencies = Vec::with_capacity(cfg.repetitions as usize);
        for _ in 0..cfg.repetitions {
            round_latencies.push(run_round(&mut sim, cfg, size)?);
        }
        let latency = round_latencies.iter().sum::<f64>() / round_latencies.len() as f64;
        let throughput = msgs_per_round as f64 * size as f64 / latency;
        let model_latency = perfmodel::transfer_latency(
            size,
            cfg.mode,
            &cluster.link,
            &cluster.scheduling,
            &cluster.memory,
        );
        let rel_error = (latency - model_latency).abs() / model_latency;
        per_size.push(SizeResult { size, latency, throughput, model_latency, rel_error });
    }

    let throughputs: Vec<f64> = per_size.iter().map(|r| r.throughput).collect();
    let effective_bandwidth = aggregate(&throughputs)?;
    let trace = sim.trace().map(str::to_string);
    Ok(BeffResult { per_size, effective_bandwidth, trace })
}

/// One ping-ping round at a given size: all sends start simultaneously,
/// the round completes when every node has fully received from all its
/// neighbors.
fn run_round(sim: &mut Simulator, cfg: &BeffConfig, size: u64) -> Result<f64, BeffError> {
    let t0 = sim.now();
    let first_msg = sim.messages().count();

    let mut sends = Vec::new();
    for node in 0..cfg.node_count {
        for (tag, peer) in neighbors(node, cfg.node_count) {
            sim.post_command_at(
                node,
                CommandDescriptor::send(peer, tag, size, cfg.mode.path, cfg.mode.scheduling),
                t0,
            )?;
            sends.push((node, peer, tag));
        }
    }
    let mut recv_handles = Vec::new();
    if cfg.mode.path == DataPath::Buffered {
        // receives are issued on arrival notification, like a host polling
        // for completion before invoking the receive
        for &(src, dst, tag) in &sends {
            recv_handles.push(sim.post_recv_on_arrival(dst, src, tag, size, cfg.mode.scheduling)?);
        }
    }
    sim.run_until(RunLimit::Quiescence)?;

    let completion: SimTime = if cfg.mode.path == DataPath::Buffered {
        recv_handles
            .iter()
            .map(|&h| sim.completion(h).expect("receive did not complete"))
            .max()
            .unwrap()
    } else {
        sim.messages()
            .skip(first_msg)
            .map(|m| m.delivered_at.expect("message not delivered"))
            .max()
            .unwrap()
    };
    Ok((completion - t0) as f64 / crate::netsim::PS_PER_SEC as f64)
}

/// Scalar effective bandwidth: the arithmetic mean of the per-size
/// full-duplex throughputs.
pub fn aggregate(per_size_throughput: &[f64]) -> Result<f64, BeffError> {
    if per_size_throughput.is_empty() {
        return Err(BeffError::EmptyTable);
    }
    Ok(per_size_throughput.iter().sum::<f64>() / per_size_throughput.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perfmodel::Scheduling;
    use crate::presets;

    #[test]
    fn aggregate_rules() {
        assert!(aggregate(&[]).is_err());
        assert_eq!(aggregate(&[3.5e9]).unwrap(), 3.5e9);
        assert_eq!(aggregate(&[4e9, 4e9, 4e9]).unwrap(), 4e9);
        assert_eq!(aggregate(&[2e9, 4e9]).unwrap(), 3e9);
    }

    #[test]
    fn rejects_bad_configs() {
        let preset = presets::by_name("direct-udp-pl").unwrap();
        let mut cfg = BeffConfig::new(1, preset.mode);
        assert!(matches!(cfg.validate(), Err(BeffError::Config(_))));
        cfg.node_count = 2;
        cfg.message_sizes = vec![64, 64];
        assert!(cfg.validate().is_err());
        cfg.message_sizes = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn two_ring_has_single_neighbor() {
        assert_eq!(neighbors(0, 2), vec![(0, 1)]);
        assert_eq!(neighbors(1, 2), vec![(0, 0)]);
        assert_eq!(neighbors(0, 4), vec![(0, 1), (1, 3)]);
    }

    #[test]
    fn streamed_pl_small_message_latency() {
        let preset = presets::by_name("direct-udp-pl").unwrap();
        let cfg = BeffConfig {
            message_sizes: vec![64],
            repetitions: 3,
            ..BeffConfig::new(2, preset.mode)
        };
        let res = run(&cfg, &preset.cluster_config()).unwrap();
        assert!(res.per_size[0].latency < 3.0e-6, "latency {}", res.per_size[0].latency);
    }

    #[test]
    fn buffered_host_small_message_latency() {
        let preset = presets::by_name("buffered-host").unwrap();
        let cfg = BeffConfig {
            message_sizes: vec![64],
            repetitions: 3,
            ..BeffConfig::new(2, preset.mode)
        };
        let res = run(&cfg, &preset.cluster_config()).unwrap();
        let lat = res.per_size[0].latency;
        assert!((55.0e-6..=70.0e-6).contains(&lat), "latency {lat}");
    }

    #[test]
    fn switch_adds_about_one_microsecond() {
        for size in [64u64, 4096] {
            let lat = |name: &str| {
                let p = presets::by_name(name).unwrap();
                let cfg = BeffConfig {
                    message_sizes: vec![size],
                    repetitions: 2,
                    ..BeffConfig::new(2, p.mode)
                };
                run(&cfg, &p.cluster_config()).unwrap().per_size[0].latency
            };
            let delta = lat("switch-udp-pl") - lat("direct-udp-pl");
            assert!((delta - 1.0e-6).abs() <= 0.3e-6, "delta {delta}");
        }
    }

    #[test]
    fn latency_non_decreasing_in_size() {
        for name in ["direct-udp-pl", "buffered-host", "switch-tcp-pl"] {
            let p = presets::by_name(name).unwrap();
            let cfg = BeffConfig {
                message_sizes: vec![64, 1024, 65536, 1 << 20],
                repetitions: 1,
                ..BeffConfig::new(2, p.mode)
            };
            let res = run(&cfg, &p.cluster_config()).unwrap();
            for w in res.per_size.windows(2) {
                assert!(w[1].latency >= w[0].latency, "{name}: {:?}", res.per_size);
            }
        }
    }

    #[test]
    fn ring_size_does_not_change_pair_latency() {
        let p = presets::by_name("direct-udp-pl").unwrap();
        let lat = |nodes: usize| {
            let cfg = BeffConfig {
                message_sizes: vec![4096],
                repetitions: 2,
                ..BeffConfig::new(nodes, p.mode)
            };
            run(&cfg, &p.cluster_config()).unwrap().per_size[0].latency
        };
        let l4 = lat(4);
        let l8 = lat(8);
        assert_eq!(l4.to_bits(), l8.to_bits(), "l4={l4} l8={l8}");
    }

    #[test]
    fn large_messages_approach_the_goodput_bound() {
        // per-direction throughput at the largest size approaches the
        // transport bound; host-scheduled modes carry ~60 us of command
        // constants, so their asymptote needs a larger message
        let cases = [
            ("direct-udp-pl", 4u64 << 20),
            ("switch-tcp-pl-optimized", 4 << 20),
            ("buffered-host", 16 << 20),
        ];
        for (name, size) in cases {
            let p = presets::by_name(name).unwrap();
            let cluster = p.cluster_config();
            let cfg = BeffConfig {
                message_sizes: vec![size],
                repetitions: 1,
                ..BeffConfig::new(2, p.mode)
            };
            let res = run(&cfg, &cluster).unwrap();
            let per_direction = size as f64 / res.per_size[0].latency;
            let mut bound = cluster.link.goodput();
            if p.mode.path == DataPath::Buffered {
                bound = bound.min(perfmodel::buffered_peak_throughput(
                    cluster.memory.mem_bandwidth,
                    cluster.link.goodput(),
                ));
            }
            if cluster.transport.kind == crate::netsim::TransportKind::Windowed {
                let seg = (cluster.transport.mss + cluster.transport.frame_overhead) as f64
                    / cluster.link.raw_bandwidth;
                let rtt = seg
                    + cluster.link.propagation()
                    + cluster.transport.ack_latency.unwrap_or(cluster.link.propagation());
                bound = bound.min(perfmodel::windowed_throughput_cap(
                    cluster.transport.effective_window(),
                    rtt,
                    cluster.link.goodput(),
                ));
            }
            let gap = (bound - per_direction) / bound;
            assert!(
                gap.abs() <= 0.05,
                "{name}: throughput {per_direction:.3e} vs bound {bound:.3e} ({:.1}%)",
                gap * 100.0
            );
        }
    }

    #[test]
    fn throughput_bounded_by_ring_capacity() {
        let p = presets::by_name("direct-udp-pl").unwrap();
        let cfg = BeffConfig {
            message_sizes: vec![1 << 20],
            repetitions: 1,
            ..BeffConfig::new(4, TransferMode::new(DataPath::Streamed, Scheduling::Pl))
        };
        let res = run(&cfg, &p.cluster_config()).unwrap();
        let bound = 4.0 * 2.0 * p.link.raw_bandwidth;
        assert!(res.per_size[0].throughput <= bound);
        assert!(res.per_size[0].latency > 0.0);
    }
}
