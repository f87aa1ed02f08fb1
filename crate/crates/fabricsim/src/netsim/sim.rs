use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::queue::EventQueue;
use super::time::{ps_from_secs, wire_time_ps, SimTime};
use crate::perfmodel::{DataPath, LinkParams, MemoryParams, Scheduling, SchedulingParams};

pub type NodeId = usize;
pub type Tag = u32;

/// Index of a command in the simulator's command table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandHandle(pub usize);

/// Index of a message in the simulator's message table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MessageId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    /// Fire-and-forget segments at link rate, no flow control.
    Datagram,
    /// Sliding-window flow control: unacked bytes capped by the effective
    /// window, each delivered segment acknowledged after `ack_latency`.
    Windowed,
}

/// Transport layer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub kind: TransportKind,
    /// Payload bytes per frame on the wire.
    pub mtu_payload: u64,
    /// Header/framing bytes per frame.
    pub frame_overhead: u64,
    /// Send window in bytes (windowed only).
    pub window_bytes: u64,
    /// Without window scaling the effective window saturates at 65535
    /// bytes, the largest value the unscaled 16-bit field can carry.
    pub window_scaling: bool,
    /// Maximum segment payload (windowed only); must not exceed the MTU.
    pub mss: u64,
    /// Delay from segment delivery to the ack reaching the sender, seconds.
    /// `None` uses the reverse-path propagation delay.
    pub ack_latency: Option<f64>,
}

impl TransportConfig {
    pub fn datagram(mtu_payload: u64, frame_overhead: u64) -> Self {
        Self {
            kind: TransportKind::Datagram,
            mtu_payload,
            frame_overhead,
            window_bytes: 0,
            window_scaling: false,
            mss: 0,
            ack_latency: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.mtu_payload == 0 {
            return Err("transport.mtu_payload must be > 0".into());
        }
        if self.kind == TransportKind::Windowed {
            if self.window_bytes == 0 {
                return Err("transport.window_bytes must be > 0 for windowed transport".into());
            }
            if self.mss == 0 || self.mss > self.mtu_payload {
                return Err("transport.mss must be in 1..=mtu_payload".into());
            }
            if let Some(a) = self.ack_latency {
                if a < 0.0 {
                    return Err("transport.ack_latency must be >= 0".into());
                }
            }
        }
        Ok(())
    }

    /// Segment payload size used when injecting a message onto the wire.
    pub fn segment_payload(&self) -> u64 {
        match self.kind {
            TransportKind::Datagram => self.mtu_payload,
            TransportKind::Windowed => self.mss,
        }
    }

    /// Window after applying the scaling rule.
    pub fn effective_window(&self) -> u64 {
        match self.kind {
            TransportKind::Datagram => u64::MAX,
            TransportKind::Windowed => {
                if self.window_scaling {
                    self.window_bytes
                } else {
                    self.window_bytes.min(65_535)
                }
            }
        }
    }
}

/// Everything the simulator needs about the (homogeneous) cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub link: LinkParams,
    pub scheduling: SchedulingParams,
    pub memory: MemoryParams,
    pub transport: TransportConfig,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.link.validate().map_err(|e| e.to_string())?;
        self.scheduling.validate().map_err(|e| e.to_string())?;
        self.memory.validate().map_err(|e| e.to_string())?;
        self.transport.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandOp {
    Send,
    Recv,
}

/// A send or receive command posted to a node's offload engine.
#[derive(Debug, Clone)]
pub struct CommandDescriptor {
    pub op: CommandOp,
    pub peer: NodeId,
    pub tag: Tag,
    pub size: u64,
    pub path: DataPath,
    pub origin: Scheduling,
    /// Optional payload carried by a send; length must equal `size`.
    pub payload: Option<Vec<u8>>,
}

impl CommandDescriptor {
    pub fn send(peer: NodeId, tag: Tag, size: u64, path: DataPath, origin: Scheduling) -> Self {
        Self { op: CommandOp::Send, peer, tag, size, path, origin, payload: None }
    }

    pub fn send_payload(peer: NodeId, tag: Tag, payload: Vec<u8>, path: DataPath, origin: Scheduling) -> Self {
        let size = payload.len() as u64;
        Self { op: CommandOp::Send, peer, tag, size, path, origin, payload: Some(payload) }
    }

    pub fn recv(peer: NodeId, tag: Tag, size: u64, origin: Scheduling) -> Self {
        Self { op: CommandOp::Recv, peer, tag, size, path: DataPath::Buffered, origin, payload: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunLimit {
    /// Process events until the queue is empty, then check for unmatched
    /// commands.
    Quiescence,
    /// Process events up to and including the given time.
    Time(SimTime),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnmatchedKind {
    SendWithoutRecv,
    RecvWithoutSend,
}

/// One entry of a deadlock report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unmatched {
    pub node: NodeId,
    pub peer: NodeId,
    pub tag: Tag,
    pub kind: UnmatchedKind,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown peer node {peer} referenced by node {node}")]
    UnknownPeer { node: NodeId, peer: NodeId },
    #[error("no receive buffer configured on node {node} for (source {sender}, tag {tag})")]
    NoRxBuffer { node: NodeId, sender: NodeId, tag: Tag },
    #[error("deadlock: {} unmatched command(s)", .0.len())]
    Deadlock(Vec<Unmatched>),
}

/// Aggregate statistics of a finished (or paused) run.
#[derive(Debug, Clone, Default)]
pub struct SimStats {
    pub final_time: SimTime,
    pub events_processed: u64,
    pub bytes_sent: Vec<u64>,
    pub bytes_received: Vec<u64>,
    /// Picoseconds each node's NIC spent serializing segments.
    pub link_busy_ps: Vec<u64>,
}

/// A segment handed to a node's stream consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamChunk {
    pub source: NodeId,
    pub tag: Tag,
    pub message: MessageId,
    pub offset: u64,
    pub len: u64,
    pub at: SimTime,
}

/// Read-only view of a transferred message.
#[derive(Debug, Clone, Copy)]
pub struct MessageView<'a> {
    pub id: MessageId,
    pub source: NodeId,
    pub dest: NodeId,
    pub tag: Tag,
    pub size: u64,
    pub path: DataPath,
    /// When the send command became visible to the offload engine.
    pub visible_at: SimTime,
    /// When the last payload byte left the sender's NIC.
    pub tx_done_at: Option<SimTime>,
    /// When the last byte reached the destination (stream consumer or
    /// receive buffer).
    pub delivered_at: Option<SimTime>,
    pub payload: Option<&'a [u8]>,
}

// ---------------------------------------------------------------------------
// internal state

#[derive(Debug)]
enum Event {
    /// A command was posted; run it through its issuer.
    Post { cmd: usize },
    /// Command issue latency elapsed; the offload engine acts on it.
    Visible { cmd: usize },
    /// Sender NIC finished serializing a segment.
    NicFree { node: NodeId },
    /// A segment's last byte reached the destination.
    SegmentArrive { msg: usize, offset: u64, len: u64 },
    /// Window acknowledgment returned to the sender.
    AckArrive { node: NodeId, dest: NodeId, len: u64 },
    /// Receive-side copy finished; the receive command completes.
    CopyDone { cmd: usize },
    /// A stalled stream consumer woke up.
    ConsumerWake { node: NodeId },
}

struct Command {
    node: NodeId,
    op: CommandOp,
    peer: NodeId,
    tag: Tag,
    size: u64,
    path: DataPath,
    origin: Scheduling,
    visible_at: Option<SimTime>,
    completed_at: Option<SimTime>,
    msg: Option<usize>,
}

struct Message {
    source: NodeId,
    dest: NodeId,
    tag: Tag,
    size: u64,
    path: DataPath,
    payload: Option<Vec<u8>>,
    visible_at: SimTime,
    /// Payload bytes injected so far.
    sent_bytes: u64,
    injected_all: bool,
    tx_done_at: Option<SimTime>,
    delivered_bytes: u64,
    delivered_at: Option<SimTime>,
    send_cmd: usize,
}

struct Flow {
    /// Message ids queued on this flow, FIFO.
    queue: VecDeque<usize>,
    in_flight: u64,
}

struct Consumer {
    stall_until: SimTime,
    wake_scheduled: bool,
    pending: VecDeque<(usize, u64, u64)>, // (msg, offset, len)
}

impl Default for Consumer {
    fn default() -> Self {
        Self { stall_until: SimTime::ZERO, wake_scheduled: false, pending: VecDeque::new() }
    }
}

#[derive(Default)]
struct Node {
    host_issuer_free: SimTime,
    pl_issuer_free: SimTime,
    nic_free: SimTime,
    copy_free: SimTime,
    flows: Vec<Flow>,
    flow_index: BTreeMap<NodeId, usize>,
    /// Buffered-path receive buffers this node is configured to accept,
    /// keyed by (source, tag).
    rx_buffers: BTreeSet<(NodeId, Tag)>,
    /// Fully arrived buffered messages waiting for a matching receive.
    spill: BTreeMap<(NodeId, Tag), VecDeque<usize>>,
    /// Visible receive commands waiting for a message.
    waiting_recvs: BTreeMap<(NodeId, Tag), VecDeque<usize>>,
    /// Receive commands to be issued when the message arrives.
    on_arrival_recvs: BTreeMap<(NodeId, Tag), VecDeque<usize>>,
    consumer: Consumer,
    stream_log: Vec<StreamChunk>,
    bytes_sent: u64,
    bytes_received: u64,
    nic_busy_ps: u64,
}

/// The simulator. See the module docs for the model.
pub struct Simulator {
    cfg: ClusterConfig,
    nodes: Vec<Node>,
    queue: EventQueue<Event>,
    now: SimTime,
    commands: Vec<Command>,
    messages: Vec<Message>,
    /// Payloads handed over at post time, consumed when the send issues.
    pending_payloads: Vec<(usize, Vec<u8>)>,
    events_processed: u64,
    // precomputed picosecond constants
    bandwidth: u64,
    prop_ps: u64,
    host_latency_ps: u64,
    pl_latency_ps: u64,
    copy_setup_ps: u64,
    mem_bandwidth: u64,
    ack_ps: u64,
    trace: Option<String>,
    error: Option<SimError>,
}

impl Simulator {
    pub fn new(node_count: usize, cfg: ClusterConfig) -> Result<Self, SimError> {
        cfg.validate().map_err(SimError::Config)?;
        if node_count == 0 {
            return Err(SimError::Config("node_count must be >= 1".into()));
        }
        let prop_ps = ps_from_secs(cfg.link.propagation());
        let ack_ps = match cfg.transport.ack_latency {
            Some(s) => ps_from_secs(s),
            None => prop_ps,
        };
        Ok(Self {
            nodes: (0..node_count).map(|_| Node::default()).collect(),
            queue: EventQueue::new(),
            now: SimTime::ZERO,
            commands: Vec::new(),
            messages: Vec::new(),
            pending_payloads: Vec::new(),
            events_processed: 0,
            bandwidth: cfg.link.raw_bandwidth.round() as u64,
            prop_ps,
            host_latency_ps: ps_from_secs(cfg.scheduling.host_invoke_latency),
            pl_latency_ps: ps_from_secs(cfg.scheduling.pl_command_latency),
            copy_setup_ps: ps_from_secs(cfg.memory.copy_setup_latency),
            mem_bandwidth: cfg.memory.mem_bandwidth.round() as u64,
            ack_ps,
            trace: None,
            error: None,
            cfg,
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Record a line-oriented event trace for this run.
    pub fn enable_trace(&mut self) {
        if self.trace.is_none() {
            self.trace = Some(String::new());
        }
    }

    pub fn trace(&self) -> Option<&str> {
        self.trace.as_deref()
    }

    /// Post a command at the current simulation time.
    pub fn post_command(&mut self, node: NodeId, cmd: CommandDescriptor) -> Result<CommandHandle, SimError> {
        self.post_command_at(node, cmd, self.now)
    }

    /// Post a command at a future simulation time. The command runs through
    /// the node's issuer (host or on-fabric) and becomes visible to the
    /// offload engine after the issuer's serial latency.
    pub fn post_command_at(
        &mut self,
        node: NodeId,
        cmd: CommandDescriptor,
        at: SimTime,
    ) -> Result<CommandHandle, SimError> {
        self.check_peer(node, cmd.peer)?;
        assert!(at >= self.now, "command posted in the past");
        if cmd.op == CommandOp::Recv && cmd.path == DataPath::Streamed {
            return Err(SimError::Config(
                "streamed receives are implicit; attach a stream consumer instead".into(),
            ));
        }
        if let Some(p) = &cmd.payload {
            if p.len() as u64 != cmd.size {
                return Err(SimError::Config("payload length must equal command size".into()));
            }
        }
        let idx = self.push_command(node, &cmd);
        if cmd.op == CommandOp::Recv {
            self.nodes[node].rx_buffers.insert((cmd.peer, cmd.tag));
        }
        self.schedule(at, Event::Post { cmd: idx });
        Ok(CommandHandle(idx))
    }

    /// Register a buffered receive that is issued the moment the matching
    /// message has fully arrived (notification-driven receive). This also
    /// configures the receive buffer for (peer, tag).
    pub fn post_recv_on_arrival(
        &mut self,
        node: NodeId,
        peer: NodeId,
        tag: Tag,
        size: u64,
        origin: Scheduling,
    ) -> Result<CommandHandle, SimError> {
        self.check_peer(node, peer)?;
        let desc = CommandDescriptor::recv(peer, tag, size, origin);
        let idx = self.push_command(node, &desc);
        let n = &mut self.nodes[node];
        n.rx_buffers.insert((peer, tag));
        // If the message is already in the spill buffer, issue right away.
        if n.spill.get(&(peer, tag)).is_some_and(|q| !q.is_empty()) {
            self.schedule(self.now, Event::Post { cmd: idx });
        } else {
            n.on_arrival_recvs.entry((peer, tag)).or_default().push_back(idx);
        }
        Ok(CommandHandle(idx))
    }

    /// Configure a receive buffer without posting a receive yet. Arriving
    /// buffered messages for unconfigured (source, tag) pairs abort the run.
    pub fn configure_rx_buffer(&mut self, node: NodeId, source: NodeId, tag: Tag) -> Result<(), SimError> {
        self.check_peer(node, source)?;
        self.nodes[node].rx_buffers.insert((source, tag));
        Ok(())
    }

    /// Stall `node`'s stream consumer until the given time: arriving
    /// streamed segments queue at the NIC boundary and are delivered when
    /// the consumer wakes. Nothing is dropped.
    pub fn stall_consumer_until(&mut self, node: NodeId, until: SimTime) {
        self.nodes[node].consumer.stall_until = until;
    }

    /// Run the simulation. Returns statistics on success; a deadlock report
    /// if the event queue drains with unmatched sends or receives (quiescence
    /// limit only); or the first fatal configuration error hit at runtime.
    pub fn run_until(&mut self, limit: RunLimit) -> Result<SimStats, SimError> {
        while let Some(t) = self.queue.peek_time() {
            if let RunLimit::Time(stop) = limit {
                if t > stop {
                    break;
                }
            }
            let (t, ev) = self.queue.pop().unwrap();
            assert!(t >= self.now, "causality violation");
            self.now = t;
            self.events_processed += 1;
            self.dispatch(ev);
            if let Some(err) = self.error.take() {
                return Err(err);
            }
        }
        if let RunLimit::Time(stop) = limit {
            if stop > self.now {
                self.now = stop;
            }
        }
        if limit == RunLimit::Quiescence {
            let unmatched = self.unmatched();
            if !unmatched.is_empty() {
                return Err(SimError::Deadlock(unmatched));
            }
        }
        Ok(self.stats())
    }

    pub fn stats(&self) -> SimStats {
        SimStats {
            final_time: self.now,
            events_processed: self.events_processed,
            bytes_sent: self.nodes.iter().map(|n| n.bytes_sent).collect(),
            bytes_received: self.nodes.iter().map(|n| n.bytes_received).collect(),
            link_busy_ps: self.nodes.iter().map(|n| n.nic_busy_ps).collect(),
        }
    }

    /// Completion time of a command, if it has completed.
    pub fn completion(&self, h: CommandHandle) -> Option<SimTime> {
        self.commands[h.0].completed_at
    }

    /// The message transferred by a send or matched by a receive command.
    pub fn command_message(&self, h: CommandHandle) -> Option<MessageView<'_>> {
        self.commands[h.0].msg.map(|m| self.message_view(m))
    }

    pub fn messages(&self) -> impl Iterator<Item = MessageView<'_>> {
        (0..self.messages.len()).map(|i| self.message_view(i))
    }

    pub fn message(&self, id: MessageId) -> MessageView<'_> {
        self.message_view(id.0)
    }

    /// Segments delivered to `node`'s stream consumer, in delivery order.
    pub fn stream_log(&self, node: NodeId) -> &[StreamChunk] {
        &self.nodes[node].stream_log
    }

    /// Check that every completed message moved exactly its descriptor size
    /// end to end. Returns a description of the first violation.
    pub fn verify_byte_conservation(&self) -> Result<(), String> {
        for (i, m) in self.messages.iter().enumerate() {
            if m.delivered_at.is_some() && m.delivered_bytes != m.size {
                return Err(format!(
                    "message {i} ({} -> {}, tag {}): delivered {} of {} bytes",
                    m.source, m.dest, m.tag, m.delivered_bytes, m.size
                ));
            }
            if m.injected_all && m.sent_bytes != m.size {
                return Err(format!(
                    "message {i} ({} -> {}, tag {}): injected {} of {} bytes",
                    m.source, m.dest, m.tag, m.sent_bytes, m.size
                ));
            }
        }
        Ok(())
    }

    // -- internals ----------------------------------------------------------

    fn check_peer(&self, node: NodeId, peer: NodeId) -> Result<(), SimError> {
        if node >= self.nodes.len() || peer >= self.nodes.len() {
            return Err(SimError::UnknownPeer { node, peer });
        }
        Ok(())
    }

    fn push_command(&mut self, node: NodeId, cmd: &CommandDescriptor) -> usize {
        self.commands.push(Command {
            node,
            op: cmd.op,
            peer: cmd.peer,
            tag: cmd.tag,
            size: cmd.size,
            path: cmd.path,
            origin: cmd.origin,
            visible_at: None,
            completed_at: None,
            msg: None,
        });
        if let Some(p) = &cmd.payload {
            // payload is stashed on the message once the command issues
            let idx = self.commands.len() - 1;
            self.pending_payloads.push((idx, p.clone()));
        }
        self.commands.len() - 1
    }

    fn schedule(&mut self, at: SimTime, ev: Event) {
        assert!(at >= self.now, "event scheduled in the past");
        self.queue.push(at, ev);
    }

    fn issuer_latency_ps(&self, origin: Scheduling) -> u64 {
        match origin {
            Scheduling::Host => self.host_latency_ps,
            Scheduling::Pl => self.pl_latency_ps,
        }
    }

    fn trace_line(&mut self, kind: &str, node: NodeId, details: std::fmt::Arguments<'_>) {
        if let Some(buf) = self.trace.as_mut() {
            let _ = writeln!(buf, "{} {} {} {}", self.now, node, kind, details);
        }
    }

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::Post { cmd } => self.on_post(cmd),
            Event::Visible { cmd } => self.on_visible(cmd),
            Event::NicFree { node } => self.try_start_tx(node),
            Event::SegmentArrive { msg, offset, len } => self.on_segment_arrive(msg, offset, len),
            Event::AckArrive { node, dest, len } => self.on_ack(node, dest, len),
            Event::CopyDone { cmd } => self.on_copy_done(cmd),
            Event::ConsumerWake { node } => self.on_consumer_wake(node),
        }
    }

    fn on_post(&mut self, cmd: usize) {
        let node = self.commands[cmd].node;
        let origin = self.commands[cmd].origin;
        let lat = self.issuer_latency_ps(origin);
        let issuer_free = match origin {
            Scheduling::Host => &mut self.nodes[node].host_issuer_free,
            Scheduling::Pl => &mut self.nodes[node].pl_issuer_free,
        };
        let start = (*issuer_free).max(self.now);
        let visible = start + lat;
        *issuer_free = visible;
        self.schedule(visible, Event::Visible { cmd });
    }

    fn on_visible(&mut self, cmd: usize) {
        let c = &mut self.commands[cmd];
        c.visible_at = Some(self.now);
        let (node, op, peer, tag) = (c.node, c.op, c.peer, c.tag);
        self.trace_line(
            "CommandIssued",
            node,
            format_args!("{:?} peer={} tag={}", op, peer, tag),
        );
        match op {
            CommandOp::Send => {
                let payload = self.take_payload(cmd);
                let c = &self.commands[cmd];
                let msg_idx = self.messages.len();
                self.messages.push(Message {
                    source: node,
                    dest: peer,
                    tag,
                    size: c.size,
                    path: c.path,
                    payload,
                    visible_at: self.now,
                    sent_bytes: 0,
                    injected_all: false,
                    tx_done_at: None,
                    delivered_bytes: 0,
                    delivered_at: None,
                    send_cmd: cmd,
                });
                self.commands[cmd].msg = Some(msg_idx);
                let n = &mut self.nodes[node];
                let flow = match n.flow_index.get(&peer) {
                    Some(&f) => f,
                    None => {
                        n.flows.push(Flow { queue: VecDeque::new(), in_flight: 0 });
                        let f = n.flows.len() - 1;
                        n.flow_index.insert(peer, f);
                        f
                    }
                };
                n.flows[flow].queue.push_back(msg_idx);
                self.try_start_tx(node);
            }
            CommandOp::Recv => {
                // match against an already-arrived message, else wait
                let n = &mut self.nodes[node];
                let key = (peer, tag);
                let msg = n.spill.get_mut(&key).and_then(|q| q.pop_front());
                match msg {
                    Some(m) => self.start_copy(cmd, m),
                    None => {
                        n.waiting_recvs.entry(key).or_default().push_back(cmd);
                    }
                }
            }
        }
    }

    fn take_payload(&mut self, cmd: usize) -> Option<Vec<u8>> {
        if let Some(pos) = self.pending_payloads.iter().position(|(c, _)| *c == cmd) {
            Some(self.pending_payloads.swap_remove(pos).1)
        } else {
            None
        }
    }

    /// Inject the next allowed segment on `node`'s NIC, if it is free.
    /// Flows are scanned in creation order; within a flow, messages are
    /// strictly FIFO, so per-(source, dest, tag) byte order is preserved.
    fn try_start_tx(&mut self, node: NodeId) {
        if self.nodes[node].nic_free > self.now {
            return;
        }
        let window = self.cfg.transport.effective_window();
        let seg_payload = self.cfg.transport.segment_payload();
        let windowed = self.cfg.transport.kind == TransportKind::Windowed;

        // pick (flow, msg, offset, len) deterministically
        let mut pick: Option<(usize, usize, u64, u64)> = None;
        for (fi, flow) in self.nodes[node].flows.iter().enumerate() {
            let Some(&msg_idx) = flow.queue.front() else { continue };
            let m = &self.messages[msg_idx];
            let remaining = m.size - m.sent_bytes;
            let len = remaining.min(seg_payload);
            if windowed && flow.in_flight + len > window {
                continue; // window closed for this flow
            }
            pick = Some((fi, msg_idx, m.sent_bytes, len));
            break;
        }
        let Some((fi, msg_idx, offset, len)) = pick else { return };

        let wire_bytes = len + self.cfg.transport.frame_overhead;
        let tx_ps = wire_time_ps(wire_bytes, self.bandwidth);
        let tx_end = self.now + tx_ps;
        let (dest, tag) = (self.messages[msg_idx].dest, self.messages[msg_idx].tag);
        self.trace_line(
            "SegmentTx",
            node,
            format_args!("dest={} tag={} offset={} len={}", dest, tag, offset, len),
        );

        {
            let m = &mut self.messages[msg_idx];
            m.sent_bytes += len;
            let done = m.sent_bytes >= m.size;
            if done {
                m.injected_all = true;
                m.tx_done_at = Some(tx_end);
            }
            let n = &mut self.nodes[node];
            n.bytes_sent += len;
            n.nic_busy_ps += tx_ps;
            if windowed {
                n.flows[fi].in_flight += len;
                assert!(
                    n.flows[fi].in_flight <= window,
                    "window bound violated on node {node}: {} > {window} in flight",
                    n.flows[fi].in_flight
                );
            }
            if done {
                n.flows[fi].queue.pop_front();
            }
            n.nic_free = tx_end;
        }
        if self.messages[msg_idx].injected_all {
            // sender-side completion of the send command
            let send_cmd = self.messages[msg_idx].send_cmd;
            self.commands[send_cmd].completed_at = Some(tx_end);
        }
        self.schedule(tx_end + self.prop_ps, Event::SegmentArrive { msg: msg_idx, offset, len });
        self.schedule(tx_end, Event::NicFree { node });
    }

    fn on_segment_arrive(&mut self, msg: usize, offset: u64, len: u64) {
        let (src, dest, tag, path) = {
            let m = &self.messages[msg];
            (m.source, m.dest, m.tag, m.path)
        };
        self.trace_line(
            "SegmentRx",
            dest,
            format_args!("source={} tag={} offset={} len={}", src, tag, offset, len),
        );
        if self.cfg.transport.kind == TransportKind::Windowed {
            self.schedule(self.now + self.ack_ps, Event::AckArrive { node: src, dest, len });
        }
        match path {
            DataPath::Streamed => {
                let stalled = {
                    let cons = &self.nodes[dest].consumer;
                    cons.stall_until > self.now || !cons.pending.is_empty()
                };
                if stalled {
                    let wake = self.nodes[dest].consumer.stall_until;
                    self.nodes[dest].consumer.pending.push_back((msg, offset, len));
                    if !self.nodes[dest].consumer.wake_scheduled {
                        self.nodes[dest].consumer.wake_scheduled = true;
                        self.schedule(wake.max(self.now), Event::ConsumerWake { node: dest });
                    }
                } else {
                    self.deliver_to_stream(dest, msg, offset, len);
                }
            }
            DataPath::Buffered => {
                if !self.nodes[dest].rx_buffers.contains(&(src, tag)) {
                    self.error = Some(SimError::NoRxBuffer { node: dest, sender: src, tag });
                    return;
                }
                let complete = {
                    let m = &mut self.messages[msg];
                    m.delivered_bytes += len;
                    self.nodes[dest].bytes_received += len;
                    if m.delivered_bytes >= m.size {
                        m.delivered_at = Some(self.now);
                        true
                    } else {
                        false
                    }
                };
                if complete {
                    let key = (src, tag);
                    // a receive already waiting takes it; else an on-arrival
                    // receive is issued now; else it parks in the spill buffer
                    let waiting = self.nodes[dest]
                        .waiting_recvs
                        .get_mut(&key)
                        .and_then(|q| q.pop_front());
                    if let Some(cmd) = waiting {
                        self.start_copy(cmd, msg);
                    } else {
                        let on_arrival = self.nodes[dest]
                            .on_arrival_recvs
                            .get_mut(&key)
                            .and_then(|q| q.pop_front());
                        self.nodes[dest].spill.entry(key).or_default().push_back(msg);
                        if let Some(cmd) = on_arrival {
                            self.schedule(self.now, Event::Post { cmd });
                        }
                    }
                }
            }
        }
    }

    fn deliver_to_stream(&mut self, node: NodeId, msg: usize, offset: u64, len: u64) {
        let (src, tag) = (self.messages[msg].source, self.messages[msg].tag);
        self.trace_line(
            "StreamDelivered",
            node,
            format_args!("source={} tag={} offset={} len={}", src, tag, offset, len),
        );
        self.nodes[node].stream_log.push(StreamChunk {
            source: src,
            tag,
            message: MessageId(msg),
            offset,
            len,
            at: self.now,
        });
        self.nodes[node].bytes_received += len;
        let m = &mut self.messages[msg];
        m.delivered_bytes += len;
        if m.delivered_bytes >= m.size {
            m.delivered_at = Some(self.now);
        }
    }

    fn on_consumer_wake(&mut self, node: NodeId) {
        self.trace_line("KernelWake", node, format_args!(""));
        self.nodes[node].consumer.wake_scheduled = false;
        while let Some((msg, offset, len)) = self.nodes[node].consumer.pending.pop_front() {
            self.deliver_to_stream(node, msg, offset, len);
        }
    }

    fn on_ack(&mut self, node: NodeId, dest: NodeId, len: u64) {
        self.trace_line("AckRx", node, format_args!("dest={} len={}", dest, len));
        let fi = self.nodes[node].flow_index[&dest];
        let f = &mut self.nodes[node].flows[fi];
        debug_assert!(f.in_flight >= len);
        f.in_flight -= len;
        self.try_start_tx(node);
    }

    fn start_copy(&mut self, cmd: usize, msg: usize) {
        let node = self.commands[cmd].node;
        let size = self.messages[msg].size;
        self.commands[cmd].msg = Some(msg);
        let start = self.nodes[node].copy_free.max(self.now);
        let done = start + self.copy_setup_ps + wire_time_ps(size, self.mem_bandwidth);
        self.nodes[node].copy_free = done;
        self.schedule(done, Event::CopyDone { cmd });
    }

    fn on_copy_done(&mut self, cmd: usize) {
        let c = &mut self.commands[cmd];
        c.completed_at = Some(self.now);
        let (node, peer, tag) = (c.node, c.peer, c.tag);
        self.trace_line("CopyDone", node, format_args!("source={} tag={}", peer, tag));
    }

    fn unmatched(&self) -> Vec<Unmatched> {
        let mut out = Vec::new();
        for (id, n) in self.nodes.iter().enumerate() {
            for (&(peer, tag), q) in &n.waiting_recvs {
                for _ in q {
                    out.push(Unmatched { node: id, peer, tag, kind: UnmatchedKind::RecvWithoutSend });
                }
            }
            for (&(peer, tag), q) in &n.on_arrival_recvs {
                for _ in q {
                    out.push(Unmatched { node: id, peer, tag, kind: UnmatchedKind::RecvWithoutSend });
                }
            }
            for (&(src, tag), q) in &n.spill {
                for _ in q {
                    out.push(Unmatched { node: src, peer: id, tag, kind: UnmatchedKind::SendWithoutRecv });
                }
            }
        }
        out
    }

    fn message_view(&self, idx: usize) -> MessageView<'_> {
        let m = &self.messages[idx];
        MessageView {
            id: MessageId(idx),
            source: m.source,
            dest: m.dest,
            tag: m.tag,
            size: m.size,
            path: m.path,
            visible_at: m.visible_at,
            tx_done_at: m.tx_done_at,
            delivered_at: m.delivered_at,
            payload: m.payload.as_deref(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transport_validation() {
        let mut t = TransportConfig::datagram(1472, 66);
        t.validate().unwrap();
        t.mtu_payload = 0;
        assert!(t.validate().is_err());

        let mut w = TransportConfig {
            kind: TransportKind::Windowed,
            mtu_payload: 1460,
            frame_overhead: 78,
            window_bytes: 65_536,
            window_scaling: false,
            mss: 1460,
            ack_latency: None,
        };
        w.validate().unwrap();
        w.mss = 2000; // larger than the MTU payload
        assert!(w.validate().is_err());
        w.mss = 1460;
        w.window_bytes = 0;
        assert!(w.validate().is_err());
    }

    #[test]
    fn simulator_can_move_between_threads() {
        fn assert_send<T: Send>() {}
        assert_send::<Simulator>();

        let preset = crate::presets::by_name("direct-udp-pl").unwrap();
        let mut sim = Simulator::new(2, preset.cluster_config()).unwrap();
        sim.post_command(
            0,
            CommandDescriptor::send(1, 0, 4096, DataPath::Streamed, Scheduling::Pl),
        )
        .unwrap();
        let stats = std::thread::spawn(move || {
            sim.run_until(RunLimit::Quiescence).unwrap()
        })
        .join()
        .unwrap();
        assert_eq!(stats.bytes_received[1], 4096);
    }
}
