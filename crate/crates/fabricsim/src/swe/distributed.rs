//! Distributed stepping: one simulator node per mesh partition, halo
//! exchange through the network simulator, then the same flux arithmetic
//! as the reference solver.
//!
//! The exchange follows the hybrid scheme: sends are issued from fabric
//! logic as soon as the border elements have drained out of the pipeline;
//! receives land in per-neighbor buffers and are copied out in the
//! predefined receive order (ascending global element id per neighbor,
//! neighbors ascending by partition id). Ghost states travel as bytes and
//! are reconstructed bit-exactly, so a distributed run must match the
//! reference solver bitwise; any deviation is a transport or ordering bug.
//!
//! A receive scheme that binds the incoming stream directly in arrival
//! order is available behind [`ReceiveScheme::StreamedDirect`]. With more
//! than one neighbor, segments from different senders interleave and the
//! binding no longer matches the predefined order; the id check then
//! reports the mismatch. This demonstrates why the buffered receive path
//! exists.

use std::collections::BTreeMap;

use crate::mesh::{partition_stats, ElementId, Mesh, PartitionId, PartitionStats, Partitioning};
use crate::netsim::{
    ClusterConfig, CommandDescriptor, CommandHandle, RunLimit, SimTime, Simulator, PS_PER_SEC,
};
use crate::perfmodel::{DataPath, Scheduling};

use super::solver::{boundary_ghost, llf_flux, ElementState, SolverConfig};
use super::timing::{PipelineConfig, StepTiming};
use super::SweError;

/// Wire bytes per halo element: 4-byte element id, 4 bytes padding, three
/// 8-byte state values.
pub const SOLVER_BYTES_PER_ELEMENT: u64 = 32;

const HALO_TAG: u32 = 0;

/// How the receiving side turns arriving halo data into ghost states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiveScheme {
    /// Buffer in receive memory, copy out per neighbor in the predefined
    /// order. The default, and the only scheme the oracle tests accept.
    BufferedReorder,
    /// Bind the incoming stream in arrival order. Breaks with multiple
    /// neighbors; kept to demonstrate the ordering hazard.
    StreamedDirect,
}

#[derive(Debug, Clone, Copy)]
pub struct DistributedConfig {
    /// Where halo commands are issued from.
    pub origin: Scheduling,
    pub scheme: ReceiveScheme,
    /// Check the element ids carried in the payload against the expected
    /// receive order.
    pub validate_ids: bool,
}

impl Default for DistributedConfig {
    fn default() -> Self {
        Self { origin: Scheduling::Pl, scheme: ReceiveScheme::BufferedReorder, validate_ids: true }
    }
}

pub struct DistributedSolver<'a> {
    mesh: &'a Mesh,
    partitioning: &'a Partitioning,
    solver: SolverConfig,
    pipeline: PipelineConfig,
    cfg: DistributedConfig,
    sim: Simulator,
    stats: Vec<PartitionStats>,
    /// Global edge ids touching each part, ascending.
    part_edges: Vec<Vec<u32>>,
    states: Vec<ElementState>,
    step_index: u64,
    step_start: SimTime,
    timings: Vec<Vec<StepTiming>>,
    /// Stream log cursor per node (StreamedDirect only).
    stream_cursor: Vec<usize>,
    /// Test hook: rotate the receive binding order for (part, neighbor).
    pub corrupt_recv_order: Option<(PartitionId, PartitionId)>,
}

impl<'a> DistributedSolver<'a> {
    pub fn new(
        mesh: &'a Mesh,
        partitioning: &'a Partitioning,
        solver: SolverConfig,
        pipeline: PipelineConfig,
        cluster: ClusterConfig,
        cfg: DistributedConfig,
        initial: Vec<ElementState>,
    ) -> Result<Self, SweError> {
        if initial.len() != mesh.element_count() {
            return Err(SweError::Config("initial state length must match element count".into()));
        }
        super::solver::check_cfl(mesh, &initial, &solver)?;
        let k = partitioning.part_count();
        let sim = Simulator::new(k, cluster)?;
        let (stats, _) = partition_stats(partitioning, mesh, SOLVER_BYTES_PER_ELEMENT);
        let mut part_edges = vec![Vec::new(); k];
        for (eid, edge) in mesh.edges.iter().enumerate() {
            let pl = partitioning.assignment[edge.left as usize];
            part_edges[pl as usize].push(eid as u32);
            if let Some(right) = edge.right {
                let pr = partitioning.assignment[right as usize];
                if pr != pl {
                    part_edges[pr as usize].push(eid as u32);
                }
            }
        }
        Ok(Self {
            mesh,
            partitioning,
            solver,
            pipeline,
            cfg,
            sim,
            stats,
            part_edges,
            states: initial,
            step_index: 0,
            step_start: SimTime::ZERO,
            timings: Vec::new(),
            stream_cursor: vec![0; k],
            corrupt_recv_order: None,
        })
    }

    pub fn states(&self) -> &[ElementState] {
        &self.states
    }

    pub fn enable_trace(&mut self) {
        self.sim.enable_trace();
    }

    pub fn trace(&self) -> Option<&str> {
        self.sim.trace()
    }

    pub fn step_timings(&self) -> &[Vec<StepTiming>] {
        &self.timings
    }

    pub fn run(&mut self, steps: u64) -> Result<(), SweError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// One distributed time step: exchange ghosts of the current state,
    /// compute fluxes in global edge order, apply, record timing.
    pub fn step(&mut self) -> Result<(), SweError> {
        let k = self.partitioning.part_count();
        let (ghosts, last_done) = self.exchange()?;

        // per-part communication latency: from step start to the last ghost
        // available, plus draining the received elements back in
        let mut step_timings = Vec::with_capacity(k);
        for (stats, &done) in self.stats.iter().zip(&last_done) {
            let arrival = (done - self.step_start) as f64 / PS_PER_SEC as f64;
            let recv_drain = stats.recv_elements as f64 / self.pipeline.clock_hz;
            let l_comm = arrival + recv_drain;
            step_timings.push(StepTiming::from_comm_latency(stats, &self.pipeline, l_comm));
        }

        // fluxes: every part walks its own edge set in ascending global
        // edge id, reading remote states only from its ghosts
        let t = self.step_index as f64 * self.solver.dt;
        let sea_depth = self.solver.sea.depth(t);
        let mut residual = vec![[0.0f64; 3]; self.states.len()];
        for (p, ghost) in ghosts.iter().enumerate() {
            for &eid in &self.part_edges[p] {
                let edge = &self.mesh.edges[eid as usize];
                let own_left = self.partitioning.assignment[edge.left as usize] as usize == p;
                let own_right = edge
                    .right
                    .is_some_and(|r| self.partitioning.assignment[r as usize] as usize == p);
                let pa = self.mesh.vertices[edge.a as usize];
                let pb = self.mesh.vertices[edge.b as usize];
                let nx = pb[1] - pa[1];
                let ny = -(pb[0] - pa[0]);
                let ql = if own_left {
                    self.states[edge.left as usize]
                } else {
                    *ghost.get(&edge.left).expect("missing ghost for cut edge")
                };
                let qr = match edge.right {
                    Some(r) => {
                        if own_right {
                            self.states[r as usize]
                        } else {
                            *ghost.get(&r).expect("missing ghost for cut edge")
                        }
                    }
                    None => boundary_ghost(ql, edge.boundary.unwrap(), nx, ny, sea_depth),
                };
                let f = llf_flux(ql, qr, nx, ny, self.solver.gravity);
                if own_left {
                    let rl = &mut residual[edge.left as usize];
                    rl[0] += f[0];
                    rl[1] += f[1];
                    rl[2] += f[2];
                }
                if let Some(r) = edge.right {
                    if own_right {
                        let rr = &mut residual[r as usize];
                        rr[0] -= f[0];
                        rr[1] -= f[1];
                        rr[2] -= f[2];
                    }
                }
            }
        }
        for p in 0..k {
            for &e in &self.partitioning.parts[p].elements {
                let s = self.states[e as usize];
                let scale = self.solver.dt / self.mesh.area(e);
                let out = ElementState {
                    h: s.h - scale * residual[e as usize][0],
                    hu: s.hu - scale * residual[e as usize][1],
                    hv: s.hv - scale * residual[e as usize][2],
                };
                if !(out.h.is_finite() && out.hu.is_finite() && out.hv.is_finite()) {
                    return Err(SweError::NonFinite { step: self.step_index, element: e });
                }
                self.states[e as usize] = out;
            }
        }

        // advance the step clock by the slowest partition
        let worst = step_timings.iter().map(|t| t.total_cycles).fold(0.0f64, f64::max);
        let step_ps = SimTime::from_secs(worst / self.pipeline.clock_hz).as_ps();
        self.step_start = SimTime(self.sim.now().as_ps().max((self.step_start + step_ps).as_ps()));
        self.timings.push(step_timings);
        self.step_index += 1;
        Ok(())
    }

    /// Exchange border-element states; returns per-part ghost maps and the
    /// time the last ghost became available on each part.
    #[allow(clippy::type_complexity)]
    fn exchange(
        &mut self,
    ) -> Result<(Vec<BTreeMap<ElementId, ElementState>>, Vec<SimTime>), SweError> {
        let k = self.partitioning.part_count();
        let t0 = self.step_start;
        let mut ghosts: Vec<BTreeMap<ElementId, ElementState>> = vec![BTreeMap::new(); k];
        let mut last_done = vec![t0; k];
        let path = match self.cfg.scheme {
            ReceiveScheme::BufferedReorder => DataPath::Buffered,
            ReceiveScheme::StreamedDirect => DataPath::Streamed,
        };

        for p in 0..k {
            // border elements stream out of the pipeline first; the message
            // for a neighbor is complete once they have drained
            let drain =
                SimTime::from_secs(self.stats[p].send_elements as f64 / self.pipeline.clock_hz);
            let post_at = t0 + drain.as_ps();
            for (&q, list) in &self.partitioning.parts[p].send_lists {
                let payload = pack_states(list, &self.states);
                self.sim.post_command_at(
                    p,
                    CommandDescriptor::send_payload(
                        q as usize,
                        HALO_TAG,
                        payload,
                        path,
                        self.cfg.origin,
                    ),
                    post_at,
                )?;
            }
        }
        let mut recv_handles: Vec<BTreeMap<PartitionId, CommandHandle>> = vec![BTreeMap::new(); k];
        if self.cfg.scheme == ReceiveScheme::BufferedReorder {
            for (p, handles) in recv_handles.iter_mut().enumerate() {
                for (&q, list) in &self.partitioning.parts[p].recv_lists {
                    let size = list.len() as u64 * SOLVER_BYTES_PER_ELEMENT;
                    let h = self.sim.post_recv_on_arrival(
                        p,
                        q as usize,
                        HALO_TAG,
                        size,
                        self.cfg.origin,
                    )?;
                    handles.insert(q, h);
                }
            }
        }
        self.sim.run_until(RunLimit::Quiescence)?;

        match self.cfg.scheme {
            ReceiveScheme::BufferedReorder => {
                for (p, handles) in recv_handles.iter().enumerate() {
                    for (&q, expect) in &self.partitioning.parts[p].recv_lists {
                        let h = handles[&q];
                        let done = self.sim.completion(h).expect("receive incomplete");
                        last_done[p] = last_done[p].max(done);
                        let msg = self.sim.command_message(h).expect("no message matched");
                        let payload = msg.payload.expect("halo message carries payload").to_vec();
                        let order = self.binding_order(p as PartitionId, q, expect);
                        unpack_into(
                            &payload,
                            &order,
                            self.cfg.validate_ids,
                            self.step_index,
                            p as PartitionId,
                            q,
                            &mut ghosts[p],
                        )?;
                    }
                }
            }
            ReceiveScheme::StreamedDirect => {
                for p in 0..k {
                    // expected sequence: neighbors ascending, elements in
                    // receive order; bound against arrival order
                    let expect: Vec<ElementId> = self.partitioning.parts[p]
                        .recv_lists
                        .values()
                        .flatten()
                        .copied()
                        .collect();
                    let chunks = &self.sim.stream_log(p)[self.stream_cursor[p]..];
                    self.stream_cursor[p] += chunks.len();
                    let mut partial: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
                    let mut records = Vec::new();
                    for c in chunks {
                        last_done[p] = last_done[p].max(c.at);
                        let msg = self.sim.message(c.message);
                        let payload = msg.payload.expect("halo message carries payload");
                        let buf = partial.entry(c.source).or_default();
                        buf.extend_from_slice(
                            &payload[c.offset as usize..(c.offset + c.len) as usize],
                        );
                        while buf.len() >= SOLVER_BYTES_PER_ELEMENT as usize {
                            let rec: Vec<u8> =
                                buf.drain(..SOLVER_BYTES_PER_ELEMENT as usize).collect();
                            records.push(rec);
                        }
                    }
                    if records.len() != expect.len() {
                        return Err(SweError::HaloMismatch {
                            step: self.step_index,
                            partition: p as PartitionId,
                            neighbor: u32::MAX,
                            detail: format!(
                                "expected {} halo elements, stream delivered {}",
                                expect.len(),
                                records.len()
                            ),
                        });
                    }
                    let flat: Vec<u8> = records.into_iter().flatten().collect();
                    unpack_into(
                        &flat,
                        &expect,
                        self.cfg.validate_ids,
                        self.step_index,
                        p as PartitionId,
                        u32::MAX,
                        &mut ghosts[p],
                    )?;
                }
            }
        }
        Ok((ghosts, last_done))
    }

    fn binding_order(&self, p: PartitionId, q: PartitionId, expect: &[ElementId]) -> Vec<ElementId> {
        let mut order = expect.to_vec();
        if self.corrupt_recv_order == Some((p, q)) && order.len() > 1 {
            order.rotate_left(1);
        }
        order
    }
}

fn pack_states(list: &[ElementId], states: &[ElementState]) -> Vec<u8> {
    let mut out = Vec::with_capacity(list.len() * SOLVER_BYTES_PER_ELEMENT as usize);
    for &e in list {
        let s = states[e as usize];
        out.extend_from_slice(&e.to_le_bytes());
        out.extend_from_slice(&[0u8; 4]);
        out.extend_from_slice(&s.h.to_le_bytes());
        out.extend_from_slice(&s.hu.to_le_bytes());
        out.extend_from_slice(&s.hv.to_le_bytes());
    }
    out
}

/// Bind a packed halo payload positionally against the expected element
/// order, optionally checking the carried ids.
fn unpack_into(
    payload: &[u8],
    order: &[ElementId],
    validate_ids: bool,
    step: u64,
    partition: PartitionId,
    neighbor: PartitionId,
    out: &mut BTreeMap<ElementId, ElementState>,
) -> Result<(), SweError> {
    let per = SOLVER_BYTES_PER_ELEMENT as usize;
    if payload.len() != order.len() * per {
        return Err(SweError::HaloMismatch {
            step,
            partition,
            neighbor,
            detail: format!(
                "expected {} halo elements, received {} bytes",
                order.len(),
                payload.len()
            ),
        });
    }
    for (i, &gid) in order.iter().enumerate() {
        let rec = &payload[i * per..(i + 1) * per];
        let carried = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        if validate_ids && carried != gid {
            return Err(SweError::HaloMismatch {
                step,
                partition,
                neighbor,
                detail: format!(
                    "halo position {i} expected element {gid}, payload carries {carried}"
                ),
            });
        }
        let h = f64::from_le_bytes(rec[8..16].try_into().unwrap());
        let hu = f64::from_le_bytes(rec[16..24].try_into().unwrap());
        let hv = f64::from_le_bytes(rec[24..32].try_into().unwrap());
        out.insert(gid, ElementState { h, hu, hv });
    }
    Ok(())
}
