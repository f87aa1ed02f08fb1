//! Single-partition reference solver: first-order finite volume for the
//! shallow-water equations on an unstructured triangular mesh, flat bottom,
//! local Lax-Friedrichs fluxes, reflective land boundaries and a prescribed
//! sea boundary.
//!
//! Fluxes are accumulated in ascending global edge id in a residual pass
//! and applied afterwards, so the summation order per element is fixed.
//! The distributed solver reproduces exactly this order, which makes
//! partition invariance checkable bitwise.

use serde::{Deserialize, Serialize};

use crate::mesh::{BoundaryTag, ElementId, Mesh};

use super::SweError;

/// Piecewise-constant state of one element: water depth and momenta.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ElementState {
    /// Water depth, meters.
    pub h: f64,
    /// x momentum, m^2/s.
    pub hu: f64,
    /// y momentum, m^2/s.
    pub hv: f64,
}

/// Prescribed water depth at the open-sea boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeaForcing {
    Constant { depth: f64 },
    Tidal { mean: f64, amplitude: f64, period: f64 },
}

impl SeaForcing {
    pub fn depth(&self, t: f64) -> f64 {
        match *self {
            SeaForcing::Constant { depth } => depth,
            SeaForcing::Tidal { mean, amplitude, period } => {
                mean + amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Time step, seconds.
    pub dt: f64,
    pub sea: SeaForcing,
}

impl SolverConfig {
    pub fn new(dt: f64, sea: SeaForcing) -> Self {
        Self { gravity: 9.81, dt, sea }
    }
}

/// Largest stable time step for the mesh and state: the smallest element
/// inradius over the fastest signal speed, with a safety factor of 0.45.
pub fn max_stable_dt(mesh: &Mesh, states: &[ElementState], cfg: &SolverConfig) -> f64 {
    let mut max_dt = f64::INFINITY;
    for (e, s) in states.iter().enumerate() {
        let s = *s;
        let speed = (s.hu * s.hu + s.hv * s.hv).sqrt() / s.h + (cfg.gravity * s.h).sqrt();
        if speed <= 0.0 {
            continue;
        }
        let [a, b, c] = mesh.triangles[e];
        let pa = mesh.vertices[a as usize];
        let pb = mesh.vertices[b as usize];
        let pc = mesh.vertices[c as usize];
        let perimeter = dist(pa, pb) + dist(pb, pc) + dist(pc, pa);
        let inradius = 2.0 * mesh.area(e as ElementId) / perimeter;
        max_dt = max_dt.min(0.45 * inradius / speed);
    }
    max_dt
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Check the CFL bound for the initial state; run this before stepping.
pub fn check_cfl(mesh: &Mesh, states: &[ElementState], cfg: &SolverConfig) -> Result<(), SweError> {
    let max_dt = max_stable_dt(mesh, states, cfg);
    if cfg.dt > max_dt {
        return Err(SweError::CflViolation { dt: cfg.dt, max_dt });
    }
    Ok(())
}

/// Length-integrated local Lax-Friedrichs flux across an edge with
/// unnormalized outward normal `(nx, ny)` (the edge vector rotated
/// clockwise; its length is the edge length).
pub(super) fn llf_flux(
    left: ElementState,
    right: ElementState,
    nx: f64,
    ny: f64,
    gravity: f64,
) -> [f64; 3] {
    let len2 = nx * nx + ny * ny;
    let len = len2.sqrt();
    let flux_of = |q: ElementState| -> [f64; 3] {
        let un_m = q.hu * nx + q.hv * ny; // momentum component along the normal
        let un = un_m / q.h; // velocity . normal (scaled by edge length)
        let pressure = 0.5 * gravity * q.h * q.h;
        [un_m, q.hu * un + pressure * nx, q.hv * un + pressure * ny]
    };
    let fl = flux_of(left);
    let fr = flux_of(right);
    let speed = |q: ElementState| -> f64 {
        (q.hu * nx + q.hv * ny).abs() / q.h + (gravity * q.h).sqrt() * len
    };
    let lambda = speed(left).max(speed(right));
    [
        0.5 * (fl[0] + fr[0]) - 0.5 * lambda * (right.h - left.h),
        0.5 * (fl[1] + fr[1]) - 0.5 * lambda * (right.hu - left.hu),
        0.5 * (fl[2] + fr[2]) - 0.5 * lambda * (right.hv - left.hv),
    ]
}

/// Ghost state across a boundary edge.
pub(super) fn boundary_ghost(
    inner: ElementState,
    tag: BoundaryTag,
    nx: f64,
    ny: f64,
    sea_depth: f64,
) -> ElementState {
    match tag {
        // reflective wall: mirror the normal momentum component
        BoundaryTag::Land => {
            let len2 = nx * nx + ny * ny;
            let un_m = inner.hu * nx + inner.hv * ny;
            ElementState {
                h: inner.h,
                hu: inner.hu - 2.0 * un_m * nx / len2,
                hv: inner.hv - 2.0 * un_m * ny / len2,
            }
        }
        // prescribed depth, zero-gradient momentum
        BoundaryTag::Sea => ElementState { h: sea_depth, ..inner },
    }
}

/// One forward step on the whole mesh.
pub fn step_reference(
    mesh: &Mesh,
    states: &[ElementState],
    cfg: &SolverConfig,
    step_index: u64,
) -> Result<Vec<ElementState>, SweError> {
    assert_eq!(states.len(), mesh.element_count());
    let t = step_index as f64 * cfg.dt;
    let sea_depth = cfg.sea.depth(t);
    let mut residual = vec![[0.0f64; 3]; states.len()];

    for edge in &mesh.edges {
        let pa = mesh.vertices[edge.a as usize];
        let pb = mesh.vertices[edge.b as usize];
        let nx = pb[1] - pa[1];
        let ny = -(pb[0] - pa[0]);
        let ql = states[edge.left as usize];
        let qr = match edge.right {
            Some(r) => states[r as usize],
            None => boundary_ghost(ql, edge.boundary.unwrap(), nx, ny, sea_depth),
        };
        let f = llf_flux(ql, qr, nx, ny, cfg.gravity);
        let rl = &mut residual[edge.left as usize];
        rl[0] += f[0];
        rl[1] += f[1];
        rl[2] += f[2];
        if let Some(r) = edge.right {
            let rr = &mut residual[r as usize];
            rr[0] -= f[0];
            rr[1] -= f[1];
            rr[2] -= f[2];
        }
    }

    let mut next = Vec::with_capacity(states.len());
    for (e, s) in states.iter().enumerate() {
        let scale = cfg.dt / mesh.area(e as ElementId);
        let out = ElementState {
            h: s.h - scale * residual[e][0],
            hu: s.hu - scale * residual[e][1],
            hv: s.hv - scale * residual[e][2],
        };
        if !(out.h.is_finite() && out.hu.is_finite() && out.hv.is_finite()) {
            return Err(SweError::NonFinite { step: step_index, element: e as ElementId });
        }
        next.push(out);
    }
    Ok(next)
}

/// Total water volume: sum of depth times element area, ascending element
/// id.
pub fn total_mass(mesh: &Mesh, states: &[ElementState]) -> f64 {
    states
        .iter()
        .enumerate()
        .map(|(e, s)| mesh.area(e as ElementId) * s.h)
        .sum()
}

/// Uniform lake at rest.
pub fn initial_rest(mesh: &Mesh, depth: f64) -> Vec<ElementState> {
    vec![ElementState { h: depth, hu: 0.0, hv: 0.0 }; mesh.element_count()]
}

/// A raised column of water between the two x bounds, at rest.
pub fn initial_column(mesh: &Mesh, x_lo: f64, x_hi: f64, depth: f64, raised: f64) -> Vec<ElementState> {
    (0..mesh.element_count() as u32)
        .map(|e| {
            let c = mesh.centroid(e);
            let h = if c[0] > x_lo && c[0] < x_hi { raised } else { depth };
            ElementState { h, hu: 0.0, hv: 0.0 }
        })
        .collect()
}
