//! Unstructured triangular meshes, partitioning and halo bookkeeping.
//!
//! A mesh is a list of vertices and counterclockwise triangles with a
//! derived edge table. Boundary edges carry a land or sea tag. Partitioning
//! assigns every element to exactly one part and derives, per part, ordered
//! send and receive lists for the halo exchange plus the per-part counts
//! that feed the performance models.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub type VertexId = u32;
pub type ElementId = u32;
pub type EdgeId = u32;
pub type PartitionId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTag {
    Land,
    Sea,
}

/// An edge of the mesh. `a -> b` is the direction in which the left
/// triangle traverses the edge on its counterclockwise boundary, so the
/// outward normal of `left` across this edge is the edge vector rotated
/// clockwise by 90 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    pub left: ElementId,
    pub right: Option<ElementId>,
    /// Present exactly when `right` is absent.
    pub boundary: Option<BoundaryTag>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[VertexId; 3]>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("triangle {tri}: {msg}")]
    BadTriangle { tri: usize, msg: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("invalid partitioning: {0}")]
    Partition(String),
}

impl Mesh {
    /// Build a mesh from raw vertices and triangles, deriving the edge
    /// table and checking all structural invariants. `tags` maps an
    /// unordered vertex pair to a boundary tag; untagged boundary edges
    /// default to land.
    pub fn build(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[VertexId; 3]>,
        tags: &BTreeMap<(VertexId, VertexId), BoundaryTag>,
    ) -> Result<Mesh, MeshError> {
        let nv = vertices.len() as u32;
        let mut seen = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::BadTriangle {
                        tri: t,
                        msg: format!("references missing vertex {v}"),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::BadTriangle { tri: t, msg: "repeated vertex".into() });
            }
            let mut key = *tri;
            key.sort_unstable();
            if let Some(first) = seen.insert(key, t) {
                return Err(MeshError::BadTriangle {
                    tri: t,
                    msg: format!("duplicate of triangle {first}"),
                });
            }
            let [a, b, c] = *tri;
            let pa = vertices[a as usize];
            let pb = vertices[b as usize];
            let pc = vertices[c as usize];
            let cross = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
            if cross <= 0.0 {
                return Err(MeshError::BadTriangle {
                    tri: t,
                    msg: "vertices not in counterclockwise order".into(),
                });
            }
        }

        // edge table keyed by unordered vertex pair, ids in first-encounter
        // order over the triangle scan
        let mut index: BTreeMap<(VertexId, VertexId), EdgeId> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[i];
                let b = tri[(i + 1) % 3];
                let key = (a.min(b), a.max(b));
                match index.get(&key) {
                    None => {
                        index.insert(key, edges.len() as EdgeId);
                        edges.push(Edge { a, b, left: t as ElementId, right: None, boundary: None });
                    }
                    Some(&e) => {
                        let edge = &mut edges[e as usize];
                        if edge.right.is_some() {
                            return Err(MeshError::Invalid(format!(
                                "edge ({},{}) has more than two incident triangles",
                                key.0, key.1
                            )));
                        }
                        if (edge.a, edge.b) != (b, a) {
                            return Err(MeshError::Invalid(format!(
                                "edge ({},{}) traversed in the same direction twice; \
                                 inconsistent orientation",
                                key.0, key.1
                            )));
                        }
                        edge.right = Some(t as ElementId);
                    }
                }
            }
        }
        for edge in &mut edges {
            if edge.right.is_none() {
                let key = (edge.a.min(edge.b), edge.a.max(edge.b));
                edge.boundary = Some(tags.get(&key).copied().unwrap_or(BoundaryTag::Land));
            }
        }
        for &(a, b) in tags.keys() {
            let key = (a.min(b), a.max(b));
            match index.get(&key) {
                None => {
                    return Err(MeshError::Invalid(format!("boundary tag on unknown edge ({a},{b})")))
                }
                Some(&e) => {
                    if edges[e as usize].right.is_some() {
                        return Err(MeshError::Invalid(format!(
                            "boundary tag on interior edge ({a},{b})"
                        )));
                    }
                }
            }
        }
        Ok(Mesh { vertices, triangles, edges })
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, e: ElementId) -> f64 {
        let [a, b, c] = self.triangles[e as usize];
        let pa = self.vertices[a as usize];
        let pb = self.vertices[b as usize];
        let pc = self.vertices[c as usize];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]))
    }

    pub fn centroid(&self, e: ElementId) -> [f64; 2] {
        let [a, b, c] = self.triangles[e as usize];
        let pa = self.vertices[a as usize];
        let pb = self.vertices[b as usize];
        let pc = self.vertices[c as usize];
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn interior_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.right.is_some()).count()
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.right.is_none()).count()
    }
}

/// Which side of a generated rectangle borders the open sea.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeaSide {
    North,
    South,
    East,
    West,
    /// No sea boundary: a closed basin.
    Closed,
}

/// Generate a rectangular mesh of `nx` by `ny` unit cells, each split into
/// two triangles, with the split diagonal alternating by cell parity so the
/// mesh is mirror-symmetric for even `nx`. One side is tagged as sea
/// boundary, the rest as land.
pub fn generate_rect_mesh(nx: u32, ny: u32, sea_side: SeaSide) -> Mesh {
    assert!(nx >= 1 && ny >= 1, "mesh must have at least one cell");
    let vid = |i: u32, j: u32| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity(((nx + 1) * (ny + 1)) as usize);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64, j as f64]);
        }
    }
    let mut triangles = Vec::with_capacity((2 * nx * ny) as usize);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            if (i + j) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    let mut tags = BTreeMap::new();
    let mut tag = |a: VertexId, b: VertexId, side: SeaSide, sea: SeaSide| {
        let t = if side == sea { BoundaryTag::Sea } else { BoundaryTag::Land };
        tags.insert((a.min(b), a.max(b)), t);
    };
    for i in 0..nx {
        tag(vid(i, 0), vid(i + 1, 0), SeaSide::South, sea_side);
        tag(vid(i, ny), vid(i + 1, ny), SeaSide::North, sea_side);
    }
    for j in 0..ny {
        tag(vid(0, j), vid(0, j + 1), SeaSide::West, sea_side);
        tag(vid(nx, j), vid(nx, j + 1), SeaSide::East, sea_side);
    }
    Mesh::build(vertices, triangles, &tags).expect("generated mesh is valid")
}

// --- mesh file format ------------------------------------------------------

/// Serialize a mesh in the line-oriented text format:
///
/// ```text
/// vertices N
/// triangles M
/// x y                      (N lines)
/// v0 v1 v2 t01 t12 t20     (M lines; tags are -, land or sea)
/// ```
pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    let _ = writeln!(out, "triangles {}", mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {}", v[0], v[1]);
    }
    let mut tag_of = BTreeMap::new();
    for e in &mesh.edges {
        if let Some(t) = e.boundary {
            tag_of.insert((e.a.min(e.b), e.a.max(e.b)), t);
        }
    }
    for tri in &mesh.triangles {
        let mut line = format!("{} {} {}", tri[0], tri[1], tri[2]);
        for i in 0..3 {
            let a = tri[i];
            let b = tri[(i + 1) % 3];
            let tag = match tag_of.get(&(a.min(b), a.max(b))) {
                Some(BoundaryTag::Land) => "land",
                Some(BoundaryTag::Sea) => "sea",
                None => "-",
            };
            line.push(' ');
            line.push_str(tag);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parse the format written by [`save_mesh`] and validate the result.
pub fn load_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut expect_header = |name: &str| -> Result<usize, MeshError> {
        let (ln, line) = lines
            .next()
            .ok_or(MeshError::Parse { line: 0, msg: format!("missing `{name} N` header") })?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(word), Some(count), None) if word == name => {
                count.parse().map_err(|_| MeshError::Parse {
                    line: ln + 1,
                    msg: format!("bad count in `{name}` header"),
                })
            }
            _ => Err(MeshError::Parse { line: ln + 1, msg: format!("expected `{name} N`") }),
        }
    };
    let nv = expect_header("vertices")?;
    let nt = expect_header("triangles")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or(MeshError::Parse { line: 0, msg: "unexpected end of file in vertices".into() })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(MeshError::Parse { line: ln + 1, msg: "expected `x y`".into() });
        }
        let x: f64 = fields[0]
            .parse()
            .map_err(|_| MeshError::Parse { line: ln + 1, msg: "bad x coordinate".into() })?;
        let y: f64 = fields[1]
            .parse()
            .map_err(|_| MeshError::Parse { line: ln + 1, msg: "bad y coordinate".into() })?;
        vertices.push([x, y]);
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut tags = BTreeMap::new();
    for _ in 0..nt {
        let (ln, line) = lines
            .next()
            .ok_or(MeshError::Parse { line: 0, msg: "unexpected end of file in triangles".into() })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 6 {
            return Err(MeshError::Parse {
                line: ln + 1,
                msg: "expected `v0 v1 v2` with optional three edge tags".into(),
            });
        }
        let mut tri = [0u32; 3];
        for (i, f) in fields[..3].iter().enumerate() {
            tri[i] = f
                .parse()
                .map_err(|_| MeshError::Parse { line: ln + 1, msg: format!("bad vertex id `{f}`") })?;
        }
        if fields.len() == 6 {
            for (i, f) in fields[3..].iter().enumerate() {
                let tag = match *f {
                    "-" => None,
                    "land" => Some(BoundaryTag::Land),
                    "sea" => Some(BoundaryTag::Sea),
                    other => {
                        return Err(MeshError::Parse {
                            line: ln + 1,
                            msg: format!("unknown edge tag `{other}`"),
                        })
                    }
                };
                if let Some(t) = tag {
                    let a = tri[i];
                    let b = tri[(i + 1) % 3];
                    let key = (a.min(b), a.max(b));
                    if let Some(prev) = tags.insert(key, t) {
                        if prev != t {
                            return Err(MeshError::Parse {
                                line: ln + 1,
                                msg: format!("conflicting tags for edge ({},{})", key.0, key.1),
                            });
                        }
                    }
                }
            }
        }
        triangles.push(tri);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(MeshError::Parse { line: ln + 1, msg: "trailing content after triangles".into() });
    }
    Mesh::build(vertices, triangles, &tags)
}

// --- partitioning ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMethod {
    /// Recursive coordinate bisection along the wider axis.
    CoordinateBisection,
    /// Breadth-first growth from the lowest unassigned element id.
    GreedyBfs,
}

/// Per-part view of a [`Partitioning`].
#[derive(Debug, Clone, Default)]
pub struct PartitionInfo {
    /// Elements of this part, ascending global id.
    pub elements: Vec<ElementId>,
    /// Per neighbor part: own elements whose state is sent there, ascending
    /// global id. Keys iterate in ascending neighbor id.
    pub send_lists: BTreeMap<PartitionId, Vec<ElementId>>,
    /// Per neighbor part: remote elements expected from there, in
    /// consumption order (ascending global id).
    pub recv_lists: BTreeMap<PartitionId, Vec<ElementId>>,
}

#[derive(Debug, Clone)]
pub struct Partitioning {
    pub assignment: Vec<PartitionId>,
    pub parts: Vec<PartitionInfo>,
}

impl Partitioning {
    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    /// Neighbor parts of `p`, ascending.
    pub fn neighbors(&self, p: PartitionId) -> Vec<PartitionId> {
        self.parts[p as usize].send_lists.keys().copied().collect()
    }
}

/// Partition `mesh` into `k` non-empty parts.
pub fn partition(mesh: &Mesh, k: u32, method: PartitionMethod) -> Result<Partitioning, MeshError> {
    let n = mesh.element_count();
    if k == 0 || k as usize > n {
        return Err(MeshError::Partition(format!(
            "k must be in 1..={n} for a mesh with {n} elements, got {k}"
        )));
    }
    let assignment = match method {
        PartitionMethod::CoordinateBisection => bisection_assign(mesh, k),
        PartitionMethod::GreedyBfs => greedy_bfs_assign(mesh, k),
    };
    build_partitioning(mesh, k, assignment)
}

fn bisection_assign(mesh: &Mesh, k: u32) -> Vec<PartitionId> {
    let mut assignment = vec![0u32; mesh.element_count()];
    let mut ids: Vec<ElementId> = (0..mesh.element_count() as u32).collect();
    let centroids: Vec<[f64; 2]> = ids.iter().map(|&e| mesh.centroid(e)).collect();
    bisect(&mut ids, &centroids, k, 0, &mut assignment);
    assignment
}

fn bisect(ids: &mut [ElementId], centroids: &[[f64; 2]], k: u32, first_part: u32, out: &mut [u32]) {
    if k == 1 {
        for &e in ids.iter() {
            out[e as usize] = first_part;
        }
        return;
    }
    // split proportionally to the part counts on each side
    let k_left = k / 2;
    let k_right = k - k_left;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &e in ids.iter() {
        let c = centroids[e as usize];
        for d in 0..2 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    ids.sort_unstable_by(|&x, &y| {
        let cx = centroids[x as usize][axis];
        let cy = centroids[y as usize][axis];
        cx.partial_cmp(&cy).unwrap().then(x.cmp(&y))
    });
    let n = ids.len() as u64;
    let mut n_left = ((n * k_left as u64 * 2 + k as u64) / (2 * k as u64)) as usize;
    n_left = n_left.clamp(k_left as usize, ids.len() - k_right as usize);
    let (left, right) = ids.split_at_mut(n_left);
    bisect(left, centroids, k_left, first_part, out);
    bisect(right, centroids, k_right, first_part + k_left, out);
}

fn greedy_bfs_assign(mesh: &Mesh, k: u32) -> Vec<PartitionId> {
    let n = mesh.element_count();
    let adjacency = element_adjacency(mesh);
    let mut assignment = vec![u32::MAX; n];
    let mut assigned = 0usize;
    for part in 0..k {
        // balanced target: remaining spread over remaining parts
        let target = (n - assigned).div_ceil((k - part) as usize);
        let mut frontier = std::collections::BTreeSet::new();
        let mut count = 0usize;
        while count < target {
            let next = match frontier.iter().next().copied() {
                Some(e) => {
                    frontier.remove(&e);
                    e
                }
                // frontier exhausted: jump to the lowest unassigned element
                None => match assignment.iter().position(|&a| a == u32::MAX) {
                    Some(e) => e as ElementId,
                    None => break,
                },
            };
            if assignment[next as usize] != u32::MAX {
                continue;
            }
            assignment[next as usize] = part;
            count += 1;
            for &nb in &adjacency[next as usize] {
                if assignment[nb as usize] == u32::MAX {
                    frontier.insert(nb);
                }
            }
        }
        assigned += count;
    }
    assignment
}

/// Edge-adjacent neighbor elements, in ascending order per element.
pub fn element_adjacency(mesh: &Mesh) -> Vec<Vec<ElementId>> {
    let mut adj = vec![Vec::new(); mesh.element_count()];
    for e in &mesh.edges {
        if let Some(right) = e.right {
            adj[e.left as usize].push(right);
            adj[right as usize].push(e.left);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

fn build_partitioning(mesh: &Mesh, k: u32, assignment: Vec<PartitionId>) -> Result<Partitioning, MeshError> {
    let mut parts = vec![PartitionInfo::default(); k as usize];
    for (e, &p) in assignment.iter().enumerate() {
        if p >= k {
            return Err(MeshError::Partition(format!("element {e} assigned to invalid part {p}")));
        }
        parts[p as usize].elements.push(e as ElementId);
    }
    if let Some(empty) = parts.iter().position(|p| p.elements.is_empty()) {
        return Err(MeshError::Partition(format!("part {empty} is empty")));
    }
    // halo lists from cut edges; sorted dedup gives the predefined order:
    // ascending global element id, neighbors ascending by part id
    for edge in &mesh.edges {
        let Some(right) = edge.right else { continue };
        let (pl, pr) = (assignment[edge.left as usize], assignment[right as usize]);
        if pl == pr {
            continue;
        }
        parts[pl as usize].send_lists.entry(pr).or_default().push(edge.left);
        parts[pl as usize].recv_lists.entry(pr).or_default().push(right);
        parts[pr as usize].send_lists.entry(pl).or_default().push(right);
        parts[pr as usize].recv_lists.entry(pl).or_default().push(edge.left);
    }
    for part in &mut parts {
        for list in part.send_lists.values_mut().chain(part.recv_lists.values_mut()) {
            list.sort_unstable();
            list.dedup();
        }
    }
    Ok(Partitioning { assignment, parts })
}

// --- per-part statistics ----------------------------------------------------

/// Per-part counts that feed the throughput and latency models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionStats {
    pub part: PartitionId,
    pub elements: u64,
    /// Elements with no remote-facing edge.
    pub core_elements: u64,
    /// Sum of send-list lengths over all neighbors.
    pub send_elements: u64,
    /// Sum of recv-list lengths over all neighbors.
    pub recv_elements: u64,
    pub neighbor_count: u32,
    /// Largest single-neighbor message in bytes.
    pub max_neighbor_halo_bytes: u64,
}

/// Worst case over all parts, as consumed by the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WorstCaseStats {
    pub max_neighbors: u32,
    pub max_send_elements: u64,
    pub max_recv_elements: u64,
    pub max_halo_bytes: u64,
}

pub fn partition_stats(
    partitioning: &Partitioning,
    mesh: &Mesh,
    bytes_per_element: u64,
) -> (Vec<PartitionStats>, WorstCaseStats) {
    let _ = mesh;
    let mut stats = Vec::with_capacity(partitioning.parts.len());
    let mut worst = WorstCaseStats::default();
    for (p, part) in partitioning.parts.iter().enumerate() {
        let mut border: Vec<ElementId> = part.send_lists.values().flatten().copied().collect();
        border.sort_unstable();
        border.dedup();
        let send_elements: u64 = part.send_lists.values().map(|l| l.len() as u64).sum();
        let recv_elements: u64 = part.recv_lists.values().map(|l| l.len() as u64).sum();
        let max_halo = part
            .send_lists
            .values()
            .map(|l| l.len() as u64 * bytes_per_element)
            .max()
            .unwrap_or(0);
        let s = PartitionStats {
            part: p as PartitionId,
            elements: part.elements.len() as u64,
            core_elements: part.elements.len() as u64 - border.len() as u64,
            send_elements,
            recv_elements,
            neighbor_count: part.send_lists.len() as u32,
            max_neighbor_halo_bytes: max_halo,
        };
        worst.max_neighbors = worst.max_neighbors.max(s.neighbor_count);
        worst.max_send_elements = worst.max_send_elements.max(s.send_elements);
        worst.max_recv_elements = worst.max_recv_elements.max(s.recv_elements);
        worst.max_halo_bytes = worst.max_halo_bytes.max(s.max_neighbor_halo_bytes);
        stats.push(s);
    }
    (stats, worst)
}

/// CSV export of per-part statistics.
pub fn stats_csv(stats: &[PartitionStats]) -> String {
    let mut out = String::from(
        "part,elements,core_elements,send_elements,recv_elements,neighbors,max_neighbor_halo_bytes\n",
    );
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.part,
            s.elements,
            s.core_elements,
            s.send_elements,
            s.recv_elements,
            s.neighbor_count,
            s.max_neighbor_halo_bytes
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh() {
        let m = generate_rect_mesh(1, 1, SeaSide::East);
        assert_eq!(m.element_count(), 2);
        assert_eq!(m.interior_edge_count(), 1);
        assert_eq!(m.boundary_edge_count(), 4);
    }

    #[test]
    fn rect_mesh_element_count() {
        assert_eq!(generate_rect_mesh(4, 4, SeaSide::North).element_count(), 32);
        // same order of magnitude as a realistic coastal test mesh
        assert_eq!(generate_rect_mesh(29, 29, SeaSide::North).element_count(), 1682);
    }

    #[test]
    fn sea_side_tags() {
        let m = generate_rect_mesh(3, 2, SeaSide::East);
        let sea: Vec<_> = m.edges.iter().filter(|e| e.boundary == Some(BoundaryTag::Sea)).collect();
        assert_eq!(sea.len(), 2); // east side has ny edges
        let land = m.edges.iter().filter(|e| e.boundary == Some(BoundaryTag::Land)).count();
        assert_eq!(land, 2 * 3 + 2); // north + south + west
        let closed = generate_rect_mesh(3, 2, SeaSide::Closed);
        assert!(closed.edges.iter().all(|e| e.boundary != Some(BoundaryTag::Sea)));
    }

    #[test]
    fn areas_are_half_cells() {
        let m = generate_rect_mesh(5, 3, SeaSide::North);
        for e in 0..m.element_count() as u32 {
            assert_eq!(m.area(e), 0.5);
        }
    }

    #[test]
    fn save_load_round_trip() {
        for sea in [SeaSide::East, SeaSide::Closed] {
            let m = generate_rect_mesh(4, 3, sea);
            let text = save_mesh(&m);
            let m2 = load_mesh(&text).unwrap();
            assert_eq!(m.vertices, m2.vertices);
            assert_eq!(m.triangles, m2.triangles);
            assert_eq!(m.edges, m2.edges);
        }
    }

    #[test]
    fn load_rejects_missing_vertex() {
        let text = "vertices 3\ntriangles 1\n0 0\n1 0\n0 1\n0 1 7\n";
        let err = load_mesh(text).unwrap_err();
        assert!(matches!(err, MeshError::BadTriangle { tri: 0, .. }), "{err}");
        assert!(err.to_string().contains("missing vertex 7"));
    }

    #[test]
    fn load_rejects_duplicate_triangle() {
        let text = "vertices 4\ntriangles 3\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n1 2 0\n";
        let err = load_mesh(text).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn load_rejects_clockwise_triangle() {
        let text = "vertices 3\ntriangles 1\n0 0\n1 0\n0 1\n0 2 1\n";
        let err = load_mesh(text).unwrap_err();
        assert!(err.to_string().contains("counterclockwise"), "{err}");
    }

    #[test]
    fn load_reports_line_numbers() {
        let text = "vertices 2\ntriangles 0\n0 0\nnot-a-number 1\n";
        match load_mesh(text).unwrap_err() {
            MeshError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn single_part_has_no_halo() {
        let m = generate_rect_mesh(4, 4, SeaSide::North);
        let p = partition(&m, 1, PartitionMethod::CoordinateBisection).unwrap();
        let (stats, worst) = partition_stats(&p, &m, 32);
        assert_eq!(stats[0].send_elements, 0);
        assert_eq!(stats[0].recv_elements, 0);
        assert_eq!(stats[0].core_elements, 32);
        assert_eq!(worst.max_neighbors, 0);
    }

    #[test]
    fn bisection_splits_rect_in_half() {
        let m = generate_rect_mesh(4, 4, SeaSide::North);
        let p = partition(&m, 2, PartitionMethod::CoordinateBisection).unwrap();
        assert_eq!(p.parts[0].elements.len(), 16);
        assert_eq!(p.parts[1].elements.len(), 16);
        // halo across the cut: every cut edge contributes one element each way
        let adjacency = element_adjacency(&m);
        let mut expect_send0 = Vec::new();
        for &e in &p.parts[0].elements {
            if adjacency[e as usize].iter().any(|&nb| p.assignment[nb as usize] == 1) {
                expect_send0.push(e);
            }
        }
        assert_eq!(p.parts[0].send_lists[&1], expect_send0);
    }

    #[test]
    fn partition_errors() {
        let m = generate_rect_mesh(2, 2, SeaSide::North);
        assert!(partition(&m, 0, PartitionMethod::GreedyBfs).is_err());
        assert!(partition(&m, 9, PartitionMethod::GreedyBfs).is_err());
        assert!(partition(&m, 8, PartitionMethod::GreedyBfs).is_ok());
    }

    #[test]
    fn halo_symmetry_and_coverage() {
        for (nx, ny) in [(6u32, 5u32), (10, 7)] {
            let m = generate_rect_mesh(nx, ny, SeaSide::East);
            for k in [2u32, 3, 4, 7] {
                for method in [PartitionMethod::CoordinateBisection, PartitionMethod::GreedyBfs] {
                    let p = partition(&m, k, method).unwrap();
                    // union of parts is the element set, pairwise disjoint
                    let total: usize = p.parts.iter().map(|q| q.elements.len()).sum();
                    assert_eq!(total, m.element_count());
                    // send/recv symmetry with identical ordering
                    for (a, part) in p.parts.iter().enumerate() {
                        for (&b, send) in &part.send_lists {
                            let recv = &p.parts[b as usize].recv_lists[&(a as u32)];
                            assert_eq!(send, recv, "k={k} {method:?} {a}->{b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn imbalance_bounded_on_rect_meshes() {
        let m = generate_rect_mesh(24, 18, SeaSide::North);
        for k in [2u32, 3, 5, 8, 16] {
            for method in [PartitionMethod::CoordinateBisection, PartitionMethod::GreedyBfs] {
                let p = partition(&m, k, method).unwrap();
                let sizes: Vec<usize> = p.parts.iter().map(|q| q.elements.len()).collect();
                let max = *sizes.iter().max().unwrap() as f64;
                let min = *sizes.iter().min().unwrap() as f64;
                assert!(max / min <= 1.2, "k={k} {method:?} sizes={sizes:?}");
            }
        }
    }

    #[test]
    fn load_rejects_trailing_content() {
        let text = "vertices 3\ntriangles 1\n0 0\n1 0\n0 1\n0 1 2\nextra junk\n";
        let err = load_mesh(text).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    #[test]
    fn tag_on_interior_edge_is_rejected() {
        // both triangles tag the shared diagonal
        let text = "vertices 4\ntriangles 2\n0 0\n1 0\n1 1\n0 1\n0 1 2 - land -\n0 2 3 sea - -\n";
        let err = load_mesh(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("conflict") || msg.contains("interior"), "{msg}");
    }

    #[test]
    fn partitioning_is_deterministic() {
        let m = generate_rect_mesh(12, 9, SeaSide::West);
        for method in [PartitionMethod::CoordinateBisection, PartitionMethod::GreedyBfs] {
            let a = partition(&m, 5, method).unwrap();
            let b = partition(&m, 5, method).unwrap();
            assert_eq!(a.assignment, b.assignment);
        }
    }
}
