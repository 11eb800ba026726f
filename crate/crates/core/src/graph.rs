//! Simple undirected graphs on a small fixed id space, tuned for exhaustive
//! fault-set sweeps: adjacency lives in one u128 bitset row per vertex and
//! deletions never re-index — removed vertices just leave the surviving set.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Vertex identifier; ids stay dense in `0..n` for freshly built graphs.
pub type VertexId = u8;

/// Physical bitset width. Rows are u128 so the bipartite double cover of a
/// maximum-size input still fits.
pub const MAX_VERTICES: usize = 128;

/// Cap for constructed inputs (files, families). Keeps exhaustive plans in
/// range and the double cover of any constructible graph within [`MAX_VERTICES`].
pub const MAX_INPUT_VERTICES: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("duplicate edge ({}, {})", .0.u(), .0.v())]
    DuplicateEdge(Edge),
    #[error("vertex count {0} exceeds the {MAX_INPUT_VERTICES}-vertex construction cap")]
    TooManyVertices(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("fault vertex {0} is not a surviving vertex of the host graph")]
    FaultVertexInvalid(VertexId),
    #[error("fault edge ({}, {}) is not an edge of the host graph", .0.u(), .0.v())]
    FaultEdgeInvalid(Edge),
}

/// Canonical undirected edge, always stored with the smaller endpoint first.
/// Serializes as the two-element array `[u, v]`.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(VertexId, VertexId);

impl Edge {
    pub fn new(a: VertexId, b: VertexId) -> Result<Edge, GraphError> {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Less => Ok(Edge(a, b)),
            Greater => Ok(Edge(b, a)),
            Equal => Err(GraphError::SelfLoop(a)),
        }
    }

    pub fn u(&self) -> VertexId {
        self.0
    }

    pub fn v(&self) -> VertexId {
        self.1
    }

    /// Bitset of both endpoints.
    pub fn mask(&self) -> u128 {
        (1u128 << self.0) | (1u128 << self.1)
    }
}

impl std::fmt::Debug for Edge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Iterates the set bit positions of a mask, ascending.
pub fn bits(mut mask: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let b = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(b)
        }
    })
}

/// A set of fault elements: vertices and/or edges to delete from a host
/// graph. Both lists are kept sorted and duplicate-free.
///
/// Ordering matches the enumeration stream: fewer vertices first, then
/// vertex lists lexicographically, then edge lists lexicographically.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FaultSet {
    vertices: Vec<VertexId>,
    edges: Vec<Edge>,
}

impl FaultSet {
    pub fn new(
        mut vertices: Vec<VertexId>,
        mut edges: Vec<Edge>,
    ) -> Result<FaultSet, GraphError> {
        vertices.sort_unstable();
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::FaultVertexInvalid(w[0]));
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0]));
        }
        Ok(FaultSet { vertices, edges })
    }

    pub fn empty() -> FaultSet {
        FaultSet { vertices: Vec::new(), edges: Vec::new() }
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn size(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    pub fn vertex_mask(&self) -> u128 {
        self.vertices.iter().fold(0u128, |m, &v| m | (1u128 << v))
    }
}

impl PartialOrd for FaultSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FaultSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.vertices.len(), &self.vertices, &self.edges).cmp(&(
            other.vertices.len(),
            &other.vertices,
            &other.edges,
        ))
    }
}

/// Undirected simple graph. `n` is the id space; `alive` tracks surviving
/// vertices after fault deletion. Adjacency rows only ever reference alive
/// vertices and stay consistent with the canonical sorted edge list.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Graph {
    n: usize,
    alive: u128,
    adj: Vec<u128>,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph on vertex ids `0..n` with every vertex surviving.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Graph, GraphError> {
        if n > MAX_INPUT_VERTICES {
            return Err(GraphError::TooManyVertices(n));
        }
        Graph::from_edges_with_cap(n, edges)
    }

    /// Construction path for internally derived graphs (double covers) that
    /// may exceed the input cap but never the physical bitset width.
    fn from_edges_with_cap(
        n: usize,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Graph, GraphError> {
        if n > MAX_VERTICES {
            return Err(GraphError::TooManyVertices(n));
        }
        let mut adj = vec![0u128; n];
        let mut list = Vec::new();
        for (a, b) in edges {
            let e = Edge::new(a, b)?;
            if e.v() as usize >= n {
                return Err(GraphError::VertexOutOfRange { vertex: e.v() as usize, n });
            }
            if adj[e.u() as usize] >> e.v() & 1 == 1 {
                return Err(GraphError::DuplicateEdge(e));
            }
            adj[e.u() as usize] |= 1u128 << e.v();
            adj[e.v() as usize] |= 1u128 << e.u();
            list.push(e);
        }
        list.sort_unstable();
        let alive = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        Ok(Graph { n, alive, adj, edges: list })
    }

    /// Size of the vertex-id space (including deleted ids).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of surviving vertices.
    pub fn vertex_count(&self) -> usize {
        self.alive.count_ones() as usize
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_alive(&self, v: VertexId) -> bool {
        (v as usize) < self.n && self.alive >> v & 1 == 1
    }

    pub fn alive_mask(&self) -> u128 {
        self.alive
    }

    pub fn alive_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        bits(self.alive).map(|v| v as VertexId)
    }

    /// Canonical sorted edge list over surviving vertices.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbor bitset of `v` (empty for deleted ids).
    pub fn adjacency_row(&self, v: VertexId) -> u128 {
        self.adj[v as usize]
    }

    /// Borrow of all rows, for the matching engine's allocation-free paths.
    pub fn adjacency(&self) -> &[u128] {
        &self.adj
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v as usize].count_ones() as usize
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        (a as usize) < self.n && (b as usize) < self.n && self.adj[a as usize] >> b & 1 == 1
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        bits(self.adj[v as usize]).map(|u| u as VertexId)
    }

    /// Minimum degree over surviving vertices; 0 when none survive.
    pub fn min_degree(&self) -> usize {
        self.alive_vertices().map(|v| self.degree(v)).min().unwrap_or(0)
    }

    /// True when the surviving vertex count is even.
    pub fn is_even(&self) -> bool {
        self.vertex_count().is_multiple_of(2)
    }

    /// Surviving vertices with no surviving neighbor, ascending.
    pub fn isolated_vertices(&self) -> Vec<VertexId> {
        self.alive_vertices().filter(|&v| self.adj[v as usize] == 0).collect()
    }

    /// Checks that every fault vertex survives in this graph and every fault
    /// edge is present.
    pub fn validate_fault_set(&self, f: &FaultSet) -> Result<(), GraphError> {
        for &v in f.vertices() {
            if !self.is_alive(v) {
                return Err(GraphError::FaultVertexInvalid(v));
            }
        }
        for e in f.edges() {
            if !self.has_edge(e.u(), e.v()) {
                return Err(GraphError::FaultEdgeInvalid(*e));
            }
        }
        Ok(())
    }

    /// Removes the fault vertices (with their incident edges) and the fault
    /// edges. Ids are preserved; the result has the same id space.
    pub fn delete_faults(&self, f: &FaultSet) -> Result<Graph, GraphError> {
        self.validate_fault_set(f)?;
        let dead = f.vertex_mask();
        let keep = self.alive & !dead;
        let mut adj = self.adj.clone();
        for v in bits(dead) {
            adj[v] = 0;
        }
        for v in bits(keep) {
            adj[v] &= keep;
        }
        for e in f.edges() {
            adj[e.u() as usize] &= !(1u128 << e.v());
            adj[e.v() as usize] &= !(1u128 << e.u());
        }
        let fault_edges = f.edges();
        let edges = self
            .edges
            .iter()
            .filter(|e| e.mask() & dead == 0 && fault_edges.binary_search(e).is_err())
            .copied()
            .collect();
        Ok(Graph { n: self.n, alive: keep, adj, edges })
    }

    /// Bipartite double cover: vertices v0 = v and v1 = v + n, with an edge
    /// (u0, v1) and (v0, u1) for every edge (u, v). The cover has twice the
    /// edges, is 2-colorable by side, and has a perfect matching exactly when
    /// this graph has a fractional perfect matching.
    pub fn bipartite_double_cover(&self) -> Graph {
        let n2 = self.n * 2;
        let shift = self.n as VertexId;
        let mut cover_edges = Vec::with_capacity(self.edges.len() * 2);
        for e in &self.edges {
            cover_edges.push((e.u(), e.v() + shift));
            cover_edges.push((e.v(), e.u() + shift));
        }
        let mut g = Graph::from_edges_with_cap(n2, cover_edges)
            .expect("cover of a valid graph is valid");
        g.alive = self.alive | self.alive << self.n;
        for v in bits(!g.alive & ((1u128 << n2) - 1)) {
            g.adj[v] = 0;
        }
        g
    }

    /// Canonical edge-list text: header `n m`, then one `u v` line per edge
    /// in sorted order. Output is byte-exact for a given graph.
    pub fn canonical_text(&self) -> String {
        let mut out = String::with_capacity(8 * (self.edges.len() + 1));
        out.push_str(&format!("{} {}\n", self.n, self.edges.len()));
        for e in &self.edges {
            out.push_str(&format!("{} {}\n", e.u(), e.v()));
        }
        out
    }

    /// Hex SHA-256 of the canonical text; identifies the graph in
    /// certificates and plan hashes.
    pub fn canonical_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Writes the canonical edge-list format (see [`Graph::canonical_text`]).
pub fn write_graph(g: &Graph) -> String {
    g.canonical_text()
}

/// Parses the edge-list format. Lines starting with `#` and blank lines are
/// skipped; the first data line is `n m`, followed by exactly m `u v` lines.
pub fn read_graph(text: &str) -> Result<Graph, GraphError> {
    let mut data = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line, header) = data.next().ok_or(GraphError::Parse {
        line: 0,
        message: "missing `n m` header".into(),
    })?;
    let parse_pair = |line: usize, s: &str| -> Result<(usize, usize), GraphError> {
        let mut it = s.split_whitespace().map(|t| {
            t.parse::<usize>().map_err(|_| GraphError::Parse {
                line,
                message: format!("expected integer, found `{t}`"),
            })
        });
        match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => Ok((a?, b?)),
            _ => Err(GraphError::Parse { line, message: "expected two integers".into() }),
        }
    };
    let (n, m) = parse_pair(line, header)?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, text) = data.next().ok_or(GraphError::Parse {
            line: 0,
            message: format!("expected {m} edge lines, found {}", edges.len()),
        })?;
        let (u, v) = parse_pair(line, text)?;
        if u >= n || v >= n {
            return Err(GraphError::VertexOutOfRange { vertex: u.max(v), n });
        }
        edges.push((u as VertexId, v as VertexId));
    }
    if let Some((line, _)) = data.next() {
        return Err(GraphError::Parse { line, message: "trailing data after edge list".into() });
    }
    Graph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n as VertexId {
            for v in u + 1..n as VertexId {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, edges).unwrap()
    }

    pub(crate) fn cycle(n: usize) -> Graph {
        let edges = (0..n).map(|i| (i as VertexId, ((i + 1) % n) as VertexId));
        Graph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(
            Graph::from_edges(3, [(1, 1)]).unwrap_err(),
            GraphError::SelfLoop(1)
        );
        assert_eq!(
            Graph::from_edges(3, [(0, 3)]).unwrap_err(),
            GraphError::VertexOutOfRange { vertex: 3, n: 3 }
        );
        assert_eq!(
            Graph::from_edges(3, [(0, 1), (1, 0)]).unwrap_err(),
            GraphError::DuplicateEdge(Edge::new(0, 1).unwrap())
        );
        assert!(matches!(
            Graph::from_edges(65, []).unwrap_err(),
            GraphError::TooManyVertices(65)
        ));
    }

    #[test]
    fn delete_vertex_from_k4() {
        let g = complete(4);
        let f = FaultSet::new(vec![2], vec![]).unwrap();
        let h = g.delete_faults(&f).unwrap();
        assert_eq!(h.vertex_count(), 3);
        assert_eq!(h.n(), 4);
        assert!(!h.is_alive(2));
        assert_eq!(h.edge_count(), 3); // K_3 on {0, 1, 3}
        assert!(h.has_edge(0, 3) && !h.has_edge(0, 2));
    }

    #[test]
    fn delete_edge_from_c4() {
        let g = cycle(4);
        let f = FaultSet::new(vec![], vec![Edge::new(0, 1).unwrap()]).unwrap();
        let h = g.delete_faults(&f).unwrap();
        assert_eq!(h.vertex_count(), 4);
        assert_eq!(h.edge_count(), 3);
        assert_eq!(h.degree(0), 1);
        assert!(h.isolated_vertices().is_empty());
    }

    #[test]
    fn delete_star_isolates_vertex() {
        let g = complete(4);
        let star: Vec<Edge> = (1..4).map(|v| Edge::new(0, v).unwrap()).collect();
        let h = g.delete_faults(&FaultSet::new(vec![], star).unwrap()).unwrap();
        assert_eq!(h.isolated_vertices(), vec![0]);
    }

    #[test]
    fn fault_validation_rejects_missing_elements() {
        let g = cycle(4);
        let dead = FaultSet::new(vec![1], vec![]).unwrap();
        let h = g.delete_faults(&dead).unwrap();
        assert_eq!(
            h.delete_faults(&dead).unwrap_err(),
            GraphError::FaultVertexInvalid(1)
        );
        let gone = FaultSet::new(vec![], vec![Edge::new(0, 2).unwrap()]).unwrap();
        assert_eq!(
            g.delete_faults(&gone).unwrap_err(),
            GraphError::FaultEdgeInvalid(Edge::new(0, 2).unwrap())
        );
    }

    #[test]
    fn double_cover_of_k2_is_two_disjoint_edges() {
        let g = complete(2);
        let c = g.bipartite_double_cover();
        assert_eq!(c.vertex_count(), 4);
        assert_eq!(c.edges(), &[Edge(0, 3), Edge(1, 2)]);
    }

    #[test]
    fn double_cover_of_k3_is_c6() {
        let c = complete(3).bipartite_double_cover();
        assert_eq!(c.vertex_count(), 6);
        assert_eq!(c.edge_count(), 6);
        assert!(c.alive_vertices().all(|v| c.degree(v) == 2));
        // Connected 2-regular graph on 6 vertices = C_6: walk it.
        let mut seen = 1u128;
        let mut frontier = 1u128;
        while frontier != 0 {
            let mut next = 0u128;
            for v in bits(frontier) {
                next |= c.adjacency_row(v as VertexId);
            }
            frontier = next & !seen;
            seen |= next;
        }
        assert_eq!(seen.count_ones(), 6);
    }

    #[test]
    fn double_cover_of_c5_is_c10() {
        let c = cycle(5).bipartite_double_cover();
        assert_eq!(c.vertex_count(), 10);
        assert_eq!(c.edge_count(), 10);
        assert!(c.alive_vertices().all(|v| c.degree(v) == 2));
    }

    #[test]
    fn io_round_trip_and_errors() {
        let g = complete(4);
        let text = write_graph(&g);
        assert_eq!(text.lines().next(), Some("4 6"));
        assert_eq!(read_graph(&text).unwrap(), g);

        let commented = format!("# complete graph\n{text}");
        assert_eq!(read_graph(&commented).unwrap(), g);

        assert_eq!(
            read_graph("2 1\n0 5\n").unwrap_err(),
            GraphError::VertexOutOfRange { vertex: 5, n: 2 }
        );
        assert!(matches!(read_graph(""), Err(GraphError::Parse { .. })));
        assert!(matches!(read_graph("3 2\n0 1\n"), Err(GraphError::Parse { .. })));
        assert!(matches!(
            read_graph("3 1\n0 1\n1 2\n"),
            Err(GraphError::Parse { line: 3, .. })
        ));
        assert!(matches!(read_graph("3 x\n"), Err(GraphError::Parse { .. })));
    }

    #[test]
    fn fault_set_ordering_matches_enumeration_order() {
        let e01 = Edge::new(0, 1).unwrap();
        let e02 = Edge::new(0, 2).unwrap();
        let a = FaultSet::new(vec![], vec![e01, e02]).unwrap();
        let b = FaultSet::new(vec![5], vec![e01]).unwrap();
        let c = FaultSet::new(vec![0, 1], vec![]).unwrap();
        // Edge-only sets precede single-vertex sets, which precede pairs,
        // regardless of the vertex ids involved.
        assert!(a < b && b < c);
    }
}
