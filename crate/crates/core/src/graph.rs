//! Finite graphs with a marked boundary carrying fixed temperatures.
//!
//! Vertices are dense ids `0..n`. Every edge has at least one interior
//! endpoint; edges with a boundary endpoint are stored oriented as
//! `(interior, boundary)` (inputs are flipped automatically), so process code
//! can always treat endpoint `j` as the refresh side. No edge may join two
//! boundary vertices and there is at most one edge per unordered vertex pair.

use std::collections::HashSet;
use thiserror::Error;

/// Dense vertex id.
pub type Vertex = usize;
/// Index into [`Graph::edges`].
pub type EdgeId = usize;

/// An edge `{i, j}`. If `boundary` is set, `j` is the boundary endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub i: Vertex,
    pub j: Vertex,
    pub boundary: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("vertex {0} out of range")]
    UnknownVertex(Vertex),
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(Vertex, Vertex),
    #[error("edge {{{0}, {1}}} joins two boundary vertices")]
    BoundaryBoundaryEdge(Vertex, Vertex),
    #[error("boundary vertex {0} has no temperature")]
    MissingTemperature(Vertex),
    #[error("temperature given for interior vertex {0}")]
    TemperatureOnInterior(Vertex),
    #[error("duplicate temperature entry for vertex {0}")]
    DuplicateTemperature(Vertex),
    #[error("invalid temperature {value} at vertex {vertex} (must be finite and >= 0)")]
    InvalidTemperature { vertex: Vertex, value: f64 },
    #[error("path graph needs N >= 2, got {0}")]
    PathTooShort(usize),
}

/// A validated graph with boundary temperatures and precomputed adjacency.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    interior: Vec<bool>,
    /// Temperature per vertex; meaningful only at boundary vertices.
    temps: Vec<f64>,
    edges: Vec<Edge>,
    /// Per edge: the other edges sharing exactly one (necessarily interior)
    /// vertex with it. Used by the disagreement dynamics.
    neighbors: Vec<Vec<EdgeId>>,
    /// Per vertex: incident edge ids, in edge order.
    incident: Vec<Vec<EdgeId>>,
}

/// Validate and build a graph.
///
/// `n_vertices` fixes the id range `0..n_vertices`; `interior` lists the
/// interior vertices (the rest are boundary); `edges` are unordered pairs;
/// `boundary_temps` assigns a finite temperature `>= 0` to every boundary
/// vertex and to nothing else.
pub fn build_graph(
    n_vertices: usize,
    interior: &[Vertex],
    edges: &[(Vertex, Vertex)],
    boundary_temps: &[(Vertex, f64)],
) -> Result<Graph, GraphError> {
    if n_vertices == 0 {
        return Err(GraphError::Empty);
    }
    let mut is_interior = vec![false; n_vertices];
    for &v in interior {
        if v >= n_vertices {
            return Err(GraphError::UnknownVertex(v));
        }
        is_interior[v] = true;
    }

    let mut temps = vec![0.0; n_vertices];
    let mut has_temp = vec![false; n_vertices];
    for &(v, t) in boundary_temps {
        if v >= n_vertices {
            return Err(GraphError::UnknownVertex(v));
        }
        if is_interior[v] {
            return Err(GraphError::TemperatureOnInterior(v));
        }
        if has_temp[v] {
            return Err(GraphError::DuplicateTemperature(v));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(GraphError::InvalidTemperature { vertex: v, value: t });
        }
        has_temp[v] = true;
        temps[v] = t;
    }
    for v in 0..n_vertices {
        if !is_interior[v] && !has_temp[v] {
            return Err(GraphError::MissingTemperature(v));
        }
    }

    let mut seen: HashSet<(Vertex, Vertex)> = HashSet::new();
    let mut built = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        if a >= n_vertices {
            return Err(GraphError::UnknownVertex(a));
        }
        if b >= n_vertices {
            return Err(GraphError::UnknownVertex(b));
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(GraphError::DuplicateEdge(a, b));
        }
        let edge = match (is_interior[a], is_interior[b]) {
            (false, false) => return Err(GraphError::BoundaryBoundaryEdge(a, b)),
            (true, true) => Edge { i: a, j: b, boundary: false },
            // Boundary edges are oriented towards the boundary vertex.
            (true, false) => Edge { i: a, j: b, boundary: true },
            (false, true) => Edge { i: b, j: a, boundary: true },
        };
        built.push(edge);
    }

    let mut incident = vec![Vec::new(); n_vertices];
    for (id, e) in built.iter().enumerate() {
        incident[e.i].push(id);
        incident[e.j].push(id);
    }
    let mut neighbors = vec![Vec::new(); built.len()];
    for (id, e) in built.iter().enumerate() {
        for &v in &[e.i, e.j] {
            if !is_interior[v] {
                continue;
            }
            for &other in &incident[v] {
                if other != id {
                    neighbors[id].push(other);
                }
            }
        }
        neighbors[id].sort_unstable();
        neighbors[id].dedup();
    }

    Ok(Graph { n: n_vertices, interior: is_interior, temps, edges: built, neighbors, incident })
}

/// The 1-D lattice with `N + 1` vertices `0..=N`, boundary `{0, N}` at
/// temperatures `(t_minus, t_plus)`, and `N` edges in path order
/// `(1,0), (1,2), (2,3), ..., (N-1,N)`.
pub fn path_graph(n: usize, t_minus: f64, t_plus: f64) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::PathTooShort(n));
    }
    let interior: Vec<Vertex> = (1..n).collect();
    let mut edges = vec![(1, 0)];
    for k in 1..n {
        edges.push((k, k + 1));
    }
    build_graph(n + 1, &interior, &edges, &[(0, t_minus), (n, t_plus)])
}

impl Graph {
    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id]
    }

    pub fn is_interior(&self, v: Vertex) -> bool {
        self.interior[v]
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.n).filter(|&v| self.interior[v])
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.n).filter(|&v| !self.interior[v])
    }

    /// Temperature of a boundary vertex; `None` for interior vertices.
    pub fn temp(&self, v: Vertex) -> Option<f64> {
        if self.interior[v] {
            None
        } else {
            Some(self.temps[v])
        }
    }

    /// Temperature of a boundary vertex. Panics if `v` is interior.
    pub fn boundary_temp(&self, v: Vertex) -> f64 {
        assert!(!self.interior[v], "vertex {v} is interior");
        self.temps[v]
    }

    /// Smallest and largest boundary temperature.
    pub fn temp_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.boundary_vertices() {
            lo = lo.min(self.temps[v]);
            hi = hi.max(self.temps[v]);
        }
        (lo, hi)
    }

    /// Edge ids incident to `v`, in edge order.
    pub fn incident_edges(&self, v: Vertex) -> &[EdgeId] {
        &self.incident[v]
    }

    /// Other edges sharing exactly one (interior) vertex with `e`.
    pub fn edge_neighbors(&self, e: EdgeId) -> &[EdgeId] {
        &self.neighbors[e]
    }

    /// If this graph is exactly `path_graph(N, ..)` (same vertex labels and
    /// edge order), return `N`.
    pub fn path_length(&self) -> Option<usize> {
        let n = self.n.checked_sub(1)?;
        if n < 2 || self.edges.len() != n {
            return None;
        }
        let want_interior = |v: Vertex| v != 0 && v != n;
        if (0..self.n).any(|v| self.interior[v] != want_interior(v)) {
            return None;
        }
        if self.edges[0] != (Edge { i: 1, j: 0, boundary: true }) {
            return None;
        }
        for k in 1..n {
            let want = Edge { i: k, j: k + 1, boundary: k == n - 1 };
            if self.edges[k] != want {
                return None;
            }
        }
        Some(n)
    }
}

/// Number of other edges sharing exactly one vertex with `e`, the shared
/// vertex interior. This is the neighbour count `n` entering the stationary
/// disagreement probability `1/(n+1)`.
pub fn edge_neighbor_count(graph: &Graph, e: EdgeId) -> usize {
    graph.edge_neighbors(e).len()
}
