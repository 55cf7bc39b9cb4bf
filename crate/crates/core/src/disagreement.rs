//! The disagreement process: which edges currently join vertices with
//! *different* opinion values.
//!
//! Because an interior averaging event writes one identical floating-point
//! value to both endpoints, exact equality across an edge is a meaningful
//! event, and the indicator `eta_e = 1{O_i != O_j}` evolves autonomously: a
//! ring on a disagreeing edge clears it (interior edges only — a boundary
//! edge keeps disagreeing, since the moved endpoint almost surely misses the
//! pinned temperature) and spikes every edge that shares an interior vertex
//! with it; a ring on an agreeing edge changes nothing. Legal configurations
//! therefore have all boundary edges spiking and agreeing edges pairwise
//! non-adjacent.
//!
//! Looking backwards in time gives a one-shot perfect sampler
//! ([`perfect_sim_eta`]): rank the edges by how recently they last rang
//! (rank 1 = most recent) and clear exactly the interior edges that precede
//! all edges sharing an interior vertex with them. Since the ranks of an
//! edge and its `n` such neighbours are exchangeable, a single interior edge
//! agrees with probability `1/(n+1)` in the stationary state.

use crate::events::MarkedEvent;
use crate::graph::{edge_neighbor_count, EdgeId, Graph};
use crate::kmp::Process;
use crate::opinion::OpinionConfig;
use thiserror::Error;

/// One bit per edge: `1` = the endpoints disagree (the edge "spikes").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtaConfig {
    bits: Vec<u64>,
    n_edges: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum EtaError {
    #[error("configuration has {got} entries, graph has {expected} edges")]
    LengthMismatch { expected: usize, got: usize },
    #[error("boundary edge {0} must spike in every legal configuration")]
    BoundaryNotSpiking(EdgeId),
    #[error("agreeing edges {0} and {1} share an interior vertex")]
    AdjacentZeros(EdgeId, EdgeId),
    #[error("permutation has {got} entries, graph has {expected} edges")]
    PermutationLength { expected: usize, got: usize },
    #[error("permutation entry {0} out of range or repeated; expected each of 1..=n_edges once")]
    NotAPermutation(usize),
}

impl EtaConfig {
    /// All edges spiking — always legal, and the natural fresh start.
    pub fn all_spiking(graph: &Graph) -> Self {
        let n_edges = graph.n_edges();
        let mut bits = vec![!0u64; n_edges.div_ceil(64)];
        if n_edges % 64 != 0 {
            let last = bits.len() - 1;
            bits[last] = (1u64 << (n_edges % 64)) - 1;
        }
        EtaConfig { bits, n_edges }
    }

    /// Build from explicit 0/1 values, checking legality.
    pub fn new(graph: &Graph, values: &[u8]) -> Result<Self, EtaError> {
        if values.len() != graph.n_edges() {
            return Err(EtaError::LengthMismatch { expected: graph.n_edges(), got: values.len() });
        }
        let mut cfg = EtaConfig::all_spiking(graph);
        for (e, &v) in values.iter().enumerate() {
            cfg.set(e, v != 0);
        }
        cfg.check_legal(graph)?;
        Ok(cfg)
    }

    pub fn get(&self, e: EdgeId) -> bool {
        self.bits[e / 64] >> (e % 64) & 1 == 1
    }

    fn set(&mut self, e: EdgeId, spiking: bool) {
        if spiking {
            self.bits[e / 64] |= 1u64 << (e % 64);
        } else {
            self.bits[e / 64] &= !(1u64 << (e % 64));
        }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Number of spiking edges.
    pub fn ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.n_edges).map(|e| self.get(e) as u8).collect()
    }

    /// Legality: boundary edges spike; agreeing edges are pairwise
    /// non-adjacent through interior vertices.
    pub fn check_legal(&self, graph: &Graph) -> Result<(), EtaError> {
        for e in 0..self.n_edges {
            if self.get(e) {
                continue;
            }
            if graph.edge(e).boundary {
                return Err(EtaError::BoundaryNotSpiking(e));
            }
            for &ne in graph.edge_neighbors(e) {
                if !self.get(ne) {
                    return Err(EtaError::AdjacentZeros(e, ne));
                }
            }
        }
        Ok(())
    }
}

/// Read the disagreement pattern off an opinion configuration (exact
/// floating-point inequality, which the averaging updates make meaningful).
pub fn eta_from_opinion(cfg: &OpinionConfig, graph: &Graph) -> EtaConfig {
    let mut eta = EtaConfig::all_spiking(graph);
    for (e, edge) in graph.edges().iter().enumerate() {
        eta.set(e, cfg.values[edge.i] != cfg.values[edge.j]);
    }
    eta
}

/// Apply one event: rings on agreeing edges are invisible; a ring on a
/// spiking edge clears it (interior only) and spikes every edge sharing an
/// interior vertex with it.
pub fn step_eta(cfg: &mut EtaConfig, ev: &MarkedEvent, graph: &Graph) {
    let eid = ev.edge();
    if !cfg.get(eid) {
        return;
    }
    if !graph.edge(eid).boundary {
        cfg.set(eid, false);
    }
    for &ne in graph.edge_neighbors(eid) {
        cfg.set(ne, true);
    }
    debug_assert!(cfg.check_legal(graph).is_ok());
}

/// Marker type implementing [`Process`].
pub struct Eta;

impl Process for Eta {
    type Config = EtaConfig;
    fn step(&self, cfg: &mut EtaConfig, ev: &MarkedEvent, graph: &Graph) {
        step_eta(cfg, ev, graph);
    }
}

/// One-shot perfect draw from the stationary disagreement law, driven by a
/// recency permutation: `ranks[e]` is the backward rank of edge `e`'s most
/// recent ring (1 = rang last). Feed a uniformly random permutation to get
/// an exact stationary sample.
///
/// Edges are processed by ascending rank; an edge still undetermined at its
/// own turn agrees if interior (nothing overwrote its endpoints since it
/// rang), and its undetermined neighbours through interior vertices are
/// fixed to spiking (their older values were overwritten).
pub fn perfect_sim_eta(graph: &Graph, ranks: &[usize]) -> Result<EtaConfig, EtaError> {
    let m = graph.n_edges();
    if ranks.len() != m {
        return Err(EtaError::PermutationLength { expected: m, got: ranks.len() });
    }
    // order[r - 1] = the edge with rank r.
    let mut order = vec![usize::MAX; m];
    for (e, &r) in ranks.iter().enumerate() {
        if r < 1 || r > m || order[r - 1] != usize::MAX {
            return Err(EtaError::NotAPermutation(r));
        }
        order[r - 1] = e;
    }
    let mut eta = EtaConfig::all_spiking(graph);
    let mut determined = vec![false; m];
    for &e in &order {
        if !determined[e] {
            determined[e] = true;
            if !graph.edge(e).boundary {
                eta.set(e, false);
            }
        }
        for &ne in graph.edge_neighbors(e) {
            determined[ne] = true; // stays spiking
        }
    }
    debug_assert!(eta.check_legal(graph).is_ok());
    Ok(eta)
}

/// Stationary probability that edge `e` agrees: `1/(n+1)` for an interior
/// edge with `n` neighbours through interior vertices, `0` for a boundary
/// edge.
pub fn edge_marginal_stationary(graph: &Graph, e: EdgeId) -> f64 {
    if graph.edge(e).boundary {
        0.0
    } else {
        1.0 / (edge_neighbor_count(graph, e) as f64 + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{EventStream, EventTarget};
    use crate::graph::{build_graph, path_graph};
    use crate::opinion::{step_opinion, step_opinion_mean};
    use crate::rng::substream;
    use crate::stats::ks_statistic;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn ring(edge: usize) -> MarkedEvent {
        MarkedEvent {
            time: 1.0,
            target: EventTarget::Edge(edge),
            u: 0.5,
            b: Some(1.0),
            v: 0.3,
            u_prime: 0.5,
            extra_seed: 0,
        }
    }

    /// Closed form for the perfect draw: an interior edge agrees iff its
    /// rank beats all neighbours through interior vertices.
    fn perfect_closed_form(graph: &Graph, ranks: &[usize]) -> Vec<u8> {
        (0..graph.n_edges())
            .map(|e| {
                if graph.edge(e).boundary {
                    return 1;
                }
                let minimal =
                    graph.edge_neighbors(e).iter().all(|&ne| ranks[e] < ranks[ne]);
                (!minimal) as u8
            })
            .collect()
    }

    #[test]
    fn worked_example_on_the_eight_edge_path() {
        let g = path_graph(8, 1.0, 2.0).unwrap();
        let eta = perfect_sim_eta(&g, &[3, 6, 5, 8, 1, 2, 4, 7]).unwrap();
        assert_eq!(eta.to_vec(), vec![1, 1, 0, 1, 0, 1, 1, 1]);
    }

    #[test]
    fn two_boundary_edges_always_spike() {
        let g = path_graph(2, 1.0, 2.0).unwrap();
        for ranks in [[1, 2], [2, 1]] {
            let eta = perfect_sim_eta(&g, &ranks).unwrap();
            assert_eq!(eta.to_vec(), vec![1, 1]);
        }
    }

    #[test]
    fn sequential_sampler_matches_closed_form() {
        let path = path_graph(7, 1.0, 2.0).unwrap();
        let star = build_graph(
            6,
            &[0, 1],
            &[(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)],
            &[(2, 1.0), (3, 1.0), (4, 2.0), (5, 2.0)],
        )
        .unwrap();
        let mut rng = substream(300, &[]);
        for g in [&path, &star] {
            let m = g.n_edges();
            for _ in 0..200 {
                let mut ranks: Vec<usize> = (1..=m).collect();
                ranks.shuffle(&mut rng);
                let eta = perfect_sim_eta(g, &ranks).unwrap();
                assert_eq!(eta.to_vec(), perfect_closed_form(g, &ranks));
            }
        }
    }

    #[test]
    fn invalid_permutations_are_rejected() {
        let g = path_graph(3, 1.0, 2.0).unwrap();
        assert_eq!(
            perfect_sim_eta(&g, &[1, 2]).unwrap_err(),
            EtaError::PermutationLength { expected: 3, got: 2 }
        );
        assert_eq!(perfect_sim_eta(&g, &[1, 2, 4]).unwrap_err(), EtaError::NotAPermutation(4));
        assert_eq!(perfect_sim_eta(&g, &[1, 2, 2]).unwrap_err(), EtaError::NotAPermutation(2));
        assert_eq!(perfect_sim_eta(&g, &[0, 1, 2]).unwrap_err(), EtaError::NotAPermutation(0));
    }

    #[test]
    fn legality_checks() {
        let g = path_graph(5, 1.0, 2.0).unwrap();
        // Boundary edge 0 cleared.
        assert_eq!(
            EtaConfig::new(&g, &[0, 1, 1, 1, 1]).unwrap_err(),
            EtaError::BoundaryNotSpiking(0)
        );
        // Interior edges 1 and 2 share vertex 2.
        assert_eq!(
            EtaConfig::new(&g, &[1, 0, 0, 1, 1]).unwrap_err(),
            EtaError::AdjacentZeros(1, 2)
        );
        // Non-adjacent zeros are fine.
        let eta = EtaConfig::new(&g, &[1, 0, 1, 0, 1]).unwrap();
        assert_eq!(eta.ones(), 3);
    }

    #[test]
    fn ring_on_agreeing_edge_is_invisible() {
        let g = path_graph(5, 1.0, 2.0).unwrap();
        let mut eta = EtaConfig::new(&g, &[1, 0, 1, 0, 1]).unwrap();
        let before = eta.clone();
        step_eta(&mut eta, &ring(1), &g);
        assert_eq!(eta, before);
    }

    #[test]
    fn ring_on_spiking_interior_edge_clears_it_and_spikes_neighbors() {
        let g = path_graph(5, 1.0, 2.0).unwrap();
        let mut eta = EtaConfig::new(&g, &[1, 0, 1, 0, 1]).unwrap();
        step_eta(&mut eta, &ring(2), &g);
        assert_eq!(eta.to_vec(), vec![1, 1, 0, 1, 1]);
    }

    #[test]
    fn ring_on_boundary_edge_keeps_it_spiking() {
        let g = path_graph(5, 1.0, 2.0).unwrap();
        let mut eta = EtaConfig::new(&g, &[1, 0, 1, 0, 1]).unwrap();
        step_eta(&mut eta, &ring(0), &g);
        // Edge 0 = (1, 0) stays 1; neighbour through vertex 1 is edge 1.
        assert_eq!(eta.to_vec(), vec![1, 1, 1, 0, 1]);
    }

    #[test]
    fn eta_tracks_both_averaging_variants() {
        let g = path_graph(6, 1.0, 2.0).unwrap();
        let mut rng = substream(301, &[]);
        for mean_variant in [false, true] {
            // Distinct initial values => all edges disagree.
            let mut values: Vec<f64> = (0..g.n_vertices()).map(|_| rng.gen()).collect();
            for v in g.boundary_vertices() {
                values[v] = g.boundary_temp(v);
            }
            let mut opinion = OpinionConfig::new(&g, values).unwrap();
            let mut eta = eta_from_opinion(&opinion, &g);
            assert_eq!(eta.ones(), g.n_edges());
            let mut stream = EventStream::new(&g, 302 + mean_variant as u64);
            for _ in 0..3000 {
                let ev = stream.next_event();
                if mean_variant {
                    step_opinion_mean(&mut opinion, &ev, &g);
                } else {
                    step_opinion(&mut opinion, &ev, &g);
                }
                step_eta(&mut eta, &ev, &g);
                assert_eq!(eta, eta_from_opinion(&opinion, &g));
            }
        }
    }

    #[test]
    fn middle_edge_marginal_rates() {
        // Edge 2 of the five-edge path has two neighbours through interior
        // vertices: holding times are Exp(2) while agreeing and Exp(1) while
        // spiking, and the edge agrees a third of the time.
        let g = path_graph(5, 1.0, 2.0).unwrap();
        assert_eq!(edge_marginal_stationary(&g, 2), 1.0 / 3.0);
        assert_eq!(edge_marginal_stationary(&g, 0), 0.0);

        let mut eta = EtaConfig::all_spiking(&g);
        let mut stream = EventStream::new(&g, 303);
        let mut zero_holds = Vec::new();
        let mut one_holds = Vec::new();
        let mut state = eta.get(2);
        let mut since = 0.0;
        let mut zero_time = 0.0;
        let mut last_time = 0.0;
        for _ in 0..120_000 {
            let ev = stream.next_event();
            if !state {
                zero_time += ev.time - last_time;
            }
            last_time = ev.time;
            step_eta(&mut eta, &ev, &g);
            if eta.get(2) != state {
                let hold = ev.time - since;
                if state {
                    one_holds.push(hold);
                } else {
                    zero_holds.push(hold);
                }
                state = eta.get(2);
                since = ev.time;
            }
        }
        let report = ks_statistic(&mut zero_holds, |t| 1.0 - (-2.0 * t).exp()).unwrap();
        assert!(!report.reject_01, "agreeing holds: D = {}", report.d);
        let report = ks_statistic(&mut one_holds, |t| 1.0 - (-t).exp()).unwrap();
        assert!(!report.reject_01, "spiking holds: D = {}", report.d);
        // Time average of the agreement indicator. The integrated
        // autocovariance of the two-state chain gives the long-run variance
        // 2 p0 p1 / (a + b) = 4/27 for rates a = 2, b = 1.
        let frac = zero_time / last_time;
        let sigma = (4.0 / 27.0f64 / last_time).sqrt();
        assert!((frac - 1.0 / 3.0).abs() < 3.5 * sigma, "P(agree) = {frac}");
    }

    #[test]
    fn perfect_draw_matches_exact_marginals_on_a_grid() {
        // 3x3 interior grid ringed by 12 boundary spokes.
        let mut edges = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                let v = r * 3 + c;
                if c + 1 < 3 {
                    edges.push((v, v + 1));
                }
                if r + 1 < 3 {
                    edges.push((v, v + 3));
                }
            }
        }
        let mut temps = Vec::new();
        let mut next = 9;
        for c in 0..3 {
            edges.push((c, next)); // top
            temps.push((next, 1.0));
            next += 1;
            edges.push((6 + c, next)); // bottom
            temps.push((next, 2.0));
            next += 1;
        }
        for r in 0..3 {
            edges.push((r * 3, next)); // left
            temps.push((next, 1.5));
            next += 1;
            edges.push((r * 3 + 2, next)); // right
            temps.push((next, 1.5));
            next += 1;
        }
        let interior: Vec<usize> = (0..9).collect();
        let g = build_graph(21, &interior, &edges, &temps).unwrap();
        assert_eq!(g.n_edges(), 24);

        let m = g.n_edges();
        let replicas = 6000;
        let mut zero_counts = vec![0.0; m];
        let mut rng = substream(304, &[]);
        for _ in 0..replicas {
            let mut ranks: Vec<usize> = (1..=m).collect();
            ranks.shuffle(&mut rng);
            let eta = perfect_sim_eta(&g, &ranks).unwrap();
            for e in 0..m {
                if !eta.get(e) {
                    zero_counts[e] += 1.0;
                }
            }
        }
        for e in 0..m {
            let p = edge_marginal_stationary(&g, e);
            let freq = zero_counts[e] / replicas as f64;
            if p == 0.0 {
                assert_eq!(freq, 0.0);
            } else {
                let se = (p * (1.0 - p) / replicas as f64).sqrt();
                assert!((freq - p).abs() < 4.0 * se, "edge {e}: {freq} vs {p}");
            }
        }
    }

    #[test]
    fn dynamics_reach_the_perfect_marginals() {
        let g = path_graph(5, 1.0, 2.0).unwrap();
        let replicas = 3000;
        let mut zero_counts = vec![0.0; g.n_edges()];
        for r in 0..replicas {
            let mut stream = EventStream::new(&g, 9000 + r as u64);
            let mut eta = EtaConfig::all_spiking(&g);
            // Fixed-time sample deep past mixing.
            for ev in &stream.events_until(20.0).unwrap() {
                step_eta(&mut eta, ev, &g);
            }
            for e in 0..g.n_edges() {
                if !eta.get(e) {
                    zero_counts[e] += 1.0;
                }
            }
        }
        for e in 0..g.n_edges() {
            let p = edge_marginal_stationary(&g, e);
            let freq = zero_counts[e] / replicas as f64;
            if p == 0.0 {
                assert_eq!(freq, 0.0);
            } else {
                let se = (p * (1.0 - p) / replicas as f64).sqrt();
                assert!((freq - p).abs() < 4.0 * se, "edge {e}: {freq} vs {p}");
            }
        }
    }
}
