//! Marked Poisson event streams driving every process in the lab.
//!
//! Each edge carries an independent rate-1 Poisson clock; the stream samples
//! the superposition (global exponential waiting time at total rate, then a
//! uniform unit). Every event draws its marks in a fixed documented order —
//! `U`, then `B` for boundary edges, then `V`, then `U'`, then a 64-bit
//! `extra_seed` — so two processes stepped from the same stream see exactly
//! the same randomness, which is what makes the couplings in this crate exact
//! rather than merely distributional. Marks a process does not consume are
//! simply ignored; unbounded extras (remix points, fresh Poisson counts,
//! refresh signs) are materialized lazily from `extra_seed` without touching
//! the main stream.
//!
//! The classic two-rule energy model additionally needs stand-alone boundary
//! refresh events (rate 1 per boundary vertex); construct the stream with
//! [`EventStream::with_boundary_refresh`] to interleave them.

use crate::graph::{EdgeId, Graph, Vertex};
use crate::rng::{exp_with_mean, substream, Rng};
use rand::Rng as _;
use thiserror::Error;

/// What an event acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventTarget {
    /// Ring of the Poisson clock on an edge.
    Edge(EdgeId),
    /// Stand-alone refresh of a boundary vertex (two-rule model only).
    Refresh(Vertex),
}

/// One clock ring with all its marks.
///
/// `u`, `v`, `u_prime` are uniform on `[0,1)`; `b` is a mean-1 exponential,
/// present exactly for boundary edges and refresh events. Refresh events draw
/// only `b` and `extra_seed` (their other marks are `NaN` and never drawn
/// from the stream).
#[derive(Debug, Clone, Copy)]
pub struct MarkedEvent {
    pub time: f64,
    pub target: EventTarget,
    pub u: f64,
    pub b: Option<f64>,
    pub v: f64,
    pub u_prime: f64,
    pub extra_seed: u64,
}

impl MarkedEvent {
    /// The edge this event rings on. Panics for refresh events.
    pub fn edge(&self) -> EdgeId {
        match self.target {
            EventTarget::Edge(e) => e,
            EventTarget::Refresh(v) => panic!("refresh event at vertex {v} has no edge"),
        }
    }

    /// The boundary mark; panics if absent (interior edge).
    pub fn b(&self) -> f64 {
        self.b.expect("event has no boundary mark")
    }

    /// Deterministic generator for this event's lazily drawn extra marks.
    pub fn extras_rng(&self) -> Rng {
        substream(self.extra_seed, &[])
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("horizon must be finite, got {0}")]
    NonFiniteHorizon(f64),
    #[error("horizon {horizon} lies behind the stream cursor {cursor}")]
    HorizonBehindCursor { horizon: f64, cursor: f64 },
}

/// A deterministic stream of marked events on a graph.
///
/// Identical `(graph, seed)` yield bitwise-identical event sequences.
pub struct EventStream<'g> {
    graph: &'g Graph,
    /// Boundary vertices eligible for refresh events (empty in edge-only mode).
    refresh_targets: Vec<Vertex>,
    seed: u64,
    /// Time the stream has been consumed up to.
    cursor: f64,
    /// Time of the last event generated internally (may sit ahead of the
    /// cursor as a pending event).
    clock: f64,
    pending: Option<MarkedEvent>,
    rng: Rng,
}

impl<'g> EventStream<'g> {
    /// Edge events only (all processes except the two-rule energy model).
    pub fn new(graph: &'g Graph, seed: u64) -> Self {
        EventStream {
            graph,
            refresh_targets: Vec::new(),
            seed,
            cursor: 0.0,
            clock: 0.0,
            pending: None,
            rng: substream(seed, &[]),
        }
    }

    /// Edge events plus rate-1 refresh events at every boundary vertex.
    pub fn with_boundary_refresh(graph: &'g Graph, seed: u64) -> Self {
        let mut s = Self::new(graph, seed);
        s.refresh_targets = graph.boundary_vertices().collect();
        s
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Time consumed so far (last delivered event, or the last horizon).
    pub fn cursor(&self) -> f64 {
        self.cursor
    }

    fn n_units(&self) -> usize {
        self.graph.n_edges() + self.refresh_targets.len()
    }

    fn generate(&mut self) -> MarkedEvent {
        let rate = self.n_units() as f64;
        self.clock += exp_with_mean(&mut self.rng, 1.0 / rate);
        let unit = self.rng.gen_range(0..self.n_units());
        let time = self.clock;
        if unit < self.graph.n_edges() {
            let u: f64 = self.rng.gen();
            let b = if self.graph.edge(unit).boundary {
                Some(exp_with_mean(&mut self.rng, 1.0))
            } else {
                None
            };
            let v: f64 = self.rng.gen();
            let u_prime: f64 = self.rng.gen();
            let extra_seed: u64 = self.rng.gen();
            MarkedEvent { time, target: EventTarget::Edge(unit), u, b, v, u_prime, extra_seed }
        } else {
            let vertex = self.refresh_targets[unit - self.graph.n_edges()];
            let b = Some(exp_with_mean(&mut self.rng, 1.0));
            let extra_seed: u64 = self.rng.gen();
            MarkedEvent {
                time,
                target: EventTarget::Refresh(vertex),
                u: f64::NAN,
                b,
                v: f64::NAN,
                u_prime: f64::NAN,
                extra_seed,
            }
        }
    }

    /// Deliver the next event unconditionally.
    pub fn next_event(&mut self) -> MarkedEvent {
        let ev = match self.pending.take() {
            Some(e) => e,
            None => self.generate(),
        };
        self.cursor = ev.time;
        ev
    }

    /// All events with `time <= horizon`, advancing the cursor to `horizon`.
    ///
    /// The horizon must be finite (simulate "forever" by repeated calls) and
    /// must not lie behind the cursor. `horizon == cursor` yields no events.
    pub fn events_until(&mut self, horizon: f64) -> Result<Vec<MarkedEvent>, EventError> {
        if !horizon.is_finite() {
            return Err(EventError::NonFiniteHorizon(horizon));
        }
        if horizon < self.cursor {
            return Err(EventError::HorizonBehindCursor { horizon, cursor: self.cursor });
        }
        let mut out = Vec::new();
        loop {
            let ev = match self.pending.take() {
                Some(e) => e,
                None => self.generate(),
            };
            if ev.time > horizon {
                self.pending = Some(ev);
                break;
            }
            out.push(ev);
        }
        self.cursor = horizon;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;

    fn events_close(a: &MarkedEvent, b: &MarkedEvent) -> bool {
        a.time.to_bits() == b.time.to_bits()
            && a.target == b.target
            && a.u.to_bits() == b.u.to_bits()
            && a.b.map(f64::to_bits) == b.b.map(f64::to_bits)
            && a.v.to_bits() == b.v.to_bits()
            && a.u_prime.to_bits() == b.u_prime.to_bits()
            && a.extra_seed == b.extra_seed
    }

    #[test]
    fn equal_seeds_give_identical_streams() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s1 = EventStream::new(&g, 42);
        let mut s2 = EventStream::new(&g, 42);
        for _ in 0..10_000 {
            assert!(events_close(&s1.next_event(), &s2.next_event()));
        }
    }

    #[test]
    fn marks_follow_edge_kind() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s = EventStream::new(&g, 1);
        for _ in 0..1000 {
            let ev = s.next_event();
            let boundary = g.edge(ev.edge()).boundary;
            assert_eq!(ev.b.is_some(), boundary);
            assert!((0.0..1.0).contains(&ev.u));
            assert!((0.0..1.0).contains(&ev.v));
            assert!((0.0..1.0).contains(&ev.u_prime));
            if let Some(b) = ev.b {
                assert!(b >= 0.0);
            }
        }
    }

    #[test]
    fn times_increase_and_mean_gap_matches_rate() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s = EventStream::new(&g, 7);
        let n = 100_000;
        let mut last = 0.0;
        let mut sum = 0.0;
        for _ in 0..n {
            let ev = s.next_event();
            assert!(ev.time > last);
            sum += ev.time - last;
            last = ev.time;
        }
        // Gaps are Exp(4): mean 0.25, sd 0.25.
        let mean = sum / n as f64;
        let sigma = 0.25 / (n as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean={mean}");
    }

    #[test]
    fn per_edge_counts_are_uniform() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s = EventStream::new(&g, 19);
        let n = 100_000usize;
        let mut counts = vec![0.0f64; g.n_edges()];
        for _ in 0..n {
            counts[s.next_event().edge()] += 1.0;
        }
        // Each within 3 sigma of n/4 ...
        let p = 1.0 / g.n_edges() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c - n as f64 * p).abs() < 3.0 * sigma, "count {c}");
        }
        // ... and jointly uniform by chi-square at level 0.01 (df = 3).
        let expected = n as f64 * p;
        let chi2: f64 = counts.iter().map(|&c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < 11.345, "chi2={chi2}");
    }

    #[test]
    fn u_and_v_marks_uncorrelated() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s = EventStream::new(&g, 23);
        let n = 100_000;
        let (mut su, mut sv, mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let ev = s.next_event();
            su += ev.u;
            sv += ev.v;
            suv += ev.u * ev.v;
            suu += ev.u * ev.u;
            svv += ev.v * ev.v;
        }
        let nf = n as f64;
        let cov = suv / nf - (su / nf) * (sv / nf);
        let corr = cov / ((suu / nf - (su / nf).powi(2)) * (svv / nf - (sv / nf).powi(2))).sqrt();
        assert!(corr.abs() < 3.0 / nf.sqrt(), "corr={corr}");
    }

    #[test]
    fn events_until_contract() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s = EventStream::new(&g, 3);
        assert_eq!(s.events_until(0.0).unwrap().len(), 0);
        assert_eq!(
            s.events_until(f64::INFINITY).unwrap_err(),
            EventError::NonFiniteHorizon(f64::INFINITY)
        );
        let evs = s.events_until(10.0).unwrap();
        assert!(evs.iter().all(|e| e.time <= 10.0));
        assert_eq!(s.cursor(), 10.0);
        assert_eq!(
            s.events_until(5.0).unwrap_err(),
            EventError::HorizonBehindCursor { horizon: 5.0, cursor: 10.0 }
        );
        // Resuming delivers the held-back event; times stay ordered.
        let more = s.events_until(20.0).unwrap();
        assert!(more[0].time > 10.0);
    }

    #[test]
    fn horizon_split_matches_single_run() {
        // Draining [0,5] then (5,10] gives the same events as [0,10] at once.
        let g = path_graph(3, 1.0, 2.0).unwrap();
        let mut s1 = EventStream::new(&g, 99);
        let mut s2 = EventStream::new(&g, 99);
        let mut split = s1.events_until(5.0).unwrap();
        split.extend(s1.events_until(10.0).unwrap());
        let whole = s2.events_until(10.0).unwrap();
        assert_eq!(split.len(), whole.len());
        for (a, b) in split.iter().zip(&whole) {
            assert!(events_close(a, b));
        }
    }

    #[test]
    fn event_count_is_poisson() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s = EventStream::new(&g, 5);
        // Count over [0, 2500] at total rate 4: Poisson(1e4).
        let n = s.events_until(2500.0).unwrap().len() as f64;
        assert!((n - 10_000.0).abs() < 3.0 * 100.0, "count={n}");
    }

    #[test]
    fn refresh_mode_targets_boundary() {
        let g = path_graph(4, 1.0, 2.0).unwrap();
        let mut s = EventStream::with_boundary_refresh(&g, 13);
        let n = 60_000;
        let mut refresh = 0.0f64;
        for _ in 0..n {
            match s.next_event() {
                ev @ MarkedEvent { target: EventTarget::Refresh(v), .. } => {
                    assert!(!g.is_interior(v));
                    assert!(ev.b.is_some());
                    refresh += 1.0;
                }
                ev => {
                    assert_eq!(ev.b.is_some(), g.edge(ev.edge()).boundary);
                }
            }
        }
        // 2 refresh units out of 6 total.
        let p = 2.0 / 6.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((refresh - n as f64 * p).abs() < 3.0 * sigma, "refresh={refresh}");
    }

    #[test]
    fn extras_rng_is_deterministic() {
        let g = path_graph(2, 1.0, 2.0).unwrap();
        let mut s = EventStream::new(&g, 77);
        let ev = s.next_event();
        let a: u64 = ev.extras_rng().gen();
        let b: u64 = ev.extras_rng().gen();
        assert_eq!(a, b);
    }
}
