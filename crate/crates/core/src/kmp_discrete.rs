//! Discrete-particle redistribution: the integer companion of the energy
//! process, its absorbed variant, and the moment-duality checks that tie
//! particles, opinions, and energies together.
//!
//! An interior edge ring pools the two endpoint counts, `m = K_i + K_j`, and
//! deals `K_i' = min(floor(U (m+1)), m)` back to `i` — a uniform draw on
//! `{0, ..., m}` — with the remainder to `j`. On a boundary edge the
//! injection variant first deals from the pooled pre-update pair and then
//! replaces the boundary count by a geometric draw with mean `T_j`; the
//! absorbed variant instead deals only from `K_i` and credits whatever leaves
//! to the boundary vertex, which acts as a cemetery counter.
//!
//! With `p(z, k) = z^k / k!`, the absorbed particles are dual to both the
//! averaging and the energy process: `E[prod O_i(t)^{K_i}]` equals
//! `E[prod O_i^{K_i(t)}]`, and when the energies start from independent
//! exponentials with means `O_i`, `E[prod p(Z_i(t), K_i)]` equals the same
//! right-hand side. [`duality_check_opinion`] and
//! [`duality_check_continuous`] estimate both sides by independent replica
//! runs and report means with standard errors.

use crate::events::{EventStream, MarkedEvent};
use crate::graph::Graph;
use crate::kmp::{simulate_until, EnergyConfig, Kmp, Process, StateError};
use crate::opinion::{Opinion, OpinionConfig};
use crate::rng::{exp_with_mean, geometric_from_exp_mark, substream};
use rand::Rng as _;
use thiserror::Error;

/// Particle configuration: one count per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleConfig {
    pub counts: Vec<u64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParticleError {
    #[error("configuration has {got} entries, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
}

impl ParticleConfig {
    pub fn new(graph: &Graph, counts: Vec<u64>) -> Result<Self, ParticleError> {
        if counts.len() != graph.n_vertices() {
            return Err(ParticleError::LengthMismatch {
                expected: graph.n_vertices(),
                got: counts.len(),
            });
        }
        Ok(ParticleConfig { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Deal a uniform share on `{0, ..., m}` from the `U` mark.
fn deal(m: u64, u: f64) -> u64 {
    ((u * (m as f64 + 1.0)) as u64).min(m)
}

/// Injection variant: pooled uniform deal on interior edges, geometric
/// boundary refresh with mean `T_j` driven by the `B` mark.
pub fn step_discrete(cfg: &mut ParticleConfig, ev: &MarkedEvent, graph: &Graph) {
    let edge = graph.edge(ev.edge());
    let m = cfg.counts[edge.i] + cfg.counts[edge.j];
    let h = deal(m, ev.u);
    cfg.counts[edge.i] = h;
    if edge.boundary {
        cfg.counts[edge.j] = geometric_from_exp_mark(ev.b(), graph.boundary_temp(edge.j));
    } else {
        cfg.counts[edge.j] = m - h;
    }
}

/// Absorbed variant: interior edges deal as [`step_discrete`]; a boundary
/// edge deals only from the interior count and moves the remainder onto the
/// boundary vertex, which collects absorbed particles and never gives back.
pub fn step_absorbed(cfg: &mut ParticleConfig, ev: &MarkedEvent, graph: &Graph) {
    let edge = graph.edge(ev.edge());
    if edge.boundary {
        let k = cfg.counts[edge.i];
        let h = deal(k, ev.u);
        cfg.counts[edge.i] = h;
        cfg.counts[edge.j] += k - h;
    } else {
        let m = cfg.counts[edge.i] + cfg.counts[edge.j];
        let h = deal(m, ev.u);
        cfg.counts[edge.i] = h;
        cfg.counts[edge.j] = m - h;
    }
}

/// Marker types implementing [`Process`].
pub struct Discrete;
pub struct Absorbed;

impl Process for Discrete {
    type Config = ParticleConfig;
    fn step(&self, cfg: &mut ParticleConfig, ev: &MarkedEvent, graph: &Graph) {
        step_discrete(cfg, ev, graph);
    }
}

impl Process for Absorbed {
    type Config = ParticleConfig;
    fn step(&self, cfg: &mut ParticleConfig, ev: &MarkedEvent, graph: &Graph) {
        step_absorbed(cfg, ev, graph);
    }
}

/// Two Monte Carlo estimates of the same quantity, one per side of a duality.
#[derive(Debug, Clone)]
pub struct DualityReport {
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    pub replicas: usize,
}

impl DualityReport {
    pub fn gap(&self) -> f64 {
        (self.lhs_mean - self.rhs_mean).abs()
    }

    /// Do the two estimates agree within `z` combined standard errors?
    pub fn compatible(&self, z: f64) -> bool {
        let se = (self.lhs_se * self.lhs_se + self.rhs_se * self.rhs_se).sqrt();
        self.gap() <= z * se + 1e-12
    }
}

fn product_pow(values: &[f64], counts: &[u64]) -> f64 {
    values
        .iter()
        .zip(counts)
        .map(|(&v, &k)| v.powi(k as i32))
        .product()
}

fn product_poisson_kernel(values: &[f64], counts: &[u64]) -> f64 {
    values
        .iter()
        .zip(counts)
        .map(|(&z, &k)| {
            let mut factorial = 1.0;
            for step in 1..=k {
                factorial *= step as f64;
            }
            z.powi(k as i32) / factorial
        })
        .product()
}

fn mean_and_se(sum: f64, sumsq: f64, n: usize) -> (f64, f64) {
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Estimate both sides of the opinion/particle duality at time `t`:
/// the left side evolves the opinions and keeps the exponents fixed, the
/// right side evolves absorbed particles and keeps the opinions fixed.
pub fn duality_check_opinion(
    graph: &Graph,
    opinions: &OpinionConfig,
    particles: &ParticleConfig,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<DualityReport, StateError> {
    let mut lhs = (0.0, 0.0);
    let mut rhs = (0.0, 0.0);
    for r in 0..replicas {
        let lhs_seed = substream(seed, &[1, r as u64]).gen::<u64>();
        let mut stream = EventStream::new(graph, lhs_seed);
        let cfg = simulate_until(&Opinion, graph, opinions.clone(), &mut stream, t)?;
        let x = product_pow(&cfg.values, &particles.counts);
        lhs.0 += x;
        lhs.1 += x * x;

        let rhs_seed = substream(seed, &[2, r as u64]).gen::<u64>();
        let mut stream = EventStream::new(graph, rhs_seed);
        let cfg = simulate_until(&Absorbed, graph, particles.clone(), &mut stream, t)?;
        let x = product_pow(&opinions.values, &cfg.counts);
        rhs.0 += x;
        rhs.1 += x * x;
    }
    let (lhs_mean, lhs_se) = mean_and_se(lhs.0, lhs.1, replicas);
    let (rhs_mean, rhs_se) = mean_and_se(rhs.0, rhs.1, replicas);
    Ok(DualityReport { lhs_mean, lhs_se, rhs_mean, rhs_se, replicas })
}

/// Estimate both sides of the energy/particle duality at time `t`. The left
/// side starts the energies from independent exponentials with means given
/// by the opinion profile and evaluates `prod Z_i(t)^{K_i} / K_i!`; the
/// right side is the same particle functional as in
/// [`duality_check_opinion`].
pub fn duality_check_continuous(
    graph: &Graph,
    opinions: &OpinionConfig,
    particles: &ParticleConfig,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<DualityReport, StateError> {
    let mut lhs = (0.0, 0.0);
    let mut rhs = (0.0, 0.0);
    for r in 0..replicas {
        let mut init_rng = substream(seed, &[3, r as u64]);
        let zeta: Vec<f64> = opinions
            .values
            .iter()
            .map(|&mean| exp_with_mean(&mut init_rng, mean))
            .collect();
        let lhs_seed = substream(seed, &[4, r as u64]).gen::<u64>();
        let mut stream = EventStream::new(graph, lhs_seed);
        let cfg = simulate_until(
            &Kmp,
            graph,
            EnergyConfig::new(graph, zeta).expect("exponential draws are valid energies"),
            &mut stream,
            t,
        )?;
        let x = product_poisson_kernel(&cfg.values, &particles.counts);
        lhs.0 += x;
        lhs.1 += x * x;

        let rhs_seed = substream(seed, &[5, r as u64]).gen::<u64>();
        let mut stream = EventStream::new(graph, rhs_seed);
        let cfg = simulate_until(&Absorbed, graph, particles.clone(), &mut stream, t)?;
        let x = product_pow(&opinions.values, &cfg.counts);
        rhs.0 += x;
        rhs.1 += x * x;
    }
    let (lhs_mean, lhs_se) = mean_and_se(lhs.0, lhs.1, replicas);
    let (rhs_mean, rhs_se) = mean_and_se(rhs.0, rhs.1, replicas);
    Ok(DualityReport { lhs_mean, lhs_se, rhs_mean, rhs_se, replicas })
}

/// Exact value both duality sides take at `t = 0`: `prod O_i^{K_i}`.
pub fn duality_at_time_zero(opinions: &OpinionConfig, particles: &ParticleConfig) -> f64 {
    product_pow(&opinions.values, &particles.counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventTarget;
    use crate::graph::path_graph;
    use crate::kmp::simulate_events;
    use crate::stats::chi_square_gof;

    fn edge_event(edge: usize, u: f64, b: f64) -> MarkedEvent {
        MarkedEvent {
            time: 1.0,
            target: EventTarget::Edge(edge),
            u,
            b: Some(b),
            v: 0.5,
            u_prime: 0.5,
            extra_seed: 11,
        }
    }

    #[test]
    fn interior_deal_examples() {
        let g = path_graph(3, 1.0, 2.0).unwrap();
        // Edge 1 = (1, 2) interior. (2, 3) with U = 0.5: pool 5, deal 3.
        let mut cfg = ParticleConfig::new(&g, vec![0, 2, 3, 0]).unwrap();
        step_discrete(&mut cfg, &edge_event(1, 0.5, 1.0), &g);
        assert_eq!(cfg.counts, vec![0, 3, 2, 0]);
        // U close to 1 never deals m + 1.
        let mut cfg = ParticleConfig::new(&g, vec![0, 2, 3, 0]).unwrap();
        step_discrete(&mut cfg, &edge_event(1, 1.0 - 1e-12, 1.0), &g);
        assert_eq!(cfg.counts, vec![0, 5, 0, 0]);
        // Empty pool is a no-op.
        let mut cfg = ParticleConfig::new(&g, vec![0, 0, 0, 7]).unwrap();
        step_discrete(&mut cfg, &edge_event(1, 0.9, 1.0), &g);
        assert_eq!(cfg.counts, vec![0, 0, 0, 7]);
    }

    #[test]
    fn interior_deal_is_uniform_on_pool() {
        let g = path_graph(3, 1.0, 2.0).unwrap();
        let mut rng = substream(200, &[]);
        let m = 5u64;
        let trials = 12_000;
        let mut observed = vec![0.0; (m + 1) as usize];
        for _ in 0..trials {
            let mut cfg = ParticleConfig::new(&g, vec![0, 2, 3, 0]).unwrap();
            step_discrete(&mut cfg, &edge_event(1, rng.gen(), 1.0), &g);
            observed[cfg.counts[1] as usize] += 1.0;
        }
        let expected = vec![trials as f64 / (m + 1) as f64; (m + 1) as usize];
        let report = chi_square_gof(&observed, &expected).unwrap();
        assert!(!report.reject_01, "chi2 = {}", report.statistic);
    }

    #[test]
    fn boundary_refresh_is_geometric() {
        // Edge 0 of path_graph(2) is (1, 0) with T_0 = 2: P(K_0 = 0) = 1/3.
        let g = path_graph(2, 2.0, 5.0).unwrap();
        let mut rng = substream(201, &[]);
        let trials = 10_000;
        let mut zeros = 0.0;
        let mut sum = 0.0;
        for _ in 0..trials {
            let mut cfg = ParticleConfig::new(&g, vec![1, 4, 0]).unwrap();
            let b = -(1.0 - rng.gen::<f64>()).ln();
            step_discrete(&mut cfg, &edge_event(0, rng.gen(), b), &g);
            // The interior side dealt from the pre-update pool of 5.
            assert!(cfg.counts[1] <= 5);
            if cfg.counts[0] == 0 {
                zeros += 1.0;
            }
            sum += cfg.counts[0] as f64;
        }
        let p = zeros / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 3.0 * se, "P(0) = {p}");
        let mean = sum / trials as f64;
        // Geometric with mean 2 has variance mean(mean + 1) = 6.
        let se_mean = (6.0f64 / trials as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se_mean, "mean = {mean}");
    }

    #[test]
    fn absorbed_boundary_deals_only_interior_count() {
        let g = path_graph(2, 2.0, 5.0).unwrap();
        // Edge 0 = (1, 0): K_1 = 4 deals h = min(floor(0.5 * 5), 4) = 2.
        let mut cfg = ParticleConfig::new(&g, vec![3, 4, 0]).unwrap();
        step_absorbed(&mut cfg, &edge_event(0, 0.5, 1.0), &g);
        assert_eq!(cfg.counts, vec![5, 2, 0]);
    }

    #[test]
    fn absorbed_conserves_total() {
        let g = path_graph(5, 1.0, 3.0).unwrap();
        let init = ParticleConfig::new(&g, vec![0, 3, 1, 4, 0, 2]).unwrap();
        let total = init.total();
        let mut stream = EventStream::new(&g, 202);
        let mut cfg = init;
        for _ in 0..5000 {
            let ev = stream.next_event();
            step_absorbed(&mut cfg, &ev, &g);
            assert_eq!(cfg.total(), total);
        }
    }

    #[test]
    fn single_particle_hits_boundaries_with_harmonic_odds() {
        // Gambler's ruin: one absorbed particle started at site k of the
        // 1-D lattice of size n reaches the right boundary with odds k / n.
        let n = 5;
        let k = 2;
        let g = path_graph(n, 1.0, 2.0).unwrap();
        let trials = 4000;
        let mut right = 0.0;
        for r in 0..trials {
            let mut counts = vec![0u64; g.n_vertices()];
            counts[k] = 1;
            let mut stream = EventStream::new(&g, 7000 + r);
            let cfg = simulate_events(
                &Absorbed,
                &g,
                ParticleConfig::new(&g, counts).unwrap(),
                &mut stream,
                4000,
            );
            assert_eq!(cfg.counts[0] + cfg.counts[n], 1, "particle not absorbed");
            right += cfg.counts[n] as f64;
        }
        let p = right / trials as f64;
        let target = k as f64 / n as f64;
        let se = (target * (1.0 - target) / trials as f64).sqrt();
        assert!((p - target).abs() < 3.0 * se, "P(right) = {p}");
    }

    #[test]
    fn duality_sides_coincide_at_time_zero() {
        let g = path_graph(3, 1.0, 2.0).unwrap();
        let o = OpinionConfig::new(&g, vec![1.0, 1.25, 1.75, 2.0]).unwrap();
        let k = ParticleConfig::new(&g, vec![0, 2, 1, 0]).unwrap();
        let exact = 1.25f64.powi(2) * 1.75;
        assert_eq!(duality_at_time_zero(&o, &k), exact);
        let report = duality_check_opinion(&g, &o, &k, 0.0, 50, 300).unwrap();
        assert_eq!(report.lhs_mean, exact);
        assert_eq!(report.rhs_mean, exact);
        assert_eq!(report.lhs_se, 0.0);
        assert_eq!(report.rhs_se, 0.0);
    }

    #[test]
    fn continuous_duality_at_time_zero_matches_exponential_moments() {
        // With no events, the right side is exactly prod O^K and the left is
        // a Monte Carlo average of Z^k / k! with Z ~ Exp(mean O): unbiased.
        let g = path_graph(2, 1.0, 2.0).unwrap();
        let o = OpinionConfig::new(&g, vec![1.0, 1.5, 2.0]).unwrap();
        let k = ParticleConfig::new(&g, vec![0, 2, 0]).unwrap();
        let report = duality_check_continuous(&g, &o, &k, 0.0, 60_000, 301).unwrap();
        assert_eq!(report.rhs_mean, 1.5f64.powi(2));
        assert!(report.compatible(3.5), "gap {} vs se {}", report.gap(), report.lhs_se);
    }

    #[test]
    fn opinion_duality_holds_at_positive_time() {
        let g = path_graph(3, 1.0, 2.0).unwrap();
        let o = OpinionConfig::new(&g, vec![1.0, 1.3, 1.6, 2.0]).unwrap();
        let k = ParticleConfig::new(&g, vec![0, 1, 2, 0]).unwrap();
        let report = duality_check_opinion(&g, &o, &k, 0.8, 6000, 302).unwrap();
        assert!(report.compatible(3.5), "gap {} vs ses {} {}", report.gap(), report.lhs_se, report.rhs_se);
    }
}
