//! The continuous/discrete coupling: energies carrying an explicit rate-1
//! Poisson point cloud whose per-site counts evolve exactly like the
//! discrete particles.
//!
//! Each vertex holds its energy `z_i` together with the points of a rate-1
//! Poisson process on `(0, z_i)`; the count `K_i` is then Poisson(`z_i`)
//! given the energy. An interior event pools the two intervals into
//! `(0, z_i + z_j)`, redraws the pooled points as fresh uniforms (the event's
//! extras), and cuts at `U (z_i + z_j)`: left points stay with `i`, right
//! points shift down to `j`'s new interval. A boundary event cuts the pooled
//! cloud the same way for the interior side, discards the right part, and
//! lays a fresh count-first Poisson cloud on the refreshed boundary interval
//! `(0, B T_j)`.
//!
//! The energy marginal routes through the same pooled-split expression as
//! the plain energy process, so the two agree bit for bit on shared event
//! streams. Averaged over the `U` mark, the left count is
//! Binomial(`m`, `U`), hence uniform on `{0, ..., m}` — the discrete deal —
//! and the boundary count mixes Poisson(`B T_j`) over `B ~ Exp(1)` into the
//! geometric refresh. [`step_coupled_counts`] keeps only `(z, K)` and draws
//! those distributions directly; it matches [`step_coupled`] in law but not
//! draw for draw.

use crate::events::MarkedEvent;
use crate::graph::{Graph, Vertex};
use crate::kmp::{uniform_split, ulp, EnergyConfig, Process, StateError};
use crate::kmp_discrete::ParticleConfig;
use crate::rng::{poisson_count, Rng};
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

/// Energies plus the materialized point cloud, one sorted list per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PointedEnergyConfig {
    pub zeta: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CouplingError {
    #[error("point list count {got} does not match vertex count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point {position} at vertex {vertex} escapes the interval (0, {zeta}]")]
    PointOutOfRange { vertex: Vertex, position: f64, zeta: f64 },
    #[error("points at vertex {vertex} are not sorted")]
    Unsorted { vertex: Vertex },
    #[error(transparent)]
    Energy(#[from] StateError),
}

impl PointedEnergyConfig {
    pub fn new(graph: &Graph, zeta: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self, CouplingError> {
        EnergyConfig::new(graph, zeta.clone())?;
        if points.len() != zeta.len() {
            return Err(CouplingError::LengthMismatch { expected: zeta.len(), got: points.len() });
        }
        let cfg = PointedEnergyConfig { zeta, points };
        cfg.check_containment()?;
        Ok(cfg)
    }

    /// Every point inside its interval (up to a few ulp of slack at the top
    /// end, where the shifted split can round) and every list sorted.
    pub fn check_containment(&self) -> Result<(), CouplingError> {
        for (vertex, (list, &z)) in self.points.iter().zip(&self.zeta).enumerate() {
            for window in list.windows(2) {
                if window[0] > window[1] {
                    return Err(CouplingError::Unsorted { vertex });
                }
            }
            for &position in list {
                if !(0.0..=z + 4.0 * ulp(z)).contains(&position) {
                    return Err(CouplingError::PointOutOfRange { vertex, position, zeta: z });
                }
            }
        }
        Ok(())
    }

    /// Per-site point counts.
    pub fn counts(&self) -> ParticleConfig {
        ParticleConfig { counts: self.points.iter().map(|l| l.len() as u64).collect() }
    }

    /// The energy marginal.
    pub fn energy(&self) -> EnergyConfig {
        EnergyConfig { values: self.zeta.clone() }
    }

    pub fn total_points(&self) -> usize {
        self.points.iter().map(|l| l.len()).sum()
    }
}

/// Lay a rate-1 Poisson cloud on `(0, z_i)` at every vertex (sequential
/// exponential gaps, so the lists come out sorted).
pub fn poissonize(cfg: &EnergyConfig, rng: &mut Rng) -> PointedEnergyConfig {
    let points = cfg
        .values
        .iter()
        .map(|&z| {
            let mut list = Vec::new();
            let mut pos = -(1.0 - rng.gen::<f64>()).ln();
            while pos <= z {
                list.push(pos);
                pos += -(1.0 - rng.gen::<f64>()).ln();
            }
            list
        })
        .collect();
    PointedEnergyConfig { zeta: cfg.values.clone(), points }
}

fn sorted(mut list: Vec<f64>) -> Vec<f64> {
    list.sort_by(|a, b| a.partial_cmp(b).expect("point positions are finite"));
    list
}

/// Fresh count-first Poisson cloud on `(0, length)`: draw the count, then
/// that many uniform positions.
fn fresh_cloud(rng: &mut Rng, length: f64) -> Vec<f64> {
    let count = poisson_count(rng, length);
    sorted((0..count).map(|_| rng.gen::<f64>() * length).collect())
}

/// Apply one event to the materialized coupling. Consumes the event's
/// extras in a fixed order: one fresh uniform per pooled point, then (on
/// boundary edges) the count-first refresh cloud.
pub fn step_coupled(cfg: &mut PointedEnergyConfig, ev: &MarkedEvent, graph: &Graph) {
    let edge = graph.edge(ev.edge());
    let (i, j) = (edge.i, edge.j);
    let s = cfg.zeta[i] + cfg.zeta[j];
    let m = cfg.points[i].len() + cfg.points[j].len();
    let mut extras = ev.extras_rng();
    let (ni, nj) = uniform_split(cfg.zeta[i], cfg.zeta[j], ev.u);
    let cut = ev.u * s;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for _ in 0..m {
        let gamma: f64 = extras.gen();
        if gamma <= ev.u {
            left.push(gamma * s);
        } else {
            right.push(gamma * s - cut);
        }
    }
    cfg.zeta[i] = ni;
    cfg.points[i] = sorted(left);
    if edge.boundary {
        let refreshed = ev.b() * graph.boundary_temp(j);
        cfg.zeta[j] = refreshed;
        cfg.points[j] = fresh_cloud(&mut extras, refreshed);
    } else {
        cfg.zeta[j] = nj;
        cfg.points[j] = sorted(right);
    }
    debug_assert!(cfg.check_containment().is_ok());
}

/// Marker type implementing [`Process`].
pub struct Coupled;

impl Process for Coupled {
    type Config = PointedEnergyConfig;
    fn step(&self, cfg: &mut PointedEnergyConfig, ev: &MarkedEvent, graph: &Graph) {
        step_coupled(cfg, ev, graph);
    }
}

/// Counts-only fast mode: evolve `(z, K)` without point positions. The
/// energy update is identical to [`step_coupled`]; the count update draws
/// the implied distributions (Binomial left share, Poisson boundary
/// refresh) straight from the extras.
pub fn step_coupled_counts(
    zeta: &mut EnergyConfig,
    counts: &mut ParticleConfig,
    ev: &MarkedEvent,
    graph: &Graph,
) {
    let edge = graph.edge(ev.edge());
    let (i, j) = (edge.i, edge.j);
    let m = counts.counts[i] + counts.counts[j];
    let mut extras = ev.extras_rng();
    let (ni, nj) = uniform_split(zeta.values[i], zeta.values[j], ev.u);
    let left = Binomial::new(m, ev.u).expect("U mark lies in [0, 1]").sample(&mut extras);
    zeta.values[i] = ni;
    counts.counts[i] = left;
    if edge.boundary {
        let refreshed = ev.b() * graph.boundary_temp(j);
        zeta.values[j] = refreshed;
        counts.counts[j] = poisson_count(&mut extras, refreshed);
    } else {
        zeta.values[j] = nj;
        counts.counts[j] = m - left;
    }
}

/// Draw a stationary coupled configuration: a stationary energy profile from
/// the mixture measure, then its Poisson cloud.
pub fn sample_coupled_stationary(
    graph: &Graph,
    nu: &mut dyn FnMut(&mut Rng) -> Vec<f64>,
    rng: &mut Rng,
) -> PointedEnergyConfig {
    let energy = crate::kmp::sample_stationary_energy(graph, nu, rng);
    poissonize(&energy, rng)
}
