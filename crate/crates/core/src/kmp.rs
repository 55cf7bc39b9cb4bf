//! The boundary-driven energy exchange process and its hidden-temperature
//! representation.
//!
//! On an interior edge ring the two endpoint energies are pooled and split by
//! the uniform mark: `z_i' = U (z_i + z_j)`, `z_j' = (1-U)(z_i + z_j)`. On a
//! boundary edge the interior endpoint keeps the same rule applied to the old
//! pair while the boundary coordinate is refreshed to `B T_j`. The classic
//! two-rule variant ([`KmpOriginal`]) instead splits *every* edge like an
//! interior one and refreshes boundary coordinates through stand-alone
//! rate-1 refresh events.
//!
//! The joint process ([`Joint`]) carries a pair `(X, T)`; edges redistribute
//! `X` by the same uniform split and average `T` with the *energy-fraction*
//! weight `V = X_i/(X_i+X_j)` evaluated before the update, while boundary
//! edges refresh `X_j` to the bare mark `B` and leave `T_j` pinned. The
//! pointwise product `X_i T_i` then evolves exactly as the energy process:
//! [`intertwined_energy_update`] evaluates the product update in the pooled
//! form `U (X_i T_i + X_j T_j)`, which agrees bit-for-bit with [`step_kmp`]
//! applied to [`zeta_of`] the same state.

use crate::events::{EventStream, EventTarget, MarkedEvent};
use crate::graph::{Graph, Vertex};
use crate::rng::{exp_with_mean, Rng};
use thiserror::Error;

/// Energy configuration: one nonnegative value per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyConfig {
    pub values: Vec<f64>,
}

/// Hidden-temperature configuration: per-vertex `(X, T)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("configuration has {got} entries, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative energy {value} at vertex {vertex}")]
    NegativeEnergy { vertex: Vertex, value: f64 },
    #[error("non-finite value {value} at vertex {vertex}")]
    NonFinite { vertex: Vertex, value: f64 },
    #[error("sample time {0} outside the simulated horizon")]
    SampleTimeOutOfRange(f64),
    #[error(transparent)]
    Event(#[from] crate::events::EventError),
}

fn check_values(graph: &Graph, values: &[f64], allow_negative: bool) -> Result<(), StateError> {
    if values.len() != graph.n_vertices() {
        return Err(StateError::LengthMismatch { expected: graph.n_vertices(), got: values.len() });
    }
    for (vertex, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(StateError::NonFinite { vertex, value });
        }
        if !allow_negative && value < 0.0 {
            return Err(StateError::NegativeEnergy { vertex, value });
        }
    }
    Ok(())
}

impl EnergyConfig {
    pub fn new(graph: &Graph, values: Vec<f64>) -> Result<Self, StateError> {
        check_values(graph, &values, false)?;
        Ok(EnergyConfig { values })
    }

    /// Constant configuration (handy initial condition).
    pub fn constant(graph: &Graph, value: f64) -> Self {
        EnergyConfig { values: vec![value; graph.n_vertices()] }
    }
}

impl JointConfig {
    pub fn new(graph: &Graph, x: Vec<f64>, t: Vec<f64>) -> Result<Self, StateError> {
        check_values(graph, &x, false)?;
        check_values(graph, &t, false)?;
        Ok(JointConfig { x, t })
    }
}

/// The uniform split applied to a pooled pair. Every caller that claims
/// bit-exact agreement with the energy process routes through this helper so
/// the floating-point evaluation order is identical everywhere.
#[inline]
pub(crate) fn uniform_split(zi: f64, zj: f64, u: f64) -> (f64, f64) {
    let s = zi + zj;
    (u * s, (1.0 - u) * s)
}

/// One ulp of `x`, used for conservation assertions.
pub(crate) fn ulp(x: f64) -> f64 {
    let a = x.abs();
    (a * f64::EPSILON).max(f64::MIN_POSITIVE)
}

/// Apply one event to the energy process.
pub fn step_kmp(cfg: &mut EnergyConfig, ev: &MarkedEvent, graph: &Graph) {
    let edge = graph.edge(ev.edge());
    let (zi, zj) = (cfg.values[edge.i], cfg.values[edge.j]);
    if edge.boundary {
        let (ni, _) = uniform_split(zi, zj, ev.u);
        cfg.values[edge.i] = ni;
        cfg.values[edge.j] = ev.b() * graph.boundary_temp(edge.j);
    } else {
        let (ni, nj) = uniform_split(zi, zj, ev.u);
        debug_assert!(
            ((ni + nj) - (zi + zj)).abs() <= 4.0 * ulp(zi + zj),
            "interior split lost energy: {} vs {}",
            ni + nj,
            zi + zj
        );
        cfg.values[edge.i] = ni;
        cfg.values[edge.j] = nj;
    }
}

/// Apply one event to the classic two-rule variant: every edge (boundary
/// included) splits like an interior edge; boundary coordinates refresh only
/// through stand-alone [`EventTarget::Refresh`] events.
pub fn step_kmp_original(cfg: &mut EnergyConfig, ev: &MarkedEvent, graph: &Graph) {
    match ev.target {
        EventTarget::Edge(eid) => {
            let edge = graph.edge(eid);
            let (ni, nj) = uniform_split(cfg.values[edge.i], cfg.values[edge.j], ev.u);
            cfg.values[edge.i] = ni;
            cfg.values[edge.j] = nj;
        }
        EventTarget::Refresh(v) => {
            cfg.values[v] = ev.b() * graph.boundary_temp(v);
        }
    }
}

/// Apply one event to the joint hidden-temperature process.
pub fn step_joint(cfg: &mut JointConfig, ev: &MarkedEvent, graph: &Graph) {
    let edge = graph.edge(ev.edge());
    let (xi, xj) = (cfg.x[edge.i], cfg.x[edge.j]);
    let sx = xi + xj;
    let v = if sx == 0.0 {
        log::warn!("degenerate X_i + X_j = 0 on edge {{{}, {}}}; using V = 1/2", edge.i, edge.j);
        0.5
    } else {
        xi / sx
    };
    let t_new = v * cfg.t[edge.i] + (1.0 - v) * cfg.t[edge.j];
    if edge.boundary {
        cfg.x[edge.i] = ev.u * sx;
        cfg.x[edge.j] = ev.b();
        cfg.t[edge.i] = t_new;
        // T_j stays pinned at the boundary temperature.
    } else {
        cfg.x[edge.i] = ev.u * sx;
        cfg.x[edge.j] = (1.0 - ev.u) * sx;
        cfg.t[edge.i] = t_new;
        cfg.t[edge.j] = t_new;
    }
}

/// The energy carried by a joint configuration: `z_i = X_i T_i`.
pub fn zeta_of(cfg: &JointConfig) -> EnergyConfig {
    EnergyConfig { values: cfg.x.iter().zip(&cfg.t).map(|(&x, &t)| x * t).collect() }
}

/// The energy pair after one event, evaluated from the joint state in the
/// pooled product form `U (X_i T_i + X_j T_j)`. Agrees bit-for-bit with
/// [`step_kmp`] applied to [`zeta_of`] the same state (the intertwining
/// relation between the two processes).
pub fn intertwined_energy_update(cfg: &JointConfig, ev: &MarkedEvent, graph: &Graph) -> (f64, f64) {
    let edge = graph.edge(ev.edge());
    let (ei, ej) = (cfg.x[edge.i] * cfg.t[edge.i], cfg.x[edge.j] * cfg.t[edge.j]);
    if edge.boundary {
        let (ni, _) = uniform_split(ei, ej, ev.u);
        (ni, ev.b() * graph.boundary_temp(edge.j))
    } else {
        uniform_split(ei, ej, ev.u)
    }
}

/// A process that can be driven by marked events.
pub trait Process {
    type Config: Clone;
    fn step(&self, cfg: &mut Self::Config, ev: &MarkedEvent, graph: &Graph);
}

/// Marker types implementing [`Process`].
pub struct Kmp;
pub struct KmpOriginal;
pub struct Joint;

impl Process for Kmp {
    type Config = EnergyConfig;
    fn step(&self, cfg: &mut EnergyConfig, ev: &MarkedEvent, graph: &Graph) {
        step_kmp(cfg, ev, graph);
    }
}

impl Process for KmpOriginal {
    type Config = EnergyConfig;
    fn step(&self, cfg: &mut EnergyConfig, ev: &MarkedEvent, graph: &Graph) {
        step_kmp_original(cfg, ev, graph);
    }
}

impl Process for Joint {
    type Config = JointConfig;
    fn step(&self, cfg: &mut JointConfig, ev: &MarkedEvent, graph: &Graph) {
        step_joint(cfg, ev, graph);
    }
}

/// Final state plus requested snapshots from a [`simulate`] run.
#[derive(Debug, Clone)]
pub struct SimOutput<C> {
    pub final_config: C,
    /// `(sample_time, configuration after the last event <= sample_time)`.
    pub samples: Vec<(f64, C)>,
}

/// Drive a process with events from `stream` up to the finite `horizon`,
/// recording the configuration at each `sample_time` with the cadlag
/// convention (state after the last event at or before the sample time).
/// Sample times must lie in `[cursor, horizon]`.
pub fn simulate<P: Process>(
    process: &P,
    graph: &Graph,
    init: P::Config,
    stream: &mut EventStream,
    horizon: f64,
    sample_times: &[f64],
) -> Result<SimOutput<P::Config>, StateError> {
    let mut times: Vec<f64> = sample_times.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).expect("sample times must be comparable"));
    for &t in &times {
        if !t.is_finite() || t < stream.cursor() || t > horizon {
            return Err(StateError::SampleTimeOutOfRange(t));
        }
    }
    let events = stream.events_until(horizon)?;
    let mut cfg = init;
    let mut samples = Vec::with_capacity(times.len());
    let mut next_sample = 0;
    for ev in &events {
        while next_sample < times.len() && times[next_sample] < ev.time {
            samples.push((times[next_sample], cfg.clone()));
            next_sample += 1;
        }
        process.step(&mut cfg, ev, graph);
    }
    while next_sample < times.len() {
        samples.push((times[next_sample], cfg.clone()));
        next_sample += 1;
    }
    Ok(SimOutput { final_config: cfg, samples })
}

/// Run to a finite time horizon and return only the final configuration.
pub fn simulate_until<P: Process>(
    process: &P,
    graph: &Graph,
    init: P::Config,
    stream: &mut EventStream,
    horizon: f64,
) -> Result<P::Config, StateError> {
    Ok(simulate(process, graph, init, stream, horizon, &[])?.final_config)
}

/// Drive a process for exactly `n_events` events (time-free variant).
pub fn simulate_events<P: Process>(
    process: &P,
    graph: &Graph,
    init: P::Config,
    stream: &mut EventStream,
    n_events: usize,
) -> P::Config {
    let mut cfg = init;
    for _ in 0..n_events {
        let ev = stream.next_event();
        process.step(&mut cfg, &ev, graph);
    }
    cfg
}

/// Draw one configuration from the mixture measure: sample a mean profile
/// `s` from `nu`, then draw independent exponentials with those means at
/// every vertex. With `nu` the stationary opinion law this is the stationary
/// energy measure.
pub fn sample_stationary_energy(
    graph: &Graph,
    nu: &mut dyn FnMut(&mut Rng) -> Vec<f64>,
    rng: &mut Rng,
) -> EnergyConfig {
    let means = nu(rng);
    assert_eq!(means.len(), graph.n_vertices(), "profile length mismatch");
    EnergyConfig { values: means.iter().map(|&m| exp_with_mean(rng, m)).collect() }
}
