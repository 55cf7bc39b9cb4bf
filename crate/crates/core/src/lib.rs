//! Simulation laboratory for boundary-driven energy-exchange models on finite
//! graphs, together with exact numerical oracles for their stationary states.
//!
//! The lab centres on the KMP-type energy redistribution process: clocks ring
//! on edges, the two endpoint energies are resampled by a uniform split, and
//! boundary edges inject fresh exponential energy at fixed temperatures. Around
//! it sit the coupled processes that explain its stationary structure:
//!
//! * [`kmp`] — the energy process, its classic two-rule variant, and the joint
//!   hidden-temperature representation whose product `X·T` reproduces the
//!   energy process exactly.
//! * [`opinion`] — the averaging (temperature) process with stubborn boundary,
//!   its arc-sine single-site law, dual absorbed walks, and a perfect sampler
//!   of the stationary opinion measure by coupling from the past.
//! * [`kmp_discrete`] — the particle-count analogue (uniform resampling of a
//!   conserved sum; geometric boundary refresh) and moment dualities linking
//!   it to the continuous processes.
//! * [`disagreement`] — the spiking-edge indicator process `1{O_i != O_j}`,
//!   with a one-pass perfect simulator driven by a random edge permutation.
//! * [`coupling`] — continuous energies carrying Poisson point marks whose
//!   counts evolve as the discrete process (thinning coupling).
//! * [`exact`] — closed forms and direct sparse solves for stationary first
//!   and second moments on the 1-D lattice, including the analytic comparison
//!   solution with lifted corner values and the covariance domination bound.
//! * [`events`] — the shared marked Poisson event streams (Harris-style
//!   graphical construction) that drive every process, with per-replica
//!   substreams for reproducible parallel fan-out.
//! * [`stats`] — mergeable moment accumulators, KS / chi-square verdicts, and
//!   the packaged experiments (hydrostatics, independence reports).
//! * [`config`] / [`experiments`] / [`report`] — the flat-file experiment
//!   configuration, the runnable experiment layer used by the `kmplab` binary,
//!   and deterministic CSV/JSON writers.

pub mod config;
pub mod coupling;
pub mod disagreement;
pub mod events;
pub mod exact;
pub mod experiments;
pub mod graph;
pub mod kmp;
pub mod kmp_discrete;
pub mod opinion;
pub mod report;
pub mod rng;
pub mod stats;

pub use graph::{build_graph, path_graph, Graph};
