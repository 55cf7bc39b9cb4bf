//! A first tour: one marked event stream driving three processes.
//!
//! Every process in this crate is a deterministic fold over the same
//! stream of marked edge events (ring times, a uniform split mark, and a
//! boundary refresh mark). This example runs the energy redistribution
//! dynamics, the joint exponent/temperature pair, and the averaging
//! process side by side from one seed and prints their sampled
//! trajectories, illustrating the shared graphical construction and the
//! factorization `zeta = X * T`.
//!
//! Run with: cargo run --example trajectories

use kmp_lab::events::EventStream;
use kmp_lab::experiments::default_profile;
use kmp_lab::kmp::{simulate, EnergyConfig, Joint, JointConfig, Kmp};
use kmp_lab::opinion::{Opinion, OpinionConfig};
use kmp_lab::path_graph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = path_graph(3, 1.0, 2.0)?;
    let horizon = 4.0;
    let times: Vec<f64> = (0..=4).map(|i| i as f64).collect();

    // Energy trajectory.
    let mut stream = EventStream::new(&graph, 5);
    let out = simulate(
        &Kmp,
        &graph,
        EnergyConfig::constant(&graph, 1.0),
        &mut stream,
        horizon,
        &times,
    )?;
    println!("energy process (all sites start at 1):");
    for (t, cfg) in &out.samples {
        let rounded: Vec<f64> =
            cfg.values.iter().map(|v| (v * 1000.0).round() / 1000.0).collect();
        println!("  t = {t}:  {rounded:?}");
    }

    // The joint pair from the same seed: zeta = x * t at every vertex and
    // every time, by construction.
    let mut stream = EventStream::new(&graph, 5);
    let profile = default_profile(&graph);
    let init = JointConfig::new(&graph, vec![1.0; graph.n_vertices()], profile.clone())?;
    let out = simulate(&Joint, &graph, init, &mut stream, horizon, &times)?;
    println!("\njoint pair (x, t) driven by the same events:");
    for (t, cfg) in &out.samples {
        let prod: Vec<f64> = cfg
            .x
            .iter()
            .zip(&cfg.t)
            .map(|(x, tt)| (x * tt * 1000.0).round() / 1000.0)
            .collect();
        println!("  t = {t}:  x*t = {prod:?}");
    }

    // The averaging process contracts toward the linear profile's span.
    let mut stream = EventStream::new(&graph, 5);
    let out = simulate(
        &Opinion,
        &graph,
        OpinionConfig::new(&graph, profile)?,
        &mut stream,
        horizon,
        &times,
    )?;
    println!("\naveraging process (starts on the linear profile):");
    for (t, cfg) in &out.samples {
        let rounded: Vec<f64> =
            cfg.values.iter().map(|v| (v * 1000.0).round() / 1000.0).collect();
        println!("  t = {t}:  {rounded:?}");
    }
    Ok(())
}
