//! Perfect simulation of the disagreement (spiking-edge) process.
//!
//! The stationary state at any fixed time can be read off a single
//! uniformly random permutation of the edges: an edge is non-spiking
//! exactly when it is interior and its rank is smaller than every
//! neighboring edge's rank. This example reproduces one hand-checkable
//! permutation, then estimates each edge's non-spiking probability from
//! random permutations and compares with the closed form `1/(n+1)`
//! (`n` = number of neighboring edges).
//!
//! Run with: cargo run --example perfect_disagreement

use kmp_lab::disagreement::{edge_marginal_stationary, perfect_sim_eta};
use kmp_lab::path_graph;
use kmp_lab::rng::substream;
use rand::seq::SliceRandom;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = path_graph(8, 1.0, 2.0)?;

    // A fixed permutation of the 8 edges, ranks listed edge by edge. Edge
    // 4 has the smallest rank among {edge 3, edge 4, edge 5} and edge 2
    // among {edge 1, edge 2, edge 3}, so exactly those two are quiet.
    let ranks = [3, 6, 5, 8, 1, 2, 4, 7];
    let eta = perfect_sim_eta(&graph, &ranks)?;
    println!("ranks {ranks:?}");
    println!("eta   {:?}", eta.to_vec());

    // Monte Carlo estimate of the non-spiking marginals.
    let replicas = 100_000;
    let mut rng = substream(11, &[2]);
    let mut zeros = vec![0u64; graph.n_edges()];
    let mut perm: Vec<usize> = (1..=graph.n_edges()).collect();
    for _ in 0..replicas {
        perm.shuffle(&mut rng);
        let eta = perfect_sim_eta(&graph, &perm)?;
        for e in 0..graph.n_edges() {
            if !eta.get(e) {
                zeros[e] += 1;
            }
        }
    }

    println!("\nedge  P(eta=0) empirical   exact      z");
    for e in 0..graph.n_edges() {
        let exact = edge_marginal_stationary(&graph, e);
        let hat = zeros[e] as f64 / replicas as f64;
        let sd = (exact * (1.0 - exact) / replicas as f64).sqrt();
        let z = if sd > 0.0 { (hat - exact) / sd } else { 0.0 };
        println!("{e:>4}  {hat:<20.6} {exact:<10.6} {z:+.2}");
    }
    Ok(())
}
