//! Exact sampling of the stationary opinion profile by coupling from the
//! past, checked against the arc-sine law.
//!
//! On the two-edge path the single interior opinion is arc-sine
//! distributed between the boundary values. The sampler returns perfect
//! draws (no burn-in bias), so a plain Kolmogorov-Smirnov test against
//! the closed-form CDF should accept at any fixed seed that is not
//! astronomically unlucky.
//!
//! Run with: cargo run --example arcsine_sampler

use kmp_lab::opinion::{arcsine_cdf, sample_stationary_opinion};
use kmp_lab::path_graph;
use kmp_lab::rng::substream;
use kmp_lab::stats::ks_statistic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = path_graph(2, 0.0, 1.0)?;
    let n_samples = 10_000;
    let mut rng = substream(7, &[1]);

    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let profile = sample_stationary_opinion(&graph, &mut rng)?;
        values.push(profile[1]);
    }

    let mean = values.iter().sum::<f64>() / n_samples as f64;
    let second = values.iter().map(|v| v * v).sum::<f64>() / n_samples as f64;
    println!("samples            {n_samples}");
    println!("empirical mean     {mean:.6}   (arc-sine: 0.5)");
    println!("empirical E[O^2]   {second:.6}   (arc-sine: 0.375)");

    let report = ks_statistic(&mut values, |y| {
        arcsine_cdf(y, 0.0, 1.0).expect("nondegenerate interval")
    })?;
    println!(
        "KS distance        {:.6}   (1% critical value {:.6})",
        report.d, report.crit_01
    );
    println!("verdict            {}", if report.reject_01 { "REJECT" } else { "accept" });

    // A histogram sketch: the arc-sine density piles up at the edges.
    let bins = 10;
    let mut counts = vec![0usize; bins];
    for v in &values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    println!("\nhistogram of the interior opinion:");
    for (b, c) in counts.iter().enumerate() {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        println!("  [{lo:.1}, {hi:.1})  {}", "#".repeat(c / 25));
    }
    Ok(())
}
