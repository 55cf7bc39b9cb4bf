//! Statistical verdicts and streaming estimators for the simulation lab:
//! Kolmogorov–Smirnov and chi-square tests with fixed asymptotic critical
//! values, a mergeable moment accumulator for replica fan-out, and the
//! weighted-profile experiment that probes the hydrostatic limit.
//!
//! Every test reports its statistic together with explicit reject flags at
//! the 5% and 1% levels, so callers assert on a deterministic verdict
//! rather than re-deriving thresholds.

use crate::exact::{self, ExactError};
use crate::graph::{path_graph, GraphError};
use crate::opinion::{sample_stationary_opinion, OpinionConfig, OpinionError};
use crate::rng::substream;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Asymptotic one-sample Kolmogorov quantile at level 0.05.
const KS_COEFF_05: f64 = 1.35810;
/// Asymptotic one-sample Kolmogorov quantile at level 0.01.
const KS_COEFF_01: f64 = 1.62762;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("samples must be finite")]
    NonFiniteSample,
    #[error("histogram shapes differ: {observed} observed vs {expected} expected bins")]
    HistogramMismatch { observed: usize, expected: usize },
    #[error("only {0} usable bins after pooling; need at least 2")]
    TooFewBins(usize),
    #[error("expected counts must be finite, nonnegative, and not all zero")]
    BadExpected,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Opinion(#[from] OpinionError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Outcome of a Kolmogorov–Smirnov test: the statistic, the critical
/// values actually used, and the reject verdicts they imply.
#[derive(Debug, Clone, Copy)]
pub struct KsReport {
    /// Supremum distance between the compared distribution functions.
    pub d: f64,
    /// Pooled number of samples that entered the test.
    pub n: usize,
    pub crit_05: f64,
    pub crit_01: f64,
    pub reject_05: bool,
    pub reject_01: bool,
}

fn ks_report(d: f64, n: usize, crit_scale: f64) -> KsReport {
    let crit_05 = KS_COEFF_05 * crit_scale;
    let crit_01 = KS_COEFF_01 * crit_scale;
    KsReport { d, n, crit_05, crit_01, reject_05: d > crit_05, reject_01: d > crit_01 }
}

fn check_samples(samples: &[f64], need: usize) -> Result<(), StatsError> {
    if samples.len() < need {
        return Err(StatsError::TooFewSamples { got: samples.len(), need });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFiniteSample);
    }
    Ok(())
}

/// One-sample Kolmogorov–Smirnov test against a reference CDF, using the
/// asymptotic critical values `1.35810 / sqrt(n)` and `1.62762 / sqrt(n)`.
/// Sorts the samples in place.
pub fn ks_statistic(
    samples: &mut [f64],
    cdf: impl Fn(f64) -> f64,
) -> Result<KsReport, StatsError> {
    check_samples(samples, 30)?;
    samples.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = samples.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        // The empirical CDF jumps from i/n to (i+1)/n at x; the supremum
        // gap is attained against one side of the jump.
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(ks_report(d, n, 1.0 / nf.sqrt()))
}

/// Two-sample Kolmogorov–Smirnov test with critical values scaled by
/// `sqrt((n + m)/(n m))`. Sorts both samples in place; ties across the two
/// samples are handled by comparing the empirical CDFs only between
/// distinct values.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> Result<KsReport, StatsError> {
    check_samples(a, 30)?;
    check_samples(b, 30)?;
    a.sort_unstable_by(|x, y| x.total_cmp(y));
    b.sort_unstable_by(|x, y| x.total_cmp(y));
    let (nf, mf) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / nf - j as f64 / mf).abs());
    }
    Ok(ks_report(d, a.len() + b.len(), ((nf + mf) / (nf * mf)).sqrt()))
}

/// Outcome of a chi-square test after bin pooling.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareReport {
    pub statistic: f64,
    /// Degrees of freedom after pooling low-expectation bins.
    pub df: usize,
    pub threshold_05: f64,
    pub threshold_01: f64,
    pub reject_05: bool,
    pub reject_01: bool,
}

fn chi_square_report(statistic: f64, df: usize) -> ChiSquareReport {
    let dist = ChiSquared::new(df as f64).expect("df is at least 1");
    let threshold_05 = dist.inverse_cdf(0.95);
    let threshold_01 = dist.inverse_cdf(0.99);
    ChiSquareReport {
        statistic,
        df,
        threshold_05,
        threshold_01,
        reject_05: statistic > threshold_05,
        reject_01: statistic > threshold_01,
    }
}

/// Chi-square goodness of fit of observed counts against expected counts.
/// Consecutive bins are pooled until each pooled bin has expected count at
/// least 5 (a trailing remainder is merged into the last pooled bin);
/// degrees of freedom are `bins - 1` after pooling.
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> Result<ChiSquareReport, StatsError> {
    if observed.len() != expected.len() {
        return Err(StatsError::HistogramMismatch {
            observed: observed.len(),
            expected: expected.len(),
        });
    }
    if expected.iter().any(|e| !e.is_finite() || *e < 0.0) || expected.iter().sum::<f64>() <= 0.0 {
        return Err(StatsError::BadExpected);
    }
    if observed.iter().any(|o| !o.is_finite() || *o < 0.0) {
        return Err(StatsError::NonFiniteSample);
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0f64, 0.0f64);
    for (&o, &e) in observed.iter().zip(expected) {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => return Err(StatsError::TooFewBins(0)),
        }
    }
    if pooled.len() < 2 {
        return Err(StatsError::TooFewBins(pooled.len()));
    }
    let statistic = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    Ok(chi_square_report(statistic, pooled.len() - 1))
}

/// Two-sample chi-square test on a `2 x K` contingency table of counts
/// over shared bins. Bins are pooled from the left until both expected
/// cells reach 5; degrees of freedom are `K - 1` after pooling.
pub fn chi_square_two_sample(a: &[f64], b: &[f64]) -> Result<ChiSquareReport, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::HistogramMismatch { observed: a.len(), expected: b.len() });
    }
    if a.iter().chain(b).any(|c| !c.is_finite() || *c < 0.0) {
        return Err(StatsError::NonFiniteSample);
    }
    let row_a: f64 = a.iter().sum();
    let row_b: f64 = b.iter().sum();
    let grand = row_a + row_b;
    if row_a <= 0.0 || row_b <= 0.0 {
        return Err(StatsError::BadExpected);
    }
    // Pool columns until the smaller row's expected cell reaches 5; the
    // larger row's cell is then automatically at least as large.
    let min_row = row_a.min(row_b);
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0f64, 0.0f64);
    for (&ca, &cb) in a.iter().zip(b) {
        acc.0 += ca;
        acc.1 += cb;
        if (acc.0 + acc.1) * min_row / grand >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => return Err(StatsError::TooFewBins(0)),
        }
    }
    if pooled.len() < 2 {
        return Err(StatsError::TooFewBins(pooled.len()));
    }
    let mut statistic = 0.0;
    for (ca, cb) in &pooled {
        let col = ca + cb;
        let ea = col * row_a / grand;
        let eb = col * row_b / grand;
        statistic += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
    }
    Ok(chi_square_report(statistic, pooled.len() - 1))
}

/// Streaming mean / variance / covariance accumulator over fixed-length
/// vectors, mergeable across replica workers. Second-order sums use the
/// numerically stable running update; merging two accumulators agrees with
/// accumulating the concatenation up to roundoff.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    dim: usize,
    count: u64,
    mean: Vec<f64>,
    // Centered co-moment sums over the triangle k <= l; the diagonal
    // carries the per-coordinate sums of squared deviations.
    cross: Vec<f64>,
}

fn acc_tri(k: usize, l: usize) -> usize {
    let (k, l) = (k.min(l), k.max(l));
    l * (l + 1) / 2 + k
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        MomentAccumulator {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            cross: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Fold one observation vector into the running moments.
    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "observation length must match the accumulator");
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * inv;
        }
        // With the post-update mean, each pair contributes
        // delta_k * delta_l * (count - 1)/count — symmetric, so the
        // triangle suffices.
        let scale = (self.count - 1) as f64 * inv;
        for l in 0..self.dim {
            for k in 0..=l {
                self.cross[acc_tri(k, l)] += delta[k] * delta[l] * scale;
            }
        }
    }

    /// Merge another accumulator into this one; equivalent to having
    /// pushed its observations here.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        assert_eq!(self.dim, other.dim, "accumulator dimensions must match");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let total = n1 + n2;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for l in 0..self.dim {
            for k in 0..=l {
                let idx = acc_tri(k, l);
                self.cross[idx] += other.cross[idx] + delta[k] * delta[l] * n1 * n2 / total;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * n2 / total;
        }
        self.count += other.count;
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.mean[k]
    }

    /// Unbiased sample variance of coordinate `k`; 0 before two samples.
    pub fn variance(&self, k: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.cross[acc_tri(k, k)] / (self.count - 1) as f64
    }

    /// Unbiased sample covariance between coordinates `k` and `l`.
    pub fn covariance(&self, k: usize, l: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.cross[acc_tri(k, l)] / (self.count - 1) as f64
    }

    /// Standard error of the running mean of coordinate `k`.
    pub fn standard_error(&self, k: usize) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.variance(k) / self.count as f64).sqrt()
    }
}

/// Sample covariance of paired observations together with its
/// delta-method standard error (the spread of the centered products over
/// `sqrt(n)`), for confidence-interval checks on covariance estimates.
pub fn covariance_with_se(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::HistogramMismatch { observed: xs.len(), expected: ys.len() });
    }
    check_samples(xs, 30)?;
    check_samples(ys, 30)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let products: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let cov = products.iter().sum::<f64>() / (n - 1.0);
    let pm = products.iter().sum::<f64>() / n;
    let pvar = products.iter().map(|p| (p - pm) * (p - pm)).sum::<f64>() / (n - 1.0);
    Ok((cov, (pvar / n).sqrt()))
}

/// Weighted empirical profile `(1/N) sum_k psi_k O_k` over the lattice
/// sites `0..=N`; `psi` is tabulated at the sites.
pub fn pair_empirical(config: &OpinionConfig, psi: &[f64]) -> f64 {
    assert_eq!(
        psi.len(),
        config.values.len(),
        "need one test-vector entry per lattice site"
    );
    let n = (config.values.len() - 1) as f64;
    psi.iter().zip(&config.values).map(|(p, o)| p * o).sum::<f64>() / n
}

/// One row of the hydrostatic experiment: statistics of the weighted
/// empirical profile at lattice size `n`, with the analytic variance
/// bound alongside.
#[derive(Debug, Clone, Copy)]
pub struct HydrostaticRow {
    pub n: usize,
    pub replicas: usize,
    pub mean: f64,
    pub variance: f64,
    pub bound: f64,
}

/// For each lattice size, draw exact stationary profiles, evaluate the
/// weighted empirical profile with `psi` tabulated at `k/N`, and report
/// its empirical mean and variance next to the closed-form variance
/// bound. Replicas run in parallel on independent derived streams, so the
/// output is deterministic in `seed`.
pub fn hydrostatic_experiment(
    ns: &[usize],
    replicas: usize,
    psi: impl Fn(f64) -> f64 + Sync,
    t_minus: f64,
    t_plus: f64,
    seed: u64,
) -> Result<Vec<HydrostaticRow>, StatsError> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let graph = path_graph(n, t_minus, t_plus)?;
        let table: Vec<f64> = (0..=n).map(|k| psi(k as f64 / n as f64)).collect();
        let values = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, &[0x6879_6472, n as u64, r as u64]);
                let profile = sample_stationary_opinion(&graph, &mut rng)?;
                let config = OpinionConfig { values: profile };
                Ok(pair_empirical(&config, &table))
            })
            .collect::<Result<Vec<f64>, OpinionError>>()?;
        let mut acc = MomentAccumulator::new(1);
        for v in &values {
            acc.push(std::slice::from_ref(v));
        }
        rows.push(HydrostaticRow {
            n,
            replicas,
            mean: acc.mean(0),
            variance: acc.variance(0),
            bound: exact::hydrostatic_bound(n, t_minus, t_plus, &table)?,
        });
    }
    Ok(rows)
}

/// Correlation scan between bounded transforms of two coordinate blocks,
/// used to probe independence of paired vector samples.
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    /// Vertex pairs `(i, j)` whose transformed coordinates were compared.
    pub pairs: Vec<(usize, usize)>,
    /// Pearson correlation of `exp(-x_i)` against `exp(-t_j)` per pair.
    pub correlations: Vec<f64>,
    /// Half-width `3/sqrt(n)` of the null acceptance band.
    pub band: f64,
    pub replicas: usize,
    /// True when every correlation lies inside the band.
    pub consistent: bool,
}

/// Estimate, for every pair of listed vertices, the correlation between
/// the bounded transforms `exp(-x_i)` and `exp(-t_j)` of the paired
/// samples `(x, t)`. Under independence each correlation is within
/// `3/sqrt(n)` of zero up to a 0.3% per-pair false alarm; `consistent`
/// requires all pairs inside the band. A coordinate with zero spread
/// contributes correlation 0 (a constant is independent of everything).
pub fn independence_report(
    samples: &[(Vec<f64>, Vec<f64>)],
    vertices: &[usize],
) -> Result<IndependenceReport, StatsError> {
    if samples.len() < 100 {
        return Err(StatsError::TooFewSamples { got: samples.len(), need: 100 });
    }
    let n = samples.len() as f64;
    let transform = |v: f64| (-v).exp();
    let mut pairs = Vec::new();
    let mut correlations = Vec::new();
    for &i in vertices {
        for &j in vertices {
            let mut acc = MomentAccumulator::new(2);
            for (x, t) in samples {
                if !x[i].is_finite() || !t[j].is_finite() {
                    return Err(StatsError::NonFiniteSample);
                }
                acc.push(&[transform(x[i]), transform(t[j])]);
            }
            let denom = (acc.variance(0) * acc.variance(1)).sqrt();
            let corr = if denom > 0.0 { acc.covariance(0, 1) / denom } else { 0.0 };
            pairs.push((i, j));
            correlations.push(corr);
        }
    }
    let band = 3.0 / n.sqrt();
    let consistent = correlations.iter().all(|c| c.abs() <= band);
    Ok(IndependenceReport { pairs, correlations, band, replicas: samples.len(), consistent })
}
