//! Exact stationary moments on the 1-D lattice: the linear mean profile,
//! the closed triangle system for opinion second moments, and the closed
//! forms for the boundary-noise variant.
//!
//! Sites are `0, ..., N` with pinned values `T_-` at `0` and `T_+` at `N`.
//! The stationary mean is the discrete harmonic interpolation
//! `m_k = T_- + k (T_+ - T_-)/N`. Averaging with an independent uniform
//! weight closes on second moments, so `M_{k,l} = E[O_k O_l]` solves an
//! explicit linear system on the triangle `0 <= k <= l <= N`:
//!
//! * `M_{0,l} = T_- m_l` and `M_{k,N} = m_k T_+` (pinned rows),
//! * `M_{k,l} = (M_{k-1,l} + M_{k+1,l} + M_{k,l-1} + M_{k,l+1})/4` away
//!   from the diagonal (`l >= k + 2`),
//! * `M_{k,k+1} = (3/10)(M_{k-1,k+1} + M_{k,k+2}) + (1/5)(M_{k,k} + M_{k+1,k+1})`
//!   next to it, and
//! * `M_{k,k} = (M_{k-1,k-1} + M_{k-1,k} + M_{k,k+1} + M_{k+1,k+1})/4`
//!   on it.
//!
//! The system is solved by a banded LU factorization with partial pivoting
//! (row-major triangle ordering gives bandwidth `N + 1`), and
//! [`MomentTable::max_residual`] replays every equation against the solution
//! as an independent audit.
//!
//! The boundary-noise variant has polynomial moments: its covariance is
//! `(d^2/(N+1)) (k/N)(1 - l/N)` for `k < l` plus a diagonal surcharge
//! `d^2/(2N(N+1))`, with `d = T_+ - T_-`. These closed forms dominate the
//! true second moments entrywise and drive the hydrostatic variance bound.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("lattice size {0} is too small; need at least 2 sites between the pins")]
    LatticeTooSmall(usize),
    #[error("invalid pinned value {0}; temperatures must be finite and nonnegative")]
    InvalidTemperature(f64),
    #[error("moment system is singular at column {column}")]
    SingularSystem { column: usize },
}

fn check_lattice(n: usize, t_minus: f64, t_plus: f64) -> Result<(), ExactError> {
    if n < 2 {
        return Err(ExactError::LatticeTooSmall(n));
    }
    for t in [t_minus, t_plus] {
        if !t.is_finite() || t < 0.0 {
            return Err(ExactError::InvalidTemperature(t));
        }
    }
    Ok(())
}

/// Exact stationary mean profile: linear interpolation between the pins.
pub fn mean_profile(n: usize, t_minus: f64, t_plus: f64) -> Result<Vec<f64>, ExactError> {
    check_lattice(n, t_minus, t_plus)?;
    Ok((0..=n)
        .map(|k| t_minus + k as f64 * (t_plus - t_minus) / n as f64)
        .collect())
}

/// The same profile obtained numerically from the harmonic equations
/// `m_k = (m_{k-1} + m_{k+1})/2` by the tridiagonal (Thomas) algorithm —
/// an independent cross-check of [`mean_profile`].
pub fn mean_profile_solved(n: usize, t_minus: f64, t_plus: f64) -> Result<Vec<f64>, ExactError> {
    check_lattice(n, t_minus, t_plus)?;
    // Unknowns m_1..m_{N-1}: -m_{k-1}/2 + m_k - m_{k+1}/2 = boundary terms.
    let inner = n - 1;
    let mut diag = vec![1.0; inner];
    let off = -0.5;
    let mut rhs = vec![0.0; inner];
    rhs[0] += 0.5 * t_minus;
    rhs[inner - 1] += 0.5 * t_plus;
    // Forward sweep.
    for k in 1..inner {
        let w = off / diag[k - 1];
        diag[k] -= w * off;
        rhs[k] -= w * rhs[k - 1];
    }
    // Back substitution.
    let mut m = vec![0.0; inner];
    m[inner - 1] = rhs[inner - 1] / diag[inner - 1];
    for k in (0..inner - 1).rev() {
        m[k] = (rhs[k] - off * m[k + 1]) / diag[k];
    }
    let mut profile = Vec::with_capacity(n + 1);
    profile.push(t_minus);
    profile.extend(m);
    profile.push(t_plus);
    Ok(profile)
}

/// General banded matrix in LAPACK-style column storage with room for
/// pivoting fill, factored in place by Gaussian elimination with partial
/// pivoting.
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandMatrix {
    pub(crate) fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j <= i + self.ku && i <= j + self.kl, "({i}, {j}) outside the band");
        self.kl + self.ku + i - j + j * self.ldab
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.ab[s] = value;
    }

    /// Factor in place; the first `kl` storage rows provide pivoting fill.
    pub(crate) fn factor(mut self) -> Result<BandLu, ExactError> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut best = self.ab[kv + j * ldab].abs();
            for off in 1..=km {
                let v = self.ab[kv + off + j * ldab].abs();
                if v > best {
                    best = v;
                    jp = off;
                }
            }
            ipiv[j] = j + jp;
            if self.ab[kv + jp + j * ldab] == 0.0 {
                return Err(ExactError::SingularSystem { column: j });
            }
            let ju = (j + ku + jp).min(n - 1);
            if jp != 0 {
                for c in j..=ju {
                    self.ab.swap(kv + jp + j - c + c * ldab, kv + j - c + c * ldab);
                }
            }
            if km > 0 {
                let piv = self.ab[kv + j * ldab];
                for off in 1..=km {
                    self.ab[kv + off + j * ldab] /= piv;
                }
                for c in (j + 1)..=ju {
                    let top = self.ab[kv + j - c + c * ldab];
                    if top != 0.0 {
                        for off in 1..=km {
                            self.ab[kv + off + j - c + c * ldab] -=
                                self.ab[kv + off + j * ldab] * top;
                        }
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, ldab, ab: self.ab, ipiv })
    }
}

impl BandLu {
    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut x = rhs.to_vec();
        for j in 0..n {
            let jp = self.ipiv[j];
            if jp != j {
                x.swap(j, jp);
            }
            let km = kl.min(n - 1 - j);
            for off in 1..=km {
                x[j + off] -= self.ab[kv + off + j * ldab] * x[j];
            }
        }
        for j in (0..n).rev() {
            let ju = (j + kv).min(n - 1);
            let mut sum = x[j];
            for c in (j + 1)..=ju {
                sum -= self.ab[kv + j - c + c * ldab] * x[c];
            }
            x[j] = sum / self.ab[kv + j * ldab];
        }
        x
    }
}

/// Exact second moments `M_{k,l} = E[O_k O_l]` on the triangle
/// `0 <= k <= l <= N`, with the mean profile alongside.
#[derive(Debug, Clone)]
pub struct MomentTable {
    n: usize,
    t_minus: f64,
    t_plus: f64,
    means: Vec<f64>,
    data: Vec<f64>,
}

fn tri_index(k: usize, l: usize) -> usize {
    debug_assert!(k <= l);
    l * (l + 1) / 2 + k
}

impl MomentTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn temps(&self) -> (f64, f64) {
        (self.t_minus, self.t_plus)
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.means[k]
    }

    /// Second moment, symmetric in its arguments.
    pub fn second_moment(&self, k: usize, l: usize) -> f64 {
        let (k, l) = (k.min(l), k.max(l));
        self.data[tri_index(k, l)]
    }

    /// Covariance `M_{k,l} - m_k m_l`.
    pub fn covariance(&self, k: usize, l: usize) -> f64 {
        self.second_moment(k, l) - self.means[k] * self.means[l]
    }

    /// Replay every defining equation against the stored solution and
    /// return the worst absolute residual — an audit of the linear solve
    /// that shares no code with it.
    pub fn max_residual(&self) -> f64 {
        let n = self.n;
        let g = |k: usize, l: usize| self.second_moment(k, l);
        let mut worst = 0.0f64;
        let mut track = |r: f64| worst = worst.max(r.abs());
        for l in 0..=n {
            track(g(0, l) - self.t_minus * self.means[l]);
        }
        for k in 1..=n {
            track(g(k, n) - self.means[k] * self.t_plus);
        }
        for k in 1..n {
            track(g(k, k) - 0.25 * (g(k - 1, k - 1) + g(k - 1, k) + g(k, k + 1) + g(k + 1, k + 1)));
        }
        for k in 1..n.saturating_sub(1) {
            track(
                g(k, k + 1)
                    - 0.3 * (g(k - 1, k + 1) + g(k, k + 2))
                    - 0.2 * (g(k, k) + g(k + 1, k + 1)),
            );
        }
        for k in 1..n {
            for l in (k + 2)..n {
                track(g(k, l) - 0.25 * (g(k - 1, l) + g(k + 1, l) + g(k, l - 1) + g(k, l + 1)));
            }
        }
        worst
    }
}

/// Assemble and solve the triangle system with prescribed values at the
/// two diagonal corners `(0,0)` and `(N,N)`; every other equation is the
/// standard one. The plain solve pins the corners at `T_-^2` and `T_+^2`.
fn solve_with_corners(
    n: usize,
    t_minus: f64,
    t_plus: f64,
    corner_low: f64,
    corner_high: f64,
) -> Result<MomentTable, ExactError> {
    check_lattice(n, t_minus, t_plus)?;
    let means = mean_profile(n, t_minus, t_plus)?;
    let unknowns = (n + 1) * (n + 2) / 2;
    let band = n + 1;
    let mut a = BandMatrix::new(unknowns, band, band);
    let mut b = vec![0.0; unknowns];
    for l in 0..=n {
        for k in 0..=l {
            let r = tri_index(k, l);
            a.set(r, r, 1.0);
            if k == 0 && l == 0 {
                b[r] = corner_low;
            } else if k == n {
                b[r] = corner_high;
            } else if k == 0 {
                b[r] = t_minus * means[l];
            } else if l == n {
                b[r] = means[k] * t_plus;
            } else if k == l {
                a.set(r, tri_index(k - 1, k - 1), -0.25);
                a.set(r, tri_index(k - 1, k), -0.25);
                a.set(r, tri_index(k, k + 1), -0.25);
                a.set(r, tri_index(k + 1, k + 1), -0.25);
            } else if l == k + 1 {
                a.set(r, tri_index(k - 1, k + 1), -0.3);
                a.set(r, tri_index(k, k + 2), -0.3);
                a.set(r, tri_index(k, k), -0.2);
                a.set(r, tri_index(k + 1, k + 1), -0.2);
            } else {
                a.set(r, tri_index(k - 1, l), -0.25);
                a.set(r, tri_index(k + 1, l), -0.25);
                a.set(r, tri_index(k, l - 1), -0.25);
                a.set(r, tri_index(k, l + 1), -0.25);
            }
        }
    }
    let data = a.factor()?.solve(&b);
    Ok(MomentTable { n, t_minus, t_plus, means, data })
}

/// Assemble and solve the triangle system for the stationary second
/// moments. Unknowns are ordered row-major by `l` then `k`, which keeps all
/// couplings within a band of width `N + 1`.
pub fn solve_second_moments(n: usize, t_minus: f64, t_plus: f64) -> Result<MomentTable, ExactError> {
    solve_with_corners(n, t_minus, t_plus, t_minus * t_minus, t_plus * t_plus)
}

/// Solve the triangle system with the diagonal corners raised to the
/// boundary-noise values of [`modified_corner_values`]. Those are the only
/// two equations the closed-form table violates, so this solve reproduces
/// [`tilde_moments`] to solver precision — an end-to-end audit of both.
pub fn solve_modified_second_moments(
    n: usize,
    t_minus: f64,
    t_plus: f64,
) -> Result<MomentTable, ExactError> {
    let (low, high, _) = modified_corner_values(n, t_minus, t_plus)?;
    solve_with_corners(n, t_minus, t_plus, low, high)
}

/// Pinned-row products of the boundary-noise variant, as
/// `(value at (0,0), value at (N,N), value off the diagonal)`. The corner
/// values carry the diagonal surcharge `d^2/(2N(N+1))` on top of the bare
/// products `T_-^2` and `T_+^2`; the off-diagonal value is `T_- T_+` bare.
pub fn modified_corner_values(
    n: usize,
    t_minus: f64,
    t_plus: f64,
) -> Result<(f64, f64, f64), ExactError> {
    check_lattice(n, t_minus, t_plus)?;
    let nn = n as f64;
    let d = t_plus - t_minus;
    let surcharge = d * d / (2.0 * nn * (nn + 1.0));
    Ok((t_minus * t_minus + surcharge, t_plus * t_plus + surcharge, t_minus * t_plus))
}

/// Closed-form covariance of the boundary-noise variant:
/// `(d^2/(N+1)) (k/N)(1 - l/N)` for `k != l`, plus `d^2/(2N(N+1))` on the
/// diagonal.
pub fn tilde_covariance(n: usize, t_minus: f64, t_plus: f64, k: usize, l: usize) -> f64 {
    let (k, l) = (k.min(l), k.max(l));
    let nn = n as f64;
    let d = t_plus - t_minus;
    let base = d * d / (nn + 1.0) * (k as f64 / nn) * (1.0 - l as f64 / nn);
    if k == l {
        base + d * d / (2.0 * nn * (nn + 1.0))
    } else {
        base
    }
}

/// Closed-form second moment of the boundary-noise variant:
/// covariance plus the product of means.
pub fn tilde_second_moment(n: usize, t_minus: f64, t_plus: f64, k: usize, l: usize) -> f64 {
    let d = t_plus - t_minus;
    let mk = t_minus + k as f64 * d / n as f64;
    let ml = t_minus + l as f64 * d / n as f64;
    tilde_covariance(n, t_minus, t_plus, k, l) + mk * ml
}

/// The full boundary-noise moment table assembled from the closed forms —
/// no linear solve involved. Its [`MomentTable::max_residual`] equals the
/// corner surcharge `d^2/(2N(N+1))` exactly: the closed form satisfies
/// every equation of the triangle system except at the two diagonal
/// corners.
pub fn tilde_moments(n: usize, t_minus: f64, t_plus: f64) -> Result<MomentTable, ExactError> {
    check_lattice(n, t_minus, t_plus)?;
    let means = mean_profile(n, t_minus, t_plus)?;
    let mut data = vec![0.0; (n + 1) * (n + 2) / 2];
    for l in 0..=n {
        for k in 0..=l {
            data[tri_index(k, l)] = tilde_second_moment(n, t_minus, t_plus, k, l);
        }
    }
    Ok(MomentTable { n, t_minus, t_plus, means, data })
}

/// The full boundary-noise covariance matrix `(N+1) x (N+1)`, symmetric
/// with the diagonal surcharge included.
pub fn tilde_correlations(n: usize, t_minus: f64, t_plus: f64) -> Result<Vec<Vec<f64>>, ExactError> {
    check_lattice(n, t_minus, t_plus)?;
    Ok((0..=n)
        .map(|k| (0..=n).map(|l| tilde_covariance(n, t_minus, t_plus, k, l)).collect())
        .collect())
}

/// Quadratic form of the closed-form covariance against a test vector:
/// `(1/N^2) sum_{k,l} tilde_C_{k,l} psi_k psi_l`, an upper bound for the
/// variance of the weighted empirical profile `(1/N) sum_k psi_k O_k`.
pub fn hydrostatic_bound(
    n: usize,
    t_minus: f64,
    t_plus: f64,
    psi: &[f64],
) -> Result<f64, ExactError> {
    check_lattice(n, t_minus, t_plus)?;
    assert_eq!(psi.len(), n + 1, "need one test-vector entry per site");
    let mut total = 0.0;
    for k in 0..=n {
        for l in 0..=n {
            total += tilde_covariance(n, t_minus, t_plus, k, l) * psi[k] * psi[l];
        }
    }
    Ok(total / (n as f64 * n as f64))
}
