//! Lyapunov spectrum of the Rauzy cocycle, the order-inversion symplectic
//! form, star discrepancy of orbits and recurrence times.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::iet::{is_irreducible, IetData};
use crate::rauzy::RauzyTrace;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("trace has {len} steps, need at least {needed}")]
    InsufficientData {
        len: usize,
        needed: usize,
        partial: Box<SpectrumReport>,
    },
    #[error("window must be positive")]
    BadWindow,
    #[error("radius must be positive")]
    BadRadius,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    /// Per induction step, descending.
    pub exponents: Vec<f64>,
    /// `θ_i / θ_1`.
    pub normalized: Vec<f64>,
    /// Exponents divided by the mean log contraction of the total length per
    /// step, when that contraction is positive.
    pub per_contraction: Option<Vec<f64>>,
    pub n_steps: usize,
    pub window: usize,
    /// `(n, estimates)` at every re-orthonormalization.
    pub history: Vec<(usize, Vec<f64>)>,
    /// Largest change of any exponent over the last quarter of the history.
    pub drift: f64,
}

/// Pushes an orthonormal frame through the transposed elementary matrices,
/// re-orthonormalizing every `window` steps.
pub fn lyapunov_spectrum(trace: &RauzyTrace, window: usize) -> Result<SpectrumReport, SpectraError> {
    if window == 0 {
        return Err(SpectraError::BadWindow);
    }
    let d = trace.d();
    let n = trace.len();
    let mut frame = DMatrix::<f64>::identity(d, d);
    let mut sums = vec![0.0; d];
    let mut history = Vec::new();
    let mut since = 0;
    for (i, s) in trace.steps.iter().enumerate() {
        // Zᵀ = I + E[loser][winner]: row loser += row winner
        for c in 0..d {
            let w = frame[(s.winner, c)];
            frame[(s.loser, c)] += w;
        }
        since += 1;
        if since == window || i + 1 == n {
            let qr = frame.clone().qr();
            let r = qr.r();
            for (k, acc) in sums.iter_mut().enumerate() {
                *acc += r[(k, k)].abs().ln();
            }
            frame = qr.q();
            since = 0;
            let steps = (i + 1) as f64;
            history.push((i + 1, sums.iter().map(|x| x / steps).collect::<Vec<_>>()));
        }
    }
    let mut exponents: Vec<f64> = if n == 0 {
        vec![0.0; d]
    } else {
        sums.iter().map(|x| x / n as f64).collect()
    };
    exponents.sort_by(|a, b| b.total_cmp(a));
    let normalized = exponents.iter().map(|x| x / exponents[0]).collect();
    let contraction = if n == 0 {
        0.0
    } else {
        (trace.log_scale_at(0) - trace.log_scale_at(n)) / n as f64
    };
    let drift = {
        let tail = &history[history.len().saturating_sub(history.len() / 4 + 1)..];
        let mut worst: f64 = 0.0;
        if let (Some(first), Some(last)) = (tail.first(), tail.last()) {
            let mut a = first.1.clone();
            let mut b = last.1.clone();
            a.sort_by(|x, y| y.total_cmp(x));
            b.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    };
    let report = SpectrumReport {
        per_contraction: (contraction > 0.0).then(|| exponents.iter().map(|x| x / contraction).collect()),
        exponents,
        normalized,
        n_steps: n,
        window,
        history,
        drift,
    };
    if n < 10 * d {
        return Err(SpectraError::InsufficientData {
            len: n,
            needed: 10 * d,
            partial: Box::new(report),
        });
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymplecticForm {
    pub omega: Vec<Vec<i64>>,
    pub rank: usize,
    pub genus: usize,
    /// Set when the permutation is reducible (rank is still computed).
    pub reducible: bool,
}

/// `Ω[α][β] = +1` if `α` precedes `β` on top and follows it on the bottom,
/// `-1` in the reverse situation, `0` otherwise. Indexed by letter.
pub fn omega(top: &[usize], bottom: &[usize]) -> Vec<Vec<i64>> {
    let d = top.len();
    let mut pt = vec![0; d];
    let mut pb = vec![0; d];
    for i in 0..d {
        pt[top[i]] = i;
        pb[bottom[i]] = i;
    }
    let mut m = vec![vec![0i64; d]; d];
    for a in 0..d {
        for b in 0..d {
            if pt[a] < pt[b] && pb[a] > pb[b] {
                m[a][b] = 1;
            } else if pt[a] > pt[b] && pb[a] < pb[b] {
                m[a][b] = -1;
            }
        }
    }
    m
}

/// Rank over Q by fraction-free (Bareiss) elimination.
pub fn integer_rank(matrix: &[Vec<i64>]) -> usize {
    let rows = matrix.len();
    if rows == 0 {
        return 0;
    }
    let cols = matrix[0].len();
    let mut a: Vec<Vec<BigInt>> = matrix
        .iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let mut prev = BigInt::from(1);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for j in c + 1..cols {
                let v = (&a[rank][c] * &a[r][j] - &a[r][c] * &a[rank][j]) / &prev;
                a[r][j] = v;
            }
            a[r][c] = BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

pub fn symplectic_rank(top: &[usize], bottom: &[usize]) -> SymplecticForm {
    let omega = omega(top, bottom);
    let rank = integer_rank(&omega);
    SymplecticForm {
        omega,
        rank,
        genus: rank / 2,
        reducible: !is_irreducible(top, bottom),
    }
}

/// Star discrepancy of the normalized orbit `{T^k(x0)/L : k < N}`.
pub fn discrepancy(iet: &IetData, x0: f64, n: usize) -> f64 {
    let mut pts = orbit_normalized(iet, x0, n);
    star_discrepancy(&mut pts)
}

fn orbit_normalized(iet: &IetData, x0: f64, n: usize) -> Vec<f64> {
    let l = iet.total();
    let mut x = x0;
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        pts.push(x / l);
        x = iet.apply(x);
    }
    pts
}

/// `max_i max(i/N − u_(i), u_(i) − (i−1)/N)` over the sorted points.
pub fn star_discrepancy(points: &mut [f64]) -> f64 {
    points.sort_by(|a, b| a.total_cmp(b));
    let n = points.len() as f64;
    points
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let i = i as f64;
            ((i + 1.0) / n - u).max(u - i / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopePoint {
    pub n: usize,
    pub discrepancy: f64,
    /// `N·D_N / (ln N)^{power}`.
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub power: usize,
    pub points: Vec<EnvelopePoint>,
    /// Least-squares slope of `ln scaled` against `ln N`.
    pub slope: f64,
    pub max_scaled: f64,
}

/// Discrepancy of orbit prefixes on a grid of `N` values, scaled by the
/// `(ln N)^{power}/N` envelope.
pub fn discrepancy_envelope(iet: &IetData, x0: f64, ns: &[usize], power: usize) -> EnvelopeReport {
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let orbit = orbit_normalized(iet, x0, n_max);
    let points: Vec<EnvelopePoint> = ns
        .iter()
        .map(|&n| {
            let mut prefix = orbit[..n].to_vec();
            let d = star_discrepancy(&mut prefix);
            EnvelopePoint {
                n,
                discrepancy: d,
                scaled: n as f64 * d / (n as f64).ln().powi(power as i32),
            }
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.scaled.ln()).collect();
    EnvelopeReport {
        power,
        max_scaled: points.iter().map(|p| p.scaled).fold(0.0, f64::max),
        slope: least_squares_slope(&xs, &ys),
        points,
    }
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceReport {
    pub r: f64,
    /// First `j ≥ 1` with `|T^j x − x| < r`.
    pub tau_x: Option<u64>,
    /// First `j ≥ 1` with `|T^j x − y| < r`.
    pub tau_xy: Option<u64>,
    /// `ln τ / (−ln r)`.
    pub scaling_x: Option<f64>,
    pub scaling_xy: Option<f64>,
}

pub fn recurrence_times(
    iet: &IetData,
    x: f64,
    y: Option<f64>,
    r: f64,
    cap: u64,
) -> Result<RecurrenceReport, SpectraError> {
    if !(r > 0.0) {
        return Err(SpectraError::BadRadius);
    }
    let first = |target: f64| {
        let mut z = x;
        for j in 1..=cap {
            z = iet.apply(z);
            if (z - target).abs() < r {
                return Some(j);
            }
        }
        None
    };
    let tau_x = first(x);
    let tau_xy = y.and_then(first);
    let scale = |t: Option<u64>| t.map(|t| (t as f64).ln() / -r.ln());
    Ok(RecurrenceReport {
        r,
        scaling_x: scale(tau_x),
        scaling_xy: scale(tau_xy),
        tau_x,
        tau_xy,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KacReport {
    pub a: f64,
    pub b: f64,
    pub samples: usize,
    pub mean_return: f64,
    /// `(|E|/L)·mean R_E`; equals 1 for ergodic maps.
    pub integral: f64,
    pub capped: usize,
}

/// Return-time integral over `E = [a, b)` by stratified midpoints.
pub fn kac_integral(iet: &IetData, a: f64, b: f64, samples: usize, cap: u64) -> KacReport {
    let width = b - a;
    let mut total = 0.0;
    let mut capped = 0;
    for i in 0..samples {
        let x = a + (i as f64 + 0.5) * width / samples as f64;
        match iet.first_hit_time(x, a, b, cap) {
            Some(t) => total += t as f64,
            None => {
                capped += 1;
                total += cap as f64;
            }
        }
    }
    let mean = total / samples as f64;
    KacReport {
        a,
        b,
        samples,
        mean_return: mean,
        integral: width / iet.total() * mean,
        capped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rauzy::run_path;

    #[test]
    fn swap_form() {
        let f = symplectic_rank(&[0, 1], &[1, 0]);
        assert_eq!(f.omega, vec![vec![0, 1], vec![-1, 0]]);
        assert_eq!((f.rank, f.genus), (2, 1));
        assert!(!f.reducible);
    }

    #[test]
    fn symmetric_four() {
        let f = symplectic_rank(&[0, 1, 2, 3], &[3, 2, 1, 0]);
        assert_eq!((f.rank, f.genus), (4, 2));
    }

    #[test]
    fn bareiss_rank_small_cases() {
        assert_eq!(integer_rank(&[vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(integer_rank(&[vec![0, 0], vec![0, 0]]), 0);
        assert_eq!(integer_rank(&[vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]), 3);
        assert_eq!(integer_rank(&[vec![2, 4, 6], vec![1, 2, 3], vec![0, 0, 1]]), 2);
    }

    #[test]
    fn discrepancy_small_cases() {
        let t = IetData::golden_rotation();
        let x0 = 0.3;
        let d1 = discrepancy(&t, x0, 1);
        assert!((d1 - (x0 / t.total()).max(1.0 - x0 / t.total())).abs() < 1e-15);
        let mut grid: Vec<f64> = (0..50).map(|k| k as f64 / 50.0).collect();
        assert!((star_discrepancy(&mut grid) - 1.0 / 50.0).abs() < 1e-15);
        let n = 1000;
        assert!(discrepancy(&t, 0.1, n) <= 3.0 * (n as f64).ln() / n as f64);
    }

    #[test]
    fn recurrence_trivial_radius() {
        let t = IetData::golden_rotation();
        let r = recurrence_times(&t, 0.2, Some(0.7), 2.0, 10).unwrap();
        assert_eq!((r.tau_x, r.tau_xy), (Some(1), Some(1)));
        assert!(recurrence_times(&t, 0.2, None, 0.0, 10).is_err());
    }

    #[test]
    fn spectrum_needs_data() {
        let t = IetData::from_strings("ABC", "CBA", &[0.3, 0.33, 0.37 + 1e-3 * 3f64.sqrt()]).unwrap();
        let trace = run_path(&t, 5, 0.0).unwrap();
        assert!(matches!(
            lyapunov_spectrum(&trace, 10),
            Err(SpectraError::InsufficientData { .. })
        ));
    }
}
