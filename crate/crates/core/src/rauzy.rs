//! Rauzy–Veech induction with cocycle bookkeeping.
//!
//! Conventions: a step is of type 0 when the last top interval is longer
//! (top winner) and of type 1 when the last bottom interval is longer. The
//! winner loses the loser's length and the elementary matrix is
//! `Z = I + E[winner][loser]`, so that `λ(n-1) = Z(n)·λ(n)`. Products
//! `Q(m,n) = Z(m+1)···Z(n)` are built by column operations.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::iet::{is_irreducible, IetData, IetError};
use crate::radical::RadicalNumber;

#[derive(Debug, Error)]
pub enum RauzyError {
    #[error("permutation is reducible")]
    Reducible,
    #[error("degenerate step {step}: last top and bottom intervals have equal length")]
    Degenerate { step: usize, partial: Box<RauzyTrace> },
    #[error("expected {expected} exact lengths, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("step index {n} beyond trace length {len}")]
    OutOfRange { n: usize, len: usize },
    #[error(transparent)]
    Iet(#[from] IetError),
}

/// Applies one combinatorial move, returning `(top', bottom', winner, loser)`.
pub fn rauzy_move(top: &[usize], bottom: &[usize], step_type: u8) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let d = top.len();
    let (mut top, mut bottom) = (top.to_vec(), bottom.to_vec());
    if step_type == 0 {
        let (winner, loser) = (top[d - 1], bottom[d - 1]);
        bottom.pop();
        let k = bottom.iter().position(|&a| a == winner).expect("winner in bottom");
        bottom.insert(k + 1, loser);
        (top, bottom, winner, loser)
    } else {
        let (winner, loser) = (bottom[d - 1], top[d - 1]);
        top.pop();
        let k = top.iter().position(|&a| a == winner).expect("winner in top");
        top.insert(k + 1, loser);
        (top, bottom, winner, loser)
    }
}

/// Length arithmetic used by the induction loop.
pub trait InductionLength: Clone {
    fn approx(&self) -> f64;
    fn cmp_len(&self, other: &Self) -> Ordering;
    fn minus(&self, other: &Self) -> Self;
    /// Rescales all lengths in place and returns `ln` of the factor divided out.
    fn rescale(lengths: &mut [Self], approx: &mut [f64]) -> f64;
}

impl InductionLength for f64 {
    fn approx(&self) -> f64 {
        *self
    }
    fn cmp_len(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn rescale(lengths: &mut [Self], approx: &mut [f64]) -> f64 {
        let total: f64 = lengths.iter().sum();
        for (l, a) in lengths.iter_mut().zip(approx.iter_mut()) {
            *l /= total;
            *a = *l;
        }
        total.ln()
    }
}

impl InductionLength for RadicalNumber {
    fn approx(&self) -> f64 {
        self.to_f64()
    }
    fn cmp_len(&self, other: &Self) -> Ordering {
        self.cmp_exact(other)
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn rescale(lengths: &mut [Self], approx: &mut [f64]) -> f64 {
        // multiply by a power of two so values stay in floating range
        let total: f64 = approx.iter().sum();
        if total > 2f64.powi(-64) {
            return 0.0;
        }
        let k = (-total.log2()).floor() as u32;
        let factor = BigRational::from_integer(BigInt::from(1u8) << k as usize);
        for (l, a) in lengths.iter_mut().zip(approx.iter_mut()) {
            *l = l.scale(&factor);
            *a *= 2f64.powi(k as i32);
        }
        -(k as f64) * std::f64::consts::LN_2
    }
}

/// Nonnegative integer counts kept exact up to `2^62`, then as scaled doubles.
#[derive(Clone, Debug, PartialEq)]
pub enum Counts {
    Exact(Vec<u64>),
    Scaled { values: Vec<f64>, log_offset: f64 },
}

const EXACT_LIMIT: u64 = 1 << 62;

impl Counts {
    pub fn len(&self) -> usize {
        match self {
            Counts::Exact(v) => v.len(),
            Counts::Scaled { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self[to] += self[from]`.
    pub fn add_into(&mut self, to: usize, from: usize) {
        match self {
            Counts::Exact(v) => {
                let sum = v[to] + v[from];
                v[to] = sum;
                if sum > EXACT_LIMIT {
                    *self = Counts::Scaled {
                        values: v.iter().map(|&x| x as f64).collect(),
                        log_offset: 0.0,
                    };
                }
            }
            Counts::Scaled { values, log_offset } => {
                values[to] += values[from];
                if values[to] > 1e200 {
                    values.iter_mut().for_each(|x| *x *= 1e-200);
                    *log_offset += 200.0 * std::f64::consts::LN_10;
                }
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Counts::Exact(_))
    }

    pub fn exact(&self) -> Option<&[u64]> {
        match self {
            Counts::Exact(v) => Some(v),
            Counts::Scaled { .. } => None,
        }
    }

    /// `ln` of entry `i` (`-inf` for zero).
    pub fn ln(&self, i: usize) -> f64 {
        match self {
            Counts::Exact(v) => (v[i] as f64).ln(),
            Counts::Scaled { values, log_offset } => values[i].ln() + log_offset,
        }
    }

    /// Entry as a double (may overflow to infinity in the scaled regime).
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Counts::Exact(v) => v[i] as f64,
            Counts::Scaled { .. } => self.ln(i).exp(),
        }
    }

    pub fn min_value(&self) -> f64 {
        (0..self.len()).map(|i| self.get(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        (0..self.len()).map(|i| self.get(i)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn ln_sum(&self) -> f64 {
        match self {
            Counts::Exact(v) => (v.iter().map(|&x| x as u128).sum::<u128>() as f64).ln(),
            Counts::Scaled { values, log_offset } => values.iter().sum::<f64>().ln() + log_offset,
        }
    }

    pub fn ln_min(&self) -> f64 {
        (0..self.len()).map(|i| self.ln(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn ln_max(&self) -> f64 {
        (0..self.len()).map(|i| self.ln(i)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Product of elementary matrices, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    pub d: usize,
    pub entries: Counts,
}

impl QMatrix {
    pub fn identity(d: usize) -> Self {
        let mut v = vec![0u64; d * d];
        for i in 0..d {
            v[i * d + i] = 1;
        }
        Self {
            d,
            entries: Counts::Exact(v),
        }
    }

    /// Right multiplication by `I + E[winner][loser]`.
    pub fn push(&mut self, winner: usize, loser: usize) {
        for i in 0..self.d {
            self.entries.add_into(i * self.d + loser, i * self.d + winner);
        }
    }

    pub fn ln_entry(&self, i: usize, j: usize) -> f64 {
        self.entries.ln(i * self.d + j)
    }

    /// `ln ‖Q‖` with `‖A‖ = Σ|a_ij|`.
    pub fn ln_norm(&self) -> f64 {
        self.entries.ln_sum()
    }

    pub fn to_exact(&self) -> Option<Vec<Vec<u64>>> {
        self.entries
            .exact()
            .map(|v| v.chunks(self.d).map(|r| r.to_vec()).collect())
    }

    pub fn is_positive(&self) -> bool {
        (0..self.d * self.d).all(|i| self.entries.ln(i) > f64::NEG_INFINITY)
    }

    /// Column sums `Q_k`.
    pub fn column_sums(&self) -> Counts {
        let d = self.d;
        match &self.entries {
            Counts::Exact(v) => Counts::Exact((0..d).map(|k| (0..d).map(|i| v[i * d + k]).sum::<u64>()).collect()),
            Counts::Scaled { values, log_offset } => Counts::Scaled {
                values: (0..d).map(|k| (0..d).map(|i| values[i * d + k]).sum()).collect(),
                log_offset: *log_offset,
            },
        }
    }

    /// `Q·λ` evaluated in floating point (entries may be scaled).
    pub fn apply(&self, lambda: &[f64], log_factor: f64) -> Vec<f64> {
        let d = self.d;
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (self.ln_entry(i, j) + lambda[j].ln() + log_factor).exp())
                    .sum()
            })
            .collect()
    }
}

/// `Z = I + E[winner][loser]` as a dense matrix.
pub fn z_matrix(d: usize, winner: usize, loser: usize) -> Vec<Vec<u64>> {
    let mut z = vec![vec![0u64; d]; d];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1;
    }
    z[winner][loser] += 1;
    z
}

#[derive(Clone, Debug, Serialize)]
pub struct RauzyStep {
    pub step_type: u8,
    pub winner: usize,
    pub loser: usize,
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
    /// Lengths after the step, normalized to total 1, indexed by letter.
    pub lambda_after: Vec<f64>,
    /// `ln` of the unnormalized total length after the step.
    pub log_scale: f64,
    /// `ln ‖Q(0,n)‖`.
    pub log_norm_q: f64,
    pub log_min_height: f64,
    pub log_max_height: f64,
}

impl RauzyStep {
    pub fn z(&self, d: usize) -> Vec<Vec<u64>> {
        z_matrix(d, self.winner, self.loser)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    MaxSteps,
    MinLength,
    Degenerate,
}

#[derive(Clone, Debug)]
pub struct RauzyTrace {
    pub initial: IetData,
    pub steps: Vec<RauzyStep>,
    pub stop: StopReason,
    /// Largest relative error of `Q(0,n)·λ(n)·e^{log_scale}` against `λ(0)`
    /// over the checkpoints visited.
    pub max_reconstruction_error: f64,
}

/// One induction step on a floating IET, without renormalization.
pub fn step(iet: &IetData) -> Result<(IetData, RauzyStep), RauzyError> {
    let d = iet.d();
    let (t, b) = (iet.top()[d - 1], iet.bottom()[d - 1]);
    let lengths = iet.lengths();
    let step_type = match lengths[t].partial_cmp(&lengths[b]) {
        Some(Ordering::Greater) => 0,
        Some(Ordering::Less) => 1,
        _ => {
            return Err(RauzyError::Degenerate {
                step: 1,
                partial: Box::new(RauzyTrace::empty(iet.clone())),
            })
        }
    };
    let (top, bottom, winner, loser) = rauzy_move(iet.top(), iet.bottom(), step_type);
    let mut new_lengths = lengths.to_vec();
    new_lengths[winner] -= new_lengths[loser];
    let next = IetData::new(iet.letters().to_vec(), top.clone(), bottom.clone(), new_lengths.clone())?;
    let total = next.total();
    let mut q = QMatrix::identity(d);
    q.push(winner, loser);
    let heights = q.column_sums();
    let rec = RauzyStep {
        step_type,
        winner,
        loser,
        top,
        bottom,
        lambda_after: new_lengths.iter().map(|l| l / total).collect(),
        log_scale: total.ln(),
        log_norm_q: q.ln_norm(),
        log_min_height: heights.ln_min(),
        log_max_height: heights.ln_max(),
    };
    Ok((next, rec))
}

/// Floating-point induction path, renormalized every step.
pub fn run_path(iet: &IetData, max_steps: usize, min_length: f64) -> Result<RauzyTrace, RauzyError> {
    run_generic(iet, iet.lengths().to_vec(), max_steps, min_length)
}

/// Induction path with exact lengths; `lengths` are indexed like the
/// letters of `iet`, whose own lengths are ignored except for the trace's
/// recorded initial state.
pub fn run_path_exact(
    iet: &IetData,
    lengths: &[RadicalNumber],
    max_steps: usize,
    min_length: f64,
) -> Result<RauzyTrace, RauzyError> {
    if lengths.len() != iet.d() {
        return Err(RauzyError::LengthMismatch {
            expected: iet.d(),
            got: lengths.len(),
        });
    }
    let approx: Vec<f64> = lengths.iter().map(|l| l.to_f64()).collect();
    let initial = iet.with_lengths(approx)?;
    run_generic(&initial, lengths.to_vec(), max_steps, min_length)
}

fn run_generic<L: InductionLength>(
    iet: &IetData,
    mut lengths: Vec<L>,
    max_steps: usize,
    min_length: f64,
) -> Result<RauzyTrace, RauzyError> {
    if !iet.is_irreducible() {
        return Err(RauzyError::Reducible);
    }
    let d = iet.d();
    let mut trace = RauzyTrace::empty(iet.clone());
    let mut top = iet.top().to_vec();
    let mut bottom = iet.bottom().to_vec();
    let mut approx: Vec<f64> = lengths.iter().map(|l| l.approx()).collect();
    let mut log_acc = 0.0;
    let mut q = QMatrix::identity(d);
    let mut heights = Counts::Exact(vec![1; d]);
    let lambda0: Vec<f64> = iet.lengths().to_vec();
    for n in 1..=max_steps {
        let (t, b) = (top[d - 1], bottom[d - 1]);
        let step_type = match lengths[t].cmp_len(&lengths[b]) {
            Ordering::Greater => 0,
            Ordering::Less => 1,
            Ordering::Equal => {
                trace.stop = StopReason::Degenerate;
                return Err(RauzyError::Degenerate {
                    step: n,
                    partial: Box::new(trace),
                });
            }
        };
        let (nt, nb, winner, loser) = rauzy_move(&top, &bottom, step_type);
        top = nt;
        bottom = nb;
        lengths[winner] = lengths[winner].minus(&lengths[loser]);
        approx[winner] = lengths[winner].approx();
        log_acc += L::rescale(&mut lengths, &mut approx);
        let total: f64 = approx.iter().sum();
        q.push(winner, loser);
        heights.add_into(loser, winner);
        let lambda_after: Vec<f64> = approx.iter().map(|a| a / total).collect();
        let log_scale = log_acc + total.ln();
        if n <= 200 && (n % 25 == 0 || n == max_steps) {
            let rebuilt = q.apply(&lambda_after, log_scale);
            for (r, l0) in rebuilt.iter().zip(&lambda0) {
                let err = (r - l0).abs() / l0;
                trace.max_reconstruction_error = trace.max_reconstruction_error.max(err);
            }
        }
        let min_lambda = lambda_after.iter().cloned().fold(f64::INFINITY, f64::min);
        trace.steps.push(RauzyStep {
            step_type,
            winner,
            loser,
            top: top.clone(),
            bottom: bottom.clone(),
            lambda_after,
            log_scale,
            log_norm_q: heights.ln_sum(),
            log_min_height: heights.ln_min(),
            log_max_height: heights.ln_max(),
        });
        if min_lambda < min_length {
            trace.stop = StopReason::MinLength;
            return Ok(trace);
        }
    }
    trace.stop = StopReason::MaxSteps;
    Ok(trace)
}

/// Balance and Diophantine diagnostics along a trace.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub eps: f64,
    /// `max_n ‖Z(n+1)‖ / ‖Q(n)‖^ε`.
    pub c_eps: f64,
    /// `max_n max λ(n) / (‖Q(n)‖^ε · min λ(n))`.
    pub c_prime_eps: f64,
    /// `max λ(n) / min λ(n)` for `n = 0..=N`.
    pub balance: Vec<f64>,
    /// `min_n min_k Q_k(n) / ‖Q(n)‖^{1-ε}`.
    pub height_constant: f64,
    /// `ln min|cell(n+1)| / ln max|cell(n)|` with the initial total scaled to 1.
    pub cell_log_ratios: Vec<f64>,
    pub cell_ratio_upper: f64,
    /// Fraction of the second half of `cell_log_ratios` inside `[1, upper]`.
    pub cell_ratio_tail_fraction: f64,
}

/// Outcome of one return-time sandwich check.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub n: usize,
    pub m_d: Option<usize>,
    pub lower: f64,
    pub upper: Option<f64>,
    pub return_time: Option<u64>,
    pub hitting_time: Option<u64>,
    pub return_ok: bool,
    pub hitting_ok: bool,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.return_ok && self.hitting_ok
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HeightsReport {
    /// `Q_k(n)` indexed by letter (doubles; exact below `2^53`).
    pub heights: Vec<f64>,
    pub exact: Option<Vec<u64>>,
    /// `Σ_k Q_k(n)·λ_k(n)` with `λ(n)` unnormalized, relative to the initial total.
    pub weighted_total: f64,
    pub identity_error: f64,
}

impl RauzyTrace {
    fn empty(initial: IetData) -> Self {
        Self {
            initial,
            steps: Vec::new(),
            stop: StopReason::MaxSteps,
            max_reconstruction_error: 0.0,
        }
    }

    /// Builds a trace from a move sequence with precomputed lengths; norms
    /// and heights are recomputed from the winners and losers.
    pub fn from_moves(initial: IetData, moves: Vec<RauzyStep>) -> Self {
        let d = initial.d();
        let mut heights = Counts::Exact(vec![1; d]);
        let mut steps = moves;
        for s in steps.iter_mut() {
            heights.add_into(s.loser, s.winner);
            s.log_norm_q = heights.ln_sum();
            s.log_min_height = heights.ln_min();
            s.log_max_height = heights.ln_max();
        }
        Self {
            initial,
            steps,
            stop: StopReason::MaxSteps,
            max_reconstruction_error: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn d(&self) -> usize {
        self.initial.d()
    }

    fn check_n(&self, n: usize) -> Result<(), RauzyError> {
        if n > self.len() {
            Err(RauzyError::OutOfRange { n, len: self.len() })
        } else {
            Ok(())
        }
    }

    pub fn top_at(&self, n: usize) -> &[usize] {
        if n == 0 {
            self.initial.top()
        } else {
            &self.steps[n - 1].top
        }
    }

    pub fn bottom_at(&self, n: usize) -> &[usize] {
        if n == 0 {
            self.initial.bottom()
        } else {
            &self.steps[n - 1].bottom
        }
    }

    /// Normalized lengths at step `n`.
    pub fn lambda_at(&self, n: usize) -> Vec<f64> {
        if n == 0 {
            let t = self.initial.total();
            self.initial.lengths().iter().map(|l| l / t).collect()
        } else {
            self.steps[n - 1].lambda_after.clone()
        }
    }

    /// `ln` of the unnormalized total at step `n`.
    pub fn log_scale_at(&self, n: usize) -> f64 {
        if n == 0 {
            self.initial.total().ln()
        } else {
            self.steps[n - 1].log_scale
        }
    }

    pub fn log_norm_at(&self, n: usize) -> f64 {
        if n == 0 {
            (self.d() as f64).ln()
        } else {
            self.steps[n - 1].log_norm_q
        }
    }

    /// The induced exchange at step `n` in the original length units.
    pub fn iet_at(&self, n: usize) -> Result<IetData, RauzyError> {
        self.check_n(n)?;
        let scale = self.log_scale_at(n).exp();
        Ok(IetData::new(
            self.initial.letters().to_vec(),
            self.top_at(n).to_vec(),
            self.bottom_at(n).to_vec(),
            self.lambda_at(n).iter().map(|l| l * scale).collect(),
        )?)
    }

    /// `Q(m,n) = Z(m+1)···Z(n)`.
    pub fn q(&self, m: usize, n: usize) -> Result<QMatrix, RauzyError> {
        self.check_n(n)?;
        let mut q = QMatrix::identity(self.d());
        for s in &self.steps[m.min(n)..n] {
            q.push(s.winner, s.loser);
        }
        Ok(q)
    }

    pub fn heights(&self, n: usize) -> Result<HeightsReport, RauzyError> {
        let q = self.q(0, n)?;
        let sums = q.column_sums();
        let lambda = self.lambda_at(n);
        let rel_scale = (self.log_scale_at(n) - self.log_scale_at(0)).exp();
        let weighted_total: f64 = (0..self.d()).map(|k| sums.get(k) * lambda[k] * rel_scale).sum();
        Ok(HeightsReport {
            heights: (0..self.d()).map(|k| sums.get(k)).collect(),
            exact: sums.exact().map(|v| v.to_vec()),
            weighted_total,
            identity_error: (weighted_total - 1.0).abs(),
        })
    }

    /// Least `m ≥ 1` with `Q(n, n+m)` entrywise positive.
    pub fn positivity_lag(&self, n: usize) -> Option<usize> {
        let d = self.d();
        let mut pos = vec![false; d * d];
        for i in 0..d {
            pos[i * d + i] = true;
        }
        for (m, s) in self.steps.iter().enumerate().skip(n) {
            for i in 0..d {
                if pos[i * d + s.winner] {
                    pos[i * d + s.loser] = true;
                }
            }
            if pos.iter().all(|&p| p) {
                return Some(m + 1 - n);
            }
        }
        None
    }

    pub fn balance_and_diophantine(&self, eps: f64) -> DiagnosticsReport {
        let d = self.d() as f64;
        let n_max = self.len();
        let mut c_eps: f64 = 0.0;
        let mut c_prime: f64 = 0.0;
        let mut height_constant = f64::INFINITY;
        let mut balance = Vec::with_capacity(n_max + 1);
        let mut mins = Vec::with_capacity(n_max + 1);
        let mut maxs = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let lambda = self.lambda_at(n);
            let lo = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = lambda.iter().cloned().fold(0.0, f64::max);
            let ln_norm = self.log_norm_at(n);
            if n < n_max {
                c_eps = c_eps.max(((d + 1.0).ln() - eps * ln_norm).exp());
            }
            c_prime = c_prime.max((hi / lo) * (-eps * ln_norm).exp());
            let ln_min_h = if n == 0 { 0.0 } else { self.steps[n - 1].log_min_height };
            height_constant = height_constant.min((ln_min_h - (1.0 - eps) * ln_norm).exp());
            balance.push(hi / lo);
            let rel = self.log_scale_at(n) - self.log_scale_at(0);
            mins.push(lo.ln() + rel);
            maxs.push(hi.ln() + rel);
        }
        let upper = (1.0 + eps * (2.0 + eps)) / (1.0 - eps);
        let ratios: Vec<f64> = (0..n_max)
            .filter(|&n| maxs[n] < 0.0)
            .map(|n| mins[n + 1] / maxs[n])
            .collect();
        let tail = &ratios[ratios.len() / 2..];
        let inside = tail.iter().filter(|&&r| (1.0 - 1e-12..=upper).contains(&r)).count();
        DiagnosticsReport {
            eps,
            c_eps,
            c_prime_eps: c_prime,
            balance,
            height_constant,
            cell_ratio_tail_fraction: if tail.is_empty() {
                0.0
            } else {
                inside as f64 / tail.len() as f64
            },
            cell_log_ratios: ratios,
            cell_ratio_upper: upper,
        }
    }

    /// Checks `min_j Q_j(n) ≤ R_n(x) < 2·max_k Q_k(n+m) + max_k Q_k(n)` and
    /// the same upper bound for `W_n(x, y)`, iterating the original exchange.
    pub fn return_time_sandwich(&self, n: usize, x: f64, y: f64) -> Result<SandwichReport, RauzyError> {
        self.check_n(n)?;
        let t = &self.initial;
        let h_n = self.q(0, n)?.column_sums();
        let lower = h_n.min_value();
        let m_d = self.positivity_lag(n);
        let upper = m_d.map(|m| {
            let h_nm = self.q(0, n + m).expect("lag within trace").column_sums();
            2.0 * h_nm.max_value() + h_n.max_value()
        });
        let cap = upper.map_or(u64::MAX / 2, |u| u.ceil() as u64 + 1).min(1 << 40);
        let cell_x = self.cell_of(n, x);
        let cell_y = self.cell_of(n, y);
        let return_time = t.first_hit_time(x, cell_x.0, cell_x.1, cap);
        let hitting_time = t.first_hit_time(x, cell_y.0, cell_y.1, cap);
        let within = |time: Option<u64>| match (time, upper) {
            (Some(r), Some(u)) => (r as f64) < u,
            (Some(_), None) => true,
            (None, _) => false,
        };
        Ok(SandwichReport {
            n,
            m_d,
            lower,
            upper,
            return_time,
            hitting_time,
            return_ok: within(return_time) && return_time.is_some_and(|r| r as f64 >= lower),
            hitting_ok: within(hitting_time),
        })
    }

    /// Cell `T^j(I_i(n))` containing `x`, as a half-open interval.
    pub fn cell_of(&self, n: usize, x: f64) -> (f64, f64) {
        let t = &self.initial;
        let induced = self.iet_at(n).expect("n within trace");
        let base_end = induced.total();
        let mut z = x;
        while z >= base_end {
            z = t.apply_inverse(z);
        }
        let slot = induced.top_slot(z);
        let start = induced.top_breakpoints()[slot];
        let len = induced.lengths()[induced.top()[slot]];
        let offset = z - start;
        (x - offset, x - offset + len)
    }
}

/// Rauzy class of an irreducible permutation in reduced form: letters are
/// relabeled so that the top row reads `0, 1, …, d−1`, and a node is the
/// bottom row.
#[derive(Clone, Debug, Serialize)]
pub struct RauzyClass {
    pub nodes: Vec<Vec<usize>>,
    /// `(from, to, move type)`.
    pub edges: Vec<(usize, usize, u8)>,
}

impl RauzyClass {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, bottom: &[usize]) -> bool {
        self.nodes.iter().any(|n| n == bottom)
    }
}

/// Relabels `(top, bottom)` so that top becomes the identity.
pub fn reduce(top: &[usize], bottom: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; top.len()];
    for (i, &a) in top.iter().enumerate() {
        pos[a] = i;
    }
    bottom.iter().map(|&a| pos[a]).collect()
}

pub fn reduced_move(bottom: &[usize], step_type: u8) -> Vec<usize> {
    let id: Vec<usize> = (0..bottom.len()).collect();
    let (t, b, _, _) = rauzy_move(&id, bottom, step_type);
    reduce(&t, &b)
}

pub fn rauzy_class(top: &[usize], bottom: &[usize]) -> Result<RauzyClass, RauzyError> {
    if !is_irreducible(top, bottom) {
        return Err(RauzyError::Reducible);
    }
    let start = reduce(top, bottom);
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut nodes = vec![start.clone()];
    let mut edges = Vec::new();
    index.insert(start, 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for ty in [0u8, 1] {
            let next = reduced_move(&nodes[i], ty);
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    let j = nodes.len();
                    index.insert(next.clone(), j);
                    nodes.push(next);
                    queue.push_back(j);
                    j
                }
            };
            edges.push((i, j, ty));
        }
    }
    Ok(RauzyClass { nodes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letters(s: &str, iet: &IetData) -> Vec<usize> {
        s.chars().map(|c| iet.letter_index(&c.to_string()).unwrap()).collect()
    }

    #[test]
    fn worked_example_moves() {
        let t = IetData::from_strings("ABCDE", "CDEBA", &[0.1, 0.15, 0.2, 0.25, 0.3]).unwrap();
        let (top0, bot0, w, l) = rauzy_move(t.top(), t.bottom(), 0);
        assert_eq!(top0, letters("ABCDE", &t));
        assert_eq!(bot0, letters("CDEAB", &t));
        assert_eq!((w, l), (4, 0));
        let (top1, bot1, w, l) = rauzy_move(t.top(), t.bottom(), 1);
        assert_eq!(top1, letters("AEBCD", &t));
        assert_eq!(bot1, letters("CDEBA", &t));
        assert_eq!((w, l), (0, 4));
    }

    #[test]
    fn worked_example_lengths() {
        let t = IetData::from_strings("ABCDE", "CDEBA", &[0.1, 0.15, 0.2, 0.25, 0.3]).unwrap();
        let (next, rec) = step(&t).unwrap();
        assert_eq!(rec.step_type, 0);
        assert!((next.lengths()[4] - 0.2).abs() < 1e-15);
        assert_eq!(&next.lengths()[..4], &t.lengths()[..4]);
        // heights after one step: winner E adds to loser A's column
        let trace = run_path(&t, 1, 0.0).unwrap();
        let h = trace.heights(1).unwrap();
        assert_eq!(h.exact.unwrap(), vec![2, 1, 1, 1, 1]);
        assert!(h.identity_error < 1e-12);
    }

    #[test]
    fn degenerate_step_is_error() {
        let t = IetData::from_strings("AB", "BA", &[0.5, 0.5]).unwrap();
        assert!(matches!(step(&t), Err(RauzyError::Degenerate { .. })));
        assert!(matches!(
            run_path(&t, 5, 0.0),
            Err(RauzyError::Degenerate { step: 1, .. })
        ));
    }

    #[test]
    fn golden_q2_and_heights() {
        let g = IetData::golden_rotation();
        let trace = run_path(&g, 2, 0.0).unwrap();
        let q = trace.q(0, 2).unwrap();
        assert_eq!(q.to_exact().unwrap(), vec![vec![2, 1], vec![1, 1]]);
        assert!((q.ln_norm() - 5f64.ln()).abs() < 1e-12);
        assert_eq!(trace.heights(2).unwrap().exact.unwrap(), vec![3, 2]);
        assert_eq!(trace.q(0, 0).unwrap(), QMatrix::identity(2));
    }

    #[test]
    fn q_is_a_cocycle() {
        let t = IetData::from_strings("ABCD", "DCBA", &[0.21, 0.33, 0.17, 0.29 + 1e-3 * 2f64.sqrt()]).unwrap();
        let trace = run_path(&t, 60, 0.0).unwrap();
        let full = trace.q(0, 60).unwrap().to_exact().unwrap();
        let a = trace.q(0, 25).unwrap().to_exact().unwrap();
        let b = trace.q(25, 60).unwrap().to_exact().unwrap();
        let prod: Vec<Vec<u64>> = (0..4)
            .map(|i| (0..4).map(|j| (0..4).map(|k| a[i][k] * b[k][j]).sum()).collect())
            .collect();
        assert_eq!(prod, full);
        assert!(trace.max_reconstruction_error < 1e-8);
    }

    #[test]
    fn counts_switch_to_scaled() {
        let mut c = Counts::Exact(vec![1 << 61, 1 << 61]);
        c.add_into(0, 1);
        assert!(c.is_exact());
        c.add_into(0, 1);
        assert!(!c.is_exact());
        assert!((c.get(0) - 1.5 * 2f64.powi(62)).abs() / 2f64.powi(62) < 1e-12);
    }

    #[test]
    fn class_sizes() {
        let c = rauzy_class(&[0, 1], &[1, 0]).unwrap();
        assert_eq!(c.len(), 1);
        for d in 2..=5 {
            let top: Vec<usize> = (0..d).collect();
            let bottom: Vec<usize> = (0..d).rev().collect();
            let c = rauzy_class(&top, &bottom).unwrap();
            assert_eq!(c.len(), (1 << (d - 1)) - 1);
        }
        assert!(matches!(rauzy_class(&[0, 1], &[0, 1]), Err(RauzyError::Reducible)));
    }
}
