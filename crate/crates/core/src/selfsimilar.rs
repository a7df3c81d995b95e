//! Substitutions (graph inflations) on transition letters, their incidence
//! matrices, Perron data, and the check that a Perron length vector gives a
//! periodic Rauzy path whose per-period growth is `log ρ(M)`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::MetricGraph;
use crate::iet::{IetData, IetError};
use crate::rauzy::{run_path, RauzyError, RauzyStep, RauzyTrace};
use crate::reduction::{build_iet_from_graph, build_transition_alphabet, CyclePolicy, ReductionError};
use crate::spectra::{lyapunov_spectrum, SpectraError};

#[derive(Debug, Error)]
pub enum SelfSimilarError {
    #[error("substitution has no letters")]
    Empty,
    #[error("image of {0} is empty")]
    EmptyImage(String),
    #[error("unknown letter {0:?}")]
    UnknownLetter(String),
    #[error("inadmissible image of {letter} at position {position}: {reason}")]
    Inadmissible {
        letter: String,
        position: usize,
        reason: String,
    },
    #[error("incidence matrix is not primitive within {k_max} powers")]
    NotPrimitive { k_max: usize },
    #[error("no periodic Rauzy state found within {searched} steps")]
    NoPeriod { searched: usize },
    #[error("exchange shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Iet(#[from] IetError),
    #[error(transparent)]
    Rauzy(#[from] RauzyError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Serialize)]
pub struct Substitution {
    pub letters: Vec<String>,
    /// `images[a]` lists letter indices of `σ(a)`.
    pub images: Vec<Vec<usize>>,
}

impl Substitution {
    pub fn new(letters: Vec<String>, images: Vec<Vec<String>>) -> Result<Self, SelfSimilarError> {
        if letters.is_empty() {
            return Err(SelfSimilarError::Empty);
        }
        let index: BTreeMap<&str, usize> = letters.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut out = Vec::with_capacity(images.len());
        for (a, word) in images.iter().enumerate() {
            if word.is_empty() {
                return Err(SelfSimilarError::EmptyImage(letters[a].clone()));
            }
            let mut w = Vec::with_capacity(word.len());
            for b in word {
                w.push(
                    *index
                        .get(b.as_str())
                        .ok_or_else(|| SelfSimilarError::UnknownLetter(b.clone()))?,
                );
            }
            out.push(w);
        }
        if out.len() != letters.len() {
            return Err(SelfSimilarError::Shape(format!(
                "{} letters but {} images",
                letters.len(),
                out.len()
            )));
        }
        Ok(Substitution { letters, images: out })
    }

    /// `{"a": ["a", "b"], "b": ["a"]}`; letters in key order.
    pub fn from_json(text: &str) -> Result<Self, SelfSimilarError> {
        let map: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let letters: Vec<String> = map.keys().cloned().collect();
        let images: Vec<Vec<String>> = map.into_values().collect();
        Self::new(letters, images)
    }

    pub fn fibonacci() -> Self {
        Self::new(
            vec!["a".into(), "b".into()],
            vec![vec!["a".into(), "b".into()], vec!["a".into()]],
        )
        .expect("valid")
    }

    pub fn identity(letters: Vec<String>) -> Self {
        let images = letters.iter().map(|l| vec![l.clone()]).collect();
        Self::new(letters, images).expect("valid")
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Checks the inflation rules against a graph whose transition letters
    /// carry these names (canonical `a<i>` or labels such as `AB>AC/1`):
    /// consecutive letters must chain (`e_out` of one is `e_in` of the next,
    /// pivoting at its far end) and `σ(a)` must start on `a`'s incoming edge.
    pub fn check_admissible(&self, graph: &MetricGraph) -> Result<(), SelfSimilarError> {
        let alphabet = build_transition_alphabet(graph)?;
        let resolved: Vec<_> = self
            .letters
            .iter()
            .map(|l| {
                alphabet
                    .find(l)
                    .map(|i| alphabet.letters[i])
                    .ok_or_else(|| SelfSimilarError::UnknownLetter(l.clone()))
            })
            .collect::<Result<_, _>>()?;
        for (a, word) in self.images.iter().enumerate() {
            let first = resolved[word[0]];
            if first.e_in != resolved[a].e_in {
                return Err(SelfSimilarError::Inadmissible {
                    letter: self.letters[a].clone(),
                    position: 0,
                    reason: "first letter does not share the incoming edge".into(),
                });
            }
            for (pos, pair) in word.windows(2).enumerate() {
                let (x, y) = (resolved[pair[0]], resolved[pair[1]]);
                if y.e_in != x.e_out || y.pivot != alphabet.far_end(&x) {
                    return Err(SelfSimilarError::Inadmissible {
                        letter: self.letters[a].clone(),
                        position: pos + 1,
                        reason: format!("{} cannot follow {}", self.letters[pair[1]], self.letters[pair[0]]),
                    });
                }
            }
        }
        Ok(())
    }
}

/// `M[a][b]` counts occurrences of `b` in `σ(a)`.
pub fn incidence_matrix(sub: &Substitution) -> Vec<Vec<u64>> {
    let d = sub.len();
    let mut m = vec![vec![0u64; d]; d];
    for (a, word) in sub.images.iter().enumerate() {
        for &b in word {
            m[a][b] += 1;
        }
    }
    m
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimitivityReport {
    /// Least `k` with `M^k > 0`.
    pub primitive_power: Option<usize>,
    pub k_max: usize,
    pub rho: Option<f64>,
    /// `M r = ρ r`, normalized to sum 1.
    pub right: Option<Vec<f64>>,
    /// `Mᵀ l = ρ l`, normalized to sum 1.
    pub left: Option<Vec<f64>>,
    pub residual: Option<f64>,
}

impl PrimitivityReport {
    pub fn is_primitive(&self) -> bool {
        self.primitive_power.is_some()
    }
}

/// Wielandt's bound `(d − 1)² + 1`.
pub fn default_k_max(d: usize) -> usize {
    (d.saturating_sub(1)).pow(2) + 1
}

fn bool_product(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let d = a.len();
    let mut out = vec![vec![false; d]; d];
    for i in 0..d {
        for k in 0..d {
            if a[i][k] {
                for j in 0..d {
                    out[i][j] |= b[k][j];
                }
            }
        }
    }
    out
}

/// Dominant eigenpair of a nonnegative matrix by power iteration.
pub fn perron_pair(m: &[Vec<f64>], tol: f64, max_iter: usize) -> (f64, Vec<f64>, f64) {
    let d = m.len();
    let mut v = vec![1.0 / d as f64; d];
    let mut rho = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| m[i][j] * v[j]).sum()).collect();
        let s: f64 = w.iter().sum();
        rho = s;
        w.iter_mut().for_each(|x| *x /= s);
        residual = (0..d)
            .map(|i| ((0..d).map(|j| m[i][j] * w[j]).sum::<f64>() - rho * w[i]).abs())
            .fold(0.0, f64::max);
        v = w;
        if residual < tol {
            break;
        }
    }
    (rho, v, residual)
}

pub fn primitivity_and_perron(m: &[Vec<u64>], k_max: usize) -> PrimitivityReport {
    let d = m.len();
    let base: Vec<Vec<bool>> = m.iter().map(|r| r.iter().map(|&x| x > 0).collect()).collect();
    let mut power = base.clone();
    let mut found = None;
    for k in 1..=k_max {
        if power.iter().all(|r| r.iter().all(|&x| x)) {
            found = Some(k);
            break;
        }
        power = bool_product(&power, &base);
    }
    if found.is_none() {
        return PrimitivityReport {
            primitive_power: None,
            k_max,
            rho: None,
            right: None,
            left: None,
            residual: None,
        };
    }
    let mf: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    let mt: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| mf[j][i]).collect()).collect();
    let (rho, right, r1) = perron_pair(&mf, 1e-12, 1_000_000);
    let (_, left, r2) = perron_pair(&mt, 1e-12, 1_000_000);
    PrimitivityReport {
        primitive_power: found,
        k_max,
        rho: Some(rho),
        right: Some(right),
        left: Some(left),
        residual: Some(r1.max(r2)),
    }
}

/// Letter order of the exchange built from a substitution.
#[derive(Clone, Debug, Serialize)]
pub struct IetShape {
    pub top: Vec<String>,
    pub bottom: Vec<String>,
}

impl IetShape {
    /// Top in the given order, bottom shifted left by one.
    pub fn rotation(letters: &[String]) -> Self {
        let mut bottom = letters.to_vec();
        bottom.rotate_left(1);
        IetShape {
            top: letters.to_vec(),
            bottom,
        }
    }

    /// The shape the graph reduction assigns to the `Φ`-cycle through the
    /// substitution's letters, which must form exactly that cycle.
    pub fn from_graph(graph: &MetricGraph, sub: &Substitution) -> Result<Self, SelfSimilarError> {
        let red = build_iet_from_graph(graph, &CyclePolicy::Cycle(sub.letters[0].clone()))?;
        let alphabet = &red.alphabet;
        let canonical = |l: &str| alphabet.find(l).map(|i| alphabet.name(i));
        let mut ours: Vec<String> = sub
            .letters
            .iter()
            .map(|l| canonical(l).ok_or_else(|| SelfSimilarError::UnknownLetter(l.clone())))
            .collect::<Result<_, _>>()?;
        let mut cycle = red.report.top.clone();
        ours.sort();
        cycle.sort();
        if ours != cycle {
            return Err(SelfSimilarError::Shape(
                "substitution letters are not a single successor cycle".into(),
            ));
        }
        // back to the substitution's own spelling
        let spell = |name: &String| -> String {
            sub.letters
                .iter()
                .find(|l| canonical(l).as_deref() == Some(name.as_str()))
                .cloned()
                .expect("same letter set")
        };
        Ok(IetShape {
            top: red.report.top.iter().map(spell).collect(),
            bottom: red.report.bottom.iter().map(spell).collect(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub incidence: Vec<Vec<u64>>,
    pub rho: f64,
    pub log_rho: f64,
    /// Lengths used, by letter, from `Mᵀ λ = ρ λ`.
    pub lengths: Vec<f64>,
    /// Rauzy steps until the state recurs up to relabeling.
    pub period: usize,
    /// `σ(x)` is the letter playing `x`'s role one period later.
    pub relabeling: Vec<String>,
    pub periods_used: usize,
    pub top_exponent: f64,
    /// `θ_1 · period / power`: growth per substitution step.
    pub measured: f64,
    pub relative_error: f64,
    /// Period matrix `B[x][z] = Q[x][σ(z)]`, which has the length vector as
    /// Perron vector.
    pub period_matrix: Vec<Vec<u64>>,
    /// Least `j` with `B` equal to `M^j` or `(Mᵀ)^j` after a simultaneous
    /// relabeling.
    pub power: Option<usize>,
    pub period_matrix_matches: bool,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct SelfSimilarOptions {
    pub search_steps: usize,
    pub min_periods: usize,
    pub tol: f64,
}

impl Default for SelfSimilarOptions {
    fn default() -> Self {
        SelfSimilarOptions {
            search_steps: 400,
            min_periods: 50,
            tol: 1e-10,
        }
    }
}

fn find_relabeling(trace: &RauzyTrace, n: usize, tol: f64) -> Option<Vec<usize>> {
    let d = trace.d();
    let (t0, b0) = (trace.top_at(0), trace.bottom_at(0));
    let (tn, bn) = (trace.top_at(n), trace.bottom_at(n));
    let mut sigma = vec![usize::MAX; d];
    for i in 0..d {
        sigma[t0[i]] = tn[i];
    }
    if (0..d).any(|i| sigma[b0[i]] != bn[i]) {
        return None;
    }
    let l0 = trace.lambda_at(0);
    let ln = trace.lambda_at(n);
    let s0: f64 = l0.iter().sum();
    let sn: f64 = ln.iter().sum();
    (0..d)
        .all(|x| (ln[sigma[x]] / sn - l0[x] / s0).abs() <= tol)
        .then_some(sigma)
}

const MAX_POWER: usize = 8;
/// The QR estimate carries an `O(1/n)` transient.
const MIN_STEPS: usize = 20_000;

fn checked_product(a: &[Vec<u64>], b: &[Vec<u64>]) -> Option<Vec<Vec<u64>>> {
    let d = a.len();
    let mut out = vec![vec![0u64; d]; d];
    for i in 0..d {
        for k in 0..d {
            for j in 0..d {
                out[i][j] = out[i][j].checked_add(a[i][k].checked_mul(b[k][j])?)?;
            }
        }
    }
    Some(out)
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

fn equal_up_to_relabeling(a: &[Vec<u64>], b: &[Vec<u64>]) -> bool {
    let d = a.len();
    if d > 8 {
        return a == b;
    }
    permutations(d)
        .iter()
        .any(|p| (0..d).all(|i| (0..d).all(|j| a[p[i]][p[j]] == b[i][j])))
}

/// Builds the exchange with Perron lengths, finds the Rauzy period up to
/// relabeling, extends the periodic path to at least `min_periods` periods
/// and compares `θ_1 · period` with `log ρ(M)`.
pub fn check_self_similar_exponent(
    sub: &Substitution,
    shape: &IetShape,
    opts: &SelfSimilarOptions,
) -> Result<ConsistencyReport, SelfSimilarError> {
    let m = incidence_matrix(sub);
    let d = sub.len();
    let prim = primitivity_and_perron(&m, default_k_max(d));
    if !prim.is_primitive() {
        return Err(SelfSimilarError::NotPrimitive { k_max: prim.k_max });
    }
    let rho = prim.rho.expect("primitive");
    let lengths = prim.left.clone().expect("primitive");
    let index = |l: &String| {
        sub.letters
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| SelfSimilarError::UnknownLetter(l.clone()))
    };
    let top: Vec<usize> = shape.top.iter().map(index).collect::<Result<_, _>>()?;
    let bottom: Vec<usize> = shape.bottom.iter().map(index).collect::<Result<_, _>>()?;
    let iet = IetData::new(sub.letters.clone(), top, bottom, lengths.clone())?;
    let trace = match run_path(&iet, opts.search_steps, 0.0) {
        Ok(t) => t,
        Err(RauzyError::Degenerate { partial, .. }) => *partial,
        Err(e) => return Err(e.into()),
    };
    let (period, sigma) = (1..=trace.len())
        .find_map(|n| find_relabeling(&trace, n, opts.tol).map(|s| (n, s)))
        .ok_or(SelfSimilarError::NoPeriod { searched: trace.len() })?;

    let periods = opts.min_periods.max((MIN_STEPS.max(10 * d)).div_ceil(period));
    let delta = trace.log_scale_at(period) - trace.log_scale_at(0);
    let mut moves: Vec<RauzyStep> = Vec::with_capacity(periods * period);
    let mut power: Vec<usize> = (0..d).collect();
    for k in 0..periods {
        for base in &trace.steps[..period] {
            let mut lambda = vec![0.0; d];
            for x in 0..d {
                lambda[power[x]] = base.lambda_after[x];
            }
            moves.push(RauzyStep {
                step_type: base.step_type,
                winner: power[base.winner],
                loser: power[base.loser],
                top: base.top.iter().map(|&x| power[x]).collect(),
                bottom: base.bottom.iter().map(|&x| power[x]).collect(),
                lambda_after: lambda,
                log_scale: base.log_scale + k as f64 * delta,
                log_norm_q: 0.0,
                log_min_height: 0.0,
                log_max_height: 0.0,
            });
        }
        power = power.iter().map(|&x| sigma[x]).collect();
    }
    let extended = RauzyTrace::from_moves(iet, moves);
    let spectrum = lyapunov_spectrum(&extended, 4)?;
    let top_exponent = spectrum.exponents[0];

    let q = trace.q(0, period)?.to_exact().unwrap_or_default();
    let period_matrix: Vec<Vec<u64>> = if q.is_empty() {
        Vec::new()
    } else {
        (0..d).map(|x| (0..d).map(|z| q[x][sigma[z]]).collect()).collect()
    };
    let mt: Vec<Vec<u64>> = (0..d).map(|i| (0..d).map(|j| m[j][i]).collect()).collect();
    let mut power_of_m = None;
    if !period_matrix.is_empty() {
        let (mut mj, mut mtj) = (m.clone(), mt.clone());
        for j in 1..=MAX_POWER {
            if equal_up_to_relabeling(&period_matrix, &mj) || equal_up_to_relabeling(&period_matrix, &mtj) {
                power_of_m = Some(j);
                break;
            }
            match (checked_product(&mj, &m), checked_product(&mtj, &mt)) {
                (Some(a), Some(b)) => {
                    mj = a;
                    mtj = b;
                }
                _ => break,
            }
        }
    }
    let measured = top_exponent * period as f64 / power_of_m.unwrap_or(1) as f64;
    let log_rho = rho.ln();
    let relative_error = ((measured - log_rho) / log_rho).abs();
    Ok(ConsistencyReport {
        incidence: m,
        rho,
        log_rho,
        lengths,
        period,
        relabeling: sigma.iter().map(|&x| sub.letters[x].clone()).collect(),
        periods_used: periods,
        top_exponent,
        measured,
        relative_error,
        period_matrix,
        power: power_of_m,
        period_matrix_matches: power_of_m.is_some(),
        pass: relative_error < 1e-3,
    })
}
