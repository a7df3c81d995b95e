//! Closed-form saturation-time bounds and the sweep comparing them with
//! simulated permanent saturation moments.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::MetricGraph;
use crate::saturation::{permanent_saturation_moment, SaturationError, SimCaps};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonDomain(f64),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("lengths must be nonempty and positive")]
    BadLengths,
    #[error("constant K must be positive, got {0}")]
    BadK(f64),
    #[error("conjecture bound needs Lyapunov exponents")]
    MissingExponents,
    #[error("epsilon grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Simulation(#[from] SaturationError),
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundInputs {
    pub lengths: Vec<f64>,
    pub epsilon: f64,
    pub c: f64,
    pub k: f64,
    /// Descending exponents in the convention recorded by the caller.
    pub exponents: Option<Vec<f64>>,
}

impl BoundInputs {
    fn check(&self) -> Result<(), BoundsError> {
        if self.lengths.is_empty() || self.lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(BoundsError::BadLengths);
        }
        if !(self.k > 0.0) {
            return Err(BoundsError::BadK(self.k));
        }
        Ok(())
    }
}

/// `max_i C·(K·l_i)^{(1−ε)/(1+ε)} / ε`.
pub fn theorem_bound(inputs: &BoundInputs) -> Result<f64, BoundsError> {
    inputs.check()?;
    let eps = inputs.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(BoundsError::EpsilonDomain(eps));
    }
    let p = (1.0 - eps) / (1.0 + eps);
    Ok(inputs
        .lengths
        .iter()
        .map(|l| inputs.c * (inputs.k * l).powf(p) / eps)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Which Lyapunov exponents enter `S = Σ_{i<n} λ_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentConvention {
    /// `θ_i/θ_1`, nonnegative ones, the leading `1` included.
    Normalized,
    /// `θ_i/θ_1`, nonnegative ones, the leading `1` left out.
    NormalizedWithoutTop,
    /// Raw per-step `θ_i`, nonnegative ones.
    PerStep,
}

impl ExponentConvention {
    pub fn name(&self) -> &'static str {
        match self {
            ExponentConvention::Normalized => "normalized",
            ExponentConvention::NormalizedWithoutTop => "normalized_without_top",
            ExponentConvention::PerStep => "per_step",
        }
    }

    /// Picks the exponents for this convention from per-step estimates.
    pub fn select(&self, per_step: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = per_step.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        match self {
            ExponentConvention::PerStep => v,
            ExponentConvention::Normalized => {
                let top = v[0];
                v.iter().map(|x| x / top).collect()
            }
            ExponentConvention::NormalizedWithoutTop => {
                let top = v[0];
                v.iter().skip(1).map(|x| x / top).collect()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjectureBound {
    pub value: f64,
    /// `S`, the exponent sum used.
    pub s: f64,
    /// Number of lengths `n`.
    pub n: usize,
    /// `K·e^S = ε`: the log factor vanishes.
    pub degenerate: bool,
    /// `K·e^S < ε`: evaluated with `|log|`.
    pub sign_warning: bool,
}

/// `(K e^S / ε)·(log(K e^S) − log ε)^{n−1}` with `S` the sum of the first
/// `n−1` nonnegative supplied exponents.
pub fn conjecture_bound(inputs: &BoundInputs) -> Result<ConjectureBound, BoundsError> {
    inputs.check()?;
    let eps = inputs.epsilon;
    if !(eps > 0.0) {
        return Err(BoundsError::NonPositiveEpsilon(eps));
    }
    let exps = inputs.exponents.as_ref().ok_or(BoundsError::MissingExponents)?;
    let n = inputs.lengths.len();
    let s: f64 = exps.iter().filter(|x| **x >= 0.0).take(n.saturating_sub(1)).sum();
    let a = inputs.k * s.exp();
    let log_term = a.ln() - eps.ln();
    Ok(ConjectureBound {
        value: a / eps * log_term.abs().powi(n as i32 - 1),
        s,
        n,
        degenerate: log_term == 0.0,
        sign_warning: log_term < 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsPolicy {
    Given {
        c: f64,
        k: f64,
    },
    /// Smallest `C ≥ 1` (up to a `1e-12` relative margin) with `K = 1` that
    /// makes every theorem row pass.
    Calibrate,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub tau_s_simulated: Option<f64>,
    pub proved_permanent: bool,
    pub theorem_bound: f64,
    pub conjecture_bound: f64,
    pub pass_theorem: bool,
    pub pass_conjecture: bool,
    pub c: f64,
    pub k: f64,
    pub flags: Vec<String>,
}

impl SweepRow {
    pub fn inconclusive(&self) -> bool {
        self.flags.iter().any(|f| f == "inconclusive")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub graph: String,
    pub v_star: String,
    pub horizon: f64,
    pub convention: ExponentConvention,
    pub exponents: Vec<f64>,
    pub calibrated: bool,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass_theorem && r.pass_conjecture)
    }

    pub fn any_inconclusive(&self) -> bool {
        self.rows.iter().any(|r| r.inconclusive())
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub graph_name: String,
    pub v_star: String,
    pub eps_grid: Vec<f64>,
    pub horizon: f64,
    pub confirm_window: Option<f64>,
    pub caps: SimCaps,
    pub policy: ConstantsPolicy,
    pub convention: ExponentConvention,
    /// Exponents in `convention`, descending.
    pub exponents: Vec<f64>,
}

/// Simulates every `ε` (in parallel) and evaluates both bounds per row.
pub fn verify_bounds_sweep(graph: &MetricGraph, config: &SweepConfig) -> Result<SweepTable, BoundsError> {
    if config.eps_grid.is_empty() {
        return Err(BoundsError::EmptyGrid);
    }
    let lengths: Vec<f64> = graph.edges().iter().map(|e| e.length.to_f64()).collect();
    let sims = config
        .eps_grid
        .par_iter()
        .map(|&eps| {
            let window = config.confirm_window.unwrap_or(0.2 * config.horizon);
            permanent_saturation_moment(graph, &config.v_star, eps, config.horizon, window, &config.caps)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (c, k) = match config.policy {
        ConstantsPolicy::Given { c, k } => (c, k),
        ConstantsPolicy::Calibrate => {
            let mut c: f64 = 1.0;
            for (eps, sim) in config.eps_grid.iter().zip(&sims) {
                if let Some(tau) = sim.permanent_moment {
                    let unit = theorem_bound(&BoundInputs {
                        lengths: lengths.clone(),
                        epsilon: *eps,
                        c: 1.0,
                        k: 1.0,
                        exponents: None,
                    })?;
                    c = c.max(tau / unit);
                }
            }
            // one ulp-scale margin so the binding row survives rounding
            (c * (1.0 + 1e-12), 1.0)
        }
    };
    let calibrated = config.policy == ConstantsPolicy::Calibrate;
    let mut rows = Vec::with_capacity(sims.len());
    for (&eps, sim) in config.eps_grid.iter().zip(&sims) {
        let inputs = BoundInputs {
            lengths: lengths.clone(),
            epsilon: eps,
            c,
            k,
            exponents: Some(config.exponents.clone()),
        };
        let theorem = theorem_bound(&inputs)?;
        let conj = conjecture_bound(&inputs)?;
        let mut flags = Vec::new();
        if calibrated {
            flags.push("calibration".to_string());
        }
        if sim.truncated {
            flags.push("truncated".to_string());
        }
        if sim.truncated || sim.permanent_moment.is_none() {
            flags.push("inconclusive".to_string());
        }
        if conj.degenerate {
            flags.push("conjecture_degenerate".to_string());
        }
        if conj.sign_warning {
            flags.push("conjecture_sign_warning".to_string());
        }
        let tau = sim.permanent_moment;
        rows.push(SweepRow {
            epsilon: eps,
            tau_s_simulated: tau,
            proved_permanent: sim.proved_permanent,
            theorem_bound: theorem,
            conjecture_bound: conj.value,
            pass_theorem: tau.is_some_and(|t| t <= theorem),
            pass_conjecture: tau.is_some_and(|t| t <= conj.value),
            c,
            k,
            flags,
        });
    }
    Ok(SweepTable {
        graph: config.graph_name.clone(),
        v_star: config.v_star.clone(),
        horizon: config.horizon,
        convention: config.convention,
        exponents: config.exponents.clone(),
        calibrated,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k4_lengths() -> Vec<f64> {
        [2.0f64, 3.0, 5.0, 7.0, 11.0, 13.0].iter().map(|x| x.sqrt()).collect()
    }

    fn inputs(lengths: Vec<f64>, eps: f64, c: f64, k: f64) -> BoundInputs {
        BoundInputs {
            lengths,
            epsilon: eps,
            c,
            k,
            exponents: Some(vec![0.0]),
        }
    }

    #[test]
    fn theorem_values() {
        let b = theorem_bound(&inputs(k4_lengths(), 0.1, 1.0, 1.0)).unwrap();
        let expected = 10.0 * 13f64.powf(0.9 / 1.1 / 2.0);
        assert!((b - expected).abs() < 1e-12);
        assert!((b - 28.55).abs() < 0.01);
        for eps in [0.05, 0.3, 0.9] {
            let one = theorem_bound(&inputs(vec![1.0], eps, 1.0, 1.0)).unwrap();
            assert!((one - 1.0 / eps).abs() < 1e-12);
            let k1 = theorem_bound(&inputs(k4_lengths(), eps, 1.0, 1.0)).unwrap();
            let k2 = theorem_bound(&inputs(k4_lengths(), eps, 1.0, 2.0)).unwrap();
            assert!((k2 / k1 - 2f64.powf((1.0 - eps) / (1.0 + eps))).abs() < 1e-12);
        }
        assert!(matches!(
            theorem_bound(&inputs(vec![1.0], 1.0, 1.0, 1.0)),
            Err(BoundsError::EpsilonDomain(_))
        ));
    }

    #[test]
    fn conjecture_values() {
        let b = conjecture_bound(&inputs(vec![1.0, 2.0], 0.1, 1.0, 1.0)).unwrap();
        assert!((b.value - 10.0 * 10f64.ln()).abs() < 1e-12);
        let flat = conjecture_bound(&inputs(vec![1.0, 2.0], 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(flat.value, 0.0);
        assert!(flat.degenerate);
        let below = conjecture_bound(&inputs(vec![1.0, 2.0], 2.0, 1.0, 1.0)).unwrap();
        assert!(below.sign_warning && below.value > 0.0);
        let mut missing = inputs(vec![1.0], 0.1, 1.0, 1.0);
        missing.exponents = None;
        assert!(matches!(conjecture_bound(&missing), Err(BoundsError::MissingExponents)));
    }

    #[test]
    fn conventions() {
        let per_step = [0.2, -0.2, 0.0, 0.1];
        assert_eq!(
            ExponentConvention::Normalized.select(&per_step),
            vec![1.0, 0.5, 0.0, -1.0]
        );
        assert_eq!(
            ExponentConvention::NormalizedWithoutTop.select(&per_step),
            vec![0.5, 0.0, -1.0]
        );
        assert_eq!(ExponentConvention::PerStep.select(&per_step), vec![0.2, 0.1, 0.0, -0.2]);
    }
}
