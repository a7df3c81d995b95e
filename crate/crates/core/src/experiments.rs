//! End-to-end pipelines shared by the command line and the tests.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::bounds::{verify_bounds_sweep, BoundsError, ConstantsPolicy, ExponentConvention, SweepConfig, SweepTable};
use crate::graph::{GraphError, MetricGraph};
use crate::iet::IetData;
use crate::rauzy::{run_path, run_path_exact, RauzyError, RauzyTrace};
use crate::reduction::{build_iet_from_graph, CyclePolicy, Reduction, ReductionError};
use crate::saturation::SimCaps;
use crate::spectra::{lyapunov_spectrum, SpectraError, SpectrumReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Rauzy(#[from] RauzyError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("bad epsilon grid {0:?} (expected start:end:step or a comma list)")]
    BadGrid(String),
    #[error("unknown experiment {0:?} (expected k4, star or triangle)")]
    UnknownExperiment(String),
    #[error("graph has no vertices")]
    NoVertices,
}

/// A built-in graph name or a path to a graph JSON file.
pub fn load_graph(source: &str) -> Result<MetricGraph, ExperimentError> {
    if let Ok(g) = MetricGraph::builtin(source) {
        return Ok(g);
    }
    let text = std::fs::read_to_string(Path::new(source)).map_err(|e| ExperimentError::Io {
        path: source.to_string(),
        source: e,
    })?;
    Ok(MetricGraph::from_json(&text)?)
}

/// `start:end:step` (inclusive, rounded to the step) or `a,b,c`.
pub fn parse_eps_grid(text: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::BadGrid(text.to_string());
    let parts: Vec<&str> = text.split(':').collect();
    let grid: Vec<f64> = match parts.len() {
        1 => text
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?,
        3 => {
            let nums: Vec<f64> = parts
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            let (start, end, step) = (nums[0], nums[1], nums[2]);
            if !(step > 0.0) || end < start {
                return Err(bad());
            }
            let count = ((end - start) / step + 1e-9).floor() as usize;
            (0..=count)
                .map(|i| {
                    let v = start + i as f64 * step;
                    (v * 1e12).round() / 1e12
                })
                .collect()
        }
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|e| !(*e > 0.0)) {
        return Err(bad());
    }
    Ok(grid)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumRun {
    pub policy: String,
    pub d: usize,
    pub steps: usize,
    /// Lengths were carried exactly.
    pub exact: bool,
    /// An exact tie ended the run early.
    pub stopped_on_tie: bool,
    pub report: SpectrumReport,
}

/// Rauzy trace of a graph exchange with exact lengths; a tie ends the run
/// early and the partial trace is kept.
pub fn graph_trace(reduction: &Reduction, steps: usize) -> Result<(RauzyTrace, bool), ExperimentError> {
    match run_path_exact(&reduction.iet, &reduction.exact_lengths, steps, 0.0) {
        Ok(t) => Ok((t, false)),
        Err(RauzyError::Degenerate { partial, .. }) => Ok((*partial, true)),
        Err(e) => Err(e.into()),
    }
}

pub fn graph_spectrum(graph: &MetricGraph, policy: &CyclePolicy, steps: usize) -> Result<SpectrumRun, ExperimentError> {
    let reduction = build_iet_from_graph(graph, policy)?;
    let (trace, tie) = graph_trace(&reduction, steps)?;
    let report = lyapunov_spectrum(&trace, 10)?;
    Ok(SpectrumRun {
        policy: policy.to_string(),
        d: reduction.iet.d(),
        steps: trace.len(),
        exact: true,
        stopped_on_tie: tie,
        report,
    })
}

pub fn iet_spectrum(iet: &IetData, steps: usize) -> Result<SpectrumRun, ExperimentError> {
    let (trace, tie) = match run_path(iet, steps, 0.0) {
        Ok(t) => (t, false),
        Err(RauzyError::Degenerate { partial, .. }) => (*partial, true),
        Err(e) => return Err(e.into()),
    };
    let report = lyapunov_spectrum(&trace, 10)?;
    Ok(SpectrumRun {
        policy: "iet".into(),
        d: iet.d(),
        steps: trace.len(),
        exact: false,
        stopped_on_tie: tie,
        report,
    })
}

#[derive(Clone, Debug)]
pub struct ReproConfig {
    pub eps_grid: Vec<f64>,
    pub horizon: f64,
    pub confirm_window: Option<f64>,
    pub policy: ConstantsPolicy,
    pub convention: ExponentConvention,
    pub cycle: CyclePolicy,
    pub spectrum_steps: usize,
    pub caps: SimCaps,
    pub v_star: Option<String>,
}

impl Default for ReproConfig {
    fn default() -> Self {
        ReproConfig {
            eps_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            horizon: 1000.0,
            confirm_window: None,
            policy: ConstantsPolicy::Calibrate,
            convention: ExponentConvention::NormalizedWithoutTop,
            cycle: CyclePolicy::Full,
            spectrum_steps: 3000,
            caps: SimCaps::default(),
            v_star: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproOutput {
    pub graph: String,
    pub spectrum: SpectrumRun,
    pub sweep: SweepTable,
    /// Simulated moments do not increase with ε (beyond `tolerance`).
    pub monotone: bool,
    pub tolerance: f64,
}

impl ReproOutput {
    /// Every row finite, monotone, and under both bounds.
    pub fn verified(&self) -> bool {
        self.monotone && !self.sweep.any_inconclusive() && self.sweep.all_pass()
    }
}

pub fn repro_graph(name: &str) -> Result<MetricGraph, ExperimentError> {
    match name {
        "k4" => Ok(MetricGraph::k4()),
        "star" | "star5" => Ok(MetricGraph::star5()),
        "triangle" => Ok(MetricGraph::triangle()),
        other => Err(ExperimentError::UnknownExperiment(other.to_string())),
    }
}

/// Sweep for a graph: exponents from its exchange, simulated moments,
/// and both bounds per ε.
pub fn run_sweep(graph: &MetricGraph, label: &str, config: &ReproConfig) -> Result<ReproOutput, ExperimentError> {
    let spectrum = graph_spectrum(graph, &config.cycle, config.spectrum_steps)?;
    let exponents = config.convention.select(&spectrum.report.exponents);
    let v_star = match &config.v_star {
        Some(v) => v.clone(),
        None => graph.vertices().first().cloned().ok_or(ExperimentError::NoVertices)?,
    };
    let sweep = verify_bounds_sweep(
        graph,
        &SweepConfig {
            graph_name: label.to_string(),
            v_star,
            eps_grid: config.eps_grid.clone(),
            horizon: config.horizon,
            confirm_window: config.confirm_window,
            caps: config.caps.clone(),
            policy: config.policy.clone(),
            convention: config.convention,
            exponents,
        },
    )?;
    let tolerance = 10.0 * config.caps.min_step;
    let mut by_eps: Vec<(f64, Option<f64>)> = sweep.rows.iter().map(|r| (r.epsilon, r.tau_s_simulated)).collect();
    by_eps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = by_eps.windows(2).all(|w| match (w[0].1, w[1].1) {
        (Some(a), Some(b)) => b <= a + tolerance,
        _ => false,
    });
    Ok(ReproOutput {
        graph: label.to_string(),
        spectrum,
        sweep,
        monotone,
        tolerance,
    })
}

pub fn repro(name: &str, config: &ReproConfig) -> Result<ReproOutput, ExperimentError> {
    let graph = repro_graph(name)?;
    run_sweep(&graph, name, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_eps_grid("0.1:0.5:0.1").unwrap(), vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(parse_eps_grid("0.25,0.5").unwrap(), vec![0.25, 0.5]);
        assert!(parse_eps_grid("0.5:0.1:0.1").is_err());
        assert!(parse_eps_grid("x").is_err());
        assert!(parse_eps_grid("0,0.1").is_err());
    }

    #[test]
    fn builtin_or_file() {
        assert_eq!(load_graph("k4").unwrap().edges().len(), 6);
        assert!(matches!(
            load_graph("/no/such/file.json"),
            Err(ExperimentError::Io { .. })
        ));
    }
}
