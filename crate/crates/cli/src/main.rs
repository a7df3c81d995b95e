//! `ietgraph` command line.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 rejected input,
//! 3 truncated or inconclusive result.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ietgraph::bounds::{verify_bounds_sweep, ConstantsPolicy, ExponentConvention, SweepConfig};
use ietgraph::experiments::{
    graph_trace, load_graph, parse_eps_grid, repro, ExperimentError, ReproConfig, SpectrumRun,
};
use ietgraph::export;
use ietgraph::iet::IetData;
use ietgraph::rauzy::{run_path, RauzyError, RauzyTrace};
use ietgraph::reduction::{build_iet_from_graph, CyclePolicy};
use ietgraph::saturation::{permanent_saturation_moment, SimCaps};
use ietgraph::spectra::{lyapunov_spectrum, SpectraError};

#[derive(Parser)]
#[command(
    name = "ietgraph",
    version,
    about = "Metric graphs, interval exchanges and saturation bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Given,
    Calibrate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Normalized,
    NormalizedWithoutTop,
    PerStep,
}

impl From<Convention> for ExponentConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Normalized => ExponentConvention::Normalized,
            Convention::NormalizedWithoutTop => ExponentConvention::NormalizedWithoutTop,
            Convention::PerStep => ExponentConvention::PerStep,
        }
    }
}

#[derive(clap::Args)]
struct Source {
    /// Built-in graph (k4, triangle, star5) or graph JSON file.
    #[arg(long)]
    graph: Option<String>,
    /// Exchange JSON file, instead of a graph.
    #[arg(long, conflicts_with = "graph")]
    iet: Option<PathBuf>,
    /// `full`, `cycles` or `cycle:<letter>`.
    #[arg(long, default_value = "full")]
    cycle: String,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a graph to an interval exchange.
    BuildIet {
        #[arg(long)]
        graph: String,
        #[arg(long, default_value = "full")]
        cycle: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run Rauzy–Veech induction and write the trace.
    Rauzy {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Exponent used by the balance diagnostics.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Simulate the moving points and track ε-saturation.
    Simulate {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        vstar: Option<String>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1000.0)]
        horizon: f64,
        /// Required saturated tail; defaults to 20% of the horizon.
        #[arg(long)]
        confirm: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        max_phases: usize,
        /// First edge at the start vertex.
        #[arg(long)]
        first_edge: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Estimate the Lyapunov spectrum.
    Spectrum {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 3000)]
        steps: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare simulated saturation moments with both bounds over an ε grid.
    Bounds {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        vstar: Option<String>,
        /// `start:end:step` or a comma list.
        #[arg(long, default_value = "0.1:0.5:0.1")]
        eps: String,
        #[arg(long, default_value_t = 1000.0)]
        horizon: f64,
        /// `C,K` for the given policy.
        #[arg(long, default_value = "1,1")]
        constants: String,
        #[arg(long, value_enum, default_value_t = Policy::Given)]
        policy: Policy,
        #[arg(long, value_enum, default_value_t = Convention::NormalizedWithoutTop)]
        convention: Convention,
        #[arg(long, default_value = "full")]
        cycle: String,
        #[arg(long, default_value_t = 3000)]
        steps: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// End-to-end sweep on a named configuration with calibrated C and K = 1.
    Repro {
        #[arg(value_parser = ["k4", "star", "triangle"])]
        name: String,
        #[arg(long, default_value = "0.1:0.5:0.1")]
        eps: String,
        #[arg(long, default_value_t = 1000.0)]
        horizon: f64,
        #[arg(long, value_enum, default_value_t = Convention::NormalizedWithoutTop)]
        convention: Convention,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

enum Failure {
    Io(String),
    Rejected(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Rejected(other.to_string()),
        }
    }
}

macro_rules! rejected {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Rejected(e.to_string())
            }
        }
    )*};
}

rejected!(
    ietgraph::reduction::ReductionError,
    ietgraph::rauzy::RauzyError,
    ietgraph::spectra::SpectraError,
    ietgraph::saturation::SaturationError,
    ietgraph::bounds::BoundsError,
    ietgraph::graph::GraphError
);

/// What a command produced: the artifact, a short summary, and whether the
/// result is conclusive.
struct Outcome {
    artifact: String,
    summary: serde_json::Value,
    conclusive: bool,
}

fn emit(outcome: &Outcome, output: &Option<PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => {
            std::fs::write(path, &outcome.artifact).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("json"));
        }
        None => print!("{}", outcome.artifact),
    }
    Ok(())
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json");
    s.push('\n');
    s
}

fn policy(text: &str) -> Result<CyclePolicy, Failure> {
    Ok(text.parse::<CyclePolicy>()?)
}

fn load_iet(path: &PathBuf) -> Result<IetData, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Rejected(format!("{}: {e}", path.display())))
}

fn trace_for(source: &Source, steps: usize) -> Result<(RauzyTrace, bool), Failure> {
    match (&source.graph, &source.iet) {
        (Some(g), _) => {
            let graph = load_graph(g)?;
            let reduction = build_iet_from_graph(&graph, &policy(&source.cycle)?)?;
            Ok(graph_trace(&reduction, steps)?)
        }
        (None, Some(path)) => {
            let iet = load_iet(path)?;
            match run_path(&iet, steps, 0.0) {
                Ok(t) => Ok((t, false)),
                Err(RauzyError::Degenerate { partial, .. }) => Ok((*partial, true)),
                Err(e) => Err(e.into()),
            }
        }
        (None, None) => Err(Failure::Rejected("one of --graph or --iet is required".into())),
    }
}

fn parse_constants(text: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    let bad = || Failure::Rejected(format!("bad constants {text:?} (expected C,K)"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let c = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let k = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    Ok((c, k))
}

fn spectrum_outcome(run: &SpectrumRun, format: Format) -> Outcome {
    Outcome {
        artifact: match format {
            Format::Csv => export::spectrum_csv(&run.report),
            Format::Json => pretty(run),
        },
        summary: json!({
            "d": run.d,
            "steps": run.steps,
            "stopped_on_tie": run.stopped_on_tie,
            "exponents": run.report.exponents,
            "drift": run.report.drift,
        }),
        conclusive: true,
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::BuildIet { graph, cycle, output } => {
            let g = load_graph(&graph)?;
            let red = build_iet_from_graph(&g, &policy(&cycle)?)?;
            let outcome = Outcome {
                artifact: pretty(&json!({ "report": red.report, "iet": red.iet })),
                summary: json!({
                    "letters": red.iet.d(),
                    "transitions": red.report.transitions,
                    "cycles": red.report.cycles.len(),
                    "irreducible": red.report.irreducible,
                }),
                conclusive: true,
            };
            emit(&outcome, &output)?;
            Ok(true)
        }
        Command::Rauzy {
            source,
            steps,
            eps,
            output,
            format,
        } => {
            let (trace, tie) = trace_for(&source, steps)?;
            let diag = trace.balance_and_diophantine(eps);
            let summary = json!({
                "steps": trace.len(),
                "stop": format!("{:?}", trace.stop),
                "stopped_on_tie": tie,
                "reconstruction_error": trace.max_reconstruction_error,
                "c_eps": diag.c_eps,
                "c_prime_eps": diag.c_prime_eps,
                "height_constant": diag.height_constant,
                "cell_ratio_tail_fraction": diag.cell_ratio_tail_fraction,
            });
            let outcome = Outcome {
                artifact: match format {
                    Format::Csv => export::trace_csv(&trace),
                    Format::Json => pretty(&json!({ "summary": summary, "diagnostics": diag })),
                },
                summary,
                conclusive: true,
            };
            emit(&outcome, &output)?;
            Ok(true)
        }
        Command::Simulate {
            graph,
            vstar,
            eps,
            horizon,
            confirm,
            max_phases,
            first_edge,
            output,
            format,
        } => {
            let g = load_graph(&graph)?;
            let v = match vstar {
                Some(v) => v,
                None => g.vertices().first().cloned().ok_or(ExperimentError::NoVertices)?,
            };
            let caps = SimCaps {
                max_phases,
                first_edge,
                ..SimCaps::default()
            };
            let tl = permanent_saturation_moment(&g, &v, eps, horizon, confirm.unwrap_or(0.2 * horizon), &caps)?;
            let summary = json!({
                "epsilon": tl.epsilon,
                "permanent_moment": tl.permanent_moment,
                "certified_to": tl.certified_to,
                "proved_permanent": tl.proved_permanent,
                "truncated": tl.truncated,
                "phases": tl.phase_count,
                "events": tl.events.len(),
            });
            let outcome = Outcome {
                artifact: match format {
                    Format::Csv => export::timeline_csv(&tl),
                    Format::Json => pretty(&tl),
                },
                summary,
                conclusive: tl.permanent_moment.is_some() && !tl.truncated,
            };
            emit(&outcome, &output)?;
            Ok(outcome.conclusive)
        }
        Command::Spectrum {
            source,
            steps,
            output,
            format,
        } => {
            let (trace, tie) = trace_for(&source, steps)?;
            // a trace cut short by a tie still yields a partial report
            let (report, complete) = match lyapunov_spectrum(&trace, 10) {
                Ok(r) => (r, true),
                Err(SpectraError::InsufficientData { len, needed, partial }) => {
                    eprintln!("induction stopped after {len} steps, {needed} needed");
                    (*partial, false)
                }
                Err(e) => return Err(e.into()),
            };
            let run = SpectrumRun {
                policy: if source.graph.is_some() {
                    source.cycle.clone()
                } else {
                    "iet".into()
                },
                d: trace.d(),
                steps: trace.len(),
                exact: source.graph.is_some(),
                stopped_on_tie: tie,
                report,
            };
            let mut outcome = spectrum_outcome(&run, format);
            outcome.conclusive = complete;
            emit(&outcome, &output)?;
            Ok(complete)
        }
        Command::Bounds {
            graph,
            vstar,
            eps,
            horizon,
            constants,
            policy: pol,
            convention,
            cycle,
            steps,
            output,
            format,
        } => {
            let g = load_graph(&graph)?;
            let grid = parse_eps_grid(&eps)?;
            let constants_policy = match pol {
                Policy::Given => {
                    let (c, k) = parse_constants(&constants)?;
                    ConstantsPolicy::Given { c, k }
                }
                Policy::Calibrate => ConstantsPolicy::Calibrate,
            };
            let spectrum = ietgraph::experiments::graph_spectrum(&g, &policy(&cycle)?, steps)?;
            let convention: ExponentConvention = convention.into();
            let v = match vstar {
                Some(v) => v,
                None => g.vertices().first().cloned().ok_or(ExperimentError::NoVertices)?,
            };
            let table = verify_bounds_sweep(
                &g,
                &SweepConfig {
                    graph_name: graph.clone(),
                    v_star: v,
                    eps_grid: grid,
                    horizon,
                    confirm_window: None,
                    caps: SimCaps::default(),
                    policy: constants_policy,
                    convention,
                    exponents: convention.select(&spectrum.report.exponents),
                },
            )?;
            let outcome = Outcome {
                artifact: match format {
                    Format::Csv => export::sweep_csv(&table),
                    Format::Json => pretty(&table),
                },
                summary: json!({
                    "rows": table.rows.len(),
                    "all_pass": table.all_pass(),
                    "inconclusive": table.any_inconclusive(),
                    "calibrated": table.calibrated,
                    "convention": convention.name(),
                }),
                conclusive: !table.any_inconclusive(),
            };
            emit(&outcome, &output)?;
            Ok(outcome.conclusive)
        }
        Command::Repro {
            name,
            eps,
            horizon,
            convention,
            output,
            format,
        } => {
            let config = ReproConfig {
                eps_grid: parse_eps_grid(&eps)?,
                horizon,
                convention: convention.into(),
                ..ReproConfig::default()
            };
            let out = repro(&name, &config)?;
            let c = out.sweep.rows.first().map(|r| r.c);
            let outcome = Outcome {
                artifact: match format {
                    Format::Csv => export::sweep_csv(&out.sweep),
                    Format::Json => pretty(&out),
                },
                summary: json!({
                    "graph": out.graph,
                    "calibrated_c": c,
                    "monotone": out.monotone,
                    "verified": out.verified(),
                    "inconclusive": out.sweep.any_inconclusive(),
                }),
                conclusive: !out.sweep.any_inconclusive(),
            };
            emit(&outcome, &output)?;
            Ok(outcome.conclusive)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var("IETGRAPH_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("result is truncated or inconclusive");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Rejected(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
