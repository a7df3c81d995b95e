//! CSV renderings of traces, timelines, spectra and sweep tables.

use serde::Serialize;

use crate::bounds::SweepTable;
use crate::rauzy::RauzyTrace;
use crate::saturation::SaturationTimeline;
use crate::spectra::SpectrumReport;

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    #[serde(rename = "type")]
    step_type: u8,
    winner: String,
    loser: String,
    log_norm_q: f64,
    balance_ratio: f64,
    min_lambda: f64,
    max_lambda: f64,
}

#[derive(Serialize)]
struct TimelineRow {
    time: f64,
    direction: &'static str,
    global_gap: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    theta: f64,
    normalized: f64,
}

#[derive(Serialize)]
struct SweepRowOut {
    epsilon: f64,
    tau_s_simulated: String,
    theorem_bound: f64,
    conjecture_bound: f64,
    pass_theorem: bool,
    pass_conjecture: bool,
    constants: String,
    flags: String,
}

/// Header first, so an empty table still names its columns.
fn render<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.serialize(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

pub fn trace_csv(trace: &RauzyTrace) -> String {
    let letters = trace.initial.letters();
    let header = [
        "step",
        "type",
        "winner",
        "loser",
        "log_norm_q",
        "balance_ratio",
        "min_lambda",
        "max_lambda",
    ];
    render(
        &header,
        trace.steps.iter().enumerate().map(|(i, s)| {
            let lo = s.lambda_after.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.lambda_after.iter().cloned().fold(0.0, f64::max);
            TraceRow {
                step: i + 1,
                step_type: s.step_type,
                winner: letters[s.winner].clone(),
                loser: letters[s.loser].clone(),
                log_norm_q: s.log_norm_q,
                balance_ratio: (s.log_max_height - s.log_min_height).exp(),
                min_lambda: lo,
                max_lambda: hi,
            }
        }),
    )
}

pub fn timeline_csv(timeline: &SaturationTimeline) -> String {
    render(
        &["time", "direction", "global_gap"],
        timeline.events.iter().map(|e| TimelineRow {
            time: e.time,
            direction: e.direction.name(),
            global_gap: e.global_gap,
        }),
    )
}

pub fn spectrum_csv(report: &SpectrumReport) -> String {
    render(
        &["index", "theta", "normalized"],
        report
            .exponents
            .iter()
            .zip(&report.normalized)
            .enumerate()
            .map(|(i, (t, n))| SpectrumRow {
                index: i + 1,
                theta: *t,
                normalized: *n,
            }),
    )
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let header = [
        "epsilon",
        "tau_s_simulated",
        "theorem_bound",
        "conjecture_bound",
        "pass_theorem",
        "pass_conjecture",
        "constants",
        "flags",
    ];
    render(
        &header,
        table.rows.iter().map(|r| SweepRowOut {
            epsilon: r.epsilon,
            tau_s_simulated: r.tau_s_simulated.map(|t| t.to_string()).unwrap_or_default(),
            theorem_bound: r.theorem_bound,
            conjecture_bound: r.conjecture_bound,
            pass_theorem: r.pass_theorem,
            pass_conjecture: r.pass_conjecture,
            constants: format!("C={};K={}", r.c, r.k),
            flags: r.flags.join(";"),
        }),
    )
}
