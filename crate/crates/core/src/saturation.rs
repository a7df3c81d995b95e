//! Dispersing moving points on a metric graph.
//!
//! A point on edge `e = (u, w)` of length `l` is stored by its phase
//! `θ ∈ [0, 2l)`: the times it sits at `u` are `θ + 2kl`, at `w` they are
//! `θ + (2k+1)l`. Its position measured from `u` is the triangle wave
//! `tri(t − θ)`. Vertex arrivals are processed in time order; an arrival at
//! `v` spawns a point on every other edge at `v` that has no point at `v`
//! at that instant.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, MetricGraph, Topology};

#[derive(Debug, Error)]
pub enum SaturationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("edge {edge} is not incident to {vertex}")]
    NotIncident { edge: String, vertex: String },
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
}

#[derive(Clone, Debug)]
pub struct SimCaps {
    /// Total phase budget over all edges.
    pub max_phases: usize,
    /// Smallest time step of the adaptive coverage scan.
    pub min_step: f64,
    /// First edge at `v*`; defaults to the head of its cyclic order.
    pub first_edge: Option<String>,
}

impl Default for SimCaps {
    fn default() -> Self {
        SimCaps {
            max_phases: 1_000_000,
            min_step: 1e-4,
            first_edge: None,
        }
    }
}

/// One moving point, as exported.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Phase {
    pub theta: f64,
    pub birth: f64,
}

/// Phases per edge, sorted by `theta`.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseSet {
    pub lengths: Vec<f64>,
    pub per_edge: Vec<Vec<Phase>>,
}

impl PhaseSet {
    pub fn len(&self) -> usize {
        self.per_edge.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpawnRecord {
    pub time: f64,
    pub edge: usize,
    pub theta: f64,
    pub parent_edge: usize,
    pub parent_theta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SwarmRun {
    pub phases: PhaseSet,
    pub reached: f64,
    pub arrivals: u64,
    pub suppressed: u64,
    pub truncated: bool,
    pub spawns: Vec<SpawnRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Arrival {
    time: f64,
    edge: usize,
    key: u64,
    m: i64,
}

impl Eq for Arrival {}

impl Ord for Arrival {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (time, edge, key)
        other
            .time
            .total_cmp(&self.time)
            .then(other.edge.cmp(&self.edge))
            .then(other.key.cmp(&self.key))
    }
}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Live simulation state; coverage can be queried at any time not later
/// than the last processed arrival.
pub struct Swarm {
    topo: Topology,
    phases: Vec<BTreeMap<u64, f64>>,
    queue: BinaryHeap<Arrival>,
    now: f64,
    arrivals: u64,
    suppressed: u64,
    total: usize,
    cap: usize,
    truncated: bool,
    log_spawns: bool,
    spawns: Vec<SpawnRecord>,
}

fn normalize_phase(theta: f64, period: f64) -> f64 {
    let p = theta.rem_euclid(period);
    if p >= period || p == 0.0 {
        0.0
    } else {
        p
    }
}

impl Swarm {
    pub fn new(graph: &MetricGraph, v_star: &str, caps: &SimCaps) -> Result<Self, SaturationError> {
        let topo = graph.topology()?;
        let v = topo
            .vertex_names
            .iter()
            .position(|n| n == v_star)
            .ok_or_else(|| SaturationError::UnknownVertex(v_star.to_string()))?;
        let e0 = match &caps.first_edge {
            None => topo.orders[v][0],
            Some(name) => {
                let e = topo
                    .edge_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| SaturationError::Graph(GraphError::UnknownEdge(name.clone())))?;
                if topo.ends[e].0 != v && topo.ends[e].1 != v {
                    return Err(SaturationError::NotIncident {
                        edge: name.clone(),
                        vertex: v_star.to_string(),
                    });
                }
                e
            }
        };
        let m = topo.edge_names.len();
        let mut swarm = Swarm {
            topo,
            phases: vec![BTreeMap::new(); m],
            queue: BinaryHeap::new(),
            now: 0.0,
            arrivals: 0,
            suppressed: 0,
            total: 0,
            cap: caps.max_phases,
            truncated: false,
            log_spawns: false,
            spawns: Vec::new(),
        };
        let l = swarm.topo.lengths[e0];
        let (theta, m0) = if swarm.topo.ends[e0].0 == v { (0.0, 0) } else { (l, -1) };
        swarm.phases[e0].insert(theta.to_bits(), 0.0);
        swarm.total = 1;
        // the initial point branches at v* right away
        swarm.queue.push(Arrival {
            time: 0.0,
            edge: e0,
            key: theta.to_bits(),
            m: m0,
        });
        Ok(swarm)
    }

    /// Keeps a spawn log for closed-form checks.
    pub fn with_spawn_log(mut self) -> Self {
        self.log_spawns = true;
        self
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn phase_count(&self) -> usize {
        self.total
    }

    fn has_phase_near(&self, e: usize, theta: f64) -> bool {
        let l = self.topo.lengths[e];
        let period = 2.0 * l;
        let delta = 1e-9 * l;
        let set = &self.phases[e];
        let near = |lo: f64, hi: f64| set.range(lo.max(0.0).to_bits()..=hi.to_bits()).next().is_some();
        if near(theta - delta, theta + delta) {
            return true;
        }
        if theta < delta && near(period - (delta - theta), period) {
            return true;
        }
        theta > period - delta && near(0.0, theta + delta - period)
    }

    /// Processes every arrival with time `≤ t`.
    pub fn advance_to(&mut self, t: f64) {
        while let Some(&next) = self.queue.peek() {
            if next.time > t || self.truncated {
                break;
            }
            self.queue.pop();
            self.arrivals += 1;
            let e = next.edge;
            let (u, w) = self.topo.ends[e];
            let v = if next.m.rem_euclid(2) == 0 { u } else { w };
            let parent_theta = f64::from_bits(next.key);
            for f in self.topo.orders[v].clone() {
                if f == e {
                    continue;
                }
                let lf = self.topo.lengths[f];
                let raw = if self.topo.ends[f].0 == v {
                    next.time
                } else {
                    next.time - lf
                };
                let theta = normalize_phase(raw, 2.0 * lf);
                if self.has_phase_near(f, theta) {
                    self.suppressed += 1;
                    continue;
                }
                if self.total >= self.cap {
                    self.truncated = true;
                    break;
                }
                self.phases[f].insert(theta.to_bits(), next.time);
                self.total += 1;
                if self.log_spawns {
                    self.spawns.push(SpawnRecord {
                        time: next.time,
                        edge: f,
                        theta,
                        parent_edge: e,
                        parent_theta,
                    });
                }
                let m0 = ((next.time - theta) / lf).round() as i64;
                self.queue.push(Arrival {
                    time: theta + (m0 + 1) as f64 * lf,
                    edge: f,
                    key: theta.to_bits(),
                    m: m0 + 1,
                });
            }
            let l = self.topo.lengths[e];
            self.queue.push(Arrival {
                time: parent_theta + (next.m + 1) as f64 * l,
                edge: e,
                key: next.key,
                m: next.m + 1,
            });
            self.now = self.now.max(next.time);
        }
        if !self.truncated {
            self.now = self.now.max(t);
        }
    }

    pub fn phase_set(&self) -> PhaseSet {
        PhaseSet {
            lengths: self.topo.lengths.clone(),
            per_edge: self
                .phases
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|(k, b)| Phase {
                            theta: f64::from_bits(*k),
                            birth: *b,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Coverage at `t`, counting only points born by `t`.
    pub fn coverage(&self, t: f64) -> GapReport {
        let positions: Vec<Vec<f64>> = (0..self.phases.len())
            .map(|e| {
                let l = self.topo.lengths[e];
                let set = &self.phases[e];
                let r = normalize_phase(t, 2.0 * l);
                // circle coordinate t − θ ascending: θ ≤ r descending, then θ > r descending
                let low = set.range(..=r.to_bits()).rev();
                let high = set
                    .range(r.to_bits()..)
                    .rev()
                    .filter(move |(k, _)| f64::from_bits(**k) > r);
                let circle = low
                    .map(move |(k, b)| (r - f64::from_bits(*k), *b))
                    .chain(high.map(move |(k, b)| (r - f64::from_bits(*k) + 2.0 * l, *b)))
                    .filter(|(_, b)| *b <= t + 1e-12)
                    .map(|(s, _)| s);
                fold_sorted(circle, l)
            })
            .collect();
        gap_from_positions(&self.topo, &positions)
    }

    /// Largest circular gap between phases on each edge. When every edge has
    /// gap `≤ 2ε` the configuration is an ε-net at all later times, since
    /// phases never disappear and the point set rotates rigidly.
    pub fn circular_gaps(&self) -> Vec<f64> {
        self.phases
            .iter()
            .enumerate()
            .map(|(e, set)| {
                let period = 2.0 * self.topo.lengths[e];
                let mut prev: Option<f64> = None;
                let mut first = 0.0;
                let mut gap: f64 = 0.0;
                for k in set.keys() {
                    let x = f64::from_bits(*k);
                    match prev {
                        None => first = x,
                        Some(p) => gap = gap.max(x - p),
                    }
                    prev = Some(x);
                }
                match prev {
                    None => f64::INFINITY,
                    Some(p) => gap.max(first + period - p),
                }
            })
            .collect()
    }

    pub fn finish(self) -> SwarmRun {
        SwarmRun {
            phases: self.phase_set(),
            reached: self.now,
            arrivals: self.arrivals,
            suppressed: self.suppressed,
            truncated: self.truncated,
            spawns: self.spawns,
        }
    }
}

/// Folds ascending circle coordinates in `[0, 2l)` onto the edge `[0, l]`,
/// returning sorted positions.
fn fold_sorted(circle: impl Iterator<Item = f64>, l: f64) -> Vec<f64> {
    let mut up = Vec::new();
    let mut down = Vec::new();
    for s in circle {
        if s <= l {
            up.push(s);
        } else {
            down.push(2.0 * l - s);
        }
    }
    down.reverse();
    let mut out = Vec::with_capacity(up.len() + down.len());
    let (mut i, mut j) = (0, 0);
    while i < up.len() || j < down.len() {
        if j >= down.len() || (i < up.len() && up[i] <= down[j]) {
            out.push(up[i]);
            i += 1;
        } else {
            out.push(down[j]);
            j += 1;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub per_edge: Vec<f64>,
    pub vertex_distance: Vec<f64>,
    pub global: f64,
}

impl GapReport {
    pub fn is_net(&self, eps: f64) -> bool {
        self.global <= eps
    }
}

/// Largest distance from a point of `[0, l]` to the nearest of the sorted
/// `positions`, where the endpoints are also covered from outside at
/// distances `a_u` and `a_w`.
pub fn edge_max_gap(l: f64, positions: &[f64], a_u: f64, a_w: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut prev = -a_u;
    for &y in positions.iter().chain(std::iter::once(&(l + a_w))) {
        let lo = prev.max(0.0);
        let hi = y.min(l);
        if lo <= hi {
            let mid = if prev.is_finite() && y.is_finite() {
                (prev + y) / 2.0
            } else if prev.is_finite() {
                hi
            } else {
                lo
            };
            let p = mid.clamp(lo, hi);
            best = best.max((p - prev).min(y - p));
        }
        prev = y;
    }
    best
}

fn gap_from_positions(topo: &Topology, positions: &[Vec<f64>]) -> GapReport {
    let n = topo.vertex_names.len();
    let mut a = vec![f64::INFINITY; n];
    for (e, pos) in positions.iter().enumerate() {
        if let (Some(first), Some(last)) = (pos.first(), pos.last()) {
            let (u, w) = topo.ends[e];
            a[u] = a[u].min(*first);
            a[w] = a[w].min(topo.lengths[e] - last);
        }
    }
    // vertex distances through the graph
    loop {
        let mut changed = false;
        for (e, &(u, w)) in topo.ends.iter().enumerate() {
            let l = topo.lengths[e];
            if a[w] + l < a[u] {
                a[u] = a[w] + l;
                changed = true;
            }
            if a[u] + l < a[w] {
                a[w] = a[u] + l;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let per_edge: Vec<f64> = positions
        .iter()
        .enumerate()
        .map(|(e, pos)| {
            let (u, w) = topo.ends[e];
            edge_max_gap(topo.lengths[e], pos, a[u], a[w])
        })
        .collect();
    let global = per_edge.iter().cloned().fold(0.0, f64::max);
    GapReport {
        per_edge,
        vertex_distance: a,
        global,
    }
}

/// Coverage of an exported phase set at time `t`.
pub fn coverage_gap(topo: &Topology, phases: &PhaseSet, t: f64) -> GapReport {
    let positions: Vec<Vec<f64>> = phases
        .per_edge
        .iter()
        .enumerate()
        .map(|(e, ph)| {
            let l = topo.lengths[e];
            let mut pos: Vec<f64> = ph
                .iter()
                .filter(|p| p.birth <= t + 1e-12)
                .map(|p| triangle_position(t - p.theta, l))
                .collect();
            pos.sort_by(f64::total_cmp);
            pos
        })
        .collect();
    gap_from_positions(topo, &positions)
}

/// Position from the first endpoint after travelling `s` from it.
pub fn triangle_position(s: f64, l: f64) -> f64 {
    let c = s.rem_euclid(2.0 * l);
    if c <= l {
        c
    } else {
        2.0 * l - c
    }
}

/// Runs the swarm to `horizon` without coverage tracking.
pub fn simulate_swarm(
    graph: &MetricGraph,
    v_star: &str,
    horizon: f64,
    caps: &SimCaps,
) -> Result<SwarmRun, SaturationError> {
    if !(horizon > 0.0) {
        return Err(SaturationError::BadHorizon(horizon));
    }
    let mut swarm = Swarm::new(graph, v_star, caps)?.with_spawn_log();
    swarm.advance_to(horizon);
    Ok(swarm.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToSaturated,
    ToUnsaturated,
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::ToSaturated => "to_saturated",
            Direction::ToUnsaturated => "to_unsaturated",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SaturationEvent {
    pub time: f64,
    pub direction: Direction,
    pub global_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaturationTimeline {
    pub epsilon: f64,
    pub events: Vec<SaturationEvent>,
    pub horizon: f64,
    pub permanent_moment: Option<f64>,
    /// Time up to which saturation was observed.
    pub certified_to: f64,
    /// The rigid-rotation certificate held: saturation lasts forever.
    pub proved_permanent: bool,
    pub truncated: bool,
    pub phase_count: usize,
    pub evaluations: u64,
}

impl SaturationTimeline {
    pub fn saturated_at_end(&self) -> bool {
        match self.events.last() {
            Some(ev) => ev.direction == Direction::ToSaturated,
            None => false,
        }
    }
}

/// Tracks ε-saturation up to `horizon` and reports the start of the final
/// saturation interval.
///
/// The global gap is 1-Lipschitz in time (points move at unit speed and new
/// points are born on top of existing ones), so after observing gap `g` the
/// saturation status cannot change for `|g − ε|` time units. Stepping by that
/// amount locates every transition to within `caps.min_step`.
pub fn permanent_saturation_moment(
    graph: &MetricGraph,
    v_star: &str,
    eps: f64,
    horizon: f64,
    confirm_window: f64,
    caps: &SimCaps,
) -> Result<SaturationTimeline, SaturationError> {
    if !(eps > 0.0) {
        return Err(SaturationError::BadEpsilon(eps));
    }
    if !(horizon > 0.0) {
        return Err(SaturationError::BadHorizon(horizon));
    }
    let mut swarm = Swarm::new(graph, v_star, caps)?;
    let mut events: Vec<SaturationEvent> = Vec::new();
    let mut saturated = false;
    let mut t = 0.0;
    let mut evaluations = 0u64;
    let mut proved = false;
    loop {
        swarm.advance_to(t);
        if swarm.truncated() {
            break;
        }
        let g = swarm.coverage(t).global;
        evaluations += 1;
        let now = g <= eps;
        if now != saturated {
            events.push(SaturationEvent {
                time: t,
                direction: if now {
                    Direction::ToSaturated
                } else {
                    Direction::ToUnsaturated
                },
                global_gap: g,
            });
            saturated = now;
        }
        if saturated && swarm.circular_gaps().iter().all(|gap| *gap <= 2.0 * eps) {
            proved = true;
            break;
        }
        if t >= horizon {
            break;
        }
        t = (t + (g - eps).abs().max(caps.min_step)).min(horizon);
    }
    let end = if proved { horizon } else { t };
    let permanent_moment = match events.last() {
        Some(ev) if ev.direction == Direction::ToSaturated => {
            if proved || (!swarm.truncated() && end - ev.time >= confirm_window) {
                Some(ev.time)
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(SaturationTimeline {
        epsilon: eps,
        events,
        horizon,
        permanent_moment,
        certified_to: end,
        proved_permanent: proved,
        truncated: swarm.truncated(),
        phase_count: swarm.phase_count(),
        evaluations,
    })
}
