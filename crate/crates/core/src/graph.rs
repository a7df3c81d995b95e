//! Connected simple metric graphs with exact edge lengths and per-vertex
//! cyclic orders of incident edges.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radical::{LengthTerm, RadicalError, RadicalLength, RadicalNumber};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph: {0}")]
    Invalid(ValidationReport),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("unknown edge {0:?}")]
    UnknownEdge(String),
    #[error("vertex {vertex:?} is not an endpoint of edge {edge:?}")]
    NotAnEndpoint { edge: String, vertex: String },
    #[error("unknown builtin graph {0:?} (expected k4, triangle or star5)")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Length(#[from] RadicalError),
    #[error("malformed graph json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub id: String,
    pub u: String,
    pub v: String,
    pub length: RadicalLength,
}

impl Edge {
    /// Endpoint opposite to `w`, if `w` is an endpoint.
    pub fn other(&self, w: &str) -> Option<&str> {
        if self.u == w {
            Some(&self.v)
        } else if self.v == w {
            Some(&self.u)
        } else {
            None
        }
    }
}

/// A single invariant violation found by [`MetricGraph::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyEdgeSet,
    DuplicateVertex { vertex: String },
    UnknownEndpoint { edge: String, vertex: String },
    Loop { vertex: String },
    MultiEdge { u: String, v: String },
    DuplicateEdgeId { edge: String },
    NotConnected { unreachable: Vec<String> },
    MissingCyclicOrder { vertex: String },
    CyclicOrderMismatch { vertex: String, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyEdgeSet => write!(f, "edge set is empty"),
            Violation::DuplicateVertex { vertex } => write!(f, "duplicate vertex {vertex}"),
            Violation::UnknownEndpoint { edge, vertex } => {
                write!(f, "edge {edge} uses unknown vertex {vertex}")
            }
            Violation::Loop { vertex } => write!(f, "loop at vertex {vertex}"),
            Violation::MultiEdge { u, v } => write!(f, "multiple edges between {u} and {v}"),
            Violation::DuplicateEdgeId { edge } => write!(f, "duplicate edge id {edge}"),
            Violation::NotConnected { unreachable } => {
                write!(f, "not connected (unreachable: {})", unreachable.join(","))
            }
            Violation::MissingCyclicOrder { vertex } => {
                write!(f, "missing cyclic order at vertex {vertex}")
            }
            Violation::CyclicOrderMismatch { vertex, detail } => {
                write!(f, "cyclic order at vertex {vertex}: {detail}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCommensurability {
    pub a: String,
    pub b: String,
    /// `|a| / |b|` when rational.
    pub ratio: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommensurabilityReport {
    pub pairs: Vec<PairCommensurability>,
    pub flagged: Vec<(String, String)>,
}

impl CommensurabilityReport {
    pub fn fully_incommensurable(&self) -> bool {
        self.flagged.is_empty()
    }

    /// Whether the two edges have a rational length ratio. An edge is
    /// always commensurable with itself.
    pub fn commensurable(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        self.flagged
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplePath {
    pub vertices: Vec<String>,
    pub edges: Vec<String>,
    pub length: RadicalNumber,
}

/// Index-based view of a valid graph for the numerical modules.
#[derive(Clone, Debug)]
pub struct Topology {
    pub vertex_names: Vec<String>,
    pub edge_names: Vec<String>,
    /// `(u, v)` vertex indices per edge.
    pub ends: Vec<(usize, usize)>,
    pub lengths: Vec<f64>,
    /// Incident edge indices per vertex, in cyclic order.
    pub orders: Vec<Vec<usize>>,
}

impl Topology {
    pub fn other_end(&self, edge: usize, v: usize) -> usize {
        let (a, b) = self.ends[edge];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.orders[v].len()
    }

    /// All-pairs shortest path distances.
    pub fn distances(&self) -> Vec<Vec<f64>> {
        let n = self.vertex_names.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (e, &(a, b)) in self.ends.iter().enumerate() {
            d[a][b] = d[a][b].min(self.lengths[e]);
            d[b][a] = d[b][a].min(self.lengths[e]);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }
}

#[derive(Clone, Debug)]
pub struct MetricGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    cyclic_orders: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EdgeFile {
    u: String,
    v: String,
    length: Vec<LengthTerm>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<String>,
    edges: Vec<EdgeFile>,
    #[serde(default)]
    cyclic_orders: Option<BTreeMap<String, Vec<String>>>,
}

impl MetricGraph {
    /// Assembles a graph without validating it. Missing cyclic orders are
    /// filled with the default order (incident edges sorted by the id of the
    /// opposite vertex). Order entries may name an edge by either endpoint
    /// concatenation (`AB` or `BA`).
    pub fn from_parts(
        vertices: Vec<String>,
        edges: Vec<(String, String, RadicalLength)>,
        cyclic_orders: Option<BTreeMap<String, Vec<String>>>,
    ) -> Self {
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|(u, v, length)| Edge {
                id: format!("{u}{v}"),
                u,
                v,
                length,
            })
            .collect();
        let mut g = MetricGraph {
            vertices,
            edges,
            cyclic_orders: BTreeMap::new(),
        };
        let given = cyclic_orders.unwrap_or_default();
        for v in g.vertices.clone() {
            let order = match given.get(&v) {
                Some(list) => list.iter().map(|name| g.canonical_edge_name(name, &v)).collect(),
                None => g.default_order(&v),
            };
            g.cyclic_orders.insert(v, order);
        }
        for (v, list) in given {
            g.cyclic_orders.entry(v).or_insert(list);
        }
        g
    }

    /// Assembles and validates.
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<(String, String, RadicalLength)>,
        cyclic_orders: Option<BTreeMap<String, Vec<String>>>,
    ) -> Result<Self, GraphError> {
        let g = Self::from_parts(vertices, edges, cyclic_orders);
        let report = g.validate();
        if report.is_valid() {
            Ok(g)
        } else {
            Err(GraphError::Invalid(report))
        }
    }

    fn canonical_edge_name(&self, name: &str, at: &str) -> String {
        if self.edges.iter().any(|e| e.id == name) {
            return name.to_string();
        }
        self.edges
            .iter()
            .find(|e| e.other(at).is_some() && format!("{}{}", e.v, e.u) == name)
            .map(|e| e.id.clone())
            .unwrap_or_else(|| name.to_string())
    }

    fn default_order(&self, v: &str) -> Vec<String> {
        let mut incident: Vec<(&str, &str)> = self
            .edges
            .iter()
            .filter_map(|e| e.other(v).map(|w| (w, e.id.as_str())))
            .collect();
        incident.sort();
        incident.into_iter().map(|(_, id)| id.to_string()).collect()
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in file.edges {
            edges.push((e.u, e.v, RadicalLength::from_terms(&e.length)?));
        }
        Self::new(file.vertices, edges, file.cyclic_orders)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeFile {
                    u: e.u.clone(),
                    v: e.v.clone(),
                    length: e.length.to_terms(),
                })
                .collect(),
            cyclic_orders: Some(self.cyclic_orders.clone()),
        };
        serde_json::to_string_pretty(&file).expect("graph serializes")
    }

    /// Built-in graphs: `k4`, `triangle`, `star5`.
    pub fn builtin(name: &str) -> Result<Self, GraphError> {
        match name {
            "k4" => Ok(Self::k4()),
            "triangle" => Ok(Self::triangle()),
            "star5" | "star" => Ok(Self::star5()),
            other => Err(GraphError::UnknownBuiltin(other.to_string())),
        }
    }

    fn from_sqrt_edges(vertices: &[&str], edges: &[(&str, &str, u64)]) -> Self {
        let edges = edges
            .iter()
            .map(|(u, v, r)| {
                (
                    u.to_string(),
                    v.to_string(),
                    RadicalLength::sqrt(*r).expect("positive radicand"),
                )
            })
            .collect();
        Self::new(vertices.iter().map(|s| s.to_string()).collect(), edges, None).expect("builtin graph is valid")
    }

    /// Complete graph on A..D with lengths √2, √3, √5, √7, √11, √13.
    pub fn k4() -> Self {
        Self::from_sqrt_edges(
            &["A", "B", "C", "D"],
            &[
                ("A", "B", 2),
                ("A", "C", 3),
                ("A", "D", 5),
                ("B", "C", 7),
                ("B", "D", 11),
                ("C", "D", 13),
            ],
        )
    }

    /// Triangle with lengths AB = √2, BC = √3, CA = √5.
    pub fn triangle() -> Self {
        Self::from_sqrt_edges(&["A", "B", "C"], &[("A", "B", 2), ("B", "C", 3), ("C", "A", 5)])
    }

    /// Star with center O and leaves A..D, lengths √2, √3, √5, √7.
    pub fn star5() -> Self {
        Self::from_sqrt_edges(
            &["O", "A", "B", "C", "D"],
            &[("O", "A", 2), ("O", "B", 3), ("O", "C", 5), ("O", "D", 7)],
        )
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: &str) -> Result<&Edge, GraphError> {
        self.edges
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| GraphError::UnknownEdge(id.to_string()))
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == id)
    }

    pub fn cyclic_order(&self, v: &str) -> Option<&[String]> {
        self.cyclic_orders.get(v).map(|o| o.as_slice())
    }

    pub fn cyclic_orders(&self) -> &BTreeMap<String, Vec<String>> {
        &self.cyclic_orders
    }

    pub fn degree(&self, v: &str) -> usize {
        self.edges.iter().filter(|e| e.other(v).is_some()).count()
    }

    /// Returns a copy with the cyclic order at `v` replaced.
    pub fn with_cyclic_order(&self, v: &str, order: Vec<String>) -> Self {
        let mut g = self.clone();
        let order = order.iter().map(|n| g.canonical_edge_name(n, v)).collect();
        g.cyclic_orders.insert(v.to_string(), order);
        g
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.edges.is_empty() {
            violations.push(Violation::EmptyEdgeSet);
        }
        let mut seen = HashMap::new();
        for v in &self.vertices {
            if seen.insert(v.as_str(), ()).is_some() {
                violations.push(Violation::DuplicateVertex { vertex: v.clone() });
            }
        }
        let mut pairs: HashMap<(String, String), usize> = HashMap::new();
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for e in &self.edges {
            for w in [&e.u, &e.v] {
                if !seen.contains_key(w.as_str()) {
                    violations.push(Violation::UnknownEndpoint {
                        edge: e.id.clone(),
                        vertex: w.clone(),
                    });
                }
            }
            if e.u == e.v {
                violations.push(Violation::Loop { vertex: e.u.clone() });
                continue;
            }
            let key = if e.u < e.v {
                (e.u.clone(), e.v.clone())
            } else {
                (e.v.clone(), e.u.clone())
            };
            let count = pairs.entry(key.clone()).or_insert(0);
            *count += 1;
            if *count == 2 {
                violations.push(Violation::MultiEdge { u: key.0, v: key.1 });
            }
            let c = ids.entry(e.id.as_str()).or_insert(0);
            *c += 1;
            if *c == 2 {
                violations.push(Violation::DuplicateEdgeId { edge: e.id.clone() });
            }
        }
        if !self.vertices.is_empty() {
            let reach = self.reachable_from(&self.vertices[0]);
            let unreachable: Vec<String> = self
                .vertices
                .iter()
                .filter(|v| !reach.contains_key(v.as_str()))
                .cloned()
                .collect();
            if !unreachable.is_empty() {
                violations.push(Violation::NotConnected { unreachable });
            }
        }
        for v in &self.vertices {
            let Some(order) = self.cyclic_orders.get(v) else {
                violations.push(Violation::MissingCyclicOrder { vertex: v.clone() });
                continue;
            };
            let mut expected: Vec<&str> = self
                .edges
                .iter()
                .filter(|e| e.u != e.v && e.other(v).is_some())
                .map(|e| e.id.as_str())
                .collect();
            let mut got: Vec<&str> = order.iter().map(|s| s.as_str()).collect();
            expected.sort();
            got.sort();
            if expected != got {
                violations.push(Violation::CyclicOrderMismatch {
                    vertex: v.clone(),
                    detail: format!(
                        "expected each of [{}] exactly once, got [{}]",
                        expected.join(","),
                        order.join(",")
                    ),
                });
            }
        }
        for v in self.cyclic_orders.keys() {
            if !seen.contains_key(v.as_str()) {
                violations.push(Violation::CyclicOrderMismatch {
                    vertex: v.clone(),
                    detail: "order given for an unknown vertex".into(),
                });
            }
        }
        ValidationReport { violations }
    }

    fn reachable_from<'a>(&'a self, start: &'a str) -> HashMap<&'a str, ()> {
        let mut seen = HashMap::new();
        let mut queue = VecDeque::new();
        seen.insert(start, ());
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for e in &self.edges {
                if let Some(w) = e.other(v) {
                    if seen.insert(w, ()).is_none() {
                        queue.push_back(w);
                    }
                }
            }
        }
        seen
    }

    /// Symbolic pairwise ratio test over all edges.
    pub fn check_incommensurable(&self) -> CommensurabilityReport {
        let mut pairs = Vec::new();
        let mut flagged = Vec::new();
        for (i, a) in self.edges.iter().enumerate() {
            for b in &self.edges[i + 1..] {
                let ratio = a.length.value().rational_ratio(b.length.value());
                if ratio.is_some() {
                    flagged.push((a.id.clone(), b.id.clone()));
                }
                pairs.push(PairCommensurability {
                    a: a.id.clone(),
                    b: b.id.clone(),
                    ratio: ratio.map(|q| q.to_string()),
                });
            }
        }
        CommensurabilityReport { pairs, flagged }
    }

    /// First simple path (depth-first, edges tried in cyclic order) that ends
    /// at `v`, avoids `edge` and whose length over `|edge|` is irrational.
    pub fn find_adjoined_path(&self, edge: &str, v: &str) -> Result<Option<SimplePath>, GraphError> {
        let target = self.edge(edge)?;
        if target.other(v).is_none() {
            return Err(GraphError::NotAnEndpoint {
                edge: edge.to_string(),
                vertex: v.to_string(),
            });
        }
        let mut path = SimplePath {
            vertices: vec![v.to_string()],
            edges: Vec::new(),
            length: RadicalNumber::zero(),
        };
        Ok(self.adjoined_dfs(target, &mut path))
    }

    fn adjoined_dfs(&self, target: &Edge, path: &mut SimplePath) -> Option<SimplePath> {
        let here = path.vertices.last().unwrap().clone();
        for id in self.cyclic_orders.get(&here).into_iter().flatten() {
            if *id == target.id {
                continue;
            }
            let Ok(e) = self.edge(id) else { continue };
            let next = e.other(&here).unwrap().to_string();
            if path.vertices.contains(&next) {
                continue;
            }
            let saved = path.length.clone();
            path.length = &path.length + e.length.value();
            path.vertices.push(next);
            path.edges.push(e.id.clone());
            if path.length.rational_ratio(target.length.value()).is_none() {
                return Some(path.clone());
            }
            if let Some(found) = self.adjoined_dfs(target, path) {
                return Some(found);
            }
            path.vertices.pop();
            path.edges.pop();
            path.length = saved;
        }
        None
    }

    /// Index-based view. Requires a valid graph.
    pub fn topology(&self) -> Result<Topology, GraphError> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(GraphError::Invalid(report));
        }
        let vidx: HashMap<&str, usize> = self.vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let eidx: HashMap<&str, usize> = self.edges.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
        Ok(Topology {
            vertex_names: self.vertices.clone(),
            edge_names: self.edges.iter().map(|e| e.id.clone()).collect(),
            ends: self
                .edges
                .iter()
                .map(|e| (vidx[e.u.as_str()], vidx[e.v.as_str()]))
                .collect(),
            lengths: self.edges.iter().map(|e| e.length.to_f64()).collect(),
            orders: self
                .vertices
                .iter()
                .map(|v| self.cyclic_orders[v].iter().map(|id| eidx[id.as_str()]).collect())
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(n: u64) -> RadicalLength {
        RadicalLength::sqrt(n).unwrap()
    }

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn same_cycle(a: &[String], b: &[&str]) -> bool {
        (0..a.len()).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i]))
    }

    #[test]
    fn k4_default_orders_match_listing() {
        let g = MetricGraph::k4();
        assert!(g.validate().is_valid());
        assert!(same_cycle(g.cyclic_order("A").unwrap(), &["AB", "AC", "AD"]));
        assert!(same_cycle(g.cyclic_order("B").unwrap(), &["BC", "BD", "AB"]));
        assert!(same_cycle(g.cyclic_order("C").unwrap(), &["CD", "AC", "BC"]));
        assert!(same_cycle(g.cyclic_order("D").unwrap(), &["AD", "BD", "CD"]));
    }

    #[test]
    fn reversed_names_in_orders_resolve() {
        let mut orders = BTreeMap::new();
        orders.insert("A".to_string(), names(&["AB"]));
        orders.insert("B".to_string(), names(&["BA"]));
        let g = MetricGraph::new(names(&["A", "B"]), vec![("A".into(), "B".into(), sq(2))], Some(orders)).unwrap();
        assert_eq!(g.cyclic_order("B").unwrap(), names(&["AB"]));
    }

    #[test]
    fn loop_and_disconnection_are_reported() {
        let g = MetricGraph::from_parts(
            names(&["A", "B", "C", "D"]),
            vec![
                ("A".into(), "A".into(), sq(2)),
                ("A".into(), "B".into(), sq(3)),
                ("C".into(), "D".into(), sq(5)),
            ],
            None,
        );
        let report = g.validate();
        let text = report.to_string();
        assert!(text.contains("loop at vertex A"), "{text}");
        assert!(text.contains("not connected"), "{text}");
    }

    #[test]
    fn multi_edge_and_bad_order_are_reported() {
        let mut orders = BTreeMap::new();
        orders.insert("A".to_string(), names(&["AB", "AB"]));
        let g = MetricGraph::from_parts(
            names(&["A", "B"]),
            vec![("A".into(), "B".into(), sq(2)), ("B".into(), "A".into(), sq(3))],
            Some(orders),
        );
        let kinds = g.validate().violations;
        assert!(kinds.iter().any(|v| matches!(v, Violation::MultiEdge { .. })));
        assert!(kinds.iter().any(|v| matches!(v, Violation::CyclicOrderMismatch { .. })));
    }

    #[test]
    fn empty_edges_invalid() {
        let g = MetricGraph::from_parts(names(&["A"]), vec![], None);
        assert!(g.validate().violations.contains(&Violation::EmptyEdgeSet));
    }

    #[test]
    fn commensurability() {
        assert!(MetricGraph::k4().check_incommensurable().fully_incommensurable());
        let g = MetricGraph::new(
            names(&["A", "B", "C"]),
            vec![
                ("A".into(), "B".into(), sq(2)),
                (
                    "B".into(),
                    "C".into(),
                    RadicalLength::new(RadicalNumber::sqrt(18).unwrap()).unwrap(),
                ),
            ],
            None,
        )
        .unwrap();
        let report = g.check_incommensurable();
        assert_eq!(report.flagged, vec![("AB".to_string(), "BC".to_string())]);
        assert_eq!(report.pairs[0].ratio.as_deref(), Some("1/3"));
        assert!(report.commensurable("BC", "AB"));
        assert!(report.commensurable("AB", "AB"));
    }

    #[test]
    fn adjoined_paths() {
        let t = MetricGraph::triangle();
        let p = t.find_adjoined_path("AB", "B").unwrap().unwrap();
        assert_eq!(p.vertices, names(&["B", "C"]));
        assert_eq!(p.length, RadicalNumber::sqrt(3).unwrap());

        let single = MetricGraph::new(names(&["U", "V"]), vec![("U".into(), "V".into(), sq(2))], None).unwrap();
        assert_eq!(single.find_adjoined_path("UV", "U").unwrap(), None);

        let star = MetricGraph::star5();
        let p = star.find_adjoined_path("OA", "O").unwrap().unwrap();
        assert_eq!(p.vertices, names(&["O", "B"]));

        assert!(matches!(
            t.find_adjoined_path("AB", "C"),
            Err(GraphError::NotAnEndpoint { .. })
        ));
    }

    #[test]
    fn json_roundtrip() {
        let g = MetricGraph::k4();
        let back = MetricGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.to_json(), g.to_json());
        let text = r#"{"vertices":["A","B"],"edges":[{"u":"A","v":"B","length":[{"coeff":"3/2","radicand":8}]}]}"#;
        let g = MetricGraph::from_json(text).unwrap();
        assert!((g.edges()[0].length.to_f64() - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn topology_distances() {
        let t = MetricGraph::triangle().topology().unwrap();
        let d = t.distances();
        // AB=√2, BC=√3, CA=√5: A to C directly (√5 ≈ 2.236) beats √2+√3 ≈ 3.146
        assert!((d[0][2] - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(t.degree(0), 2);
    }
}
