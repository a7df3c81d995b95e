//! Graph to IET reduction.
//!
//! A letter `(e_in → e_out, k)` records a transition through the pivot (the
//! common vertex of the two edges) followed by the choice of the `k`-th
//! successor of `e_out` at its far endpoint `q`. The successor map is
//!
//! ```text
//! Φ(e_in → e_out, k) = (e_out → e'', κ),  e'' = Succ_q(e_out)[k],
//!                                          κ = position of e_in in Succ_pivot(e_out)
//! ```
//!
//! where `Succ_v(e)` lists the edges after `e` in the cyclic order at `v`.
//! When `q` is a leaf the point reflects: `Φ(e → e', 1) = (e' → e, 1)`.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, MetricGraph, Topology};
use crate::iet::{IetData, IetError};
use crate::radical::RadicalNumber;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Iet(#[from] IetError),
    #[error("transition alphabet is empty")]
    EmptyAlphabet,
    #[error("successor map is not a bijection: {0}")]
    NotBijective(String),
    #[error("unknown letter {0:?}")]
    UnknownLetter(String),
    #[error("unknown cycle policy {0:?} (expected full, cycles or cycle:<letter>)")]
    BadPolicy(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TransitionLetter {
    pub e_in: usize,
    pub e_out: usize,
    pub pivot: usize,
    pub k: usize,
}

/// Expanded alphabet in canonical order: lexicographic in
/// `(e_in, e_out, k)` by input edge index.
#[derive(Clone, Debug)]
pub struct Alphabet {
    pub topology: Topology,
    /// The unexpanded transitions `(e_in, e_out, pivot)`.
    pub transitions: Vec<(usize, usize, usize)>,
    pub letters: Vec<TransitionLetter>,
}

impl Alphabet {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Canonical name `a<i>`, 1-based.
    pub fn name(&self, i: usize) -> String {
        format!("a{}", i + 1)
    }

    /// Descriptive label such as `AB>AC/1`.
    pub fn label(&self, i: usize) -> String {
        let l = &self.letters[i];
        let t = &self.topology;
        format!("{}>{}/{}", t.edge_names[l.e_in], t.edge_names[l.e_out], l.k)
    }

    /// Resolves either a canonical name or a descriptive label.
    pub fn find(&self, name: &str) -> Option<usize> {
        if let Some(rest) = name.strip_prefix('a') {
            if let Ok(i) = rest.parse::<usize>() {
                return (1..=self.len()).contains(&i).then(|| i - 1);
            }
        }
        (0..self.len()).find(|&i| self.label(i) == name)
    }

    pub fn index_of(&self, letter: &TransitionLetter) -> Option<usize> {
        self.letters.binary_search(letter).ok()
    }

    /// Far endpoint of `e_out`.
    pub fn far_end(&self, letter: &TransitionLetter) -> usize {
        self.topology.other_end(letter.e_out, letter.pivot)
    }
}

/// Edges following `e` in the cyclic order at `v`.
fn succ(t: &Topology, v: usize, e: usize) -> Vec<usize> {
    let order = &t.orders[v];
    let i = order.iter().position(|&x| x == e).expect("edge incident to vertex");
    (1..order.len()).map(|s| order[(i + s) % order.len()]).collect()
}

fn common_vertex(t: &Topology, a: usize, b: usize) -> Option<usize> {
    let (a0, a1) = t.ends[a];
    let (b0, b1) = t.ends[b];
    [a0, a1].into_iter().find(|&v| v == b0 || v == b1)
}

pub fn build_transition_alphabet(graph: &MetricGraph) -> Result<Alphabet, ReductionError> {
    let topology = graph.topology()?;
    let t = &topology;
    let m = t.edge_names.len();
    let mut transitions = Vec::new();
    let mut letters = Vec::new();
    for e_in in 0..m {
        for e_out in 0..m {
            if e_in == e_out {
                continue;
            }
            let Some(pivot) = common_vertex(t, e_in, e_out) else {
                continue;
            };
            transitions.push((e_in, e_out, pivot));
            let q = t.other_end(e_out, pivot);
            for k in 1..=t.degree(q).saturating_sub(1).max(1) {
                letters.push(TransitionLetter { e_in, e_out, pivot, k });
            }
        }
    }
    Ok(Alphabet {
        topology,
        transitions,
        letters,
    })
}

/// Image of one letter under `Φ` (not necessarily inside the alphabet on
/// irregular graphs).
pub fn phi(alphabet: &Alphabet, letter: &TransitionLetter) -> TransitionLetter {
    let t = &alphabet.topology;
    let q = alphabet.far_end(letter);
    if t.degree(q) == 1 {
        return TransitionLetter {
            e_in: letter.e_out,
            e_out: letter.e_in,
            pivot: letter.pivot,
            k: 1,
        };
    }
    let e2 = succ(t, q, letter.e_out)[letter.k - 1];
    let kappa = succ(t, letter.pivot, letter.e_out)
        .iter()
        .position(|&e| e == letter.e_in)
        .expect("e_in incident to pivot")
        + 1;
    TransitionLetter {
        e_in: letter.e_out,
        e_out: e2,
        pivot: q,
        k: kappa,
    }
}

/// Constructive preimage under `Φ`.
pub fn phi_inverse(alphabet: &Alphabet, letter: &TransitionLetter) -> Option<TransitionLetter> {
    let t = &alphabet.topology;
    let (x, y, c) = (letter.e_in, letter.e_out, letter.pivot);
    let w = t.other_end(x, c);
    if t.degree(w) == 1 {
        return Some(TransitionLetter {
            e_in: y,
            e_out: x,
            pivot: c,
            k: 1,
        });
    }
    let e = *succ(t, w, x).get(letter.k - 1)?;
    let k = succ(t, c, x).iter().position(|&z| z == y)? + 1;
    Some(TransitionLetter {
        e_in: e,
        e_out: x,
        pivot: w,
        k,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SuccessorMap {
    /// `forward[i]` is the alphabet index of `Φ(letter i)`.
    pub forward: Vec<usize>,
    pub inverse: Vec<usize>,
    /// Cycles in order of their smallest letter, each starting there.
    pub cycles: Vec<Vec<usize>>,
    /// `κ` per transition, keyed by `e_in>e_out` edge names.
    pub kappa_table: BTreeMap<String, usize>,
}

impl SuccessorMap {
    pub fn cycle_of(&self, i: usize) -> &[usize] {
        self.cycles
            .iter()
            .find(|c| c.contains(&i))
            .expect("every letter lies on a cycle")
    }
}

pub fn successor_map(alphabet: &Alphabet) -> Result<SuccessorMap, ReductionError> {
    let n = alphabet.len();
    let mut forward = Vec::with_capacity(n);
    let mut kappa_table = BTreeMap::new();
    for (i, l) in alphabet.letters.iter().enumerate() {
        let img = phi(alphabet, l);
        let j = alphabet.index_of(&img).ok_or_else(|| {
            ReductionError::NotBijective(format!(
                "image of {} ({}) has k={} outside the alphabet",
                alphabet.name(i),
                alphabet.label(i),
                img.k
            ))
        })?;
        forward.push(j);
        let t = &alphabet.topology;
        kappa_table.insert(format!("{}>{}", t.edge_names[l.e_in], t.edge_names[l.e_out]), img.k);
    }
    let mut inverse = vec![usize::MAX; n];
    for (i, &j) in forward.iter().enumerate() {
        if inverse[j] != usize::MAX {
            return Err(ReductionError::NotBijective(format!(
                "{} has two preimages",
                alphabet.name(j)
            )));
        }
        inverse[j] = i;
    }
    for (j, l) in alphabet.letters.iter().enumerate() {
        let pre = phi_inverse(alphabet, l).and_then(|p| alphabet.index_of(&p));
        if pre != Some(inverse[j]) {
            return Err(ReductionError::NotBijective(format!(
                "constructive preimage of {} disagrees",
                alphabet.name(j)
            )));
        }
    }
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            cycle.push(i);
            i = forward[i];
        }
        cycles.push(cycle);
    }
    Ok(SuccessorMap {
        forward,
        inverse,
        cycles,
        kappa_table,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CyclePolicy {
    /// Whole alphabet in canonical order.
    Full,
    /// Whole alphabet grouped by `Φ`-cycle, each in orbit order.
    Cycles,
    /// The `Φ`-cycle through a letter, in orbit order from that letter.
    Cycle(String),
}

impl std::str::FromStr for CyclePolicy {
    type Err = ReductionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            Ok(CyclePolicy::Full)
        } else if s == "cycles" {
            Ok(CyclePolicy::Cycles)
        } else if let Some(letter) = s.strip_prefix("cycle:") {
            Ok(CyclePolicy::Cycle(letter.to_string()))
        } else if !s.is_empty() && !s.contains(':') {
            Ok(CyclePolicy::Cycle(s.to_string()))
        } else {
            Err(ReductionError::BadPolicy(s.to_string()))
        }
    }
}

impl std::fmt::Display for CyclePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CyclePolicy::Full => write!(f, "full"),
            CyclePolicy::Cycles => write!(f, "cycles"),
            CyclePolicy::Cycle(l) => write!(f, "cycle:{l}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LetterInfo {
    pub name: String,
    pub label: String,
    pub e_in: String,
    pub e_out: String,
    pub pivot: String,
    pub k: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub policy: String,
    pub alphabet: Vec<LetterInfo>,
    pub transitions: usize,
    pub cycles: Vec<Vec<String>>,
    pub top: Vec<String>,
    pub bottom: Vec<String>,
    pub lengths: Vec<f64>,
    /// Exact lengths in the order of `top`.
    pub exact_lengths: Vec<String>,
    pub irreducible: bool,
}

/// Result of the reduction: the exchange plus the exact lengths of its
/// letters (indexed like `iet.letters()`).
#[derive(Clone, Debug)]
pub struct Reduction {
    pub iet: IetData,
    pub exact_lengths: Vec<RadicalNumber>,
    pub alphabet: Alphabet,
    pub successors: SuccessorMap,
    pub report: ReductionReport,
}

pub fn build_iet_from_graph(graph: &MetricGraph, policy: &CyclePolicy) -> Result<Reduction, ReductionError> {
    let alphabet = build_transition_alphabet(graph)?;
    if alphabet.is_empty() {
        return Err(ReductionError::EmptyAlphabet);
    }
    let successors = successor_map(&alphabet)?;
    let chosen: Vec<usize> = match policy {
        CyclePolicy::Full => (0..alphabet.len()).collect(),
        CyclePolicy::Cycles => successors.cycles.concat(),
        CyclePolicy::Cycle(name) => {
            let start = alphabet
                .find(name)
                .ok_or_else(|| ReductionError::UnknownLetter(name.clone()))?;
            let mut orbit = vec![start];
            let mut i = successors.forward[start];
            while i != start {
                orbit.push(i);
                i = successors.forward[i];
            }
            orbit
        }
    };
    // local letter index = position in `chosen`
    let mut local = vec![usize::MAX; alphabet.len()];
    for (p, &i) in chosen.iter().enumerate() {
        local[i] = p;
    }
    let names: Vec<String> = chosen.iter().map(|&i| alphabet.name(i)).collect();
    let top: Vec<usize> = (0..chosen.len()).collect();
    let bottom: Vec<usize> = chosen.iter().map(|&i| local[successors.forward[i]]).collect();
    let edges = graph.edges();
    let exact_lengths: Vec<RadicalNumber> = chosen
        .iter()
        .map(|&i| edges[alphabet.letters[i].e_in].length.value().clone())
        .collect();
    let lengths: Vec<f64> = chosen
        .iter()
        .map(|&i| alphabet.topology.lengths[alphabet.letters[i].e_in])
        .collect();
    let iet = IetData::new(names.clone(), top, bottom, lengths.clone())?;
    let t = &alphabet.topology;
    let report = ReductionReport {
        policy: policy.to_string(),
        alphabet: (0..alphabet.len())
            .map(|i| {
                let l = &alphabet.letters[i];
                LetterInfo {
                    name: alphabet.name(i),
                    label: alphabet.label(i),
                    e_in: t.edge_names[l.e_in].clone(),
                    e_out: t.edge_names[l.e_out].clone(),
                    pivot: t.vertex_names[l.pivot].clone(),
                    k: l.k,
                }
            })
            .collect(),
        transitions: alphabet.transitions.len(),
        cycles: successors
            .cycles
            .iter()
            .map(|c| c.iter().map(|&i| alphabet.name(i)).collect())
            .collect(),
        top: names.clone(),
        bottom: iet.bottom().iter().map(|&i| names[i].clone()).collect(),
        lengths,
        exact_lengths: exact_lengths.iter().map(|l| l.to_string()).collect(),
        irreducible: iet.is_irreducible(),
    };
    Ok(Reduction {
        iet,
        exact_lengths,
        alphabet,
        successors,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_sizes() {
        let tri = build_transition_alphabet(&MetricGraph::triangle()).unwrap();
        assert_eq!((tri.transitions.len(), tri.len()), (6, 6));
        let k4 = build_transition_alphabet(&MetricGraph::k4()).unwrap();
        assert_eq!((k4.transitions.len(), k4.len()), (24, 48));
        let star = build_transition_alphabet(&MetricGraph::star5()).unwrap();
        assert_eq!((star.transitions.len(), star.len()), (12, 12));
    }

    #[test]
    fn star_reflections_pair_up() {
        let g = MetricGraph::star5();
        let a = build_transition_alphabet(&g).unwrap();
        let s = successor_map(&a).unwrap();
        assert_eq!(s.cycles.len(), 6);
        assert!(s.cycles.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn k4_canonical_first_letter() {
        let a = build_transition_alphabet(&MetricGraph::k4()).unwrap();
        assert_eq!(a.label(0), "AB>AC/1");
        assert_eq!(a.find("a1"), Some(0));
        assert_eq!(a.find("AB>AC/1"), Some(0));
        assert_eq!(a.find("a49"), None);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("full".parse::<CyclePolicy>().unwrap(), CyclePolicy::Full);
        assert_eq!(
            "cycle:a1".parse::<CyclePolicy>().unwrap(),
            CyclePolicy::Cycle("a1".into())
        );
        assert_eq!("a3".parse::<CyclePolicy>().unwrap(), CyclePolicy::Cycle("a3".into()));
        assert_eq!("cycles".parse::<CyclePolicy>().unwrap(), CyclePolicy::Cycles);
        assert!("x:y".parse::<CyclePolicy>().is_err());
        assert!("".parse::<CyclePolicy>().is_err());
    }

    #[test]
    fn k4_cycle_is_a_rotation() {
        let r = build_iet_from_graph(&MetricGraph::k4(), &CyclePolicy::Cycle("a1".into())).unwrap();
        assert_eq!(r.iet.d(), 16);
        let shifted: Vec<usize> = (1..16).chain([0]).collect();
        assert_eq!(r.iet.bottom(), shifted.as_slice());
        assert!(r.report.irreducible);
    }

    #[test]
    fn irregular_graph_reports_non_bijective() {
        let g = MetricGraph::new(
            ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect(),
            vec![
                ("A".into(), "B".into(), crate::radical::RadicalLength::sqrt(2).unwrap()),
                ("B".into(), "C".into(), crate::radical::RadicalLength::sqrt(3).unwrap()),
                ("B".into(), "D".into(), crate::radical::RadicalLength::sqrt(5).unwrap()),
                ("C".into(), "D".into(), crate::radical::RadicalLength::sqrt(7).unwrap()),
            ],
            None,
        )
        .unwrap();
        let a = build_transition_alphabet(&g).unwrap();
        // Φ(AB>BC/1) = (BC>CD, κ=2) but D offers a single successor
        assert!(matches!(successor_map(&a), Err(ReductionError::NotBijective(_))));
    }
}
