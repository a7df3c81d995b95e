//! Independent oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeSet, HashSet, VecDeque};

use ietgraph::graph::Topology;
use ietgraph::radical::RadicalNumber;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// `T(x)` by locating the top slot and the matching bottom slot from scratch.
pub fn slot_eval(top: &[usize], bottom: &[usize], lengths: &[f64], x: f64) -> f64 {
    let mut start = 0.0;
    let mut letter = top[top.len() - 1];
    let mut offset = 0.0;
    for &a in top {
        if x < start + lengths[a] {
            letter = a;
            offset = x - start;
            break;
        }
        start += lengths[a];
    }
    let before: f64 = bottom.iter().take_while(|&&b| b != letter).map(|&b| lengths[b]).sum();
    before + offset
}

/// Exact rank of an integer matrix by rational elimination.
pub fn rational_rank(m: &[Vec<i64>]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = m
        .iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect())
        .collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank][c].clone();
        for r in 0..rows.len() {
            if r != rank && !rows[r][c].is_zero() {
                let f = &rows[r][c] / &pivot;
                for k in c..cols {
                    let v = &f * &rows[rank][k];
                    rows[r][k] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Inversion form: `+1` where `a` precedes `b` on top and follows it on the
/// bottom, `-1` in the reverse case.
pub fn inversion_form(top: &[usize], bottom: &[usize]) -> Vec<Vec<i64>> {
    let d = top.len();
    let pos = |row: &[usize], a: usize| row.iter().position(|&x| x == a).unwrap();
    let mut w = vec![vec![0i64; d]; d];
    for a in 0..d {
        for b in 0..d {
            let (ta, tb, ba, bb) = (pos(top, a), pos(top, b), pos(bottom, a), pos(bottom, b));
            if ta < tb && ba > bb {
                w[a][b] = 1;
            } else if ta > tb && ba < bb {
                w[a][b] = -1;
            }
        }
    }
    w
}

/// Genus of an irreducible permutation from the cycles of Veech's `σ`:
/// `d = 2g + s - 1` where `s` counts the cycles.
pub fn veech_genus(top: &[usize], bottom: &[usize]) -> usize {
    let d = top.len();
    // p[i] = 1-based bottom position of the letter at 1-based top position i
    let mut p = vec![0usize; d + 2];
    for i in 0..d {
        p[i + 1] = bottom.iter().position(|&b| b == top[i]).unwrap() + 1;
    }
    p[d + 1] = d + 1;
    let mut inv = vec![0usize; d + 2];
    for (i, &v) in p.iter().enumerate() {
        inv[v] = i;
    }
    let sigma = |j: usize| inv[p[j] + 1] - 1;
    let mut seen = vec![false; d + 1];
    let mut cycles = 0;
    for s in 0..=d {
        if !seen[s] {
            cycles += 1;
            let mut j = s;
            while !seen[j] {
                seen[j] = true;
                j = sigma(j);
            }
        }
    }
    (d + 1 - cycles) / 2
}

/// Reduced Rauzy move written out position by position.
fn move_oracle(bottom: &[usize], ty: u8) -> Vec<usize> {
    let d = bottom.len();
    let top: Vec<usize> = (0..d).collect();
    let (mut t, mut b) = (top, bottom.to_vec());
    if ty == 0 {
        let w = t[d - 1];
        let l = b.remove(d - 1);
        let k = b.iter().position(|&x| x == w).unwrap();
        b.insert(k + 1, l);
    } else {
        let w = b[d - 1];
        let l = t.remove(d - 1);
        let k = t.iter().position(|&x| x == w).unwrap();
        t.insert(k + 1, l);
    }
    let mut pos = vec![0; d];
    for (i, &a) in t.iter().enumerate() {
        pos[a] = i;
    }
    b.iter().map(|&a| pos[a]).collect()
}

/// Rauzy class by breadth-first search over reduced bottom rows.
pub fn class_bfs(bottom: &[usize]) -> BTreeSet<Vec<usize>> {
    let mut seen = BTreeSet::from([bottom.to_vec()]);
    let mut queue = VecDeque::from([bottom.to_vec()]);
    while let Some(b) = queue.pop_front() {
        for ty in [0, 1] {
            let n = move_oracle(&b, ty);
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Positions at time `t` of points born by then, per edge.
pub fn positions_at(lengths: &[f64], per_edge: &[Vec<(f64, f64)>], t: f64) -> Vec<Vec<f64>> {
    per_edge
        .iter()
        .zip(lengths)
        .map(|(ps, &l)| {
            ps.iter()
                .filter(|(_, birth)| *birth <= t)
                .map(|(theta, _)| {
                    let c = (t - theta).rem_euclid(2.0 * l);
                    if c <= l {
                        c
                    } else {
                        2.0 * l - c
                    }
                })
                .collect()
        })
        .collect()
}

/// Largest distance from a graph point to the nearest moving point, sampled
/// on a grid of spacing `h` along every edge.
pub fn grid_gap(topo: &Topology, positions: &[Vec<f64>], h: f64) -> f64 {
    let dist = topo.distances();
    let nv = topo.vertex_names.len();
    // nearest point from each vertex through the graph metric
    let mut a = vec![f64::INFINITY; nv];
    for (v, av) in a.iter_mut().enumerate() {
        for (f, ps) in positions.iter().enumerate() {
            let (u, w) = topo.ends[f];
            let l = topo.lengths[f];
            for &p in ps {
                *av = av.min((dist[v][u] + p).min(dist[v][w] + l - p));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (e, ps) in positions.iter().enumerate() {
        let (u, w) = topo.ends[e];
        let l = topo.lengths[e];
        let steps = (l / h).ceil() as usize;
        for i in 0..=steps {
            let s = (i as f64 * h).min(l);
            let mut best = (s + a[u]).min(l - s + a[w]);
            for &p in ps {
                best = best.min((s - p).abs());
            }
            worst = worst.max(best);
        }
    }
    worst
}

/// Simple paths from `v` not using `avoid`, as edge-index lists.
pub fn simple_paths(topo: &Topology, v: usize, avoid: usize) -> Vec<Vec<usize>> {
    fn go(
        topo: &Topology,
        at: usize,
        avoid: usize,
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        for &e in &topo.orders[at] {
            if e == avoid {
                continue;
            }
            let next = topo.other_end(e, at);
            if seen[next] {
                continue;
            }
            path.push(e);
            out.push(path.clone());
            seen[next] = true;
            go(topo, next, avoid, seen, path, out);
            seen[next] = false;
            path.pop();
        }
    }
    let mut seen = vec![false; topo.vertex_names.len()];
    seen[v] = true;
    let mut out = Vec::new();
    go(topo, v, avoid, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// Whether `a / b` is rational, by squaring: for `a = Σ cᵣ√r` the ratio is
/// rational iff `a·b` is rational and `a·b / b²` reproduces `a`.
pub fn ratio_is_rational(a: &RadicalNumber, b: &RadicalNumber) -> bool {
    let ab = a * b;
    let bb = b * b;
    if !ab.is_rational() || !bb.is_rational() {
        return false;
    }
    let q = rational_value(&ab) / rational_value(&bb);
    let back = b.scale(&q);
    (&back - a).is_zero()
}

fn rational_value(x: &RadicalNumber) -> BigRational {
    x.terms()
        .find(|(r, _)| *r == 1)
        .map(|(_, c)| c.clone())
        .unwrap_or_else(BigRational::zero)
}

/// Number of distinct length-`n` factors of a word.
pub fn factors(word: &[usize], n: usize) -> usize {
    word.windows(n).collect::<HashSet<_>>().len()
}

/// Exact golden rotation lengths `((√5−1)/2, (3−√5)/2)`.
pub fn golden_exact() -> Vec<RadicalNumber> {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let s5 = RadicalNumber::term(half.clone(), 5).unwrap();
    let a = &s5 - &RadicalNumber::from_rational(half.clone());
    let b = &RadicalNumber::from_rational(half * BigRational::from_integer(BigInt::from(3))) - &s5;
    vec![a, b]
}
