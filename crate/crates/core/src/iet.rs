//! Interval exchange transformations: evaluation, irreducibility, a finite
//! i.d.o.c. certificate and factor complexity of the natural coding.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IetError {
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("{which} order is not a permutation of the alphabet")]
    BadPermutation { which: &'static str },
    #[error("expected {expected} lengths, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("length of letter {letter} is not positive and finite: {value}")]
    NonPositiveLength { letter: String, value: f64 },
    #[error("position {x} outside [0, {total})")]
    OutOfDomain { x: f64, total: f64 },
    #[error("unknown letter {0:?}")]
    UnknownLetter(String),
}

/// Combinatorial data `(π₀, π₁)` and lengths `λ`. Letters are indices into
/// `letters`; `top` and `bottom` list letter indices left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct IetData {
    letters: Vec<String>,
    top: Vec<usize>,
    bottom: Vec<usize>,
    lengths: Vec<f64>,
    total: f64,
    // top_starts[k]: left end of the k-th top interval, top_starts[d] = total
    top_starts: Vec<f64>,
    top_shift: Vec<f64>,
    bottom_starts: Vec<f64>,
    bottom_shift: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct IetFile {
    letters: Vec<String>,
    top: Vec<String>,
    bottom: Vec<String>,
    lengths: Vec<f64>,
}

impl Serialize for IetData {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        IetFile {
            letters: self.letters.clone(),
            top: self.top.iter().map(|&i| self.letters[i].clone()).collect(),
            bottom: self.bottom.iter().map(|&i| self.letters[i].clone()).collect(),
            lengths: self.lengths.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IetData {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = IetFile::deserialize(d)?;
        let lookup = |names: &[String]| -> Result<Vec<usize>, IetError> {
            names
                .iter()
                .map(|n| {
                    file.letters
                        .iter()
                        .position(|l| l == n)
                        .ok_or_else(|| IetError::UnknownLetter(n.clone()))
                })
                .collect()
        };
        let top = lookup(&file.top).map_err(serde::de::Error::custom)?;
        let bottom = lookup(&file.bottom).map_err(serde::de::Error::custom)?;
        IetData::new(file.letters.clone(), top, bottom, file.lengths.clone()).map_err(serde::de::Error::custom)
    }
}

fn is_permutation(order: &[usize], d: usize) -> bool {
    if order.len() != d {
        return false;
    }
    let mut seen = vec![false; d];
    for &i in order {
        if i >= d || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// `(starts, shift)` for intervals laid out in `from` order and landing in
/// `to` order.
fn layout(from: &[usize], to: &[usize], lengths: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = from.len();
    let mut to_start = vec![0.0; d];
    let mut acc = 0.0;
    for &a in to {
        to_start[a] = acc;
        acc += lengths[a];
    }
    let mut starts = Vec::with_capacity(d + 1);
    let mut shift = Vec::with_capacity(d);
    let mut acc = 0.0;
    for &a in from {
        starts.push(acc);
        shift.push(to_start[a] - acc);
        acc += lengths[a];
    }
    starts.push(acc);
    (starts, shift)
}

impl IetData {
    pub fn new(letters: Vec<String>, top: Vec<usize>, bottom: Vec<usize>, lengths: Vec<f64>) -> Result<Self, IetError> {
        let d = letters.len();
        if d == 0 {
            return Err(IetError::EmptyAlphabet);
        }
        if !is_permutation(&top, d) {
            return Err(IetError::BadPermutation { which: "top" });
        }
        if !is_permutation(&bottom, d) {
            return Err(IetError::BadPermutation { which: "bottom" });
        }
        if lengths.len() != d {
            return Err(IetError::LengthMismatch {
                expected: d,
                got: lengths.len(),
            });
        }
        for (l, &v) in letters.iter().zip(&lengths) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IetError::NonPositiveLength {
                    letter: l.clone(),
                    value: v,
                });
            }
        }
        let (top_starts, top_shift) = layout(&top, &bottom, &lengths);
        let (bottom_starts, bottom_shift) = layout(&bottom, &top, &lengths);
        Ok(Self {
            total: top_starts[d],
            letters,
            top,
            bottom,
            lengths,
            top_starts,
            top_shift,
            bottom_starts,
            bottom_shift,
        })
    }

    /// Single-character letters: `from_strings("ABCDE", "CDEBA", λ)` with
    /// `λ` given in the order the letters appear in `top`.
    pub fn from_strings(top: &str, bottom: &str, lengths: &[f64]) -> Result<Self, IetError> {
        let letters: Vec<String> = top.chars().map(|c| c.to_string()).collect();
        let index = |c: char| {
            letters
                .iter()
                .position(|l| l.starts_with(c))
                .ok_or_else(|| IetError::UnknownLetter(c.to_string()))
        };
        let top_idx: Vec<usize> = (0..letters.len()).collect();
        let bottom_idx = bottom.chars().map(index).collect::<Result<Vec<_>, _>>()?;
        Self::new(letters, top_idx, bottom_idx, lengths.to_vec())
    }

    /// Rotation `x ↦ x + 1/φ mod 1` as the two-letter exchange `AB/BA` with
    /// `λ_A = 1/φ`, `λ_B = 1/φ²`.
    pub fn golden_rotation() -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        Self::from_strings("AB", "BA", &[1.0 / phi, 1.0 / (phi * phi)]).expect("valid")
    }

    /// Random irreducible exchange on `d` letters `A, B, …` with lengths
    /// drawn from `[0.5, 1.5)` and normalized to total 1.
    pub fn random_irreducible<R: Rng>(d: usize, rng: &mut R) -> Self {
        assert!(d >= 2, "irreducible exchanges need at least two letters");
        let letters: Vec<String> = (0..d).map(letter_name).collect();
        let top: Vec<usize> = (0..d).collect();
        loop {
            let mut bottom = top.clone();
            bottom.shuffle(rng);
            let mut lengths: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..1.5)).collect();
            let s: f64 = lengths.iter().sum();
            lengths.iter_mut().for_each(|l| *l /= s);
            let iet = Self::new(letters.clone(), top.clone(), bottom, lengths).expect("valid");
            if iet.is_irreducible() {
                return iet;
            }
        }
    }

    pub fn d(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    pub fn top(&self) -> &[usize] {
        &self.top
    }

    pub fn bottom(&self) -> &[usize] {
        &self.bottom
    }

    /// Lengths indexed by letter.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn letter_index(&self, name: &str) -> Option<usize> {
        self.letters.iter().position(|l| l == name)
    }

    /// Top breakpoints `x₀ = 0 < x₁ < … < x_d = L`.
    pub fn top_breakpoints(&self) -> &[f64] {
        &self.top_starts
    }

    pub fn bottom_breakpoints(&self) -> &[f64] {
        &self.bottom_starts
    }

    /// Same combinatorics, lengths multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::new(
            self.letters.clone(),
            self.top.clone(),
            self.bottom.clone(),
            self.lengths.iter().map(|l| l * c).collect(),
        )
        .expect("positive scale keeps lengths positive")
    }

    /// Same combinatorics, lengths normalized to total 1.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.total)
    }

    pub fn with_lengths(&self, lengths: Vec<f64>) -> Result<Self, IetError> {
        Self::new(self.letters.clone(), self.top.clone(), self.bottom.clone(), lengths)
    }

    /// Swaps top and bottom: the inverse exchange.
    pub fn inverse(&self) -> Self {
        Self::new(
            self.letters.clone(),
            self.bottom.clone(),
            self.top.clone(),
            self.lengths.clone(),
        )
        .expect("valid")
    }

    fn check(&self, x: f64) -> Result<(), IetError> {
        if (0.0..self.total).contains(&x) {
            Ok(())
        } else {
            Err(IetError::OutOfDomain { x, total: self.total })
        }
    }

    #[inline]
    fn clamp(&self, y: f64) -> f64 {
        if y < 0.0 {
            0.0
        } else if y >= self.total {
            self.total * (1.0 - f64::EPSILON)
        } else {
            y
        }
    }

    /// Top position (0-based) of the interval containing `x`.
    #[inline]
    pub fn top_slot(&self, x: f64) -> usize {
        let d = self.d();
        self.top_starts[1..d].partition_point(|&b| b <= x)
    }

    /// Letter whose top interval contains `x`.
    #[inline]
    pub fn letter_at(&self, x: f64) -> usize {
        self.top[self.top_slot(x)]
    }

    /// `T(x)` without the domain check.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.clamp(x + self.top_shift[self.top_slot(x)])
    }

    /// `T⁻¹(x)` without the domain check.
    #[inline]
    pub fn apply_inverse(&self, x: f64) -> f64 {
        let d = self.d();
        let k = self.bottom_starts[1..d].partition_point(|&b| b <= x);
        self.clamp(x + self.bottom_shift[k])
    }

    pub fn evaluate(&self, x: f64) -> Result<f64, IetError> {
        self.check(x)?;
        Ok(self.apply(x))
    }

    pub fn evaluate_inverse(&self, x: f64) -> Result<f64, IetError> {
        self.check(x)?;
        Ok(self.apply_inverse(x))
    }

    /// No proper prefix of the top order is mapped onto a prefix of the
    /// bottom order.
    pub fn is_irreducible(&self) -> bool {
        is_irreducible(&self.top, &self.bottom)
    }

    /// Iterates every interior discontinuity `horizon` steps and records the
    /// closest approach of an orbit point to a discontinuity.
    pub fn idoc_witness(&self, horizon: usize, tol: f64) -> IdocReport {
        let d = self.d();
        let disc = &self.top_starts[1..d];
        let mut min_distance = f64::INFINITY;
        let mut violation: Option<IdocViolation> = None;
        for (i, &x) in disc.iter().enumerate() {
            let mut z = x;
            for n in 1..=horizon {
                z = self.apply(z);
                let k = disc.partition_point(|&b| b <= z);
                let mut dist = f64::INFINITY;
                if k > 0 {
                    dist = dist.min(z - disc[k - 1]);
                }
                if k < disc.len() {
                    dist = dist.min(disc[k] - z);
                }
                min_distance = min_distance.min(dist);
                if dist <= tol {
                    let earlier = violation.as_ref().is_none_or(|v| n < v.step);
                    if earlier {
                        violation = Some(IdocViolation {
                            discontinuity: i + 1,
                            step: n,
                            distance: dist,
                        });
                    }
                    break;
                }
            }
        }
        IdocReport {
            horizon,
            tol,
            min_distance,
            violation,
        }
    }

    /// Natural coding of the orbit of `x0`: letter of each of the first `n`
    /// iterates.
    pub fn coding(&self, x0: f64, n: usize) -> Result<CodingWord, IetError> {
        self.check(x0)?;
        let mut x = x0;
        let mut symbols = Vec::with_capacity(n);
        for _ in 0..n {
            symbols.push(self.letter_at(x));
            x = self.apply(x);
        }
        Ok(CodingWord { symbols })
    }

    /// Counts distinct factors of length `1..=n_max` in the coding of one
    /// orbit of length `orbit_len`.
    pub fn factor_complexity(&self, x0: f64, n_max: usize, orbit_len: usize) -> Result<ComplexityReport, IetError> {
        let d = self.d();
        let word = self.coding(x0, orbit_len)?.symbols;
        let p = if n_max == 0 || word.len() < n_max {
            vec![0; n_max]
        } else {
            count_factors(&word, d, n_max)
        };
        let mut undersampled = p.first().is_none_or(|&p1| p1 < d);
        for w in p.windows(2) {
            let inc = w[1] as i64 - w[0] as i64;
            if inc < 0 || inc > d as i64 - 1 {
                undersampled = true;
            }
        }
        Ok(ComplexityReport { p, undersampled })
    }

    /// First `j ≥ 1` with `Tʲ(x) ∈ [a, b)`, up to `cap` iterations.
    pub fn first_hit_time(&self, x: f64, a: f64, b: f64, cap: u64) -> Option<u64> {
        let mut z = x;
        for j in 1..=cap {
            z = self.apply(z);
            if a <= z && z < b {
                return Some(j);
            }
        }
        None
    }
}

pub fn letter_name(i: usize) -> String {
    if i < 26 {
        ((b'A' + i as u8) as char).to_string()
    } else {
        format!("L{i}")
    }
}

pub fn is_irreducible(top: &[usize], bottom: &[usize]) -> bool {
    let d = top.len();
    let mut in_top = vec![false; d];
    let mut in_bottom = vec![false; d];
    let mut unmatched = 0i64;
    for k in 0..d.saturating_sub(1) {
        let a = top[k];
        in_top[a] = true;
        unmatched += if in_bottom[a] { -1 } else { 1 };
        let b = bottom[k];
        in_bottom[b] = true;
        unmatched += if in_top[b] { -1 } else { 1 };
        if unmatched == 0 {
            return false;
        }
    }
    true
}

fn count_factors(word: &[usize], d: usize, n_max: usize) -> Vec<usize> {
    let windows = word.len() - n_max + 1;
    let bits = (usize::BITS - (d.max(2) - 1).leading_zeros()) as usize;
    let mut p = vec![1usize; n_max];
    let mut record = |lcp: usize| {
        for slot in p.iter_mut().skip(lcp) {
            *slot += 1;
        }
    };
    if bits * n_max <= 128 {
        let mut keys: Vec<u128> = (0..windows)
            .map(|i| {
                word[i..i + n_max]
                    .iter()
                    .fold(0u128, |acc, &s| (acc << bits) | s as u128)
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let used = (bits * n_max) as u32;
        for w in keys.windows(2) {
            let diff = w[0] ^ w[1];
            let lead = diff.leading_zeros() - (128 - used);
            record(lead as usize / bits);
        }
    } else {
        let mut starts: Vec<usize> = (0..windows).collect();
        starts.sort_unstable_by(|&a, &b| word[a..a + n_max].cmp(&word[b..b + n_max]));
        for w in starts.windows(2) {
            let (a, b) = (&word[w[0]..w[0] + n_max], &word[w[1]..w[1] + n_max]);
            let lcp = a.iter().zip(b).take_while(|(x, y)| x == y).count();
            if lcp < n_max {
                record(lcp);
            }
        }
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdocViolation {
    /// 1-based index of the discontinuity `x_i`.
    pub discontinuity: usize,
    pub step: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdocReport {
    pub horizon: usize,
    pub tol: f64,
    pub min_distance: f64,
    pub violation: Option<IdocViolation>,
}

impl IdocReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodingWord {
    pub symbols: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplexityReport {
    /// `p[n-1]` is the number of distinct factors of length `n`.
    pub p: Vec<usize>,
    pub undersampled: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_values() {
        let t = IetData::from_strings("AB", "BA", &[0.4, 0.6]).unwrap();
        assert!((t.evaluate(0.1).unwrap() - 0.7).abs() < 1e-15);
        assert!((t.evaluate(0.5).unwrap() - 0.1).abs() < 1e-15);
        assert!(t.evaluate(1.0).is_err());
        assert!(t.evaluate(-0.1).is_err());
    }

    #[test]
    fn five_letter_slot_arithmetic() {
        let t = IetData::from_strings("ABCDE", "CDEBA", &[0.1, 0.15, 0.2, 0.25, 0.3]).unwrap();
        // A sits last in the bottom row, after C, D, E, B (0.2 + 0.25 + 0.3 + 0.15)
        assert!((t.evaluate(0.05).unwrap() - 0.95).abs() < 1e-12);
        let y = t.evaluate(0.42).unwrap();
        assert!((t.evaluate_inverse(y).unwrap() - 0.42).abs() < 1e-12);
    }

    #[test]
    fn irreducibility() {
        assert!(!IetData::from_strings("AB", "AB", &[0.5, 0.5]).unwrap().is_irreducible());
        assert!(IetData::from_strings("ABCDE", "CDEBA", &[1.0; 5])
            .unwrap()
            .is_irreducible());
        assert!(!IetData::from_strings("ABCD", "BADC", &[1.0; 4])
            .unwrap()
            .is_irreducible());
        assert!(IetData::from_strings("ABCD", "DCBA", &[1.0; 4])
            .unwrap()
            .is_irreducible());
    }

    #[test]
    fn idoc_rational_rotation_fails() {
        let t = IetData::from_strings("AB", "BA", &[0.5, 0.5]).unwrap();
        let r = t.idoc_witness(10, 1e-10);
        assert_eq!(r.violation.as_ref().unwrap().step, 2);
        let swap = IetData::from_strings("ABC", "CBA", &[0.3, 0.2, 0.3]).unwrap();
        assert!(!swap.idoc_witness(10, 1e-10).passed());
    }

    #[test]
    fn idoc_golden_passes() {
        let r = IetData::golden_rotation().idoc_witness(10_000, 1e-10);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn golden_complexity() {
        let t = IetData::golden_rotation();
        let r = t.factor_complexity(0.1, 20, 20_000).unwrap();
        assert_eq!(r.p, (1..=20).map(|n| n + 1).collect::<Vec<_>>());
        assert!(!r.undersampled);
    }

    #[test]
    fn slice_path_matches_packed_path() {
        let t = IetData::from_strings("ABC", "CBA", &[0.31, 0.27, 0.42 + 2f64.sqrt() / 100.0]).unwrap();
        let word = t.coding(0.123, 50_000).unwrap().symbols;
        let packed = count_factors(&word, 3, 20);
        let sliced = count_factors(&word, 3, 70);
        assert_eq!(packed[..], sliced[..20]);
    }

    #[test]
    fn json_roundtrip() {
        let t = IetData::from_strings("ABC", "CAB", &[0.2, 0.3, 0.5]).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        let back: IetData = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
