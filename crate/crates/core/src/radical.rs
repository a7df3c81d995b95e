//! Exact arithmetic on Q-linear combinations of square roots.
//!
//! A [`RadicalNumber`] is a finite sum `Σ c_r·√r` with rational coefficients and
//! square-free radicands (radicand `1` is the rational part). Square roots of
//! distinct square-free integers are linearly independent over Q, so the
//! term map is a canonical form: equality and rational proportionality are
//! decided by comparing maps, and the sign is decided exactly by eliminating
//! one prime at a time.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RadicalError {
    #[error("cannot parse rational coefficient {0:?}")]
    BadCoefficient(String),
    #[error("radicand must be positive, got {0}")]
    BadRadicand(u64),
    #[error("length must be positive, got {0}")]
    NotPositive(String),
}

/// Exact element of the field generated by square roots of integers.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct RadicalNumber {
    // square-free radicand -> nonzero coefficient
    terms: BTreeMap<u64, BigRational>,
}

/// Splits `n` into `(s, r)` with `n = s²·r` and `r` square-free.
fn square_free_split(mut n: u64) -> (u64, u64) {
    let mut outside = 1u64;
    let mut inside = 1u64;
    let mut p = 2u64;
    while p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        for _ in 0..e / 2 {
            outside *= p;
        }
        if e % 2 == 1 {
            inside *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    inside *= n;
    (outside, inside)
}

fn largest_prime_factor(mut n: u64) -> Option<u64> {
    if n < 2 {
        return None;
    }
    let mut largest = 1;
    let mut p = 2u64;
    while p * p <= n {
        while n.is_multiple_of(p) {
            largest = p;
            n /= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        largest = n;
    }
    Some(largest)
}

fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(0.0)
}

fn scaled_to_f64(sum: &BigInt, bits: u32) -> f64 {
    let shift = sum.bits().saturating_sub(62) as i64;
    let head = (sum >> shift as usize).to_f64().unwrap_or(0.0);
    head * 2f64.powi((shift - bits as i64) as i32)
}

/// Parses `"3"`, `"-3/2"` or `"1.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, RadicalError> {
    let s = text.trim();
    let bad = || RadicalError::BadCoefficient(text.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac);
        let mut n: BigInt = digits.parse().map_err(|_| bad())?;
        if negative {
            n = -n;
        }
        let d = BigInt::from(10u8).pow(frac.len() as u32);
        return Ok(BigRational::new(n, d));
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

impl RadicalNumber {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut out = Self::zero();
        out.add_term(1, q);
        out
    }

    /// `coeff · √radicand`, normalizing the radicand to its square-free part.
    pub fn term(coeff: BigRational, radicand: u64) -> Result<Self, RadicalError> {
        if radicand == 0 {
            return Err(RadicalError::BadRadicand(0));
        }
        let (outside, inside) = square_free_split(radicand);
        let mut out = Self::zero();
        out.add_term(inside, coeff * BigRational::from_integer(BigInt::from(outside)));
        Ok(out)
    }

    /// `√n`.
    pub fn sqrt(n: u64) -> Result<Self, RadicalError> {
        Self::term(BigRational::one(), n)
    }

    fn add_term(&mut self, radicand: u64, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(radicand).or_insert_with(BigRational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&radicand);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the value is rational (only the radicand-1 term is present).
    pub fn is_rational(&self) -> bool {
        self.terms.keys().all(|&r| r == 1)
    }

    /// Iterates `(radicand, coefficient)` pairs in increasing radicand order.
    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.terms.iter().map(|(r, c)| (*r, c))
    }

    /// Value rounded to double precision. Cancellation between large terms is
    /// resolved with fixed-point evaluation at increasing precision.
    pub fn to_f64(&self) -> f64 {
        let approx = self.naive_f64();
        if approx.abs() >= self.magnitude() * 1e-4 {
            return approx;
        }
        let mut bits = 128u32;
        while bits <= 1 << 14 {
            let (sum, err) = self.fixed_point(bits);
            if sum.magnitude() > &(err.magnitude() << 60u32) {
                return scaled_to_f64(&sum, bits);
            }
            bits *= 2;
        }
        0.0
    }

    fn naive_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(r, c)| rational_to_f64(c) * (*r as f64).sqrt())
            .sum()
    }

    /// `(s, e)` with `|value·2^bits − s| ≤ e`.
    fn fixed_point(&self, bits: u32) -> (BigInt, BigInt) {
        let mut sum = BigInt::zero();
        let mut err = BigInt::one();
        for (r, c) in &self.terms {
            let root = (BigInt::from(*r) << (2 * bits as usize)).sqrt();
            let (n, d) = (c.numer(), c.denom());
            sum += (n * root).div_floor(d);
            err += n.abs().div_ceil(d) + 2;
        }
        (sum, err)
    }

    /// Sum of absolute term magnitudes, used as a floating error scale.
    fn magnitude(&self) -> f64 {
        self.terms
            .iter()
            .map(|(r, c)| rational_to_f64(c).abs() * (*r as f64).sqrt())
            .sum()
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(r, c)| (*r, c * q)).collect(),
        }
    }

    /// Exact sign of the value.
    pub fn signum(&self) -> Ordering {
        if self.terms.is_empty() {
            return Ordering::Equal;
        }
        let approx = self.naive_f64();
        let err = self.magnitude() * 1e-12;
        if approx.is_finite() && approx.abs() > err {
            return approx.partial_cmp(&0.0).unwrap();
        }
        let mut bits = 128u32;
        while bits <= 4096 {
            let (sum, err) = self.fixed_point(bits);
            if sum.magnitude() > err.magnitude() {
                return sum.sign().cmp(&num_bigint::Sign::NoSign);
            }
            bits *= 2;
        }
        self.exact_signum()
    }

    fn exact_signum(&self) -> Ordering {
        let prime = self.terms.keys().filter_map(|&r| largest_prime_factor(r)).max();
        let Some(p) = prime else {
            return match self.terms.get(&1) {
                Some(c) if c.is_positive() => Ordering::Greater,
                Some(_) => Ordering::Less,
                None => Ordering::Equal,
            };
        };
        // self = a + b·√p with a, b free of p
        let mut a = Self::zero();
        let mut b = Self::zero();
        for (r, c) in &self.terms {
            if r % p == 0 {
                b.add_term(r / p, c.clone());
            } else {
                a.add_term(*r, c.clone());
            }
        }
        let sa = a.exact_signum();
        let sb = b.exact_signum();
        match (sa, sb) {
            (_, Ordering::Equal) => sa,
            (Ordering::Equal, _) => sb,
            _ if sa == sb => sa,
            _ => {
                let p_rat = BigRational::from_integer(BigInt::from(p));
                let d = &(&a * &a) - &(&b * &b).scale(&p_rat);
                match d.exact_signum() {
                    Ordering::Greater => sa,
                    Ordering::Less => sb,
                    Ordering::Equal => Ordering::Equal,
                }
            }
        }
    }

    /// Exact comparison of two values.
    pub fn cmp_exact(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }

    /// Returns `q` with `self = q·other` when the two are rationally
    /// proportional, `None` otherwise (or when `other` is zero).
    pub fn rational_ratio(&self, other: &Self) -> Option<BigRational> {
        let (r0, c0) = other.terms.iter().next()?;
        let q = self.terms.get(r0).cloned().unwrap_or_else(BigRational::zero) / c0;
        if self.terms.len() != other.terms.len() && !q.is_zero() {
            return None;
        }
        (*self == other.scale(&q)).then_some(q)
    }
}

impl fmt::Debug for RadicalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for RadicalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (r, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match (*r, c.is_one()) {
                (1, _) => write!(f, "{c}")?,
                (r, true) => write!(f, "√{r}")?,
                (r, false) => write!(f, "{c}·√{r}")?,
            }
        }
        Ok(())
    }
}

impl<'a> Add<&'a RadicalNumber> for &'a RadicalNumber {
    type Output = RadicalNumber;
    fn add(self, rhs: &RadicalNumber) -> RadicalNumber {
        let mut out = self.clone();
        for (r, c) in &rhs.terms {
            out.add_term(*r, c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a RadicalNumber> for &'a RadicalNumber {
    type Output = RadicalNumber;
    fn sub(self, rhs: &RadicalNumber) -> RadicalNumber {
        let mut out = self.clone();
        for (r, c) in &rhs.terms {
            out.add_term(*r, -c.clone());
        }
        out
    }
}

impl<'a> Mul<&'a RadicalNumber> for &'a RadicalNumber {
    type Output = RadicalNumber;
    fn mul(self, rhs: &RadicalNumber) -> RadicalNumber {
        let mut out = RadicalNumber::zero();
        for (r1, c1) in &self.terms {
            for (r2, c2) in &rhs.terms {
                let g = r1.gcd(r2);
                let radicand = (r1 / g) * (r2 / g);
                out.add_term(radicand, c1 * c2 * BigRational::from_integer(BigInt::from(g)));
            }
        }
        out
    }
}

impl Neg for &RadicalNumber {
    type Output = RadicalNumber;
    fn neg(self) -> RadicalNumber {
        RadicalNumber {
            terms: self.terms.iter().map(|(r, c)| (*r, -c)).collect(),
        }
    }
}

/// Strictly positive [`RadicalNumber`]: an exact edge length.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RadicalLength(RadicalNumber);

impl RadicalLength {
    pub fn new(value: RadicalNumber) -> Result<Self, RadicalError> {
        if value.signum() != Ordering::Greater {
            return Err(RadicalError::NotPositive(value.to_string()));
        }
        Ok(Self(value))
    }

    /// `√n` for a positive integer `n`.
    pub fn sqrt(n: u64) -> Result<Self, RadicalError> {
        Self::new(RadicalNumber::sqrt(n)?)
    }

    pub fn integer(n: u64) -> Result<Self, RadicalError> {
        Self::new(RadicalNumber::from_integer(n as i64))
    }

    pub fn value(&self) -> &RadicalNumber {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    /// True when `self / other` is rational.
    pub fn commensurable_with(&self, other: &Self) -> bool {
        self.0.rational_ratio(&other.0).is_some()
    }

    pub fn to_terms(&self) -> Vec<LengthTerm> {
        self.0
            .terms()
            .map(|(radicand, coeff)| LengthTerm {
                coeff: coeff.to_string(),
                radicand,
            })
            .collect()
    }

    pub fn from_terms(terms: &[LengthTerm]) -> Result<Self, RadicalError> {
        let mut acc = RadicalNumber::zero();
        for t in terms {
            let c = parse_rational(&t.coeff)?;
            acc = &acc + &RadicalNumber::term(c, t.radicand)?;
        }
        Self::new(acc)
    }
}

impl PartialOrd for RadicalLength {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RadicalLength {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp_exact(&other.0)
    }
}

impl fmt::Display for RadicalLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Serialized form of one `coeff·√radicand` term.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthTerm {
    pub coeff: String,
    pub radicand: u64,
}
