//! Exact arithmetic layer: lattice frequencies in Z^2, derivative multiindices,
//! rationals and rational intervals.
//!
//! Everything here is exact. Frequencies produced by the witness builder grow
//! far past 64 bits, so coordinates are `BigInt` and coefficients are
//! `BigRational` throughout.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational. `BigRational` keeps every value in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int<T: Into<BigInt>>(n: T) -> Rational {
    Rational::from_integer(n.into())
}

/// `2^-r` as a rational.
pub fn inv_pow2(r: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << r as usize)
}

/// Renders `p/q`, or `p` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `p/q`, or a finite decimal such as `-0.125`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let int_part: BigInt = match int.trim_start_matches(['-', '+']) {
            "" => BigInt::zero(),
            digits => digits.parse().map_err(|_| bad())?,
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let magnitude = Rational::new(int_part * &scale + frac_part, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Exact value of a finite `f64`.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x}")))
}

/// Largest `f64` not above `r`.
pub fn f64_floor(r: &Rational) -> f64 {
    let x = r.to_f64().unwrap_or(f64::NAN);
    match Rational::from_float(x) {
        Some(exact) if exact > *r => next_down(x),
        _ => x,
    }
}

/// Smallest `f64` not below `r`.
pub fn f64_ceil(r: &Rational) -> f64 {
    let x = r.to_f64().unwrap_or(f64::NAN);
    match Rational::from_float(x) {
        Some(exact) if exact < *r => next_up(x),
        _ => x,
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

pub mod rational_string {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(D::Error::custom)
    }
}

pub mod rational_vec_string {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&format_rational(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rational(s).map_err(D::Error::custom))
            .collect()
    }
}

/// A frequency in Z^2. Serialized as `["q1", "q2"]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVector {
    pub x: BigInt,
    pub y: BigInt,
}

impl LatticeVector {
    pub fn new(x: impl Into<BigInt>, y: impl Into<BigInt>) -> Self {
        Self { x: x.into(), y: y.into() }
    }

    pub fn zero() -> Self {
        Self::new(0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    /// Max-norm `max(|x|, |y|)`.
    pub fn linf(&self) -> BigInt {
        self.x.abs().max(self.y.abs())
    }

    pub fn coord(&self, i: usize) -> &BigInt {
        match i {
            0 => &self.x,
            1 => &self.y,
            _ => panic!("lattice vectors are two-dimensional"),
        }
    }

    /// `<self, v>` for a two-dimensional multiindex.
    pub fn dot(&self, v: &MultiIndex) -> Result<BigInt> {
        v.expect_dim(2)?;
        Ok(&self.x * v.0[0] + &self.y * v.0[1])
    }

    pub fn scaled(&self, c: i64) -> Self {
        Self { x: &self.x * c, y: &self.y * c }
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for &LatticeVector {
    type Output = LatticeVector;
    fn add(self, rhs: &LatticeVector) -> LatticeVector {
        LatticeVector { x: &self.x + &rhs.x, y: &self.y + &rhs.y }
    }
}

impl Sub for &LatticeVector {
    type Output = LatticeVector;
    fn sub(self, rhs: &LatticeVector) -> LatticeVector {
        LatticeVector { x: &self.x - &rhs.x, y: &self.y - &rhs.y }
    }
}

impl Neg for &LatticeVector {
    type Output = LatticeVector;
    fn neg(self) -> LatticeVector {
        LatticeVector { x: -&self.x, y: -&self.y }
    }
}

impl Neg for LatticeVector {
    type Output = LatticeVector;
    fn neg(self) -> LatticeVector {
        LatticeVector { x: -self.x, y: -self.y }
    }
}

impl Serialize for LatticeVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.x.to_string(), self.y.to_string()].serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let [x, y] = <[String; 2]>::deserialize(d)?;
        Ok(Self {
            x: x.parse().map_err(D::Error::custom)?,
            y: y.parse().map_err(D::Error::custom)?,
        })
    }
}

/// Orders of a mixed partial derivative, one entry per coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("multiindex must have at least one entry".into()));
        }
        Ok(Self(entries))
    }

    pub fn pair(a: u32, b: u32) -> Self {
        Self(vec![a, b])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `|alpha|`.
    pub fn order(&self) -> u64 {
        self.0.iter().map(|&a| a as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn dot(&self, other: &MultiIndex) -> Result<u64> {
        other.expect_dim(self.dim())?;
        Ok(self.0.iter().zip(&other.0).map(|(&a, &b)| a as u64 * b as u64).sum())
    }

    pub(crate) fn expect_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.dim() });
        }
        Ok(())
    }

    /// Parses `"a,b,..."`.
    pub fn parse(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad multiindex entry {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Parses the `"a,b;c,d;..."` list syntax.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(';').filter(|t| !t.trim().is_empty()).map(Self::parse).collect()
    }
}

impl TryFrom<Vec<u32>> for MultiIndex {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MultiIndex> for Vec<u32> {
    fn from(m: MultiIndex) -> Vec<u32> {
        m.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `<q, x> - floor(<q, x>)` for a rational point `x`.
pub fn mod1(q: &LatticeVector, x: &(Rational, Rational)) -> Rational {
    let t = x.0.clone() * Rational::from_integer(q.x.clone())
        + x.1.clone() * Rational::from_integer(q.y.clone());
    let fl = t.floor();
    t - fl
}

/// The multiplier `q^alpha = q1^a1 * q2^a2`.
pub fn monomial(q: &LatticeVector, alpha: &MultiIndex) -> Result<BigInt> {
    alpha.expect_dim(2)?;
    Ok(num_traits::pow(q.x.clone(), alpha.0[0] as usize)
        * num_traits::pow(q.y.clone(), alpha.0[1] as usize))
}

/// Closed rational interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalInterval {
    #[serde(with = "rational_string")]
    pub lo: Rational,
    #[serde(with = "rational_string")]
    pub hi: Rational,
}

impl RationalInterval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "empty interval [{}, {}]",
                format_rational(&lo),
                format_rational(&hi)
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: Rational) -> Self {
        Self { lo: v.clone(), hi: v }
    }

    /// `[center - radius, center + radius]` for `radius >= 0`.
    pub fn around(center: &BigInt, radius: &BigInt) -> Self {
        Self {
            lo: Rational::from_integer(center - radius),
            hi: Rational::from_integer(center + radius),
        }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let c = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = c.iter().min().cloned().unwrap();
        let hi = c.iter().max().cloned().unwrap();
        Self { lo, hi }
    }

    /// Interval quotient; fails when the divisor contains zero.
    pub fn div(&self, other: &Self) -> Result<Self> {
        if other.contains_zero() {
            return Err(Error::InvalidArgument("interval division by an interval containing 0".into()));
        }
        let recip = Self { lo: other.hi.recip(), hi: other.lo.recip() };
        Ok(self.mul(&recip))
    }

    /// Tight enclosure of `{v^e : v in self}`.
    pub fn powi(&self, e: u32) -> Self {
        if e == 0 {
            return Self::point(Rational::one());
        }
        let a = num_traits::pow(self.lo.clone(), e as usize);
        let b = num_traits::pow(self.hi.clone(), e as usize);
        if e % 2 == 1 || !self.lo.is_negative() {
            Self { lo: a, hi: b }
        } else if !self.hi.is_positive() {
            Self { lo: b, hi: a }
        } else {
            Self { lo: Rational::zero(), hi: a.max(b) }
        }
    }

    /// `sup { |v - target| : v in self }`.
    pub fn max_distance(&self, target: &Rational) -> Rational {
        (&self.lo - target).abs().max((&self.hi - target).abs())
    }
}

/// Encloses `1/sqrt(n)` in `[lo, hi]` with `hi - lo <= width`; exact point for
/// perfect squares.
pub fn sqrt_interval(n: u64, width: &Rational) -> Result<RationalInterval> {
    if n == 0 {
        return Err(Error::InvalidArgument("sqrt_interval needs n >= 1".into()));
    }
    if !width.is_positive() {
        return Err(Error::InvalidArgument("sqrt_interval needs width > 0".into()));
    }
    let root = n.sqrt();
    if root * root == n {
        return Ok(RationalInterval::point(rat(1, root as i64)));
    }
    // Dyadic denominator D with 1/D <= width; a = isqrt(floor(D^2 / n)).
    let mut bits = 0usize;
    while Rational::new(BigInt::one(), BigInt::one() << bits) > *width {
        bits += 1;
    }
    let d = BigUint::one() << bits;
    let a = (&d * &d / BigUint::from(n)).sqrt();
    let den = BigInt::from_biguint(Sign::Plus, d);
    let a = BigInt::from_biguint(Sign::Plus, a);
    let lo = Rational::new(a.clone(), den.clone());
    let hi = Rational::new(a + 1, den);
    RationalInterval::new(lo, hi)
}

/// Integer square root if `n` is a perfect square.
pub fn exact_sqrt(n: u64) -> Option<u64> {
    let r = n.sqrt();
    (r * r == n).then_some(r)
}

/// Smallest perfect square `>= n`.
pub fn next_perfect_square(n: u64) -> u64 {
    let r = n.sqrt();
    if r * r >= n {
        r * r
    } else {
        (r + 1) * (r + 1)
    }
}

/// Residue of `v` modulo `2^64`, i.e. its two's-complement low word.
pub fn low_word(v: &BigInt) -> u64 {
    let digits = v.magnitude().iter_u64_digits().next().unwrap_or(0);
    if v.sign() == Sign::Minus {
        digits.wrapping_neg()
    } else {
        digits
    }
}

/// Residue of `v` modulo a positive `m` in `[0, m)`.
pub fn residue(v: &BigInt, m: u64) -> u64 {
    let r = v.mod_floor(&BigInt::from(m));
    r.to_u64().expect("residue fits")
}
