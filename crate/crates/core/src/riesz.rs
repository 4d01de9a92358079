//! Sparse trigonometric polynomials on the 2-torus with exact rational
//! coefficients, the modified Riesz product `R_n = -1 + prod_k (1 + cos 2pi<a_k,x>)`,
//! the polynomial `Z` with `D^{alpha_0} Z = R_n`, derivative polynomials, and
//! the split of each derivative into a small remainder `I_l` plus a product
//! form `II_l`.
//!
//! Derivatives use the normalized symbol: `D^alpha` multiplies the
//! coefficient at `q` by `q^alpha`, dropping `(2 pi i)^{|alpha|}`.

use std::collections::BTreeMap;
use std::collections::btree_map::Entry;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, inv_pow2, mod1, monomial, parse_rational, LatticeVector, MultiIndex, Rational};
use crate::frequency::AdmissibleSequence;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub re: Rational,
    pub im: Rational,
    /// Support size of the sign pattern that produced this frequency.
    pub r: Option<u32>,
}

impl Term {
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// Finite map from frequencies to complex rational coefficients. Zero
/// coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseTrigPoly {
    terms: BTreeMap<LatticeVector, Term>,
}

impl SparseTrigPoly {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, q: &LatticeVector) -> Option<&Term> {
        self.terms.get(q)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeVector, &Term)> {
        self.terms.iter()
    }

    /// Adds `re + i im` at `q`, merging with any existing coefficient.
    pub fn add_term(&mut self, q: LatticeVector, re: Rational, im: Rational, r: Option<u32>) {
        match self.terms.entry(q) {
            Entry::Vacant(v) => {
                let t = Term { re, im, r };
                if !t.is_zero() {
                    v.insert(t);
                }
            }
            Entry::Occupied(mut o) => {
                let t = o.get_mut();
                t.re += re;
                t.im += im;
                if t.r != r {
                    t.r = None;
                }
                if t.is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &SparseTrigPoly) -> SparseTrigPoly {
        let mut out = self.clone();
        for (q, t) in &other.terms {
            out.add_term(q.clone(), t.re.clone(), t.im.clone(), t.r);
        }
        out
    }

    /// Multiplies every coefficient by `i`.
    pub fn times_i(&self) -> SparseTrigPoly {
        let terms = self
            .terms
            .iter()
            .map(|(q, t)| (q.clone(), Term { re: -t.im.clone(), im: t.re.clone(), r: t.r }))
            .collect();
        SparseTrigPoly { terms }
    }

    /// Checks `c(-q) = parity * conj(c(q))` for every `q`; `parity = 1` is
    /// Hermitian symmetry (a real-valued function).
    pub fn has_parity(&self, parity: i32) -> bool {
        let p = Rational::from_integer(BigInt::from(parity));
        self.terms.iter().all(|(q, t)| match self.terms.get(&-q) {
            Some(u) => u.re == &p * &t.re && u.im == -(&p * &t.im),
            None => false,
        })
    }

    pub fn is_hermitian(&self) -> bool {
        self.has_parity(1)
    }

    /// `(max |q1|, max |q2|)` over the support.
    pub fn max_frequency(&self) -> (BigInt, BigInt) {
        self.terms.keys().fold((BigInt::zero(), BigInt::zero()), |(a, b), q| (a.max(q.x.abs()), b.max(q.y.abs())))
    }

    /// Complex value at a rational point, via exact reduction of each phase.
    pub fn eval_at(&self, x: &(Rational, Rational)) -> (f64, f64) {
        let (mut re, mut im) = (0.0, 0.0);
        for (q, t) in &self.terms {
            let turn = centered_turn(&mod1(q, x));
            let (s, c) = (std::f64::consts::TAU * turn).sin_cos();
            let (a, b) = (t.re.to_f64().unwrap_or(0.0), t.im.to_f64().unwrap_or(0.0));
            re += a * c - b * s;
            im += a * s + b * c;
        }
        (re, im)
    }
}

fn centered_turn(t: &Rational) -> f64 {
    let v = t.to_f64().unwrap_or(0.0);
    if v >= 0.5 {
        v - 1.0
    } else {
        v
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    q: LatticeVector,
    re: String,
    im: String,
    r: Option<u32>,
}

impl Serialize for SparseTrigPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.terms.iter().map(|(q, t)| TermJson {
            q: q.clone(),
            re: format_rational(&t.re),
            im: format_rational(&t.im),
            r: t.r,
        }))
    }
}

impl<'de> Deserialize<'de> for SparseTrigPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = Vec::<TermJson>::deserialize(d)?;
        let mut p = SparseTrigPoly::new();
        for t in raw {
            let re = parse_rational(&t.re).map_err(D::Error::custom)?;
            let im = parse_rational(&t.im).map_err(D::Error::custom)?;
            p.add_term(t.q, re, im, t.r);
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Oscillator {
    Cosine,
    Sine,
}

impl std::str::FromStr for Oscillator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos" | "cosine" => Ok(Oscillator::Cosine),
            "sin" | "sine" => Ok(Oscillator::Sine),
            other => Err(Error::Parse(format!("unknown oscillator {other:?} (cosine|sine)"))),
        }
    }
}

/// `sum_k w_k osc(2pi<a_k,x>) prod_{j<k} (1 + cos 2pi<a_j,x>)`, evaluable in
/// `O(n)` per point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralProduct {
    pub freqs: Vec<LatticeVector>,
    #[serde(with = "crate::exact::rational_vec_string")]
    pub weights: Vec<Rational>,
    pub oscillator: Oscillator,
}

impl StructuralProduct {
    pub fn new(freqs: Vec<LatticeVector>, weights: Vec<Rational>, oscillator: Oscillator) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::InvalidArgument("structural product needs at least one frequency".into()));
        }
        if freqs.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: freqs.len(), got: weights.len() });
        }
        Ok(Self { freqs, weights, oscillator })
    }

    pub fn n(&self) -> usize {
        self.freqs.len()
    }

    /// Literal Fourier expansion obtained by distributing the products.
    pub fn expand(&self) -> SparseTrigPoly {
        let mut p = SparseTrigPoly::new();
        for term in riesz_terms(&self.freqs) {
            let w = &self.weights[term.k] * inv_pow2(term.r);
            if w.is_zero() {
                continue;
            }
            let (re, im) = match (self.oscillator, term.sign > 0) {
                (Oscillator::Cosine, _) => (w, Rational::zero()),
                (Oscillator::Sine, true) => (Rational::zero(), -w),
                (Oscillator::Sine, false) => (Rational::zero(), w),
            };
            p.add_term(term.q, re, im, Some(term.r));
        }
        p
    }

    /// The expansion in the derivative convention: `i * expand()` for sine
    /// forms, `expand()` for cosine forms. With this,
    /// `D^{alpha_l} Z = I_l + II_l.to_derivative_part()`.
    pub fn to_derivative_part(&self) -> SparseTrigPoly {
        match self.oscillator {
            Oscillator::Cosine => self.expand(),
            Oscillator::Sine => self.expand().times_i(),
        }
    }

    /// Value given the phases `<a_k, x>` in turns.
    pub fn eval_turns(&self, turns: &[f64], weights: &[f64]) -> f64 {
        eval_product(turns, weights, self.oscillator)
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.to_f64().unwrap_or(0.0)).collect()
    }
}

pub(crate) fn eval_product(turns: &[f64], weights: &[f64], oscillator: Oscillator) -> f64 {
    let mut prod = 1.0;
    let mut sum = 0.0;
    for (&t, &w) in turns.iter().zip(weights) {
        let (s, c) = (std::f64::consts::TAU * t).sin_cos();
        let osc = match oscillator {
            Oscillator::Cosine => c,
            Oscillator::Sine => s,
        };
        sum += w * osc * prod;
        prod *= 1.0 + c;
    }
    sum
}

/// Evaluates a product form at a rational point with exact argument
/// reduction. Only binary64 (53-bit) evaluation is implemented.
pub fn eval_product_form(f: &StructuralProduct, x: &(Rational, Rational), precision: u32) -> Result<f64> {
    if precision < 53 {
        return Err(Error::InvalidArgument(format!("precision must be >= 53 bits, got {precision}")));
    }
    if precision > 53 {
        return Err(Error::InvalidArgument(format!(
            "only 53-bit evaluation is available, got precision {precision}"
        )));
    }
    let turns: Vec<f64> = f.freqs.iter().map(|a| centered_turn(&mod1(a, x))).collect();
    Ok(f.eval_turns(&turns, &f.weights_f64()))
}

/// One support point of the Riesz expansion: `q = sign * (a_k + sum_{j<k} eps_j a_j)`.
#[derive(Clone, Debug)]
pub(crate) struct RieszTerm {
    pub q: LatticeVector,
    pub k: usize,
    pub sign: i8,
    pub r: u32,
}

pub(crate) fn riesz_terms(freqs: &[LatticeVector]) -> Vec<RieszTerm> {
    let mut out = Vec::new();
    for k in 0..freqs.len() {
        let mut layer = vec![(freqs[k].clone(), 1u32)];
        for a in &freqs[..k] {
            let mut next = Vec::with_capacity(layer.len() * 3);
            for (q, r) in &layer {
                next.push((q - a, r + 1));
                next.push((q.clone(), *r));
                next.push((q + a, r + 1));
            }
            layer = next;
        }
        for (q, r) in layer {
            out.push(RieszTerm { q: -&q, k, sign: -1, r });
            out.push(RieszTerm { q, k, sign: 1, r });
        }
    }
    out
}

/// `R_n = -1 + prod_k (1 + cos 2pi<a_k,x>)`: coefficient `2^-r(q)` at each of
/// the `3^n - 1` nonzero sign-pattern frequencies.
pub fn expand_riesz(freqs: &[LatticeVector]) -> Result<SparseTrigPoly> {
    let mut terms = BTreeMap::new();
    for t in riesz_terms(freqs) {
        if t.q.is_zero() {
            return Err(Error::Inadmissible(format!("sign pattern sums to zero (k = {})", t.k + 1)));
        }
        match terms.entry(t.q) {
            Entry::Vacant(v) => {
                v.insert(Term { re: inv_pow2(t.r), im: Rational::zero(), r: Some(t.r) });
            }
            Entry::Occupied(o) => {
                return Err(Error::Inadmissible(format!("colliding sign patterns at {}", o.key())));
            }
        }
    }
    Ok(SparseTrigPoly { terms })
}

/// The family `alpha_l = alpha_0 + l (alpha_1 - alpha_0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivativeFamily {
    pub alpha0: MultiIndex,
    pub alpha1: MultiIndex,
}

impl Default for DerivativeFamily {
    /// `alpha_0 = (4,0)`, `alpha_1 = (3,2)`: the members are
    /// `(4,0), (3,2), (2,4), (1,6), (0,8)`.
    fn default() -> Self {
        Self { alpha0: MultiIndex::pair(4, 0), alpha1: MultiIndex::pair(3, 2) }
    }
}

impl DerivativeFamily {
    pub fn alpha(&self, l: u32) -> Result<MultiIndex> {
        self.alpha1.expect_dim(self.alpha0.dim())?;
        let entries = self
            .alpha0
            .entries()
            .iter()
            .zip(self.alpha1.entries())
            .map(|(&a0, &a1)| {
                let v = a0 as i64 + l as i64 * (a1 as i64 - a0 as i64);
                u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("alpha_{l} has a negative entry")))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiIndex::new(entries)
    }

    /// Largest `l` keeping every entry nonnegative.
    pub fn max_l(&self) -> u32 {
        (0..=u16::MAX as u32).take_while(|&l| self.alpha(l).is_ok()).last().unwrap_or(0)
    }
}

/// `Z` with coefficient `2^-r(q) / q^{alpha_0}`, so `D^{alpha_0} Z = R_n`.
pub fn build_z(seq: &AdmissibleSequence, alpha0: &MultiIndex) -> Result<SparseTrigPoly> {
    let riesz = expand_riesz(&seq.freqs)?;
    let mut terms = BTreeMap::new();
    for (q, t) in riesz.terms {
        let d = monomial(&q, alpha0)?;
        if d.is_zero() {
            return Err(Error::Inadmissible(format!("symbol q^alpha0 vanishes at {q}")));
        }
        let den = Rational::from_integer(d);
        terms.insert(q, Term { re: &t.re / &den, im: &t.im / &den, r: t.r });
    }
    Ok(SparseTrigPoly { terms })
}

/// Multiplies the coefficient at `q` by `q^alpha`.
pub fn apply_derivative(p: &SparseTrigPoly, alpha: &MultiIndex) -> Result<SparseTrigPoly> {
    alpha.expect_dim(2)?;
    let mut terms = BTreeMap::new();
    for (q, t) in &p.terms {
        let s = monomial(q, alpha)?;
        if s.is_zero() {
            continue;
        }
        let s = Rational::from_integer(s);
        terms.insert(q.clone(), Term { re: &t.re * &s, im: &t.im * &s, r: t.r });
    }
    Ok(SparseTrigPoly { terms })
}

/// `D^{alpha_l} Z` computed directly from the sequence.
pub fn derivative_poly(seq: &AdmissibleSequence, family: &DerivativeFamily, l: u32) -> Result<SparseTrigPoly> {
    let z = build_z(seq, &family.alpha0)?;
    apply_derivative(&z, &family.alpha(l)?)
}

/// Splits `D^{alpha_l} Z = I_l + II_l.to_derivative_part()`.
///
/// The product part centers every coefficient at `s(q)^l (sigma_k tau)^l 2^-r(q)`
/// with `s(q) = +1` on `A_k` and `-1` on `-A_k`. This is what makes the
/// derivative coefficients at `-A_k` (which carry `(-1)^l`) close to the
/// target, so each `I_l` coefficient is at most `delta_l 2^-r(q)` in modulus.
/// For odd `l` the product part is a sine form, for even `l` a cosine form.
pub fn decompose(
    seq: &AdmissibleSequence,
    family: &DerivativeFamily,
    l: u32,
) -> Result<(SparseTrigPoly, StructuralProduct)> {
    if l == 0 || l > seq.m {
        return Err(Error::InvalidArgument(format!("l = {l} outside 1..={}", seq.m)));
    }
    let alpha_l = family.alpha(l)?;
    let mut remainder = SparseTrigPoly::new();
    let mut seen = std::collections::BTreeSet::new();
    for t in riesz_terms(&seq.freqs) {
        if !seen.insert(t.q.clone()) {
            return Err(Error::Inadmissible(format!("colliding sign patterns at {}", t.q)));
        }
        let den = monomial(&t.q, &family.alpha0)?;
        if den.is_zero() {
            return Err(Error::Inadmissible(format!("symbol q^alpha0 vanishes at {}", t.q)));
        }
        let symbol = Rational::new(monomial(&t.q, &alpha_l)?, den);
        let mut target = num_traits::pow(seq.target(t.k), l as usize);
        if t.sign < 0 && l % 2 == 1 {
            target = -target;
        }
        let c = (symbol - target) * inv_pow2(t.r);
        remainder.add_term(t.q, c, Rational::zero(), Some(t.r));
    }
    Ok((remainder, product_part(seq, l)?))
}

/// The product part `II_l` of [`decompose`] on its own, without enumerating
/// the support.
pub fn product_part(seq: &AdmissibleSequence, l: u32) -> Result<StructuralProduct> {
    let weights = (0..seq.n).map(|k| num_traits::pow(seq.target(k), l as usize)).collect();
    let oscillator = if l % 2 == 0 { Oscillator::Cosine } else { Oscillator::Sine };
    StructuralProduct::new(seq.freqs.clone(), weights, oscillator)
}

/// `sum_q (|Re c_q| + |Im c_q|)`, exact; equals `sum_q |c_q|` whenever each
/// coefficient is purely real or purely imaginary.
pub fn coeff_sum(p: &SparseTrigPoly) -> Rational {
    p.terms.values().fold(Rational::zero(), |acc, t| acc + t.re.abs() + t.im.abs())
}

/// Upper bound on [`coeff_sum`] with every term rounded up to a multiple of
/// `2^-bits`. Summing many rationals with unrelated denominators exactly is
/// prohibitively expensive; this keeps the result a rigorous dyadic bound.
pub fn coeff_sum_upper(p: &SparseTrigPoly, bits: u32) -> Rational {
    let scale = BigInt::from(1) << bits as usize;
    let total = p.terms.values().fold(BigInt::zero(), |acc, t| {
        let x = (t.re.abs() + t.im.abs()) * Rational::from_integer(scale.clone());
        acc + x.ceil().to_integer()
    });
    Rational::new(total, scale)
}

/// `max_q max(|Re c_q|, |Im c_q|)`, a lower bound on every `|c_q|`.
pub fn max_coeff(p: &SparseTrigPoly) -> Rational {
    p.terms.values().map(|t| t.re.abs().max(t.im.abs())).max().unwrap_or_else(Rational::zero)
}
