//! Inductive choice of the frequencies `a_1..a_n` and exact verification of
//! the three admissibility conditions:
//!
//! * tolerance: `|(q2^2/q1)^l - (sigma_k tau)^l| <= delta_l` for every
//!   `q = a_k + sum_{j<k} eps_j a_j`, `eps_j in {-1,0,1}`, `l = 1..m`;
//! * lacunarity: `|a_{k+1}|_inf > M |a_k|_inf`;
//! * nonvanishing: `q1 != 0` for every such `q`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{
    exact_sqrt, format_rational, inv_pow2, rat, rat_int, rational_string, rational_vec_string, sqrt_interval,
    LatticeVector, Rational, RationalInterval,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Tolerance `3^-n`; `tau` is a certified rational approximation of `1/sqrt(n)`.
    Faithful,
    /// Tolerance `1/(3^n - 1)`; `n` must be a perfect square so `tau = 1/sqrt(n)`.
    Compact,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Faithful => "faithful",
            Mode::Compact => "compact",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faithful" => Ok(Mode::Faithful),
            "compact" => Ok(Mode::Compact),
            other => Err(Error::Parse(format!("unknown mode {other:?} (faithful|compact)"))),
        }
    }
}

/// Selector sequence with entries in `{0, 1}`. Serialized as `[1, 0, ...]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct SigmaSeq(Vec<bool>);

impl SigmaSeq {
    pub fn new(values: Vec<bool>) -> Self {
        Self(values)
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> bool {
        self.0[k]
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&s| s).count()
    }

    /// Parses `"1,0,1"` or `"ones"` (needs `n`).
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        if s.trim() == "ones" {
            return Ok(Self::ones(n));
        }
        let vals = s
            .split(',')
            .map(|t| match t.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Parse(format!("sigma entries must be 0 or 1, got {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(Error::InvalidArgument(format!("sigma has {} entries, expected {n}", vals.len())));
        }
        Ok(Self(vals))
    }
}

impl TryFrom<Vec<u8>> for SigmaSeq {
    type Error = Error;
    fn try_from(v: Vec<u8>) -> Result<Self> {
        v.into_iter()
            .map(|x| match x {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Parse(format!("sigma entry {other} not in {{0,1}}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SigmaSeq)
    }
}

impl From<SigmaSeq> for Vec<u8> {
    fn from(s: SigmaSeq) -> Vec<u8> {
        s.0.into_iter().map(u8::from).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleSequence {
    pub n: usize,
    pub m: u32,
    #[serde(with = "rational_string")]
    pub tau: Rational,
    /// `delta[l-1]` bounds the tolerance condition at power `l`.
    #[serde(with = "rational_vec_string")]
    pub delta: Vec<Rational>,
    pub sigma: SigmaSeq,
    pub freqs: Vec<LatticeVector>,
    /// Certified lacunarity floor: every consecutive max-norm ratio exceeds it.
    #[serde(with = "rational_string")]
    pub lacunarity: Rational,
    pub mode: Mode,
}

impl AdmissibleSequence {
    /// `sigma_k * tau` for the 0-based index `k`.
    pub fn target(&self, k: usize) -> Rational {
        if self.sigma.get(k) {
            self.tau.clone()
        } else {
            Rational::zero()
        }
    }
}

/// Tolerance preset: `3^-n` (faithful) or `1/(3^n - 1)` (compact).
pub fn delta_preset(mode: Mode, n: usize) -> Rational {
    let three_n = num_traits::pow(BigInt::from(3), n);
    match mode {
        Mode::Faithful => Rational::new(BigInt::one(), three_n),
        Mode::Compact => Rational::new(BigInt::one(), three_n - 1),
    }
}

/// The rational stand-in for `1/sqrt(n)`.
pub fn target_tau(mode: Mode, n: usize, delta_target: &Rational) -> Result<Rational> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    match mode {
        Mode::Compact => match exact_sqrt(n as u64) {
            Some(r) => Ok(rat(1, r as i64)),
            None => Err(Error::InvalidArgument(format!("compact mode needs a perfect-square n, got {n}"))),
        },
        Mode::Faithful => Ok(sqrt_interval(n as u64, &(delta_target / rat_int(10)))?.lo),
    }
}

#[derive(Clone, Debug)]
pub struct SelectOptions {
    /// Smallest scale tried for `a_1`.
    pub base_scale: u64,
    /// Lacunarity floor enforced between consecutive frequencies.
    pub min_lacunarity: Rational,
    /// Relative precision of the bisection that shrinks each scale.
    pub refine_bits: u32,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self { base_scale: 3, min_lacunarity: rat(2, 1), refine_bits: 10 }
    }
}

/// Per-power worst-case distance over the box `a + [-e1,e1] x [-e2,e2]`, or
/// `None` when the box allows `q1 = 0`.
fn interval_distances(
    a: &LatticeVector,
    e1: &BigInt,
    e2: &BigInt,
    target: &Rational,
    m: u32,
) -> Option<Vec<Rational>> {
    let q1 = RationalInterval::around(&a.x, e1);
    if q1.contains_zero() {
        return None;
    }
    let q2 = RationalInterval::around(&a.y, e2);
    let ratio = q2.powi(2).div(&q1).ok()?;
    Some(
        (1..=m)
            .map(|l| ratio.powi(l).max_distance(&num_traits::pow(target.clone(), l as usize)))
            .collect(),
    )
}

fn within(d: &[Rational], delta: &Rational) -> bool {
    d.iter().all(|x| x <= delta)
}

/// Smallest passing value found by doubling from `lb` then bisecting to
/// relative precision `2^-refine_bits`. The returned value always passes.
fn search_scale(lb: BigInt, refine_bits: u32, ok: impl Fn(&BigInt) -> bool) -> Option<BigInt> {
    if ok(&lb) {
        return Some(lb);
    }
    let mut lo = lb.clone();
    let mut hi = lb.max(BigInt::one()) * 2;
    let mut doublings = 0;
    while !ok(&hi) {
        lo = hi.clone();
        hi *= 2;
        doublings += 1;
        if doublings > 1 << 16 {
            return None;
        }
    }
    loop {
        let gap = &hi - &lo;
        if gap <= BigInt::one() || gap << refine_bits as usize <= hi {
            return Some(hi);
        }
        let mid = (&lo + &hi) / 2;
        if ok(&mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

pub fn select_sequence(n: usize, m: u32, sigma: &SigmaSeq, delta_target: &Rational, mode: Mode) -> Result<AdmissibleSequence> {
    select_sequence_with(n, m, sigma, delta_target, mode, &SelectOptions::default())
}

pub fn select_sequence_with(
    n: usize,
    m: u32,
    sigma: &SigmaSeq,
    delta_target: &Rational,
    mode: Mode,
    opts: &SelectOptions,
) -> Result<AdmissibleSequence> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and m must be >= 1".into()));
    }
    if !delta_target.is_positive() {
        return Err(Error::InvalidArgument("delta_target must be > 0".into()));
    }
    if sigma.len() != n {
        return Err(Error::InvalidArgument(format!("sigma has {} entries, expected {n}", sigma.len())));
    }
    let tau = target_tau(mode, n, delta_target)?;
    // tau = p/Q; sigma=1 frequencies are (Q p t^2, p t), whose ratio is exactly tau.
    let p = tau.numer().clone();
    let qp = tau.denom() * &p;

    let mut freqs: Vec<LatticeVector> = Vec::with_capacity(n);
    let mut worst = vec![Rational::zero(); m as usize];
    let (mut e1, mut e2) = (BigInt::zero(), BigInt::zero());
    for k in 0..n {
        let floor_linf: Option<Rational> = freqs.last().map(|prev: &LatticeVector| &opts.min_lacunarity * rat_int(prev.linf()));
        let lacunary_ok = |a: &LatticeVector| floor_linf.as_ref().is_none_or(|f| rat_int(a.linf()) > *f);
        let (target, make): (Rational, Box<dyn Fn(&BigInt) -> LatticeVector>) = if sigma.get(k) {
            let (p, qp) = (p.clone(), qp.clone());
            (tau.clone(), Box::new(move |t: &BigInt| LatticeVector { x: &qp * t * t, y: &p * t }))
        } else {
            (Rational::zero(), Box::new(|a: &BigInt| LatticeVector { x: a.clone(), y: BigInt::one() }))
        };
        // minimal scale honoring the lacunarity floor
        let mut lb = match (&floor_linf, sigma.get(k)) {
            (None, true) => BigInt::from(opts.base_scale.max(1)),
            (None, false) => BigInt::one(),
            (Some(f), true) => (f.ceil().to_integer() / &qp).sqrt(),
            (Some(f), false) => f.floor().to_integer(),
        }
        .max(BigInt::one());
        while !lacunary_ok(&make(&lb)) {
            lb += 1;
        }
        let ok = |s: &BigInt| {
            let a = make(s);
            lacunary_ok(&a)
                && interval_distances(&a, &e1, &e2, &target, m).is_some_and(|d| within(&d, delta_target))
        };
        let scale = search_scale(lb, opts.refine_bits, ok).ok_or_else(|| Error::Infeasible {
            stage: "select-frequencies".into(),
            reason: format!("no admissible scale for a_{}", k + 1),
        })?;
        let a = make(&scale);
        let d = interval_distances(&a, &e1, &e2, &target, m).expect("scale passed");
        for (w, x) in worst.iter_mut().zip(d) {
            if x > *w {
                *w = x;
            }
        }
        e1 += a.x.abs();
        e2 += a.y.abs();
        freqs.push(a);
    }
    Ok(AdmissibleSequence {
        n,
        m,
        tau,
        delta: worst,
        sigma: sigma.clone(),
        freqs,
        lacunarity: opts.min_lacunarity.clone(),
        mode,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub exhaustive: bool,
    pub nonzero_ok: bool,
    pub lacunarity_ok: bool,
    pub tolerance_ok: bool,
    /// Tightest tolerance achieved per power `l` (exact maximum when
    /// exhaustive, interval upper bound otherwise).
    #[serde(with = "rational_vec_string")]
    pub achieved_delta: Vec<Rational>,
    /// Same, split by frequency index `k`.
    #[serde(skip)]
    pub delta_by_k: Vec<Vec<Rational>>,
    pub min_lacunarity_ratio: Option<String>,
    pub perturbations_checked: u64,
    pub violations: Vec<String>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.nonzero_ok && self.lacunarity_ok && self.tolerance_ok
    }

    /// Upper bounds on the coefficient sums of the remainder parts `I_l`:
    /// `sum_k 2^(k-1) delta_{l,k}`, since the weights `2^-r(q)` over `+-A_k`
    /// sum to `2^(k-1)`.
    pub fn remainder_sum_bounds(&self) -> Vec<Rational> {
        let m = self.achieved_delta.len();
        (0..m)
            .map(|l| {
                self.delta_by_k
                    .iter()
                    .enumerate()
                    .map(|(k, d)| &d[l] / inv_pow2(k as u32))
                    .fold(Rational::zero(), |acc, x| acc + x)
            })
            .collect()
    }
}

/// All `q = a_k + sum_{j<k} eps_j a_j`.
pub(crate) fn perturbations(freqs: &[LatticeVector], k: usize) -> Vec<LatticeVector> {
    let mut out = vec![freqs[k].clone()];
    for a in &freqs[..k] {
        let mut next = Vec::with_capacity(out.len() * 3);
        for q in &out {
            next.push(q - a);
            next.push(q.clone());
            next.push(q + a);
        }
        out = next;
    }
    out
}

pub fn verify_sequence(seq: &AdmissibleSequence, exhaustive: bool) -> ConditionReport {
    let m = seq.m as usize;
    let mut violations = Vec::new();
    let mut nonzero_ok = true;
    let mut tolerance_ok = seq.delta.len() == m;
    if !tolerance_ok {
        violations.push(format!("delta has {} entries, expected {m}", seq.delta.len()));
    }
    if seq.freqs.len() != seq.n || seq.sigma.len() != seq.n {
        violations.push("frequency or sigma count differs from n".into());
        tolerance_ok = false;
    }

    let mut lacunarity_ok = true;
    let mut min_ratio: Option<Rational> = None;
    for (k, w) in seq.freqs.windows(2).enumerate() {
        let prev = w[0].linf();
        if prev.is_zero() {
            lacunarity_ok = false;
            violations.push(format!("a_{} is the zero vector", k + 1));
            continue;
        }
        let ratio = Rational::new(w[1].linf(), prev);
        if ratio <= seq.lacunarity {
            lacunarity_ok = false;
            violations.push(format!(
                "lacunarity: |a_{}|/|a_{}| = {} <= {}",
                k + 2,
                k + 1,
                format_rational(&ratio),
                format_rational(&seq.lacunarity)
            ));
        }
        if min_ratio.as_ref().is_none_or(|r| ratio < *r) {
            min_ratio = Some(ratio);
        }
    }

    let n = seq.freqs.len().min(seq.sigma.len());
    let mut delta_by_k = Vec::with_capacity(n);
    let mut achieved = vec![Rational::zero(); m];
    let mut checked = 0u64;
    let (mut e1, mut e2) = (BigInt::zero(), BigInt::zero());
    for k in 0..n {
        let target = seq.target(k);
        let powers: Vec<Rational> = (1..=m).map(|l| num_traits::pow(target.clone(), l)).collect();
        let mut worst = vec![Rational::zero(); m];
        if exhaustive {
            for q in perturbations(&seq.freqs, k) {
                checked += 1;
                if q.x.is_zero() {
                    if nonzero_ok || violations.len() < 32 {
                        violations.push(format!("nonvanishing: q = {q} has q1 = 0 (k = {})", k + 1));
                    }
                    nonzero_ok = false;
                    continue;
                }
                let ratio = Rational::new(&q.y * &q.y, q.x.clone());
                let mut pw = Rational::one();
                for l in 0..m {
                    pw *= &ratio;
                    let d = (&pw - &powers[l]).abs();
                    if d > worst[l] {
                        worst[l] = d;
                    }
                }
            }
        } else {
            checked += 1;
            match interval_distances(&seq.freqs[k], &e1, &e2, &target, m as u32) {
                Some(d) => worst = d,
                None => {
                    nonzero_ok = false;
                    violations.push(format!("nonvanishing: cannot exclude q1 = 0 for k = {}", k + 1));
                }
            }
        }
        for l in 0..m {
            if let Some(bound) = seq.delta.get(l) {
                if worst[l] > *bound {
                    tolerance_ok = false;
                    violations.push(format!(
                        "tolerance: k = {}, l = {}: {} > {}",
                        k + 1,
                        l + 1,
                        format_rational(&worst[l]),
                        format_rational(bound)
                    ));
                }
            }
            if worst[l] > achieved[l] {
                achieved[l] = worst[l].clone();
            }
        }
        e1 += seq.freqs[k].x.abs();
        e2 += seq.freqs[k].y.abs();
        delta_by_k.push(worst);
    }
    ConditionReport {
        exhaustive,
        nonzero_ok,
        lacunarity_ok,
        tolerance_ok,
        achieved_delta: achieved,
        delta_by_k,
        min_lacunarity_ratio: min_ratio.as_ref().map(format_rational),
        perturbations_checked: checked,
        violations,
    }
}
