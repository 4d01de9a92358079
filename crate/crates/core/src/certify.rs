//! End-to-end certificate: a lower bound on `||D^{alpha_1} Z||_1` against upper
//! bounds on the other derivative norms, with the achieved ratio.

use std::fmt::Write as _;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{
    format_rational, next_perfect_square, rat_int, rational_from_f64, rational_string, rational_vec_string, Rational,
};
use crate::frequency::{
    delta_preset, select_sequence_with, verify_sequence, AdmissibleSequence, Mode, SelectOptions, SigmaSeq,
};
use crate::growth::{growth_experiment, GrowthConfig};
use crate::norm::{ordered_map, EstimateDetail, Estimator, EstimatorConfig, Method, NormEstimate};
use crate::riesz::{coeff_sum, coeff_sum_upper, decompose, derivative_poly, product_part, DerivativeFamily, Oscillator};

/// Exact bound on `||R_n||_1`.
pub const U0: i64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMethod {
    /// Coefficient sums of the enumerated remainders.
    Exact,
    /// Enumerated coefficient sums with each term rounded up to `2^-256`.
    Dyadic,
    /// `sum_k 2^(k-1) delta_{l,k}` from interval verification.
    Interval,
}

/// Coefficient-sum bounds `S_l` on the remainders `I_l`, `l = 1..m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemainderBounds {
    pub values: Vec<Rational>,
    pub method: BoundMethod,
}

/// Largest `n` whose remainder coefficient sums are kept as exact rationals.
pub const EXACT_SUM_LIMIT: usize = 6;
const DYADIC_BITS: u32 = 256;

/// `S_l` by enumerating the remainders, or from the interval verification
/// when `enumerate` is false.
pub fn remainder_bounds(seq: &AdmissibleSequence, family: &DerivativeFamily, enumerate: bool) -> Result<RemainderBounds> {
    if enumerate {
        let exact = seq.n <= EXACT_SUM_LIMIT;
        let values = ordered_map(seq.m as usize, |i| -> Result<Rational> {
            let rem = decompose(seq, family, i as u32 + 1)?.0;
            Ok(if exact { coeff_sum(&rem) } else { coeff_sum_upper(&rem, DYADIC_BITS) })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let method = if exact { BoundMethod::Exact } else { BoundMethod::Dyadic };
        Ok(RemainderBounds { values, method })
    } else {
        let report = verify_sequence(seq, false);
        if !report.passed() {
            return Err(Error::Inadmissible(report.violations.join("; ")));
        }
        Ok(RemainderBounds { values: report.remainder_sum_bounds(), method: BoundMethod::Interval })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub m: u32,
    #[serde(rename = "K", with = "rational_string")]
    pub k: Rational,
    pub mode: Mode,
    #[serde(with = "rational_string")]
    pub tau: Rational,
    #[serde(with = "rational_vec_string")]
    pub delta: Vec<Rational>,
    pub sigma: SigmaSeq,
    pub seed: Option<u64>,
    pub family: DerivativeFamily,
    /// Growth slope used to choose `n`, when `n` was not given.
    pub c_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct N1Bound {
    pub value: f64,
    /// Exact dyadic value of the reported lower endpoint.
    #[serde(with = "rational_string")]
    pub lower: Rational,
    pub confidence: Option<f64>,
    pub method: Method,
    pub seed: Option<u64>,
    /// Sample count, or node count of the fine grid.
    pub samples: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub l: u32,
    pub alpha: crate::exact::MultiIndex,
    /// The true derivative `D^alpha` equals `(2 pi i)^{|alpha|}` times the
    /// normalized one used here.
    pub two_pi_power: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(rename = "S", with = "rational_vec_string")]
    pub s: Vec<Rational>,
    pub s_method: BoundMethod,
    /// `T_l = tau^l n` for `l = 1..m`; only `l >= 2` enters the denominator.
    #[serde(rename = "T", with = "rational_vec_string")]
    pub t: Vec<Rational>,
    #[serde(rename = "N1")]
    pub n1: N1Bound,
    #[serde(rename = "U0", with = "rational_string")]
    pub u0: Rational,
    #[serde(rename = "L", with = "rational_string")]
    pub l: Rational,
    #[serde(rename = "D", with = "rational_string")]
    pub d: Rational,
    pub conversion: Vec<Conversion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub params: Params,
    pub sequence: AdmissibleSequence,
    pub bounds: Bounds,
    #[serde(with = "rational_string")]
    pub ratio: Rational,
    pub verdict: bool,
}

/// `(L, D, K)` with `L = max(0, N1 - S_1)`, `D = U0 + sum_{l>=2} (S_l + T_l)`,
/// `K = L / D`.
pub fn ratio_from_bounds(n1_lower: &Rational, s: &[Rational], t: &[Rational], u0: &Rational) -> Result<(Rational, Rational, Rational)> {
    if s.is_empty() || s.len() != t.len() {
        return Err(Error::InvalidArgument(format!("need matching S and T, got {} and {}", s.len(), t.len())));
    }
    let l = (n1_lower - &s[0]).max(Rational::zero());
    let d = s.iter().zip(t).skip(1).fold(u0.clone(), |acc, (a, b)| acc + a + b);
    if d <= Rational::zero() {
        return Err(Error::InvalidArgument("denominator must be positive".into()));
    }
    let k = &l / &d;
    Ok((l, d, k))
}

fn triangle_bounds(tau: &Rational, n: usize, m: u32) -> Vec<Rational> {
    (1..=m).map(|l| num_traits::pow(tau.clone(), l as usize) * rat_int(n as u64)).collect()
}

fn n1_bound(est: &NormEstimate) -> Result<N1Bound> {
    let lower = rational_from_f64(est.lower)?;
    Ok(match &est.detail {
        EstimateDetail::Montecarlo { samples, seed, confidence, .. } => N1Bound {
            value: est.value,
            lower,
            confidence: Some(*confidence),
            method: est.method,
            seed: Some(*seed),
            samples: Some(*samples),
        },
        EstimateDetail::Grid { fine, .. } => N1Bound {
            value: est.value,
            lower,
            confidence: None,
            method: est.method,
            seed: None,
            samples: Some(fine[0] * fine[1]),
        },
        EstimateDetail::CoeffBound { .. } => N1Bound {
            value: est.value,
            lower,
            confidence: None,
            method: est.method,
            seed: None,
            samples: None,
        },
    })
}

pub fn assemble_certificate(
    seq: &AdmissibleSequence,
    family: &DerivativeFamily,
    s: &RemainderBounds,
    n1: Option<&NormEstimate>,
    k: &Rational,
) -> Result<Certificate> {
    let n1 = n1.ok_or_else(|| Error::MissingEstimate("no estimate of ||II_1||_1".into()))?;
    let m = seq.m;
    if s.values.len() != m as usize {
        return Err(Error::InvalidArgument(format!("expected {m} remainder bounds, got {}", s.values.len())));
    }
    if s.values.iter().any(|v| *v < Rational::zero()) {
        return Err(Error::InvalidArgument("remainder bounds must be nonnegative".into()));
    }
    if seq.mode == Mode::Faithful {
        if let Some((l, v)) = s.values.iter().enumerate().find(|(_, v)| **v > rat_int(1)) {
            return Err(Error::InvalidArgument(format!(
                "S_{} = {} exceeds the faithful budget 1",
                l + 1,
                format_rational(v)
            )));
        }
    }
    let t = triangle_bounds(&seq.tau, seq.n, m);
    let n1b = n1_bound(n1)?;
    let u0 = rat_int(U0);
    let (l, d, ratio) = ratio_from_bounds(&n1b.lower, &s.values, &t, &u0)?;
    let conversion = (0..=m)
        .map(|l| {
            let alpha = family.alpha(l)?;
            Ok(Conversion { l, two_pi_power: alpha.order(), alpha })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Certificate {
        params: Params {
            n: seq.n,
            m,
            k: k.clone(),
            mode: seq.mode,
            tau: seq.tau.clone(),
            delta: seq.delta.clone(),
            sigma: seq.sigma.clone(),
            seed: n1b.seed,
            family: family.clone(),
            c_hat: None,
        },
        sequence: seq.clone(),
        bounds: Bounds { s: s.values.clone(), s_method: s.method, t, n1: n1b, u0, l, d, conversion },
        verdict: ratio >= *k,
        ratio,
    })
}

/// Recomputes the ratio from the stored fields alone, checking the stored
/// triangle bounds against `tau` and `n`.
pub fn replay_ratio(cert: &Certificate) -> Result<Rational> {
    let p = &cert.params;
    let expected_t = triangle_bounds(&p.tau, p.n, p.m);
    if expected_t != cert.bounds.t {
        return Err(Error::InvalidArgument("stored T does not match tau^l n".into()));
    }
    if cert.bounds.u0 != rat_int(U0) {
        return Err(Error::InvalidArgument("stored U0 is not 2".into()));
    }
    Ok(ratio_from_bounds(&cert.bounds.n1.lower, &cert.bounds.s, &cert.bounds.t, &cert.bounds.u0)?.2)
}

/// True when the stored ratio, `L`, `D` and verdict all replay exactly.
pub fn check_replay(cert: &Certificate) -> Result<bool> {
    let (l, d, k) = ratio_from_bounds(&cert.bounds.n1.lower, &cert.bounds.s, &cert.bounds.t, &cert.bounds.u0)?;
    let ratio = replay_ratio(cert)?;
    Ok(ratio == cert.ratio && k == ratio && l == cert.bounds.l && d == cert.bounds.d && cert.verdict == (ratio >= cert.params.k))
}

impl Certificate {
    /// Human-readable summary table.
    pub fn summary(&self) -> String {
        let b = &self.bounds;
        let mut out = String::new();
        let _ = writeln!(out, "n = {}  m = {}  mode = {}  tau = {}", self.params.n, self.params.m, self.params.mode, format_rational(&self.params.tau));
        let _ = writeln!(out, "{:>3}  {:>10}  {:>24}  {:>24}", "l", "alpha", "S_l", "T_l");
        for (i, (s, t)) in b.s.iter().zip(&b.t).enumerate() {
            let alpha = self.params.family.alpha(i as u32 + 1).map(|a| format!("{:?}", a.entries())).unwrap_or_default();
            let _ = writeln!(out, "{:>3}  {:>10}  {:>24.6e}  {:>24.6e}", i + 1, alpha, s.to_f64().unwrap_or(f64::NAN), t.to_f64().unwrap_or(f64::NAN));
        }
        let _ = writeln!(
            out,
            "N1 = {:.6} (lower {:.6}, {}{})",
            b.n1.value,
            b.n1.lower.to_f64().unwrap_or(f64::NAN),
            b.n1.method,
            b.n1.confidence.map(|c| format!(", confidence {c}")).unwrap_or_default()
        );
        let _ = writeln!(out, "U0 = {}  L = {:.6}  D = {:.6}", format_rational(&b.u0), b.l.to_f64().unwrap_or(f64::NAN), b.d.to_f64().unwrap_or(f64::NAN));
        let _ = writeln!(
            out,
            "ratio = {:.6}  K = {}  verdict = {}",
            self.ratio.to_f64().unwrap_or(f64::NAN),
            format_rational(&self.params.k),
            self.verdict
        );
        out
    }
}

/// Direct estimate of one derivative norm against the certificate's bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub l: u32,
    pub estimate: NormEstimate,
    /// `lower` for `l = 1`, `upper` otherwise.
    pub kind: String,
    pub bound: f64,
    pub ok: bool,
}

/// Estimates every `||D^{alpha_l} Z||_1` directly and compares it with the
/// bound the certificate implies: at least `L` for `l = 1`, at most `U0` for
/// `l = 0`, at most `S_l + T_l` otherwise.
pub fn cross_check(cert: &Certificate, estimator: &EstimatorConfig) -> Result<Vec<SandwichRow>> {
    let seq = &cert.sequence;
    let family = &cert.params.family;
    (0..=seq.m)
        .map(|l| {
            let p = derivative_poly(seq, family, l)?;
            let estimate = estimator.estimate(&p)?;
            let (kind, bound, ok) = if l == 1 {
                let b = f64_lower(&cert.bounds.l);
                ("lower", b, estimate.upper >= b)
            } else {
                let exact = if l == 0 {
                    cert.bounds.u0.clone()
                } else {
                    &cert.bounds.s[l as usize - 1] + &cert.bounds.t[l as usize - 1]
                };
                let b = crate::exact::f64_ceil(&exact);
                ("upper", b, estimate.lower <= b)
            };
            Ok(SandwichRow { l, estimate, kind: kind.into(), bound, ok })
        })
        .collect()
}

fn f64_lower(r: &Rational) -> f64 {
    crate::exact::f64_floor(r)
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub k: Rational,
    /// Skips the choice of `n` from the growth slope.
    pub n: Option<usize>,
    pub mode: Mode,
    pub seed: u64,
    pub samples: u64,
    pub confidence: f64,
    pub estimator: Estimator,
    /// Growth slope; measured with [`estimate_c_hat`] when absent and needed.
    pub c_hat: Option<f64>,
    pub family: DerivativeFamily,
    /// Largest `n` whose remainders are enumerated.
    pub exact_limit: usize,
    /// Cap on the estimated total bit size of the frequencies.
    pub max_bits: u64,
    pub select: SelectOptions,
}

impl PipelineConfig {
    pub fn new(k: Rational, mode: Mode, seed: u64) -> Self {
        Self {
            k,
            n: None,
            mode,
            seed,
            samples: 1 << 17,
            confidence: crate::norm::DEFAULT_CONFIDENCE,
            estimator: Estimator::Auto,
            c_hat: None,
            family: DerivativeFamily::default(),
            exact_limit: 9,
            max_bits: 1 << 24,
            select: SelectOptions::default(),
        }
    }

    fn estimator_config(&self) -> EstimatorConfig {
        let mut cfg = EstimatorConfig::new(self.estimator, self.samples, self.seed);
        cfg.mc.confidence = self.confidence;
        cfg
    }
}

/// `n = max(64 K^2, (8K+1)^2) / C^2`, rounded up (to a perfect square in
/// compact mode).
pub fn choose_n(k: &Rational, c_hat: f64, mode: Mode) -> Result<u64> {
    if !(c_hat > 0.0 && c_hat.is_finite()) {
        return Err(Error::InvalidArgument(format!("growth slope must be positive, got {c_hat}")));
    }
    let kf = k.to_f64().unwrap_or(f64::NAN);
    if !(kf > 0.0) {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let raw = (64.0 * kf * kf).max((8.0 * kf + 1.0).powi(2)) / (c_hat * c_hat);
    if raw > 1e15 {
        return Err(Error::Infeasible { stage: "choose-n".into(), reason: format!("n would be about {raw:.3e}") });
    }
    let n = (raw.ceil() as u64).max(1);
    Ok(match mode {
        Mode::Compact => next_perfect_square(n),
        Mode::Faithful => n,
    })
}

/// Rough total bit size of the selected frequencies: each scale costs about
/// `log2(1/delta) ~ n log2 3` bits on top of the previous one.
pub fn estimated_bits(n: u64) -> u64 {
    let per = (n as f64 * std::f64::consts::LOG2_10 * 3f64.log10()).ceil() as u64 + 8;
    per.saturating_mul(n).saturating_mul(n + 1) / 2
}

/// Growth slope of the sine form, the one that controls `II_1`.
pub fn estimate_c_hat(seed: u64, samples: u64) -> Result<f64> {
    let est = EstimatorConfig::new(Estimator::Auto, samples, seed);
    let cfg = GrowthConfig::new(8, rat_int(20), Oscillator::Sine, est);
    Ok(growth_experiment(&cfg)?.slope)
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Infeasible { .. } => e,
        other => Error::Infeasible { stage: name.into(), reason: other.to_string() },
    })
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Certificate> {
    if cfg.k <= Rational::zero() {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let m = cfg.family.max_l();
    if m == 0 {
        return Err(Error::InvalidArgument("derivative family has a single member".into()));
    }
    let (n, c_hat) = match cfg.n {
        Some(n) => (n as u64, cfg.c_hat),
        None => {
            let c = match cfg.c_hat {
                Some(c) => c,
                None => stage("lemma-growth", estimate_c_hat(cfg.seed, cfg.samples))?,
            };
            (choose_n(&cfg.k, c, cfg.mode)?, Some(c))
        }
    };
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let bits = estimated_bits(n);
    if bits > cfg.max_bits {
        return Err(Error::Infeasible {
            stage: "select-frequencies".into(),
            reason: format!("n = {n} needs about {bits} bits of frequency data (cap {})", cfg.max_bits),
        });
    }
    let n = n as usize;
    let sigma = SigmaSeq::ones(n);
    let delta = delta_preset(cfg.mode, n);
    let seq = stage("select-frequencies", select_sequence_with(n, m, &sigma, &delta, cfg.mode, &cfg.select))?;
    let exact = n <= cfg.exact_limit;
    let report = verify_sequence(&seq, exact);
    if !report.passed() {
        return Err(Error::Infeasible { stage: "verify-sequence".into(), reason: report.violations.join("; ") });
    }
    let s = stage("decompose", remainder_bounds(&seq, &cfg.family, exact))?;
    let ii1 = stage("decompose", product_part(&seq, 1))?;
    let n1 = stage("estimate-norms", cfg.estimator_config().estimate(&ii1))?;
    let mut cert = assemble_certificate(&seq, &cfg.family, &s, Some(&n1), &cfg.k)?;
    cert.params.c_hat = c_hat;
    Ok(cert)
}
