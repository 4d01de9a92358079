//! L1-norm estimation on the 2-torus.
//!
//! Three estimators:
//! * uniform grid quadrature (FFT synthesis for sparse polynomials, direct
//!   product evaluation for product forms) with a refinement check;
//! * Monte Carlo on dyadic points `j / 2^64`, where phases `<q, x> mod 1` are
//!   exact in `u64` wrapping arithmetic regardless of how large `q` is;
//! * exact coefficient bounds `max |c_q| <= ||f||_1 <= sum |c_q|`.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exact::{f64_ceil, f64_floor, format_rational, low_word, residue, LatticeVector};
use crate::riesz::{coeff_sum, eval_product, max_coeff, Oscillator, SparseTrigPoly, StructuralProduct};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Grid,
    Montecarlo,
    CoeffBound,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Grid => "grid",
            Method::Montecarlo => "montecarlo",
            Method::CoeffBound => "coeff-bound",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimateDetail {
    Grid {
        coarse: [u64; 2],
        fine: [u64; 2],
        coarse_value: f64,
        refinement_delta: f64,
        synthesis: Synthesis,
    },
    Montecarlo {
        samples: u64,
        seed: u64,
        stderr: f64,
        confidence: f64,
    },
    CoeffBound {
        lower: String,
        upper: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Synthesis {
    Fft,
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub method: Method,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub detail: EstimateDetail,
}

impl NormEstimate {
    /// Half-width of the reported interval.
    pub fn error_bar(&self) -> f64 {
        match &self.detail {
            EstimateDetail::Montecarlo { stderr, .. } => *stderr,
            _ => (self.upper - self.lower) / 2.0,
        }
    }

    pub fn stderr(&self) -> Option<f64> {
        match &self.detail {
            EstimateDetail::Montecarlo { stderr, .. } => Some(*stderr),
            _ => None,
        }
    }
}

/// A function on the torus that the estimators can sample.
#[derive(Clone, Copy, Debug)]
pub enum TorusFn<'a> {
    Sparse(&'a SparseTrigPoly),
    Product(&'a StructuralProduct),
}

impl<'a> From<&'a SparseTrigPoly> for TorusFn<'a> {
    fn from(p: &'a SparseTrigPoly) -> Self {
        TorusFn::Sparse(p)
    }
}

impl<'a> From<&'a StructuralProduct> for TorusFn<'a> {
    fn from(p: &'a StructuralProduct) -> Self {
        TorusFn::Product(p)
    }
}

impl TorusFn<'_> {
    /// Largest support coordinate per axis.
    pub fn max_frequency(&self) -> (BigInt, BigInt) {
        match self {
            TorusFn::Sparse(p) => p.max_frequency(),
            TorusFn::Product(f) => f
                .freqs
                .iter()
                .fold((BigInt::from(0), BigInt::from(0)), |(a, b), q| (a + q.x.abs(), b + q.y.abs())),
        }
    }

    fn frequencies(&self) -> Vec<&LatticeVector> {
        match self {
            TorusFn::Sparse(p) => p.iter().map(|(q, _)| q).collect(),
            TorusFn::Product(f) => f.freqs.iter().collect(),
        }
    }

    fn prepare(&self) -> Prepared {
        match self {
            TorusFn::Sparse(p) => Prepared::Sparse(
                p.iter()
                    .map(|(_, t)| Complex64::new(t.re.to_f64().unwrap_or(0.0), t.im.to_f64().unwrap_or(0.0)))
                    .collect(),
            ),
            TorusFn::Product(f) => Prepared::Product { weights: f.weights_f64(), oscillator: f.oscillator },
        }
    }
}

enum Prepared {
    Sparse(Vec<Complex64>),
    Product { weights: Vec<f64>, oscillator: Oscillator },
}

impl Prepared {
    /// Complex value from per-frequency phases in turns.
    fn eval(&self, turns: &[f64]) -> Complex64 {
        match self {
            Prepared::Sparse(coeffs) => coeffs
                .iter()
                .zip(turns)
                .map(|(c, &t)| c * Complex64::from_polar(1.0, std::f64::consts::TAU * t))
                .sum(),
            Prepared::Product { weights, oscillator } => Complex64::new(eval_product(turns, weights, *oscillator), 0.0),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Ordered parallel map over `0..count`.
pub(crate) fn ordered_map<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridOptions {
    /// Nodes per axis are `oversample * (2F + 1)`, made odd.
    pub oversample: u32,
    /// Floor on the coarse node count per axis.
    pub min_nodes: u64,
    /// Budget for the finer of the two grids.
    pub max_points: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { oversample: 4, min_nodes: 65, max_points: 1 << 24 }
    }
}

/// Coarse and fine node counts per axis, or the infeasibility error.
pub fn grid_sizes(f: TorusFn<'_>, opts: &GridOptions) -> Result<([u64; 2], [u64; 2])> {
    if opts.oversample == 0 {
        return Err(Error::InvalidArgument("oversample must be >= 1".into()));
    }
    let (f1, f2) = f.max_frequency();
    let node = |fr: &BigInt| -> Option<u64> {
        let fr = fr.to_u64()?;
        let n = (opts.oversample as u64).checked_mul(fr.checked_mul(2)?.checked_add(1)?)?;
        Some(n.max(opts.min_nodes) | 1)
    };
    let over = || Error::InfeasibleGrid { points: u128::MAX, budget: opts.max_points };
    let (c1, c2) = (node(&f1).ok_or_else(over)?, node(&f2).ok_or_else(over)?);
    let (d1, d2) = (2 * c1 + 1, 2 * c2 + 1);
    let points = d1 as u128 * d2 as u128;
    if points > opts.max_points as u128 {
        return Err(Error::InfeasibleGrid { points, budget: opts.max_points });
    }
    Ok(([c1, c2], [d1, d2]))
}

/// Values on the `n1 x n2` grid `(i/n1, j/n2)`, row-major in `i`.
pub fn grid_eval(f: TorusFn<'_>, n1: u64, n2: u64) -> Result<(Vec<Complex64>, Synthesis)> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("grid dimensions must be positive".into()));
    }
    match f {
        TorusFn::Sparse(p) if p.len() > 8 => Ok((fft_synthesis(p, n1 as usize, n2 as usize), Synthesis::Fft)),
        _ => Ok((direct_grid(f, n1, n2), Synthesis::Direct)),
    }
}

fn fft_synthesis(p: &SparseTrigPoly, n1: usize, n2: usize) -> Vec<Complex64> {
    let mut a = vec![Complex64::new(0.0, 0.0); n1 * n2];
    for (q, t) in p.iter() {
        let (u, v) = (residue(&q.x, n1 as u64) as usize, residue(&q.y, n2 as u64) as usize);
        a[u * n2 + v] += Complex64::new(t.re.to_f64().unwrap_or(0.0), t.im.to_f64().unwrap_or(0.0));
    }
    let mut planner = FftPlanner::<f64>::new();
    // inverse DFT = sum_q c_q e^{+2 pi i q x}, unnormalized
    let rows = planner.plan_fft_inverse(n2);
    for row in a.chunks_mut(n2) {
        rows.process(row);
    }
    let cols = planner.plan_fft_inverse(n1);
    let mut col = vec![Complex64::new(0.0, 0.0); n1];
    for j in 0..n2 {
        for i in 0..n1 {
            col[i] = a[i * n2 + j];
        }
        cols.process(&mut col);
        for i in 0..n1 {
            a[i * n2 + j] = col[i];
        }
    }
    a
}

fn direct_grid(f: TorusFn<'_>, n1: u64, n2: u64) -> Vec<Complex64> {
    let freqs = f.frequencies();
    let r1: Vec<u64> = freqs.iter().map(|q| residue(&q.x, n1)).collect();
    let r2: Vec<u64> = freqs.iter().map(|q| residue(&q.y, n2)).collect();
    let prepared = f.prepare();
    let rows = ordered_map(n1 as usize, |i| {
        let mut turns = vec![0.0; freqs.len()];
        (0..n2)
            .map(|j| {
                for (k, t) in turns.iter_mut().enumerate() {
                    let a = ((r1[k] as u128 * i as u128) % n1 as u128) as f64 / n1 as f64;
                    let b = ((r2[k] as u128 * j as u128) % n2 as u128) as f64 / n2 as f64;
                    let s = a + b;
                    *t = s - s.round();
                }
                prepared.eval(&turns)
            })
            .collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

fn mean_abs(values: &[Complex64]) -> f64 {
    let mut acc = KahanSum::default();
    for v in values {
        acc.add(v.norm());
    }
    acc.total() / values.len() as f64
}

/// Mean of `|f|` over the uniform grid at two resolutions; the finer value
/// is reported and their difference is the refinement delta.
pub fn l1_grid<'a>(f: impl Into<TorusFn<'a>>, opts: &GridOptions) -> Result<NormEstimate> {
    let f = f.into();
    let (coarse, fine) = grid_sizes(f, opts)?;
    let (cv, _) = grid_eval(f, coarse[0], coarse[1])?;
    let coarse_value = mean_abs(&cv);
    drop(cv);
    let (fv, synthesis) = grid_eval(f, fine[0], fine[1])?;
    let value = mean_abs(&fv);
    let delta = (value - coarse_value).abs();
    Ok(NormEstimate {
        method: Method::Grid,
        value,
        lower: value - delta,
        upper: value + delta,
        detail: EstimateDetail::Grid { coarse, fine, coarse_value, refinement_delta: delta, synthesis },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloOptions {
    pub samples: u64,
    pub seed: u64,
    pub confidence: f64,
}

impl MonteCarloOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self { samples, seed, confidence: DEFAULT_CONFIDENCE }
    }
}

pub const DEFAULT_CONFIDENCE: f64 = 0.999;
pub const MIN_SAMPLES: u64 = 1000;
const BATCH: u64 = 4096;

/// Two-sided normal quantile for the given confidence level.
pub fn normal_quantile(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count: n,
            mean: self.mean + d * other.count as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * other.count as f64 / n as f64,
        }
    }
}

/// The `b`-th batch of dyadic sample points, independent of thread layout.
fn batch_points(seed: u64, b: u64, len: u64) -> impl Iterator<Item = (u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    (0..len).map(move |_| (rng.next_u64(), rng.next_u64()))
}

/// Sample mean of `|f|` at seeded points `j / 2^64` with a normal-approximation
/// confidence interval.
pub fn l1_montecarlo<'a>(f: impl Into<TorusFn<'a>>, opts: &MonteCarloOptions) -> Result<NormEstimate> {
    let f = f.into();
    if opts.samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {}", opts.samples)));
    }
    let z = normal_quantile(opts.confidence)?;
    let freqs = f.frequencies();
    let w1: Vec<u64> = freqs.iter().map(|q| low_word(&q.x)).collect();
    let w2: Vec<u64> = freqs.iter().map(|q| low_word(&q.y)).collect();
    let prepared = f.prepare();
    let batches = opts.samples.div_ceil(BATCH);
    let parts = ordered_map(batches as usize, |b| {
        let b = b as u64;
        let len = BATCH.min(opts.samples - b * BATCH);
        let mut turns = vec![0.0; freqs.len()];
        let mut mom = Moments::default();
        for (j1, j2) in batch_points(opts.seed, b, len) {
            for (k, t) in turns.iter_mut().enumerate() {
                let phase = w1[k].wrapping_mul(j1).wrapping_add(w2[k].wrapping_mul(j2));
                *t = phase as i64 as f64 / 18446744073709551616.0;
            }
            mom.push(prepared.eval(&turns).norm());
        }
        mom
    });
    let total = parts.iter().fold(Moments::default(), |acc, m| acc.merge(m));
    let n = total.count as f64;
    let var = total.m2 / (n - 1.0);
    let stderr = (var / n).sqrt();
    let value = total.mean;
    Ok(NormEstimate {
        method: Method::Montecarlo,
        value,
        lower: value - z * stderr,
        upper: value + z * stderr,
        detail: EstimateDetail::Montecarlo { samples: opts.samples, seed: opts.seed, stderr, confidence: opts.confidence },
    })
}

/// `max |c_q| <= ||p||_1 <= sum |c_q|`, exact, rendered with outward rounding.
pub fn l1_coeff_bounds(p: &SparseTrigPoly) -> NormEstimate {
    let lo = max_coeff(p);
    let hi = coeff_sum(p);
    let (lower, upper) = (f64_floor(&lo), f64_ceil(&hi));
    NormEstimate {
        method: Method::CoeffBound,
        value: (lower + upper) / 2.0,
        lower,
        upper,
        detail: EstimateDetail::CoeffBound { lower: format_rational(&lo), upper: format_rational(&hi) },
    }
}

/// Grid quadrature when the grid fits the budget, Monte Carlo otherwise.
pub fn l1_auto<'a>(f: impl Into<TorusFn<'a>>, grid: &GridOptions, mc: &MonteCarloOptions) -> Result<NormEstimate> {
    let f = f.into();
    match l1_grid(f, grid) {
        Err(Error::InfeasibleGrid { .. }) => l1_montecarlo(f, mc),
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Grid when feasible, Monte Carlo otherwise.
    Auto,
    Grid,
    Montecarlo,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Estimator::Auto),
            "grid" => Ok(Estimator::Grid),
            "montecarlo" | "mc" => Ok(Estimator::Montecarlo),
            other => Err(Error::Parse(format!("unknown estimator {other:?} (auto|grid|montecarlo)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    pub grid: GridOptions,
    pub mc: MonteCarloOptions,
}

impl EstimatorConfig {
    pub fn new(estimator: Estimator, samples: u64, seed: u64) -> Self {
        Self { estimator, grid: GridOptions::default(), mc: MonteCarloOptions::new(samples, seed) }
    }

    pub fn estimate<'a>(&self, f: impl Into<TorusFn<'a>>) -> Result<NormEstimate> {
        match self.estimator {
            Estimator::Auto => l1_auto(f, &self.grid, &self.mc),
            Estimator::Grid => l1_grid(f, &self.grid),
            Estimator::Montecarlo => l1_montecarlo(f, &self.mc),
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::new(Estimator::Auto, 1 << 17, 0)
    }
}
