//! Empirical growth in `m` of
//! `|| sum_{j<=m} sigma_j osc(2pi<d_j,x>) prod_{k<j} (1 + cos 2pi<d_k,x>) ||_1`
//! for lacunary `d_k`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, rat_int, rational_string, LatticeVector, Rational};
use crate::frequency::SigmaSeq;
use crate::norm::{ordered_map, EstimatorConfig, NormEstimate};
use crate::report::Table;
use crate::riesz::{Oscillator, StructuralProduct};

pub const MAX_SIGMA_SEARCH: u32 = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SigmaPolicy {
    Ones,
    Fixed(SigmaSeq),
    /// Exhaustive [`sigma_search`] at `m_max`; the table uses its prefixes.
    Search,
}

#[derive(Clone, Debug)]
pub struct GrowthConfig {
    pub m_max: u32,
    pub lacunarity: Rational,
    pub sigma: SigmaPolicy,
    pub oscillator: Oscillator,
    pub estimator: EstimatorConfig,
    /// First coordinate scale of the generated frequencies.
    pub base: u64,
    /// Replaces the generated frequencies when present.
    pub freqs: Option<Vec<LatticeVector>>,
}

impl GrowthConfig {
    pub fn new(m_max: u32, lacunarity: Rational, oscillator: Oscillator, estimator: EstimatorConfig) -> Self {
        Self { m_max, lacunarity, sigma: SigmaPolicy::Ones, oscillator, estimator, base: 1, freqs: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub m: u32,
    pub estimate: NormEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub table: Vec<GrowthRow>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub oscillator: Oscillator,
    #[serde(with = "rational_string")]
    pub lacunarity: Rational,
    pub sigma: SigmaSeq,
    pub freqs: Vec<LatticeVector>,
    /// Values of `m` whose norm fell below the previous row.
    pub monotone_violations: Vec<u32>,
    /// Values of `m` whose norm exceeded the triangle bound `m`.
    pub triangle_violations: Vec<u32>,
}

impl GrowthFit {
    pub fn norms(&self) -> Vec<f64> {
        self.table.iter().map(|r| r.estimate.value).collect()
    }

    pub fn strictly_increasing(&self) -> bool {
        self.norms().windows(2).all(|w| w[1] > w[0])
    }

    /// The `m,norm,lower,upper,method` table.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["m", "norm", "lower", "upper", "method"].map(String::from).to_vec());
        for r in &self.table {
            t.rows.push(vec![
                r.m.to_string(),
                r.estimate.value.to_string(),
                r.estimate.lower.to_string(),
                r.estimate.upper.to_string(),
                r.estimate.method.to_string(),
            ]);
        }
        t
    }
}

/// Smallest integer strictly greater than `m`.
fn ratio_above(m: &Rational) -> BigInt {
    m.floor().to_integer() + 1
}

/// `d_k = (c^k base, 1)` for `k = 1..m`, with `c` the smallest integer above `M`.
pub fn lacunary_frequencies(m: u32, lacunarity: &Rational, base: u64) -> Result<Vec<LatticeVector>> {
    if *lacunarity <= Rational::one() {
        return Err(Error::InvalidArgument(format!("lacunarity must exceed 1, got {}", format_rational(lacunarity))));
    }
    if base == 0 {
        return Err(Error::InvalidArgument("base must be positive".into()));
    }
    let c = ratio_above(lacunarity);
    let mut x = BigInt::from(base);
    Ok((0..m)
        .map(|_| {
            x = &x * &c;
            LatticeVector { x: x.clone(), y: BigInt::one() }
        })
        .collect())
}

fn growth_form(freqs: &[LatticeVector], sigma: &[bool], oscillator: Oscillator) -> Result<StructuralProduct> {
    let weights = sigma.iter().map(|&s| rat_int(u8::from(s))).collect();
    StructuralProduct::new(freqs.to_vec(), weights, oscillator)
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r^2)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("least squares needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("least squares needs two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { if ss_res == 0.0 { 1.0 } else { 0.0 } } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}

pub fn growth_experiment(cfg: &GrowthConfig) -> Result<GrowthFit> {
    if cfg.m_max < 3 {
        return Err(Error::InvalidArgument(format!("m_max must be >= 3, got {}", cfg.m_max)));
    }
    let m_max = cfg.m_max as usize;
    let freqs = match &cfg.freqs {
        Some(f) if f.len() < m_max => {
            return Err(Error::DimensionMismatch { expected: m_max, got: f.len() });
        }
        Some(f) => f[..m_max].to_vec(),
        None => lacunary_frequencies(cfg.m_max, &cfg.lacunarity, cfg.base)?,
    };
    let sigma = match &cfg.sigma {
        SigmaPolicy::Ones => SigmaSeq::ones(m_max),
        SigmaPolicy::Fixed(s) if s.len() < m_max => {
            return Err(Error::DimensionMismatch { expected: m_max, got: s.len() });
        }
        SigmaPolicy::Fixed(s) => SigmaSeq::new(s.values()[..m_max].to_vec()),
        SigmaPolicy::Search => sigma_search_in(&freqs, cfg.oscillator, &cfg.estimator)?.0,
    };
    let rows = ordered_map(m_max, |i| -> Result<GrowthRow> {
        let f = growth_form(&freqs[..=i], &sigma.values()[..=i], cfg.oscillator)?;
        Ok(GrowthRow { m: i as u32 + 1, estimate: cfg.estimator.estimate(&f)? })
    });
    let table = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = table.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = table.iter().map(|r| r.estimate.value).collect();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys)?;
    let monotone_violations = table.windows(2).filter(|w| w[1].estimate.value < w[0].estimate.value).map(|w| w[1].m).collect();
    let triangle_violations = table.iter().filter(|r| r.estimate.value > r.m as f64).map(|r| r.m).collect();
    Ok(GrowthFit {
        table,
        slope,
        intercept,
        r_squared,
        oscillator: cfg.oscillator,
        lacunarity: cfg.lacunarity.clone(),
        sigma,
        freqs,
        monotone_violations,
        triangle_violations,
    })
}

/// Exhaustive search over `sigma in {0,1}^m` for the largest estimated norm;
/// the first maximizer in lexicographic order wins.
pub fn sigma_search(
    m: u32,
    lacunarity: &Rational,
    oscillator: Oscillator,
    estimator: &EstimatorConfig,
) -> Result<(SigmaSeq, NormEstimate)> {
    let freqs = lacunary_frequencies(m, lacunarity, 1)?;
    sigma_search_in(&freqs, oscillator, estimator)
}

fn sigma_search_in(freqs: &[LatticeVector], oscillator: Oscillator, estimator: &EstimatorConfig) -> Result<(SigmaSeq, NormEstimate)> {
    let m = freqs.len() as u32;
    if m == 0 || m > MAX_SIGMA_SEARCH {
        return Err(Error::InvalidArgument(format!("sigma search needs 1 <= m <= {MAX_SIGMA_SEARCH}, got {m}")));
    }
    let candidates: Vec<SigmaSeq> = (0u32..1 << m)
        .map(|mask| SigmaSeq::new((0..m).map(|j| mask >> (m - 1 - j) & 1 == 1).collect()))
        .collect();
    let estimates = ordered_map(candidates.len(), |i| -> Result<NormEstimate> {
        estimator.estimate(&growth_form(freqs, candidates[i].values(), oscillator)?)
    });
    let mut best: Option<(SigmaSeq, NormEstimate)> = None;
    for (s, e) in candidates.into_iter().zip(estimates) {
        let e = e?;
        if best.as_ref().is_none_or(|(_, b)| e.value > b.value) {
            best = Some((s, e));
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Fitted slope at each lacunarity `M` in `ms` (ascending).
pub fn lacunarity_scan(base: &GrowthConfig, ms: &[Rational]) -> Result<Vec<(Rational, f64)>> {
    ms.iter()
        .map(|m| {
            let cfg = GrowthConfig { lacunarity: m.clone(), freqs: None, ..base.clone() };
            Ok((m.clone(), growth_experiment(&cfg)?.slope))
        })
        .collect()
}

/// Smallest `M` in a scan from which every later slope stays within relative
/// tolerance `rel` of it.
pub fn stabilization_point(scan: &[(Rational, f64)], rel: f64) -> Option<Rational> {
    (0..scan.len())
        .find(|&i| {
            let s = scan[i].1;
            scan[i..].iter().all(|(_, t)| (t - s).abs() <= rel * s.abs())
        })
        .map(|i| scan[i].0.clone())
}

/// Ratio `|d_{k+1}|_inf / |d_k|_inf` floor over a frequency list, if any.
pub fn min_ratio(freqs: &[LatticeVector]) -> Option<f64> {
    freqs
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].linf(), w[1].linf());
            let g = a.gcd(&b);
            (b / &g).to_f64().unwrap_or(f64::INFINITY) / (a / g).to_f64().unwrap_or(f64::INFINITY)
        })
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::norm::{Estimator, GridOptions, Method, MonteCarloOptions};

    fn grid_cfg() -> EstimatorConfig {
        EstimatorConfig { estimator: Estimator::Auto, grid: GridOptions::default(), mc: MonteCarloOptions::new(1 << 16, 11) }
    }

    #[test]
    fn frequencies_are_lacunary() {
        let f = lacunary_frequencies(4, &rat(20, 1), 1).unwrap();
        assert_eq!(f[0], LatticeVector::new(21, 1));
        assert_eq!(f[3], LatticeVector::new(194481, 1));
        assert!(min_ratio(&f).unwrap() > 20.0);
        let g = lacunary_frequencies(3, &rat(5, 2), 2).unwrap();
        assert_eq!(g[0], LatticeVector::new(6, 1));
        assert!(lacunary_frequencies(3, &rat(1, 1), 1).is_err());
    }

    #[test]
    fn single_cosine_is_two_over_pi() {
        let f = growth_form(&lacunary_frequencies(1, &rat(20, 1), 1).unwrap(), &[true], Oscillator::Cosine).unwrap();
        let e = grid_cfg().estimate(&f).unwrap();
        assert_eq!(e.method, Method::Grid);
        assert!((e.value - std::f64::consts::FRAC_2_PI).abs() < 1e-4);
    }

    #[test]
    fn least_squares_exact_line() {
        let (s, c, r2) = least_squares(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        assert!(least_squares(&[1.0], &[1.0]).is_err());
        assert!(least_squares(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn small_growth_table() {
        let mut cfg = GrowthConfig::new(4, rat(20, 1), Oscillator::Cosine, grid_cfg());
        cfg.estimator.estimator = Estimator::Montecarlo;
        let fit = growth_experiment(&cfg).unwrap();
        assert_eq!(fit.table.len(), 4);
        assert!(fit.strictly_increasing(), "{:?}", fit.norms());
        assert!(fit.slope > 0.0);
        assert!(fit.triangle_violations.is_empty());
        let csv = fit.to_table().to_csv();
        assert!(csv.starts_with("m,norm,lower,upper,method\n"));
        assert_eq!(csv.lines().count(), 5);
        let json = serde_json::to_string(&fit).unwrap();
        let back: GrowthFit = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn zero_sigma_gives_zero() {
        let mut cfg = GrowthConfig::new(3, rat(20, 1), Oscillator::Sine, grid_cfg());
        cfg.sigma = SigmaPolicy::Fixed(SigmaSeq::new(vec![false; 3]));
        let fit = growth_experiment(&cfg).unwrap();
        assert!(fit.norms().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sigma_search_small() {
        let (s, e) = sigma_search(1, &rat(20, 1), Oscillator::Cosine, &grid_cfg()).unwrap();
        assert_eq!(s.values(), &[true]);
        assert!(e.value > 0.6);
        // independent oracle: estimate every candidate separately and take the argmax
        let cfg = grid_cfg();
        let freqs = lacunary_frequencies(3, &rat(20, 1), 1).unwrap();
        let mut best = (vec![], f64::NEG_INFINITY);
        for mask in 0u32..8 {
            let sig: Vec<bool> = (0..3).map(|j| mask & (4 >> j) != 0).collect();
            let v = cfg.estimate(&growth_form(&freqs, &sig, Oscillator::Cosine).unwrap()).unwrap().value;
            if v > best.1 {
                best = (sig, v);
            }
        }
        let (s3, e3) = sigma_search(3, &rat(20, 1), Oscillator::Cosine, &cfg).unwrap();
        assert_eq!(s3.values(), best.0.as_slice());
        assert_eq!(e3.value, best.1);
        assert!(sigma_search(13, &rat(20, 1), Oscillator::Cosine, &cfg).is_err());
    }

    #[test]
    fn bad_config() {
        let cfg = GrowthConfig::new(2, rat(20, 1), Oscillator::Cosine, grid_cfg());
        assert!(growth_experiment(&cfg).is_err());
        let mut cfg = GrowthConfig::new(3, rat(20, 1), Oscillator::Cosine, grid_cfg());
        cfg.sigma = SigmaPolicy::Fixed(SigmaSeq::ones(2));
        assert!(growth_experiment(&cfg).is_err());
    }

    #[test]
    fn stabilization() {
        let scan = vec![(rat(2, 1), 0.1), (rat(4, 1), 0.19), (rat(8, 1), 0.2), (rat(16, 1), 0.205)];
        assert_eq!(stabilization_point(&scan, 0.05), Some(rat(8, 1)));
        assert_eq!(stabilization_point(&scan, 0.1), Some(rat(4, 1)));
        assert_eq!(stabilization_point(&scan, 0.01), Some(rat(16, 1)));
    }
}
