//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{One, ToPrimitive, Zero};
use ornstein_core::certify::{check_replay, cross_check, replay_ratio, run_pipeline, Certificate, PipelineConfig};
use ornstein_core::exact::{inv_pow2, rat, rat_int, MultiIndex};
use ornstein_core::frequency::{delta_preset, select_sequence, verify_sequence, Mode, SigmaSeq};
use ornstein_core::growth::{growth_experiment, lacunary_frequencies, least_squares, GrowthConfig};
use ornstein_core::hypothesis::{check_pair, search_witnesses};
use ornstein_core::norm::{
    grid_eval, grid_sizes, l1_auto, l1_grid, l1_montecarlo, Estimator, EstimatorConfig, GridOptions, Method,
    MonteCarloOptions, NormEstimate,
};
use ornstein_core::riesz::{
    apply_derivative, build_z, coeff_sum, decompose, expand_riesz, product_part, DerivativeFamily, Oscillator,
    StructuralProduct,
};
use ornstein_core::{LatticeVector, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn method(e: &NormEstimate) -> &'static str {
    match e.method {
        Method::Grid => "grid",
        Method::Montecarlo => "montecarlo",
        Method::CoeffBound => "coeff-bound",
    }
}

/// Exact identity `D^{alpha_0} Z = R_n`, plus an independent check of every
/// coefficient of `R_n` against `2^-r` and the term count `3^n - 1`.
fn exact_identity() -> Outcome {
    let alpha0 = MultiIndex::pair(4, 0);
    let mut notes = Vec::new();
    for n in [2usize, 4, 6] {
        // non-square n has no exact 1/sqrt(n); those use the compact
        // tolerance with a certified tau
        let mode = if n == 4 { Mode::Compact } else { Mode::Faithful };
        let seq = select_sequence(n, 4, &SigmaSeq::ones(n), &delta_preset(Mode::Compact, n), mode).map_err(err)?;
        let riesz = expand_riesz(&seq.freqs).map_err(err)?;
        let lhs = apply_derivative(&build_z(&seq, &alpha0).map_err(err)?, &alpha0).map_err(err)?;
        ensure(lhs == riesz, || format!("n={n}: D^alpha0 Z differs from R_n"))?;
        ensure(riesz.len() == 3usize.pow(n as u32) - 1, || format!("n={n}: {} terms", riesz.len()))?;

        let mut expected = 0usize;
        for eps in 0..3usize.pow(n as u32) {
            let (mut q, mut r, mut e) = (LatticeVector::zero(), 0u32, eps);
            for a in &seq.freqs {
                let s = (e % 3) as i64 - 1;
                e /= 3;
                if s != 0 {
                    r += 1;
                    q = LatticeVector { x: q.x + a.x.clone() * s, y: q.y + a.y.clone() * s };
                }
            }
            if r == 0 {
                continue;
            }
            expected += 1;
            let t = lhs.get(&q).ok_or_else(|| format!("n={n}: missing coefficient"))?;
            ensure(t.re == inv_pow2(r) && t.im.is_zero(), || format!("n={n}: coefficient at r={r} is not 2^-r"))?;
        }
        ensure(expected == lhs.len(), || format!("n={n}: support has extra terms"))?;
        notes.push(format!("n={n}: {} terms", lhs.len()));
    }
    Ok(format!("exact equality; {}", notes.join(", ")))
}

/// `||R_n||_1 <= 2` and `R_n + 1 >= 0` on the quadrature grid.
fn riesz_bounds() -> Outcome {
    let opts = GridOptions::default();
    let mut worst_norm: f64 = 0.0;
    let mut worst_min = f64::INFINITY;
    for n in 1..=6u32 {
        let freqs = lacunary_frequencies(n, &rat_int(2), 1).map_err(err)?;
        let r = expand_riesz(&freqs).map_err(err)?;
        let est = l1_grid(&r, &opts).map_err(err)?;
        ensure(est.value <= 2.0 + 1e-3, || format!("n={n}: grid norm {}", est.value))?;
        let (_, fine) = grid_sizes((&r).into(), &opts).map_err(err)?;
        let (values, _) = grid_eval((&r).into(), fine[0], fine[1]).map_err(err)?;
        let min = values.iter().map(|v| v.re + 1.0).fold(f64::INFINITY, f64::min);
        ensure(min >= -1e-9, || format!("n={n}: min of R_n + 1 is {min:e}"))?;
        worst_norm = worst_norm.max(est.value);
        worst_min = worst_min.min(min);
    }
    Ok(format!("grid, n=1..6 on (3^k, 1): max norm {worst_norm:.6}, min R_n+1 {worst_min:.2e}"))
}

/// `sum |coeff(I_l)| <= 1` exactly for a faithful `n = 4` sequence.
fn error_budget() -> Outcome {
    let n = 4;
    let seq = select_sequence(n, 4, &SigmaSeq::ones(n), &delta_preset(Mode::Faithful, n), Mode::Faithful)
        .map_err(err)?;
    ensure(verify_sequence(&seq, true).passed(), || "exhaustive verification failed".into())?;
    let family = DerivativeFamily::default();
    let mut sums = Vec::new();
    for l in 1..=4 {
        let (rem, _) = decompose(&seq, &family, l).map_err(err)?;
        let s = coeff_sum(&rem);
        ensure(s <= Rational::one(), || format!("l={l}: coefficient sum {s}"))?;
        sums.push(format!("{:.3e}", s.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(format!("exact rationals, sums {}", sums.join(" ")))
}

/// `||II_l||_1 <= n^{1 - l/2}` at `n = 4` compact, for `l = 2, 3, 4`.
fn triangle_bound() -> Outcome {
    let n = 4usize;
    let seq = select_sequence(n, 4, &SigmaSeq::ones(n), &delta_preset(Mode::Compact, n), Mode::Compact)
        .map_err(err)?;
    let small = lacunary_frequencies(n as u32, &rat_int(2), 1).map_err(err)?;
    let grid = GridOptions::default();
    let mc = MonteCarloOptions::new(1 << 17, 11);
    let mut notes = Vec::new();
    for l in 2..=4u32 {
        let bound = (n as f64).powf(1.0 - l as f64 / 2.0) + 1e-3;
        let ii = product_part(&seq, l).map_err(err)?;
        let est = l1_auto(&ii, &grid, &mc).map_err(err)?;
        ensure(est.upper <= bound, || format!("l={l}: {} upper {} > {bound}", method(&est), est.upper))?;
        // same weights on grid-feasible frequencies
        let proxy = StructuralProduct::new(small.clone(), ii.weights.clone(), ii.oscillator).map_err(err)?;
        let g = l1_grid(&proxy, &grid).map_err(err)?;
        ensure(g.value <= bound, || format!("l={l}: grid proxy {} > {bound}", g.value))?;
        notes.push(format!("l={l}: {}={:.4} grid-proxy={:.4} bound={:.4}", method(&est), est.value, g.value, bound - 1e-3));
    }
    Ok(notes.join(", "))
}

fn pipeline(n: usize) -> Result<Certificate, String> {
    let mut cfg = PipelineConfig::new(rat_int(1), Mode::Compact, 7);
    cfg.n = Some(n);
    cfg.samples = 1 << 17;
    cfg.confidence = 0.999;
    run_pipeline(&cfg).map_err(err)
}

/// Certified ratio grows with `n`.
fn ratio_growth() -> Outcome {
    let mut ks = Vec::new();
    for n in [4usize, 9, 16] {
        let cert = pipeline(n)?;
        ensure(cert.bounds.n1.method == Method::Montecarlo || cert.bounds.n1.method == Method::Grid, || {
            "unexpected N1 method".into()
        })?;
        ks.push(cert.ratio.to_f64().unwrap_or(f64::NAN));
    }
    ensure(ks.windows(2).all(|w| w[0] < w[1]), || format!("not strictly increasing: {ks:?}"))?;
    let growth = ks[2] / ks[0];
    ensure(growth >= 1.5, || format!("K(16)/K(4) = {growth:.3}"))?;
    Ok(format!(
        "montecarlo 131072 samples @0.999, K(4)={:.4} K(9)={:.4} K(16)={:.4}, ratio {growth:.3}",
        ks[0], ks[1], ks[2]
    ))
}

/// Linear growth of the cosine and sine product norms in `m`.
fn lemma_growth() -> Outcome {
    let est = EstimatorConfig::default();
    let cos = growth_experiment(&GrowthConfig::new(10, rat_int(20), Oscillator::Cosine, est)).map_err(err)?;
    let norms = cos.norms();
    ensure(cos.strictly_increasing(), || format!("cosine norms not increasing: {norms:?}"))?;
    ensure(cos.slope > 0.0, || format!("slope {}", cos.slope))?;
    ensure(cos.r_squared >= 0.9, || format!("r^2 {}", cos.r_squared))?;
    for (i, v) in norms.iter().enumerate() {
        ensure(*v <= (i + 1) as f64, || format!("norm at m={} is {v}", i + 1))?;
    }
    let cos8 = growth_experiment(&GrowthConfig::new(8, rat_int(20), Oscillator::Cosine, est)).map_err(err)?;
    let sin8 = growth_experiment(&GrowthConfig::new(8, rat_int(20), Oscillator::Sine, est)).map_err(err)?;
    let q = sin8.slope / cos8.slope;
    ensure((0.5..=2.0).contains(&q), || format!("sine/cosine slope ratio {q}"))?;
    Ok(format!(
        "{}, cosine slope {:.4} r2 {:.4}, sine/cosine slope at m=8 {q:.3}",
        method(&cos.table[9].estimate),
        cos.slope,
        cos.r_squared
    ))
}

/// Monte Carlo agrees with the grid, and its standard error scales as `N^-1/2`.
fn estimator_cross_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = GridOptions::default();
    let mut agree = 0;
    let mut worst: f64 = 0.0;
    let mut products = Vec::new();
    for case in 0..10u64 {
        let n = rng.random_range(2..=5);
        let freqs: Vec<LatticeVector> = (0..n)
            .map(|_| LatticeVector::new(rng.random_range(1..=20i64), rng.random_range(-20..=20i64)))
            .collect();
        let weights = (0..n).map(|_| rat(rng.random_range(-8..=8i64), rng.random_range(1..=8i64))).collect();
        let osc = if rng.random_bool(0.5) { Oscillator::Cosine } else { Oscillator::Sine };
        let f = StructuralProduct::new(freqs, weights, osc).map_err(err)?;
        let g = l1_grid(&f, &grid).map_err(err)?;
        let m = l1_montecarlo(&f, &MonteCarloOptions::new(1 << 17, case)).map_err(err)?;
        let sigma = (m.stderr().unwrap_or(0.0).powi(2) + g.error_bar().powi(2)).sqrt();
        let dev = (m.value - g.value).abs();
        if dev <= 3.0 * sigma {
            agree += 1;
        }
        if sigma > 0.0 {
            worst = worst.max(dev / sigma);
        }
        products.push(f);
    }
    ensure(agree >= 9, || format!("only {agree}/10 within 3 error bars"))?;

    let target = products.iter().find(|f| f.n() >= 3).unwrap_or(&products[0]);
    let sizes = [1_000u64, 10_000, 100_000];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &s in &sizes {
        let e = l1_montecarlo(target, &MonteCarloOptions::new(s, 5)).map_err(err)?;
        xs.push((s as f64).ln());
        ys.push(e.stderr().ok_or("missing stderr")?.ln());
    }
    let (slope, _, _) = least_squares(&xs, &ys).map_err(err)?;
    ensure((slope + 0.5).abs() <= 0.1, || format!("stderr slope {slope:.3}"))?;
    Ok(format!("{agree}/10 within 3 sigma (worst {worst:.2}), stderr slope {slope:.3}"))
}

/// Witness search on the target family and rejection of a duplicate family.
fn hypothesis_checker() -> Outcome {
    let fam = MultiIndex::parse_list("4,0;3,2;2,4;1,6;0,8").map_err(err)?;
    let found = search_witnesses(&fam, 8).map_err(err)?;
    let (lambda, gamma) = found.clone().ok_or("no witnesses within bound 8")?;
    ensure(lambda == MultiIndex::pair(2, 1) && gamma == MultiIndex::pair(0, 1), || {
        format!("found {lambda:?}, {gamma:?}")
    })?;
    ensure(check_pair(&fam, &lambda, &gamma).map_err(err)?.passed(), || "check_pair rejected (2,1),(0,1)".into())?;
    ensure(search_witnesses(&fam, 8).map_err(err)? == found, || "search is not deterministic".into())?;

    let dup = MultiIndex::parse_list("4,0;3,2;3,2").map_err(err)?;
    ensure(search_witnesses(&dup, 8).map_err(err)?.is_none(), || "duplicate family found witnesses".into())?;
    ensure(!check_pair(&dup, &MultiIndex::pair(2, 1), &MultiIndex::pair(0, 1)).map_err(err)?.passed(), || {
        "duplicate family passed check_pair".into()
    })?;
    Ok("Lambda=(2,1) Gamma=(0,1); duplicate family rejected".into())
}

/// Direct derivative norms respect the certificate, and the ratio replays.
fn certificate_soundness() -> Outcome {
    let cert = pipeline(4)?;
    let est = EstimatorConfig::new(Estimator::Auto, 1 << 17, 3);
    let rows = cross_check(&cert, &est).map_err(err)?;
    ensure(rows.len() == 5, || format!("{} derivative rows", rows.len()))?;
    for r in &rows {
        ensure(r.ok, || {
            format!("l={}: {} estimate [{}, {}] vs {} {}", r.l, method(&r.estimate), r.estimate.lower, r.estimate.upper, r.kind, r.bound)
        })?;
    }
    ensure(check_replay(&cert).map_err(err)?, || "stored fields do not replay".into())?;
    let json = serde_json::to_string(&cert).map_err(err)?;
    let back: Certificate = serde_json::from_str(&json).map_err(err)?;
    ensure(replay_ratio(&back).map_err(err)? == cert.ratio, || "ratio differs after JSON round trip".into())?;
    let methods: Vec<&str> = rows.iter().map(|r| method(&r.estimate)).collect();
    Ok(format!("sandwich ok for l=0..4 ({}), exact replay K={:.6}", methods.join("/"), cert.ratio.to_f64().unwrap_or(f64::NAN)))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 9] = [
        (1, "exact identity D^a0 Z = R_n", exact_identity, Duration::from_secs(10)),
        (2, "Riesz product bounds", riesz_bounds, Duration::from_secs(60)),
        (3, "error budget sum|I_l| <= 1", error_budget, Duration::from_secs(10)),
        (4, "triangle bound on II_l", triangle_bound, Duration::from_secs(60)),
        (5, "ratio growth in n", ratio_growth, Duration::from_secs(20 * 60)),
        (6, "linear growth in m", lemma_growth, Duration::from_secs(10 * 60)),
        (7, "estimator cross-validation", estimator_cross_validation, Duration::from_secs(5 * 60)),
        (8, "hypothesis checker", hypothesis_checker, Duration::from_secs(1)),
        (9, "certificate soundness and replay", certificate_soundness, Duration::from_secs(2 * 60)),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let mut outcome = run();
        let took = start.elapsed();
        if outcome.is_ok() && took > limit {
            outcome = Err(format!("took {took:.1?}, limit {limit:?}"));
        }
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}): {detail} [{took:.2?}]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}): {reason} [{took:.2?}]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
