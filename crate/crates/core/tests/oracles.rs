//! Independent oracles for the frequency builder and the remainder split.
//! The exact values were computed by the oracles below and then frozen.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use ornstein_core::exact::{format_rational, rat, MultiIndex};
use ornstein_core::frequency::{delta_preset, select_sequence, verify_sequence, AdmissibleSequence, Mode, SigmaSeq};
use ornstein_core::riesz::{coeff_sum, decompose, DerivativeFamily};
use ornstein_core::{LatticeVector, Rational};

fn lv(x: i64, y: i64) -> LatticeVector {
    LatticeVector::new(x, y)
}

/// Every `a_k + sum_{j<k} eps_j a_j` for `eps` in `{-1,0,1}^(k-1)`, by
/// counting in base 3.
fn perturbed(freqs: &[LatticeVector], k: usize) -> Vec<(BigInt, BigInt)> {
    (0..3usize.pow(k as u32))
        .map(|code| {
            let (mut x, mut y) = (freqs[k].x.clone(), freqs[k].y.clone());
            let mut c = code;
            for a in &freqs[..k] {
                let e = (c % 3) as i64 - 1;
                c /= 3;
                x += &a.x * e;
                y += &a.y * e;
            }
            (x, y)
        })
        .collect()
}

/// Exact worst tolerance per power `l = 1..=m`, or `None` when some `q(1)`
/// vanishes.
fn oracle_delta(seq: &AdmissibleSequence) -> Option<Vec<Rational>> {
    let mut worst = vec![Rational::zero(); seq.m as usize];
    for k in 0..seq.n {
        let target = if seq.sigma.values()[k] { seq.tau.clone() } else { Rational::zero() };
        for (x, y) in perturbed(&seq.freqs, k) {
            if x.is_zero() {
                return None;
            }
            let ratio = Rational::new(&y * &y, x);
            let (mut p, mut t) = (ratio.clone(), target.clone());
            for w in worst.iter_mut() {
                let d = (&p - &t).abs();
                if d > *w {
                    *w = d;
                }
                p *= &ratio;
                t *= &target;
            }
        }
    }
    Some(worst)
}

fn compact4() -> AdmissibleSequence {
    select_sequence(4, 4, &SigmaSeq::ones(4), &delta_preset(Mode::Compact, 4), Mode::Compact).unwrap()
}

#[test]
fn compact_four_sequence_is_frozen() {
    let seq = compact4();
    let frozen = [lv(18, 3), lv(121032, 246), lv(833299488, 20412), LatticeVector::new(5740159690322i64, 1694131)];
    assert_eq!(seq.freqs, frozen);
    assert_eq!(seq.tau, rat(1, 2));
}

#[test]
fn compact_four_tolerances_match_oracle() {
    let seq = compact4();
    let exact = oracle_delta(&seq).expect("no vanishing first coordinate");
    let strings: Vec<String> = exact.iter().map(format_rational).collect();
    assert_eq!(strings, FROZEN_COMPACT4_DELTA);
    for (l, d) in exact.iter().enumerate() {
        assert!(*d <= rat(1, 80), "l={}", l + 1);
        assert!(*d <= seq.delta[l], "builder bound below the exact maximum at l={}", l + 1);
    }
    let rep = verify_sequence(&seq, true);
    assert!(rep.passed());
    assert_eq!(rep.achieved_delta, exact);
    assert_eq!(rep.perturbations_checked, 40);
}

const FROZEN_COMPACT4_DELTA: [&str; 4] = [
    "564814/46301141",
    "26470547507370/2143795657901881",
    "1860941324486688775097/198520370063405512692442",
    "29074412289632564794496498385/4595859822838958791675023338161",
];

#[test]
fn lacunarity_holds_in_max_norm() {
    let seq = compact4();
    for w in seq.freqs.windows(2) {
        assert!(Rational::from(w[1].linf()) > &seq.lacunarity * Rational::from(w[0].linf()));
    }
}

/// `sum_q |c_q(I_l)|` recomputed from the raw symbols `q^{alpha_l} / q^{alpha_0}`.
fn oracle_remainder_sum(seq: &AdmissibleSequence, l: u32) -> Rational {
    let mut total = Rational::zero();
    for k in 0..seq.n {
        let target = if seq.sigma.values()[k] { seq.tau.clone() } else { Rational::zero() };
        for code in 0..3usize.pow(k as u32) {
            let (mut x, mut y) = (seq.freqs[k].x.clone(), seq.freqs[k].y.clone());
            let (mut c, mut r) = (code, 1u32);
            for a in &seq.freqs[..k] {
                let e = (c % 3) as i64 - 1;
                c /= 3;
                if e != 0 {
                    r += 1;
                }
                x += &a.x * e;
                y += &a.y * e;
            }
            // q in A_k and -q in -A_k contribute equal moduli
            let symbol = num_traits::pow(Rational::new(&y * &y, x), l as usize);
            let dev = (symbol - num_traits::pow(target.clone(), l as usize)).abs();
            total += dev * rat(2, 1) / Rational::from(BigInt::from(2).pow(r));
        }
    }
    total
}

#[test]
fn faithful_four_remainders_match_oracle() {
    let seq = select_sequence(4, 4, &SigmaSeq::ones(4), &delta_preset(Mode::Faithful, 4), Mode::Faithful).unwrap();
    let family = DerivativeFamily::default();
    assert_eq!(family.alpha(1).unwrap(), MultiIndex::pair(3, 2));
    for l in 1..=4 {
        let (rem, _) = decompose(&seq, &family, l).unwrap();
        let s = coeff_sum(&rem);
        assert_eq!(s, oracle_remainder_sum(&seq, l), "l={l}");
        assert!(s <= Rational::from(BigInt::from(1)));
        assert!(s <= Rational::from(BigInt::from(80)) * &seq.delta[l as usize - 1]);
    }
}
