//! Witness vectors for a family of multiindices: an equalizer `Lambda` with
//! `<alpha_j, Lambda>` constant in `j`, and an orderer `Gamma` with
//! `<alpha_0,Gamma> < <alpha_1,Gamma> < <alpha_2,Gamma> <= ... <= <alpha_m,Gamma>`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{MultiIndex, Rational};

pub const DEFAULT_SEARCH_BOUND: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub index: usize,
    pub lambda: u64,
    pub gamma: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub lambda_ok: bool,
    pub gamma_ok: bool,
    pub lambda: Option<MultiIndex>,
    pub gamma: Option<MultiIndex>,
    pub pairings: Vec<Pairing>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.lambda_ok && self.gamma_ok
    }
}

fn validate_family(alphas: &[MultiIndex]) -> Result<usize> {
    if alphas.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 multiindices, got {}",
            alphas.len()
        )));
    }
    let d = alphas[0].dim();
    for a in alphas {
        a.expect_dim(d)?;
    }
    Ok(d)
}

fn equalizes(alphas: &[MultiIndex], lambda: &MultiIndex) -> bool {
    let first = alphas[0].dot(lambda).expect("validated");
    alphas.iter().all(|a| a.dot(lambda).expect("validated") == first)
}

fn orders(alphas: &[MultiIndex], gamma: &MultiIndex) -> bool {
    let v: Vec<u64> = alphas.iter().map(|a| a.dot(gamma).expect("validated")).collect();
    v.windows(2).enumerate().all(|(i, w)| if i < 2 { w[0] < w[1] } else { w[0] <= w[1] })
}

pub fn check_pair(alphas: &[MultiIndex], lambda: &MultiIndex, gamma: &MultiIndex) -> Result<HypothesisReport> {
    let d = validate_family(alphas)?;
    lambda.expect_dim(d)?;
    gamma.expect_dim(d)?;
    if lambda.is_zero() || gamma.is_zero() {
        return Err(Error::InvalidArgument("witness vectors must be nonzero".into()));
    }
    let pairings = alphas
        .iter()
        .enumerate()
        .map(|(index, a)| Pairing {
            index,
            lambda: a.dot(lambda).expect("validated"),
            gamma: a.dot(gamma).expect("validated"),
        })
        .collect();
    Ok(HypothesisReport {
        lambda_ok: equalizes(alphas, lambda),
        gamma_ok: orders(alphas, gamma),
        lambda: Some(lambda.clone()),
        gamma: Some(gamma.clone()),
        pairings,
    })
}

/// Basis of the rational null space of `rows` (each row a vector in Q^d),
/// one vector per free column, in reduced row echelon parametrization.
fn null_space(rows: &[Vec<Rational>], d: usize) -> (Vec<usize>, Vec<Vec<Rational>>) {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..d {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for v in m[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..d {
                    let delta = &f * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..d).filter(|c| !pivots.contains(c)).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); d];
            v[f] = Rational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][f].clone();
            }
            v
        })
        .collect();
    (free, basis)
}

/// Lexicographically smallest nonzero `Lambda` in `[0, bound]^d` equalizing
/// the family. Enumerates free coordinates of the null space of
/// `{alpha_j - alpha_0}`; pivot coordinates are then determined.
fn search_lambda(alphas: &[MultiIndex], bound: u32) -> Option<MultiIndex> {
    let d = alphas[0].dim();
    let base = alphas[0].entries();
    let rows: Vec<Vec<Rational>> = alphas[1..]
        .iter()
        .map(|a| {
            a.entries()
                .iter()
                .zip(base)
                .map(|(&x, &y)| Rational::from_integer(BigInt::from(x as i64 - y as i64)))
                .collect()
        })
        .collect();
    let (free, basis) = null_space(&rows, d);
    if free.is_empty() {
        return None;
    }
    let mut best: Option<Vec<u32>> = None;
    let mut assignment = vec![0u32; free.len()];
    loop {
        let mut v = vec![Rational::zero(); d];
        for (coef, b) in assignment.iter().zip(&basis) {
            if *coef != 0 {
                let c = Rational::from_integer(BigInt::from(*coef));
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi += &c * bi;
                }
            }
        }
        let admissible = v
            .iter()
            .all(|x| x.is_integer() && !x.is_negative() && *x <= Rational::from_integer(BigInt::from(bound)));
        if admissible {
            let cand: Vec<u32> = v.iter().map(|x| x.to_integer().try_into().expect("bounded")).collect();
            if cand.iter().any(|&x| x != 0) && best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        }
        // odometer over the free coordinates
        let mut i = free.len();
        loop {
            if i == 0 {
                return best.map(|b| MultiIndex::new(b).expect("nonempty"));
            }
            i -= 1;
            if assignment[i] < bound {
                assignment[i] += 1;
                for a in &mut assignment[i + 1..] {
                    *a = 0;
                }
                break;
            }
        }
    }
}

fn search_gamma(alphas: &[MultiIndex], bound: u32) -> Option<MultiIndex> {
    let d = alphas[0].dim();
    let mut g = vec![0u32; d];
    loop {
        let mut i = d;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if g[i] < bound {
                g[i] += 1;
                for x in &mut g[i + 1..] {
                    *x = 0;
                }
                break;
            }
        }
        let cand = MultiIndex::new(g.clone()).expect("nonempty");
        if orders(alphas, &cand) {
            return Some(cand);
        }
    }
}

/// Lexicographically smallest witnesses with every coordinate in `[0, bound]`.
pub fn search_witnesses(alphas: &[MultiIndex], bound: u32) -> Result<Option<(MultiIndex, MultiIndex)>> {
    if bound == 0 {
        return Err(Error::InvalidArgument("search bound must be >= 1".into()));
    }
    validate_family(alphas)?;
    let Some(lambda) = search_lambda(alphas, bound) else { return Ok(None) };
    let Some(gamma) = search_gamma(alphas, bound) else { return Ok(None) };
    Ok(Some((lambda, gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn target_family() -> Vec<MultiIndex> {
        MultiIndex::parse_list("4,0;3,2;2,4;1,6;0,8").unwrap()
    }

    /// Box enumeration over all (Lambda, Gamma) pairs, lexicographic per witness.
    fn brute_force(alphas: &[MultiIndex], bound: u32) -> Option<(Vec<u32>, Vec<u32>)> {
        let cands: Vec<Vec<u32>> = (0..=bound)
            .flat_map(|a| (0..=bound).map(move |b| vec![a, b]))
            .filter(|v| v.iter().any(|&x| x != 0))
            .collect();
        let lam = cands.iter().find(|v| {
            let s: Vec<u64> = alphas
                .iter()
                .map(|al| al.entries().iter().zip(v.iter()).map(|(&x, &y)| (x * y) as u64).sum())
                .collect();
            s.windows(2).all(|w| w[0] == w[1])
        })?;
        let gam = cands.iter().find(|v| {
            let s: Vec<u64> = alphas
                .iter()
                .map(|al| al.entries().iter().zip(v.iter()).map(|(&x, &y)| (x * y) as u64).sum())
                .collect();
            s.windows(2).enumerate().all(|(i, w)| if i < 2 { w[0] < w[1] } else { w[0] <= w[1] })
        })?;
        Some((lam.clone(), gam.clone()))
    }

    #[test]
    fn check_pair_on_target_family() {
        let rep = check_pair(&target_family(), &MultiIndex::pair(2, 1), &MultiIndex::pair(0, 1)).unwrap();
        assert!(rep.lambda_ok && rep.gamma_ok);
        assert!(rep.pairings.iter().all(|p| p.lambda == 8));
        let gammas: Vec<u64> = rep.pairings.iter().map(|p| p.gamma).collect();
        assert_eq!(gammas, vec![0, 2, 4, 6, 8]);

        let rep = check_pair(&target_family(), &MultiIndex::pair(2, 1), &MultiIndex::pair(1, 0)).unwrap();
        assert!(rep.lambda_ok && !rep.gamma_ok);
    }

    #[test]
    fn duplicate_indices_never_order() {
        let dup = MultiIndex::parse_list("1,0;1,0").unwrap();
        for a in 0..5 {
            for b in 0..5 {
                if a + b == 0 {
                    continue;
                }
                let rep = check_pair(&dup, &MultiIndex::pair(1, 1), &MultiIndex::pair(a, b)).unwrap();
                assert!(!rep.gamma_ok);
            }
        }
        assert_eq!(search_witnesses(&dup, 8).unwrap(), None);
    }

    #[test]
    fn check_pair_errors() {
        let one = MultiIndex::parse_list("1,0").unwrap();
        assert!(check_pair(&one, &MultiIndex::pair(1, 0), &MultiIndex::pair(1, 0)).is_err());
        let mixed = vec![MultiIndex::pair(1, 0), MultiIndex::new(vec![1, 0, 0]).unwrap()];
        assert!(matches!(
            check_pair(&mixed, &MultiIndex::pair(1, 0), &MultiIndex::pair(1, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(check_pair(&target_family(), &MultiIndex::pair(0, 0), &MultiIndex::pair(0, 1)).is_err());
        assert!(search_witnesses(&target_family(), 0).is_err());
    }

    #[test]
    fn search_matches_box_enumeration() {
        let fam = target_family();
        let (l, g) = search_witnesses(&fam, 8).unwrap().unwrap();
        assert_eq!((l.entries().to_vec(), g.entries().to_vec()), brute_force(&fam, 8).unwrap());
        assert_eq!(l, MultiIndex::pair(2, 1));
        assert_eq!(g, MultiIndex::pair(0, 1));

        let fam = MultiIndex::parse_list("2,0;1,1;0,2").unwrap();
        let (l, g) = search_witnesses(&fam, 4).unwrap().unwrap();
        assert_eq!((l.entries().to_vec(), g.entries().to_vec()), brute_force(&fam, 4).unwrap());
        assert_eq!(l, MultiIndex::pair(1, 1));
        assert_eq!(g, MultiIndex::pair(0, 1));
    }

    #[test]
    fn three_dimensional_family() {
        // alpha_j = (2-j, j, 1): Lambda must equalize x - y components
        let fam = MultiIndex::parse_list("2,0,1;1,1,1;0,2,1").unwrap();
        let (l, g) = search_witnesses(&fam, 3).unwrap().unwrap();
        assert_eq!(l, MultiIndex::new(vec![0, 0, 1]).unwrap());
        assert!(check_pair(&fam, &l, &g).unwrap().passed());
    }

    proptest! {
        #[test]
        fn found_witnesses_pass_and_scale(rows in proptest::collection::vec((0u32..6, 0u32..6), 2..5),
                                          c in 1u32..5, c2 in 1u32..5) {
            let fam: Vec<MultiIndex> = rows.iter().map(|&(a, b)| MultiIndex::pair(a, b)).collect();
            let first = search_witnesses(&fam, 6).unwrap();
            prop_assert_eq!(&first, &search_witnesses(&fam, 6).unwrap());
            if let Some((l, g)) = first {
                prop_assert!(check_pair(&fam, &l, &g).unwrap().passed());
                let ls = MultiIndex::new(l.entries().iter().map(|x| x * c).collect()).unwrap();
                let gs = MultiIndex::new(g.entries().iter().map(|x| x * c2).collect()).unwrap();
                prop_assert!(check_pair(&fam, &ls, &gs).unwrap().passed());
            }
        }
    }
}
