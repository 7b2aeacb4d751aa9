//! Jacobi sums `sum_s [s]^a [1-s]^b` of Teichmuller characters, computed
//! exactly in truncated Witt rings, with the digit/factorial prediction of
//! their valuation and leading unit.

use std::sync::Arc;

use thiserror::Error;

use crate::exactnum::{NumError, WittElem, WittRing};
use crate::ffield::{FieldEmbedding, FiniteField};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JacobiError {
    #[error("exponents must lie in 1..=q-1, got ({a}, {b})")]
    Range { a: u64, b: u64 },
    #[error("q-1 divides a+b")]
    DegenerateSum,
    #[error("precision {got} below required {need}")]
    Precision { got: u32, need: u32 },
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JacobiSumResult {
    pub a: u64,
    pub b: u64,
    pub value: WittElem,
    pub u: u32,
    /// Leading unit modulo `p`.
    pub unit: u32,
    pub certified: bool,
}

fn check_range(q: u64, a: u64, b: u64) -> Result<(), JacobiError> {
    if a == 0 || b == 0 || a > q - 1 || b > q - 1 {
        return Err(JacobiError::Range { a, b });
    }
    Ok(())
}

/// For every `k`, the discrete log of `1 - gamma^k` (absent when `gamma^k = 1`).
fn one_minus_logs(fq: &FiniteField) -> Vec<Option<u64>> {
    let n = fq.units();
    (0..n)
        .map(|k| fq.dlog(fq.sub(1, fq.exp(k as i64))))
        .collect()
}

/// Histogram of `k a + l_k b mod q-1` over `s = gamma^k != 0, 1`.
fn exponent_counts(fq: &FiniteField, a: u64, b: u64) -> Vec<u64> {
    let n = fq.units();
    let mut counts = vec![0u64; n as usize];
    for (k, l) in one_minus_logs(fq).into_iter().enumerate() {
        if let Some(l) = l {
            let e = ((k as u128 * a as u128 + l as u128 * b as u128) % n as u128) as usize;
            counts[e] += 1;
        }
    }
    counts
}

/// The sum in `W(F_q) / p^N` (ring residue field must be `F_q`).
pub fn jacobi_sum(ring: &WittRing, a: u64, b: u64) -> Result<WittElem, JacobiError> {
    let fq = ring.residue();
    check_range(fq.units() + 1, a, b)?;
    let counts = exponent_counts(fq, a, b);
    Ok(accumulate(ring, &counts, 1))
}

/// The same sum pushed into `W(k_E)` through `emb`, i.e. with `[emb(s)]`.
pub fn jacobi_sum_via(
    ring: &WittRing,
    emb: &FieldEmbedding,
    a: u64,
    b: u64,
) -> Result<WittElem, JacobiError> {
    assert!(Arc::ptr_eq(ring.residue(), &emb.target) || ring.residue().order() == emb.target.order());
    let fq = &emb.source;
    check_range(fq.units() + 1, a, b)?;
    let counts = exponent_counts(fq, a, b);
    Ok(accumulate(ring, &counts, emb.ratio))
}

fn accumulate(ring: &WittRing, counts: &[u64], ratio: u64) -> WittElem {
    let n = ring.residue().units();
    let mut acc = ring.zero();
    for (e, &c) in counts.iter().enumerate() {
        if c != 0 {
            let k = (e as u128 * ratio as u128 % n as u128) as i64;
            acc = ring.add(acc, ring.scale(ring.teich_power(k), c as i64));
        }
    }
    acc
}

fn base_p_digits(mut x: u64, p: u64, f: u32) -> Vec<u64> {
    (0..f)
        .map(|_| {
            let d = x % p;
            x /= p;
            d
        })
        .collect()
}

fn factorial_mod(n: u64, p: u64) -> u64 {
    (1..=n).fold(1, |acc, k| acc * k % p)
}

fn inv_mod(x: u64, p: u64) -> u64 {
    let mut r = 1u64;
    let mut b = x % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// Predicted `(u, U mod p)` from base-`p` digits of `a`, `b` and `a+b` (the last
/// reduced into `1..=q-1`).
pub fn stickelberger(p: u32, f: u32, a: u64, b: u64) -> Result<(u32, u32), JacobiError> {
    let p64 = p as u64;
    let q = p64.pow(f);
    check_range(q, a, b)?;
    if (a + b).is_multiple_of(q - 1) {
        return Err(JacobiError::DegenerateSum);
    }
    let s = (a + b - 1) % (q - 1) + 1;
    let (da, db, ds) = (base_p_digits(a, p64, f), base_p_digits(b, p64, f), base_p_digits(s, p64, f));
    let total: i64 = (0..f as usize)
        .map(|j| (p64 - 1) as i64 - (da[j] + db[j]) as i64 + ds[j] as i64)
        .sum();
    debug_assert_eq!(total % (p64 as i64 - 1), 0);
    let u = (total / (p64 as i64 - 1)) as u32;
    let mut num = 1u64;
    let mut den = 1u64;
    for j in 0..f as usize {
        num = num * factorial_mod(da[j], p64) % p64 * factorial_mod(db[j], p64) % p64;
        den = den * factorial_mod(ds[j], p64) % p64;
    }
    let mut unit = num * inv_mod(den, p64) % p64;
    if (f - 1 + u) % 2 == 1 {
        unit = (p64 - unit) % p64;
    }
    Ok((u, unit as u32))
}

/// Compare the exact sum with `[U] p^u`; `certified` iff the difference has
/// valuation `> u` modulo `p^N`.
pub fn certify(ring: &WittRing, a: u64, b: u64) -> Result<JacobiSumResult, JacobiError> {
    let fq = ring.residue();
    let (u, unit) = stickelberger(fq.p(), fq.degree(), a, b)?;
    certify_with(ring, a, b, u, unit)
}

/// Certification of a caller-supplied prediction `(u, U)`.
pub fn certify_with(
    ring: &WittRing,
    a: u64,
    b: u64,
    u: u32,
    unit: u32,
) -> Result<JacobiSumResult, JacobiError> {
    let need = u + 2;
    if ring.precision() < need {
        return Err(JacobiError::Precision {
            got: ring.precision(),
            need,
        });
    }
    let value = jacobi_sum(ring, a, b)?;
    let lead = ring.mul_p_pow(ring.teichmuller(ring.residue().from_int(unit as i64)), u);
    let diff = ring.sub(value, lead);
    let certified = unit != 0 && ring.valuation(diff).is_none_or(|v| v > u);
    Ok(JacobiSumResult {
        a,
        b,
        value,
        u,
        unit,
        certified,
    })
}

/// Ring `W(F_q)/p^{f+5}`, enough for every admissible pair.
pub fn default_ring(fq: &Arc<FiniteField>) -> Result<Arc<WittRing>, JacobiError> {
    Ok(WittRing::new(fq.clone(), fq.degree() + 5)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::{embeddings, make_field};
    use proptest::prelude::*;

    fn ring(p: u32, f: u32, n: u32) -> Arc<WittRing> {
        WittRing::new(make_field(p, f).unwrap(), n).unwrap()
    }

    #[test]
    fn small_value() {
        let r = ring(5, 1, 2);
        assert_eq!(jacobi_sum(&r, 1, 1).unwrap(), r.from_int(10));
        assert_eq!(stickelberger(5, 1, 1, 1).unwrap(), (1, 2));
    }

    #[test]
    fn trivial_characters() {
        for (p, f) in [(5, 1), (5, 2), (7, 1)] {
            let r = ring(p, f, 4);
            let q = (p as u64).pow(f);
            assert_eq!(jacobi_sum(&r, q - 1, q - 1).unwrap(), r.from_int(q as i64 - 2));
        }
    }

    #[test]
    fn range_and_degenerate() {
        let r = ring(5, 1, 3);
        assert!(matches!(jacobi_sum(&r, 0, 1), Err(JacobiError::Range { .. })));
        assert!(matches!(jacobi_sum(&r, 1, 5), Err(JacobiError::Range { .. })));
        assert_eq!(stickelberger(5, 1, 1, 3), Err(JacobiError::DegenerateSum));
        assert!(matches!(certify(&ring(5, 1, 1), 1, 1), Err(JacobiError::Precision { .. })));
    }

    #[test]
    fn exhaustive_certification_small_fields() {
        for (p, f) in [(5, 1), (7, 1), (5, 2)] {
            let r = ring(p, f, f + 5);
            let q = (p as u64).pow(f);
            for a in 1..q {
                for b in 1..q {
                    if (a + b) % (q - 1) == 0 {
                        continue;
                    }
                    let res = certify(&r, a, b).unwrap();
                    assert!(res.certified, "p={p} f={f} a={a} b={b}: {res:?}");
                    assert!(res.u <= f);
                }
            }
        }
    }

    #[test]
    fn wrong_unit_is_rejected() {
        let r = ring(5, 2, 7);
        let (u, unit) = stickelberger(5, 2, 3, 7).unwrap();
        let bad = unit * 2 % 5;
        assert!(!certify_with(&r, 3, 7, u, bad).unwrap().certified);
        assert!(!certify_with(&r, 3, 7, u + 1, unit).unwrap().certified);
    }

    #[test]
    fn factorial_reflection() {
        for p in [5u64, 7, 11, 13] {
            for n in 0..p {
                let lhs = factorial_mod(n, p) * factorial_mod(p - 1 - n, p) % p;
                let rhs = if n % 2 == 1 { 1 } else { p - 1 };
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn embedded_sum_is_image_of_base_sum() {
        let fq = make_field(5, 2).unwrap();
        let ke = make_field(5, 4).unwrap();
        let embs = embeddings(&fq, &ke).unwrap();
        let rk = WittRing::new(ke.clone(), 4).unwrap();
        let rq = WittRing::new(fq.clone(), 4).unwrap();
        for (a, b) in [(1, 1), (3, 7), (24, 5)] {
            let s = jacobi_sum_via(&rk, &embs[0], a, b).unwrap();
            let (u, unit) = stickelberger(5, 2, a, b).unwrap();
            let lead = rk.mul_p_pow(rk.teichmuller(ke.from_int(unit as i64)), u);
            assert!(rk.valuation(rk.sub(s, lead)).is_none_or(|v| v > u));
            // frobenius-twisted embedding swaps to the sum with exponents times p
            let s1 = jacobi_sum_via(&rk, &embs[1], a, b).unwrap();
            let s2 = jacobi_sum_via(&rk, &embs[0], a * 5 % 24, b * 5 % 24).unwrap_or(rk.zero());
            if a * 5 % 24 != 0 && b * 5 % 24 != 0 {
                assert_eq!(s1, s2);
            }
            assert!(jacobi_sum(&rq, a, b).is_ok());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_in_exponents(a in 1u64..49, b in 1u64..49) {
            let r = ring(7, 2, 4);
            prop_assert_eq!(jacobi_sum(&r, a, b).unwrap(), jacobi_sum(&r, b, a).unwrap());
        }

        #[test]
        fn valuation_frobenius_stable(a in 1u64..124, b in 1u64..124) {
            prop_assume!((a + b) % 124 != 0);
            let (u, _) = stickelberger(5, 3, a, b).unwrap();
            let (u2, _) = stickelberger(5, 3, a * 5 % 124, b * 5 % 124).unwrap();
            prop_assert_eq!(u, u2);
            prop_assert!(u <= 3);
        }
    }
}
