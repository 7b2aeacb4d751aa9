//! Truncated unramified p-adic rings `W(F_{p^m}) / p^N` and exact cyclotomic
//! integers `Z[x]/Phi_n(x)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::ffield::{Fe, FiniteField};

/// Maximal residue degree supported by the fixed-width element layout.
pub const MAX_WITT_DEGREE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumError {
    #[error("cyclotomic conductors differ: {0} vs {1}")]
    ConductorMismatch(u32, u32),
    #[error("residue degree {0} exceeds {MAX_WITT_DEGREE}")]
    DegreeTooLarge(u32),
    #[error("p^N does not fit in 62 bits")]
    PrecisionTooLarge,
}

/// Element of a [`WittRing`]: coefficients in `Z/p^N` on the power basis
/// `1, y, ..., y^(m-1)` of the lifted modulus.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct WittElem {
    pub c: [u64; MAX_WITT_DEGREE],
}

impl fmt::Debug for WittElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.c.iter().rposition(|&x| x != 0).map_or(1, |i| i + 1);
        write!(f, "W{:?}", &self.c[..last])
    }
}

#[derive(Debug)]
pub struct WittRing {
    residue: Arc<FiniteField>,
    p: u64,
    m: usize,
    n: u32,
    pn: u64,
    /// Monic lifted modulus, lowest coefficient first, length m + 1.
    modulus: Vec<u64>,
    /// Teichmuller lift of the residue generator.
    teich_gen: WittElem,
    teich_table: OnceLock<Vec<WittElem>>,
}

impl WittRing {
    /// Build `W(residue)/p^N`, Hensel-lifting the residue modulus to the
    /// factor of `y^(p^m - 1) - 1` it reduces to.
    pub fn new(residue: Arc<FiniteField>, precision: u32) -> Result<Arc<WittRing>, NumError> {
        let m = residue.degree() as usize;
        if m > MAX_WITT_DEGREE {
            return Err(NumError::DegreeTooLarge(m as u32));
        }
        let p = residue.p() as u64;
        let pn = p
            .checked_pow(precision)
            .filter(|&x| x < (1u64 << 62))
            .ok_or(NumError::PrecisionTooLarge)?;
        let naive: Vec<u64> = residue.modulus().iter().map(|&c| c as u64).collect();
        let mut ring = WittRing {
            residue: residue.clone(),
            p,
            m,
            n: precision,
            pn,
            modulus: naive,
            teich_gen: WittElem::default(),
            teich_table: OnceLock::new(),
        };
        // In the naive model, the Teichmuller lift of the class of y has
        // conjugates T^(p^i); their elementary symmetric functions give the
        // Hensel lift.
        let q = residue.order() as u64;
        let mut y = WittElem::default();
        if m > 1 {
            y.c[1] = 1;
        } else {
            y.c[0] = (pn - naive_root_constant(&ring.modulus, pn)) % pn;
        }
        let t = ring.teich_iterate(y, q);
        let mut poly: Vec<WittElem> = vec![ring.one()];
        let mut conj = t;
        for _ in 0..m {
            let mut next = vec![WittElem::default(); poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                next[i + 1] = ring.add(next[i + 1], c);
                next[i] = ring.sub(next[i], ring.mul(c, conj));
            }
            poly = next;
            conj = ring.pow(conj, p);
        }
        let lifted: Vec<u64> = poly
            .iter()
            .map(|e| {
                debug_assert!(e.c[1..].iter().all(|&x| x == 0));
                e.c[0]
            })
            .collect();
        ring.modulus = lifted;
        // Now the class of y is Teichmuller, and reduces to the class of y.
        let gen_digits = residue.digits(residue.generator());
        let mut g = WittElem::default();
        for (i, &d) in gen_digits.iter().enumerate() {
            g.c[i] = d as u64;
        }
        ring.teich_gen = ring.teich_iterate(g, q);
        Ok(Arc::new(ring))
    }

    fn teich_iterate(&self, mut t: WittElem, q: u64) -> WittElem {
        for _ in 0..=self.n {
            t = self.pow(t, q);
        }
        t
    }

    pub fn residue(&self) -> &Arc<FiniteField> {
        &self.residue
    }
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn degree(&self) -> usize {
        self.m
    }
    pub fn precision(&self) -> u32 {
        self.n
    }
    /// `p^N`.
    pub fn modulus_int(&self) -> u64 {
        self.pn
    }
    pub fn lifted_modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn zero(&self) -> WittElem {
        WittElem::default()
    }
    pub fn one(&self) -> WittElem {
        self.from_int(1)
    }
    pub fn from_int(&self, k: i64) -> WittElem {
        let mut e = WittElem::default();
        e.c[0] = k.rem_euclid(self.pn as i64) as u64;
        e
    }
    /// The class of `y`, a Teichmuller root of the lifted modulus.
    pub fn y(&self) -> WittElem {
        let mut e = WittElem::default();
        if self.m > 1 {
            e.c[1] = 1;
        } else {
            e.c[0] = (self.pn - self.modulus[0]) % self.pn;
        }
        e
    }

    pub fn add(&self, a: WittElem, b: WittElem) -> WittElem {
        let mut r = WittElem::default();
        for i in 0..self.m {
            let s = a.c[i] + b.c[i];
            r.c[i] = if s >= self.pn { s - self.pn } else { s };
        }
        r
    }
    pub fn neg(&self, a: WittElem) -> WittElem {
        let mut r = WittElem::default();
        for i in 0..self.m {
            r.c[i] = if a.c[i] == 0 { 0 } else { self.pn - a.c[i] };
        }
        r
    }
    pub fn sub(&self, a: WittElem, b: WittElem) -> WittElem {
        self.add(a, self.neg(b))
    }
    pub fn scale(&self, a: WittElem, k: i64) -> WittElem {
        let k = k.rem_euclid(self.pn as i64) as u128;
        let mut r = WittElem::default();
        for i in 0..self.m {
            r.c[i] = (a.c[i] as u128 * k % self.pn as u128) as u64;
        }
        r
    }

    pub fn mul(&self, a: WittElem, b: WittElem) -> WittElem {
        let m = self.m;
        let pn = self.pn as u128;
        if m == 1 {
            let mut r = WittElem::default();
            r.c[0] = (a.c[0] as u128 * b.c[0] as u128 % pn) as u64;
            return r;
        }
        let mut prod = [0u128; 2 * MAX_WITT_DEGREE];
        for i in 0..m {
            if a.c[i] == 0 {
                continue;
            }
            for j in 0..m {
                prod[i + j] = (prod[i + j] + a.c[i] as u128 * b.c[j] as u128) % pn;
            }
        }
        for d in (m..2 * m - 1).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for i in 0..m {
                let t = c * self.modulus[i] as u128 % pn;
                let idx = d - m + i;
                prod[idx] = (prod[idx] + pn - t) % pn;
            }
        }
        let mut r = WittElem::default();
        for i in 0..m {
            r.c[i] = prod[i] as u64;
        }
        r
    }

    pub fn pow(&self, a: WittElem, mut e: u64) -> WittElem {
        let mut r = self.one();
        let mut b = a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        r
    }

    /// Reduction modulo p into the residue field.
    pub fn reduce(&self, a: WittElem) -> Fe {
        let digits: Vec<u32> = (0..self.m).map(|i| (a.c[i] % self.p) as u32).collect();
        self.residue.from_digits(&digits)
    }

    /// Teichmuller lift; `[0] = 0`.
    pub fn teichmuller(&self, x: Fe) -> WittElem {
        match self.residue.dlog(x) {
            None => self.zero(),
            Some(k) => self.teich_power(k as i64),
        }
    }

    /// `[gamma]^k` for the fixed residue generator `gamma`.
    pub fn teich_power(&self, k: i64) -> WittElem {
        let n = self.residue.units() as i64;
        let k = k.rem_euclid(n) as usize;
        if let Some(t) = self.teich_table.get() {
            return t[k];
        }
        self.pow(self.teich_gen, k as u64)
    }

    /// Precompute all Teichmuller powers; worthwhile for hot loops.
    pub fn warm_teichmuller(&self) {
        self.teich_table.get_or_init(|| {
            let n = self.residue.units() as usize;
            let mut out = Vec::with_capacity(n);
            let mut cur = self.one();
            for _ in 0..n {
                out.push(cur);
                cur = self.mul(cur, self.teich_gen);
            }
            out
        });
    }

    /// Largest `k <= N` with `a` divisible by `p^k`; `None` for zero mod `p^N`.
    pub fn valuation(&self, a: WittElem) -> Option<u32> {
        let mut best: Option<u32> = None;
        for i in 0..self.m {
            let mut c = a.c[i];
            if c == 0 {
                continue;
            }
            let mut v = 0;
            while c.is_multiple_of(self.p) {
                c /= self.p;
                v += 1;
            }
            best = Some(best.map_or(v, |b: u32| b.min(v)));
        }
        best
    }

    pub fn is_unit(&self, a: WittElem) -> bool {
        self.valuation(a) == Some(0)
    }

    pub fn inv(&self, a: WittElem) -> Option<WittElem> {
        let r = self.reduce(a);
        if r == 0 {
            return None;
        }
        let mut x = self.teichmuller(self.residue.inv(r));
        let two = self.from_int(2);
        let mut prec = 1;
        while prec < self.n {
            x = self.mul(x, self.sub(two, self.mul(a, x)));
            prec *= 2;
        }
        Some(x)
    }

    /// Multiply by `p^k`.
    pub fn mul_p_pow(&self, a: WittElem, k: u32) -> WittElem {
        if k >= self.n {
            return self.zero();
        }
        self.scale(a, self.p.pow(k) as i64)
    }

    /// Exact division by `p^k`; the result is determined modulo `p^(N-k)`.
    /// Returns `None` if `a` is not divisible.
    pub fn div_p_pow(&self, a: WittElem, k: u32) -> Option<WittElem> {
        let d = self.p.pow(k);
        let mut r = WittElem::default();
        for i in 0..self.m {
            if !a.c[i].is_multiple_of(d) {
                return None;
            }
            r.c[i] = a.c[i] / d;
        }
        Some(r)
    }

    /// Reduce modulo `p^k` (coefficientwise).
    pub fn truncate(&self, a: WittElem, k: u32) -> WittElem {
        let d = self.p.pow(k.min(self.n));
        let mut r = WittElem::default();
        for i in 0..self.m {
            r.c[i] = a.c[i] % d;
        }
        r
    }
}

fn naive_root_constant(modulus: &[u64], pn: u64) -> u64 {
    // degree-one modulus y + c: root is -c; used only for m = 1
    modulus[0] % pn
}

/// A p-adic number `p^val * unit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadicScaled {
    pub val: i64,
    pub unit: WittElem,
}

impl PadicScaled {
    pub fn new(ring: &WittRing, val: i64, unit: WittElem) -> Self {
        assert!(ring.is_unit(unit), "unit part must be a unit");
        PadicScaled { val, unit }
    }
    pub fn mul(&self, ring: &WittRing, other: &PadicScaled) -> PadicScaled {
        PadicScaled {
            val: self.val + other.val,
            unit: ring.mul(self.unit, other.unit),
        }
    }
    pub fn inv(&self, ring: &WittRing) -> PadicScaled {
        PadicScaled {
            val: -self.val,
            unit: ring.inv(self.unit).expect("unit"),
        }
    }
}

/// Precomputed reduction data for `Z[x]/Phi_n`.
#[derive(Debug)]
pub struct CycloTable {
    pub n: u32,
    pub phi: Vec<i64>,
    /// `x^k mod Phi_n` for `0 <= k < n`.
    pub powers: Vec<Vec<i64>>,
}

fn cyclotomic_poly(n: u32, cache: &mut HashMap<u32, Vec<i64>>) -> Vec<i64> {
    if let Some(v) = cache.get(&n) {
        return v.clone();
    }
    // x^n - 1 divided by Phi_d for proper divisors d
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in 1..n {
        if n.is_multiple_of(d) {
            let den = cyclotomic_poly(d, cache);
            num = exact_div(&num, &den);
        }
    }
    cache.insert(n, num.clone());
    num
}

fn exact_div(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut r = num.to_vec();
    let dd = den.len() - 1;
    let nd = r.len() - 1;
    let mut q = vec![0i64; nd - dd + 1];
    for k in (0..=nd - dd).rev() {
        let c = r[k + dd];
        q[k] = c;
        if c != 0 {
            for (i, &d) in den.iter().enumerate() {
                r[k + i] -= c * d;
            }
        }
    }
    debug_assert!(r.iter().all(|&x| x == 0));
    q
}

static CYCLO_CACHE: OnceLock<Mutex<HashMap<u32, Arc<CycloTable>>>> = OnceLock::new();

pub fn cyclo_table(n: u32) -> Arc<CycloTable> {
    assert!(n >= 1);
    let cache = CYCLO_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&n) {
        return t.clone();
    }
    let mut pc = HashMap::new();
    let phi = cyclotomic_poly(n, &mut pc);
    let deg = phi.len() - 1;
    let mut powers = Vec::with_capacity(n as usize);
    let mut cur = vec![0i64; deg];
    cur[0] = 1;
    if deg == 0 {
        unreachable!()
    }
    for _ in 0..n {
        powers.push(cur.clone());
        // multiply by x
        let top = cur[deg - 1];
        for i in (1..deg).rev() {
            cur[i] = cur[i - 1];
        }
        cur[0] = 0;
        if top != 0 {
            for i in 0..deg {
                cur[i] -= top * phi[i];
            }
        }
    }
    let t = Arc::new(CycloTable { n, phi, powers });
    cache.lock().unwrap().insert(n, t.clone());
    t
}

/// Exact element of `Z[zeta_n]` in the power basis of `Z[x]/Phi_n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CycloInt {
    pub n: u32,
    pub coeffs: Vec<i64>,
}

impl fmt::Debug for CycloInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for CycloInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| match i {
                0 => format!("{c}"),
                _ => format!("{c}z^{i}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join("+"))
        }
    }
}

impl CycloInt {
    pub fn zero(n: u32) -> CycloInt {
        let deg = cyclo_table(n).phi.len() - 1;
        CycloInt {
            n,
            coeffs: vec![0; deg],
        }
    }
    pub fn from_int(n: u32, k: i64) -> CycloInt {
        let mut z = CycloInt::zero(n);
        z.coeffs[0] = k;
        z
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Reduce a group-ring vector `sum counts[k] zeta^k` (k mod n).
    pub fn from_exponent_counts(n: u32, counts: &[i64]) -> CycloInt {
        let t = cyclo_table(n);
        let mut z = CycloInt::zero(n);
        for (k, &c) in counts.iter().enumerate() {
            if c != 0 {
                for (dst, &v) in z.coeffs.iter_mut().zip(&t.powers[k % n as usize]) {
                    *dst += c * v;
                }
            }
        }
        z
    }

    pub fn add(&self, other: &CycloInt) -> Result<CycloInt, NumError> {
        self.check(other)?;
        Ok(CycloInt {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }
    pub fn sub(&self, other: &CycloInt) -> Result<CycloInt, NumError> {
        self.check(other)?;
        Ok(CycloInt {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }
    pub fn scale(&self, k: i64) -> CycloInt {
        CycloInt {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }
    /// Exact division by an integer; `None` if some coefficient is not divisible.
    pub fn div_exact(&self, k: i64) -> Option<CycloInt> {
        if self.coeffs.iter().any(|c| c % k != 0) {
            return None;
        }
        Some(CycloInt {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c / k).collect(),
        })
    }
    fn check(&self, other: &CycloInt) -> Result<(), NumError> {
        if self.n != other.n {
            Err(NumError::ConductorMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    /// Evaluate at a root of unity `w` of order n in `F_l`.
    pub fn eval_mod(&self, w: u64, l: u64) -> u64 {
        let mut acc = 0u128;
        let mut pw = 1u128;
        for &c in &self.coeffs {
            let cm = c.rem_euclid(l as i64) as u128;
            acc = (acc + cm * pw) % l as u128;
            pw = pw * w as u128 % l as u128;
        }
        acc as u64
    }
}

pub fn cyclo_mul(a: &CycloInt, b: &CycloInt) -> Result<CycloInt, NumError> {
    a.check(b)?;
    let n = a.n as usize;
    let mut counts = vec![0i64; n];
    for (i, &x) in a.coeffs.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.coeffs.iter().enumerate() {
            counts[(i + j) % n] += x * y;
        }
    }
    Ok(CycloInt::from_exponent_counts(a.n, &counts))
}

/// `zeta_n^k`.
pub fn root_of_unity(n: u32, k: i64) -> CycloInt {
    let t = cyclo_table(n);
    CycloInt {
        n,
        coeffs: t.powers[k.rem_euclid(n as i64) as usize].clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::make_field;

    fn ring(p: u32, m: u32, n: u32) -> Arc<WittRing> {
        WittRing::new(make_field(p, m).unwrap(), n).unwrap()
    }

    #[test]
    fn teichmuller_of_two_mod_25() {
        let r = ring(5, 1, 2);
        assert_eq!(r.teichmuller(2).c[0], 7);
        assert_eq!(r.teichmuller(1), r.one());
        assert_eq!(r.teichmuller(4), r.from_int(-1));
        assert_eq!(r.teichmuller(0), r.zero());
    }

    #[test]
    fn lifted_modulus_divides_unit_polynomial() {
        for (p, m, n) in [(5, 2, 4), (7, 2, 3), (3, 3, 5), (5, 3, 3)] {
            let r = ring(p, m, n);
            let y = r.y();
            let q = r.residue().order() as u64;
            assert_eq!(r.pow(y, q - 1), r.one());
            let lm: Vec<u32> = r.lifted_modulus().iter().map(|&c| (c % p as u64) as u32).collect();
            assert_eq!(lm, r.residue().modulus());
        }
    }

    #[test]
    fn teichmuller_fixed_and_multiplicative() {
        for (p, m) in [(5, 2), (7, 2), (3, 2), (2, 3)] {
            let r = ring(p, m, 4);
            let f = r.residue().clone();
            let q = f.order() as u64;
            for x in f.elements() {
                let t = r.teichmuller(x);
                assert_eq!(r.reduce(t), x);
                assert_eq!(r.pow(t, q), t);
                for y in f.elements() {
                    assert_eq!(r.mul(t, r.teichmuller(y)), r.teichmuller(f.mul(x, y)));
                }
            }
        }
    }

    #[test]
    fn reduction_commutes_with_arithmetic() {
        let r = ring(7, 2, 3);
        let f = r.residue().clone();
        for x in f.elements().step_by(5) {
            for y in f.elements().step_by(3) {
                let (a, b) = (r.teichmuller(x), r.teichmuller(y));
                assert_eq!(r.reduce(r.add(a, b)), f.add(x, y));
                assert_eq!(r.reduce(r.mul(a, b)), f.mul(x, y));
            }
        }
    }

    #[test]
    fn valuations() {
        let r = ring(5, 1, 3);
        assert_eq!(r.valuation(r.from_int(5)), Some(1));
        assert_eq!(r.valuation(r.from_int(10)), Some(1));
        assert_eq!(r.valuation(r.teichmuller(2)), Some(0));
        assert_eq!(r.valuation(r.zero()), None);
        let r2 = ring(5, 2, 2);
        assert_eq!(r2.valuation(r2.from_int(10)), Some(1));
    }

    #[test]
    fn inverse_and_padic_scaled() {
        let r = ring(5, 2, 5);
        let a = r.add(r.teichmuller(7), r.from_int(5));
        let ai = r.inv(a).unwrap();
        assert_eq!(r.mul(a, ai), r.one());
        assert!(r.inv(r.from_int(5)).is_none());
        let x = PadicScaled::new(&r, 2, a);
        let y = PadicScaled::new(&r, -1, ai);
        let z = x.mul(&r, &y);
        assert_eq!(z.val, 1);
        assert_eq!(z.unit, r.one());
    }

    #[test]
    fn cyclotomic_polys() {
        assert_eq!(cyclo_table(1).phi, vec![-1, 1]);
        assert_eq!(cyclo_table(6).phi, vec![1, -1, 1]);
        assert_eq!(cyclo_table(12).phi, vec![1, 0, -1, 0, 1]);
        assert_eq!(cyclo_table(24).phi.len() - 1, 8);
    }

    #[test]
    fn cyclo_examples() {
        let n = 24;
        let z = root_of_unity(n, 1);
        let zi = root_of_unity(n, -1);
        let s = z.add(&zi).unwrap();
        let lhs = cyclo_mul(&s, &s).unwrap();
        let rhs = root_of_unity(n, 2)
            .add(&CycloInt::from_int(n, 2))
            .unwrap()
            .add(&root_of_unity(n, -2))
            .unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(root_of_unity(n, 0), CycloInt::from_int(n, 1));
        assert_eq!(root_of_unity(n, 24), CycloInt::from_int(n, 1));
        for a in 0..24 {
            for b in 0..24 {
                assert_eq!(
                    cyclo_mul(&root_of_unity(n, a), &root_of_unity(n, b)).unwrap(),
                    root_of_unity(n, a + b)
                );
            }
        }
        let seven: Vec<i64> = vec![1; 7];
        assert!(CycloInt::from_exponent_counts(7, &seven).is_zero());
        assert_eq!(
            cyclo_mul(&z, &root_of_unity(12, 1)),
            Err(NumError::ConductorMismatch(24, 12))
        );
    }

    #[test]
    fn roots_of_unity_distinct() {
        for n in [8u32, 24, 48] {
            let all: Vec<CycloInt> = (0..n as i64).map(|k| root_of_unity(n, k)).collect();
            for i in 0..all.len() {
                for j in 0..i {
                    assert_ne!(all[i], all[j]);
                }
            }
        }
    }
}
