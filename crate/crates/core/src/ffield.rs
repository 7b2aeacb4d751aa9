//! Finite fields `F_{p^m}` with table-driven multiplication, Frobenius,
//! embeddings between fields and multiplicative characters.
//!
//! Elements are encoded as integers `sum c_i p^i` where `c_i` is the
//! coefficient of `y^i` in the polynomial basis of the chosen modulus.

use std::sync::Arc;

use thiserror::Error;

/// Encoded field element.
pub type Fe = u32;

/// Largest field order for which logarithm tables are built.
pub const MAX_FIELD_ORDER: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    CompositeP(u64),
    #[error("field of order {0} exceeds the table bound {MAX_FIELD_ORDER}")]
    TableTooLarge(u64),
    #[error("no embedding of F_(p^{src}) into F_(p^{dst})")]
    NoEmbedding { src: u32, dst: u32 },
    #[error("character evaluated at zero")]
    ZeroArgument,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub(crate) fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Polynomials over F_p as coefficient vectors, lowest degree first.
mod poly {
    pub fn trim(a: &mut Vec<u32>) {
        while a.last() == Some(&0) {
            a.pop();
        }
    }

    pub fn rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        let mut r = a.to_vec();
        trim(&mut r);
        let dm = m.len() - 1;
        let lead_inv = inv_mod(m[dm], p);
        while r.len() > dm {
            let d = r.len() - 1;
            let c = (r[d] as u64 * lead_inv as u64 % p as u64) as u32;
            for i in 0..=dm {
                let idx = d - dm + i;
                r[idx] = ((r[idx] as u64 + (p - c) as u64 * m[i] as u64) % p as u64) as u32;
            }
            trim(&mut r);
        }
        r
    }

    pub fn mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        let mut v: Vec<u32> = out.into_iter().map(|x| x as u32).collect();
        trim(&mut v);
        v
    }

    pub fn mulmod(a: &[u32], b: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        rem(&mul(a, b, p), m, p)
    }

    pub fn powmod(base: &[u32], mut e: u64, m: &[u32], p: u32) -> Vec<u32> {
        let mut result = vec![1u32];
        let mut b = rem(base, m, p);
        while e > 0 {
            if e & 1 == 1 {
                result = mulmod(&result, &b, m, p);
            }
            b = mulmod(&b, &b, m, p);
            e >>= 1;
        }
        rem(&result, m, p)
    }

    pub fn sub(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let n = a.len().max(b.len());
        let mut out = vec![0u32; n];
        for (i, o) in out.iter_mut().enumerate() {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            *o = (x + p - y) % p;
        }
        trim(&mut out);
        out
    }

    pub fn gcd(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        trim(&mut x);
        trim(&mut y);
        while !y.is_empty() {
            let r = rem(&x, &y, p);
            x = y;
            y = r;
        }
        x
    }

    pub fn inv_mod(a: u32, p: u32) -> u32 {
        let mut r = 1u64;
        let mut b = a as u64 % p as u64;
        let mut e = p as u64 - 2;
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % p as u64;
            }
            b = b * b % p as u64;
            e >>= 1;
        }
        r as u32
    }
}

/// Rabin irreducibility test for a monic polynomial over F_p.
fn is_irreducible(m: &[u32], p: u32) -> bool {
    let deg = (m.len() - 1) as u64;
    if deg == 1 {
        return true;
    }
    let y = vec![0u32, 1];
    let frob_power = |k: u64| -> Vec<u32> {
        let mut t = y.clone();
        for _ in 0..k {
            t = poly::powmod(&t, p as u64, m, p);
        }
        t
    };
    if poly::sub(&frob_power(deg), &y, p) != Vec::<u32>::new() {
        return false;
    }
    for r in prime_factors(deg) {
        let h = poly::sub(&frob_power(deg / r), &y, p);
        let g = poly::gcd(m, &h, p);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

#[derive(Debug)]
pub struct FiniteField {
    p: u32,
    m: u32,
    order: u32,
    modulus: Vec<u32>,
    gen: Fe,
    exp: Vec<Fe>,
    log: Vec<u32>,
}

impl FiniteField {
    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn degree(&self) -> u32 {
        self.m
    }
    /// Number of elements `p^m`.
    pub fn order(&self) -> u32 {
        self.order
    }
    /// Order of the multiplicative group.
    pub fn units(&self) -> u64 {
        self.order as u64 - 1
    }
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }
    pub fn generator(&self) -> Fe {
        self.gen
    }
    pub fn zero(&self) -> Fe {
        0
    }
    pub fn one(&self) -> Fe {
        1
    }

    pub fn digits(&self, a: Fe) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.m as usize);
        let mut a = a;
        for _ in 0..self.m {
            out.push(a % self.p);
            a /= self.p;
        }
        out
    }

    pub fn from_digits(&self, d: &[u32]) -> Fe {
        d.iter().rev().fold(0u32, |acc, &c| acc * self.p + c % self.p)
    }

    /// Image of an integer in the prime field.
    pub fn from_int(&self, n: i64) -> Fe {
        n.rem_euclid(self.p as i64) as Fe
    }

    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let (mut a, mut b) = (a, b);
        let mut out = 0u32;
        let mut place = 1u32;
        for _ in 0..self.m {
            let s = (a % self.p + b % self.p) % self.p;
            out += s * place;
            place = place.wrapping_mul(self.p);
            a /= self.p;
            b /= self.p;
        }
        out
    }

    pub fn neg(&self, a: Fe) -> Fe {
        let mut a = a;
        let mut out = 0u32;
        let mut place = 1u32;
        for _ in 0..self.m {
            let s = (self.p - a % self.p) % self.p;
            out += s * place;
            place = place.wrapping_mul(self.p);
            a /= self.p;
        }
        out
    }

    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        if a == 0 || b == 0 {
            return 0;
        }
        let n = self.units();
        self.exp[((self.log[a as usize] as u64 + self.log[b as usize] as u64) % n) as usize]
    }

    /// Multiplicative inverse; panics on zero.
    pub fn inv(&self, a: Fe) -> Fe {
        assert!(a != 0, "inverse of zero");
        let n = self.units();
        self.exp[((n - self.log[a as usize] as u64) % n) as usize]
    }

    pub fn div(&self, a: Fe, b: Fe) -> Fe {
        self.mul(a, self.inv(b))
    }

    pub fn pow(&self, a: Fe, e: i64) -> Fe {
        if a == 0 {
            return if e == 0 { 1 } else { 0 };
        }
        let n = self.units() as i64;
        let k = (self.log[a as usize] as i64 * e.rem_euclid(n)).rem_euclid(n);
        self.exp[k as usize]
    }

    /// Discrete logarithm to base the fixed generator.
    pub fn dlog(&self, a: Fe) -> Option<u64> {
        if a == 0 {
            None
        } else {
            Some(self.log[a as usize] as u64)
        }
    }

    /// `gamma^k`.
    pub fn exp(&self, k: i64) -> Fe {
        let n = self.units() as i64;
        self.exp[k.rem_euclid(n) as usize]
    }

    /// `x^(p^k)`.
    pub fn frobenius(&self, x: Fe, k: u32) -> Fe {
        if x == 0 {
            return 0;
        }
        let n = self.units();
        let pk = mod_pow(self.p as u64, k as u64, n);
        self.exp[((self.log[x as usize] as u64 * pk) % n) as usize]
    }

    pub fn elements(&self) -> impl Iterator<Item = Fe> {
        0..self.order
    }

    pub fn nonzero(&self) -> impl Iterator<Item = Fe> {
        1..self.order
    }

    /// Multiplicative order of a nonzero element.
    pub fn mult_order(&self, a: Fe) -> u64 {
        let n = self.units();
        let l = self.log[a as usize] as u64;
        n / gcd(n, l)
    }

    /// Evaluate a polynomial with coefficients in F_p at `x`.
    fn eval_prime_poly(&self, coeffs: &[u32], x: Fe) -> Fe {
        let mut acc = 0;
        for &c in coeffs.iter().rev() {
            acc = self.add(self.mul(acc, x), c % self.p);
        }
        acc
    }
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn mod_pow(b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u128;
    let mut b = (b % m) as u128;
    let m = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r as u64
}

/// Build `F_{p^m}` with the least irreducible modulus and least generator.
pub fn make_field(p: u32, m: u32) -> Result<Arc<FiniteField>, FieldError> {
    if !is_prime(p as u64) {
        return Err(FieldError::CompositeP(p as u64));
    }
    assert!(m >= 1, "degree must be positive");
    let order = (p as u64).checked_pow(m).unwrap_or(u64::MAX);
    if order > MAX_FIELD_ORDER {
        return Err(FieldError::TableTooLarge(order));
    }
    let order = order as u32;
    let n = order as u64 - 1;
    let modulus = (0..order)
        .map(|code| {
            let mut c = Vec::with_capacity(m as usize + 1);
            let mut x = code;
            for _ in 0..m {
                c.push(x % p);
                x /= p;
            }
            c.push(1);
            c
        })
        .find(|c| is_irreducible(c, p))
        .expect("an irreducible polynomial exists in every degree");
    let factors = prime_factors(n);
    let poly_of = |code: u32| -> Vec<u32> {
        let mut c = Vec::with_capacity(m as usize);
        let mut x = code;
        for _ in 0..m {
            c.push(x % p);
            x /= p;
        }
        poly::trim(&mut c);
        c
    };
    let is_one = |v: &Vec<u32>| v.len() == 1 && v[0] == 1;
    let gen = (1..order)
        .find(|&g| {
            let gp = poly_of(g);
            factors
                .iter()
                .all(|&l| !is_one(&poly::powmod(&gp, n / l, &modulus, p)))
        })
        .expect("multiplicative group is cyclic");
    let code_of = |v: &[u32]| -> Fe {
        v.iter().rev().fold(0u32, |acc, &c| acc * p + c)
    };
    let mut exp = Vec::with_capacity(n as usize);
    let mut log = vec![u32::MAX; order as usize];
    let gp = poly_of(gen);
    let mut cur = vec![1u32];
    for k in 0..n {
        let code = code_of(&cur);
        exp.push(code);
        log[code as usize] = k as u32;
        cur = poly::mulmod(&cur, &gp, &modulus, p);
    }
    Ok(Arc::new(FiniteField {
        p,
        m,
        order,
        modulus,
        gen,
        exp,
        log,
    }))
}

/// Ring embedding `source -> target`, recorded by the discrete logarithm
/// of the image of the source generator.
#[derive(Debug, Clone)]
pub struct FieldEmbedding {
    pub source: Arc<FiniteField>,
    pub target: Arc<FiniteField>,
    /// `sigma(gamma_src) = gamma_dst^ratio`.
    pub ratio: u64,
}

impl FieldEmbedding {
    pub fn apply(&self, x: Fe) -> Fe {
        if x == 0 {
            return 0;
        }
        let l = self.source.dlog(x).unwrap();
        let n = self.target.units();
        self.target.exp(((l as u128 * self.ratio as u128) % n as u128) as i64)
    }

    pub fn image_of_generator(&self) -> Fe {
        self.target.exp(self.ratio as i64)
    }

    /// Precompose with `frobenius(., k)` on the source.
    pub fn twist(&self, k: u32) -> FieldEmbedding {
        let n = self.target.units();
        let pk = mod_pow(self.source.p() as u64, k as u64, n);
        FieldEmbedding {
            source: self.source.clone(),
            target: self.target.clone(),
            ratio: (self.ratio as u128 * pk as u128 % n as u128) as u64,
        }
    }
}

/// The embeddings `sigma_0, sigma_0 o phi, ..., sigma_0 o phi^(f-1)` of `fq`
/// into `ke`, with `sigma_0` sending the class of `y` to the least root of the
/// modulus of `fq` in `ke`.
pub fn embeddings(
    fq: &Arc<FiniteField>,
    ke: &Arc<FiniteField>,
) -> Result<Vec<FieldEmbedding>, FieldError> {
    if fq.p() != ke.p() || !ke.degree().is_multiple_of(fq.degree()) {
        return Err(FieldError::NoEmbedding {
            src: fq.degree(),
            dst: ke.degree(),
        });
    }
    let root = ke
        .elements()
        .find(|&x| ke.eval_prime_poly(fq.modulus(), x) == 0)
        .expect("splitting field contains a root");
    let gen_coeffs = fq.digits(fq.generator());
    let image = ke.eval_prime_poly(&gen_coeffs, root);
    let sigma0 = FieldEmbedding {
        source: fq.clone(),
        target: ke.clone(),
        ratio: ke.dlog(image).expect("image of a unit is a unit"),
    };
    Ok((0..fq.degree()).map(|i| sigma0.twist(i)).collect())
}

/// A multiplicative character `x -> sigma(x)^a` of a finite field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultChar {
    /// Exponent modulo the order of the multiplicative group.
    pub exponent: u64,
    pub modulus: u64,
}

impl MultChar {
    pub fn new(exponent: i64, modulus: u64) -> Self {
        MultChar {
            exponent: exponent.rem_euclid(modulus as i64) as u64,
            modulus,
        }
    }
    pub fn trivial(modulus: u64) -> Self {
        MultChar {
            exponent: 0,
            modulus,
        }
    }
    pub fn mul(&self, other: &MultChar) -> MultChar {
        assert_eq!(self.modulus, other.modulus);
        MultChar::new((self.exponent + other.exponent) as i64, self.modulus)
    }
    pub fn inverse(&self) -> MultChar {
        MultChar::new(-(self.exponent as i64), self.modulus)
    }
}

/// Evaluate `chi` at a nonzero element through the given embedding.
pub fn char_eval(emb: &FieldEmbedding, chi: &MultChar, x: Fe) -> Result<Fe, FieldError> {
    if x == 0 {
        return Err(FieldError::ZeroArgument);
    }
    Ok(emb.target.pow(emb.apply(x), chi.exponent as i64))
}
