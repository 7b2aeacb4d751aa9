//! Generic reducible mod-p representations given by Fontaine-Laffaille data,
//! their Serre weights, and the closed-form extension invariants `x(J)`.
//!
//! Positions `i in 0..f` stand for the embedding `sigma_0 o phi^i`; the shift
//! `sigma -> sigma o phi^{-1}` sends position `i` to `i - 1 mod f`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::ffield::{embeddings, make_field, Fe, FieldEmbedding, FieldError, FiniteField, MultChar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RhoError {
    #[error("p = {0} is not a prime > 3")]
    BadPrime(u32),
    #[error("weights {0:?} are outside the generic range")]
    NotGeneric(Vec<u32>),
    #[error("expected {expected} entries, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("weight {0} is outside [0, p-3]")]
    WeightOutOfRange(u32),
    #[error("Frobenius scalars must be nonzero")]
    ZeroScalar,
    #[error("subset {0} violates the admissibility condition")]
    PreconditionViolated(SubsetJ),
    #[error("rescaling factors must be nonzero")]
    ZeroScale,
    #[error("supplied invariants are inconsistent: {0}")]
    InconsistentValues(String),
    #[error("no Serre weight solves the inertial condition for I = {0}")]
    NoWeight(SubsetJ),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Subset of the embeddings, as a bitmask over positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetJ(pub u32);

impl SubsetJ {
    pub fn empty() -> Self {
        SubsetJ(0)
    }
    pub fn full(f: u32) -> Self {
        SubsetJ((1u32 << f) - 1)
    }
    pub fn from_positions(pos: &[u32]) -> Self {
        SubsetJ(pos.iter().fold(0, |m, &i| m | (1 << i)))
    }
    pub fn contains(self, i: u32) -> bool {
        self.0 >> i & 1 == 1
    }
    pub fn complement(self, f: u32) -> Self {
        SubsetJ(!self.0 & Self::full(f).0)
    }
    pub fn len(self) -> u32 {
        self.0.count_ones()
    }
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
    pub fn is_subset(self, other: SubsetJ) -> bool {
        self.0 & !other.0 == 0
    }
    pub fn intersect(self, other: SubsetJ) -> SubsetJ {
        SubsetJ(self.0 & other.0)
    }
    pub fn positions(self, f: u32) -> Vec<u32> {
        (0..f).filter(|&i| self.contains(i)).collect()
    }
    /// All `2^f` subsets in increasing bitmask order.
    pub fn all(f: u32) -> impl Iterator<Item = SubsetJ> {
        (0..1u32 << f).map(SubsetJ)
    }
    /// Subsets of `self`.
    pub fn subsets(self) -> impl Iterator<Item = SubsetJ> {
        let m = self.0;
        (0..=m).filter(move |s| s & !m == 0).map(SubsetJ)
    }
}

impl fmt::Display for SubsetJ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return write!(f, "-");
        }
        let pos: Vec<String> = (0..32).filter(|&i| self.contains(i)).map(|i| i.to_string()).collect();
        write!(f, "{}", pos.join(","))
    }
}

#[inline]
fn prev(i: u32, f: u32) -> u32 {
    (i + f - 1) % f
}

/// `{i in J, i-1 not in J}`.
pub fn frontier_entering(j: SubsetJ, f: u32) -> SubsetJ {
    SubsetJ::from_positions(&(0..f).filter(|&i| j.contains(i) && !j.contains(prev(i, f))).collect::<Vec<_>>())
}

/// `{i not in J, i-1 in J}`.
pub fn frontier_leaving(j: SubsetJ, f: u32) -> SubsetJ {
    SubsetJ::from_positions(&(0..f).filter(|&i| !j.contains(i) && j.contains(prev(i, f))).collect::<Vec<_>>())
}

/// Positions where membership in `J` changes under the shift.
pub fn frontier(j: SubsetJ, f: u32) -> SubsetJ {
    SubsetJ(frontier_entering(j, f).0 | frontier_leaving(j, f).0)
}

/// An irreducible representation `(tensor Sym^{s_i})^{sigma_i} (x) det^d` of
/// `GL2(F_q)`, with `det^d` read through `sigma_0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SerreWeight {
    pub s: Vec<u32>,
    pub d: u64,
}

impl SerreWeight {
    pub fn new(s: Vec<u32>, d: i64, q: u64) -> Self {
        SerreWeight {
            s,
            d: d.rem_euclid(q as i64 - 1) as u64,
        }
    }
    pub fn dim(&self) -> u64 {
        self.s.iter().map(|&x| x as u64 + 1).product()
    }
}

impl fmt::Display for SerreWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.s.iter().map(|x| x.to_string()).collect();
        write!(f, "({};{})", s.join(","), self.d)
    }
}

/// Tame character of the Weil group: `omega_{sigma_0}^exponent * nr(unramified)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TameChar {
    pub exponent: u64,
    pub modulus: u64,
    pub unramified: Fe,
}

impl TameChar {
    pub fn mul(&self, other: &TameChar, ke: &FiniteField) -> TameChar {
        assert_eq!(self.modulus, other.modulus);
        TameChar {
            exponent: (self.exponent + other.exponent) % self.modulus,
            modulus: self.modulus,
            unramified: ke.mul(self.unramified, other.unramified),
        }
    }
}

/// Fields and embeddings shared by every representation with given `(p, f)`.
#[derive(Debug)]
pub struct RhoContext {
    pub p: u32,
    pub f: u32,
    pub q: u64,
    pub fq: Arc<FiniteField>,
    pub ke: Arc<FiniteField>,
    pub embs: Vec<FieldEmbedding>,
}

impl RhoContext {
    /// `F_q` with `q = p^f` and coefficients in `F_{p^{2f}}`.
    pub fn new(p: u32, f: u32) -> Result<Arc<RhoContext>, RhoError> {
        if p <= 3 || !crate::ffield::is_prime(p as u64) || f == 0 {
            return Err(RhoError::BadPrime(p));
        }
        let fq = make_field(p, f)?;
        let ke = make_field(p, 2 * f)?;
        let embs = embeddings(&fq, &ke)?;
        Ok(Arc::new(RhoContext {
            p,
            f,
            q: (p as u64).pow(f),
            fq,
            ke,
            embs,
        }))
    }

    /// `p^i mod q-1`.
    pub fn ppow(&self, i: u32) -> u64 {
        (self.p as u64).pow(i % self.f) % (self.q - 1)
    }

    /// Exponent `sum p^i v_i mod q-1`.
    pub fn weighted(&self, v: impl IntoIterator<Item = (u32, i64)>) -> u64 {
        let m = self.q as i64 - 1;
        v.into_iter()
            .fold(0i64, |acc, (i, c)| (acc + self.ppow(i) as i64 * c).rem_euclid(m)) as u64
    }

    /// Base-p digits of `e mod q-1`, lowest first.
    pub fn digits(&self, e: u64) -> Vec<u32> {
        let mut e = e % (self.q - 1);
        (0..self.f)
            .map(|_| {
                let d = (e % self.p as u64) as u32;
                e /= self.p as u64;
                d
            })
            .collect()
    }
}

/// Deliberate perturbations used only to show that verification suites
/// detect single-sign or single-exponent errors.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    None,
    /// Negate the `(-1)^{|F(J)|/2}` sign of the Frobenius-unit closed form.
    FrobeniusUnitSign,
    /// Negate the leading sign of `x(J)`.
    XInvariantSign,
    /// Use `p-1-r` instead of `p-2-r` for positions leaving `J`.
    CTable,
}

/// Reducible generic representation presented by Fontaine-Laffaille data:
/// `phi(e_i) = alpha_i e_{i-1}`, `phi_{r+1}(f_i) = beta_i (f_{i-1} + x_i e_{i-1})`,
/// twisted by `theta = omega_{sigma_0}^t` (unramified part trivial).
#[derive(Clone, Debug)]
pub struct GenericRho {
    ctx: Arc<RhoContext>,
    r: Vec<u32>,
    alpha: Vec<Fe>,
    beta: Vec<Fe>,
    x: Vec<Fe>,
    t: u64,
    proven: bool,
}

impl PartialEq for GenericRho {
    fn eq(&self, o: &Self) -> bool {
        self.ctx.p == o.ctx.p
            && self.ctx.f == o.ctx.f
            && self.r == o.r
            && self.alpha == o.alpha
            && self.beta == o.beta
            && self.x == o.x
            && self.t == o.t
    }
}
impl Eq for GenericRho {}

impl GenericRho {
    /// Validating constructor; rejects the constant weight vectors 0 and p-3.
    pub fn new(
        ctx: Arc<RhoContext>,
        r: Vec<u32>,
        alpha: Vec<Fe>,
        beta: Vec<Fe>,
        x: Vec<Fe>,
        t: i64,
    ) -> Result<Self, RhoError> {
        let p = ctx.p;
        if r.iter().all(|&v| v == 0) || r.iter().all(|&v| v == p - 3) {
            return Err(RhoError::NotGeneric(r));
        }
        Self::build(ctx, r, alpha, beta, x, t, true)
    }

    /// Like [`GenericRho::new`] but also accepts all-zero weights; such data is
    /// marked as lying outside the range where the formulas are proven.
    pub fn new_extended(
        ctx: Arc<RhoContext>,
        r: Vec<u32>,
        alpha: Vec<Fe>,
        beta: Vec<Fe>,
        x: Vec<Fe>,
        t: i64,
    ) -> Result<Self, RhoError> {
        let p = ctx.p;
        let proven = !(r.iter().all(|&v| v == 0) || r.iter().all(|&v| v == p - 3));
        if r.iter().all(|&v| v == p - 3) {
            return Err(RhoError::NotGeneric(r));
        }
        Self::build(ctx, r, alpha, beta, x, t, proven)
    }

    fn build(
        ctx: Arc<RhoContext>,
        r: Vec<u32>,
        alpha: Vec<Fe>,
        beta: Vec<Fe>,
        x: Vec<Fe>,
        t: i64,
        proven: bool,
    ) -> Result<Self, RhoError> {
        let f = ctx.f as usize;
        for v in [&alpha, &beta, &x] {
            if v.len() != f {
                return Err(RhoError::BadLength {
                    expected: f,
                    got: v.len(),
                });
            }
        }
        if r.len() != f {
            return Err(RhoError::BadLength {
                expected: f,
                got: r.len(),
            });
        }
        if let Some(&bad) = r.iter().find(|&&v| v + 3 > ctx.p) {
            return Err(RhoError::WeightOutOfRange(bad));
        }
        let order = ctx.ke.order();
        if alpha.iter().chain(beta.iter()).any(|&a| a == 0) {
            return Err(RhoError::ZeroScalar);
        }
        if alpha.iter().chain(beta.iter()).chain(x.iter()).any(|&a| a >= order) {
            return Err(RhoError::InconsistentValues("element outside k_E".into()));
        }
        let t = t.rem_euclid(ctx.q as i64 - 1) as u64;
        Ok(GenericRho {
            ctx,
            r,
            alpha,
            beta,
            x,
            t,
            proven,
        })
    }

    pub fn ctx(&self) -> &Arc<RhoContext> {
        &self.ctx
    }
    pub fn p(&self) -> u32 {
        self.ctx.p
    }
    pub fn f(&self) -> u32 {
        self.ctx.f
    }
    pub fn q(&self) -> u64 {
        self.ctx.q
    }
    pub fn r(&self) -> &[u32] {
        &self.r
    }
    pub fn alpha(&self) -> &[Fe] {
        &self.alpha
    }
    pub fn beta(&self) -> &[Fe] {
        &self.beta
    }
    pub fn x(&self) -> &[Fe] {
        &self.x
    }
    /// Exponent of `theta` as a power of `omega_{sigma_0}`.
    pub fn t(&self) -> u64 {
        self.t
    }
    /// False for the all-zero weight vector accepted by `new_extended`.
    pub fn in_proven_range(&self) -> bool {
        self.proven
    }
    fn ke(&self) -> &FiniteField {
        &self.ctx.ke
    }

    /// `theta(-1)` as `+-1` in `k_E`.
    pub fn theta_minus_one(&self) -> Fe {
        if self.t.is_multiple_of(2) {
            1
        } else {
            self.ke().neg(1)
        }
    }

    fn prod(&self, v: impl Iterator<Item = Fe>) -> Fe {
        v.fold(1, |a, b| self.ke().mul(a, b))
    }

    /// `(prod beta)^{-1}`.
    pub fn lambda(&self) -> Fe {
        self.ke().inv(self.prod(self.beta.iter().copied()))
    }
    /// `(prod alpha)^{-1}`.
    pub fn mu(&self) -> Fe {
        self.ke().inv(self.prod(self.alpha.iter().copied()))
    }

    /// Positions with `x_i = 0`.
    pub fn zset(&self) -> SubsetJ {
        SubsetJ::from_positions(&(0..self.f()).filter(|&i| self.x[i as usize] == 0).collect::<Vec<_>>())
    }

    pub fn is_split(&self) -> bool {
        self.zset() == SubsetJ::full(self.f())
    }

    /// The exponents `c_i` with `eta(J) = eta'(J) prod [sigma_i]^{c_i}`.
    pub fn c_exponents(&self, j: SubsetJ) -> Vec<u32> {
        self.c_exponents_variant(j, Mutation::None)
    }

    #[doc(hidden)]
    pub fn c_exponents_variant(&self, j: SubsetJ, m: Mutation) -> Vec<u32> {
        let (p, f) = (self.p(), self.f());
        (0..f)
            .map(|i| {
                let r = self.r[i as usize];
                match (j.contains(i), j.contains(prev(i, f))) {
                    (false, true) if m == Mutation::CTable => p - 1 - r,
                    (false, true) => p - 2 - r,
                    (false, false) => p - 1 - r,
                    (true, false) => r + 1,
                    (true, true) => r,
                }
            })
            .collect()
    }

    /// Exponents of `eta(J)` and `eta'(J)` as powers of `sigma_0`.
    pub fn eta_exponents(&self, j: SubsetJ) -> (u64, u64) {
        let p = self.p() as i64;
        let t = self.t as i64;
        let eta = self.ctx.weighted((0..self.f()).map(|i| {
            (i, if j.contains(i) { self.r[i as usize] as i64 } else { p - 1 })
        }));
        let etap = self.ctx.weighted((0..self.f()).map(|i| {
            (i, if j.contains(i) { p - 1 } else { self.r[i as usize] as i64 })
        }));
        let m = self.q() - 1;
        ((eta + t as u64) % m, (etap + t as u64) % m)
    }

    /// `(eta(J), eta'(J))` as characters of `F_q^x`.
    pub fn eta_chars(&self, j: SubsetJ) -> (MultChar, MultChar) {
        let (a, b) = self.eta_exponents(j);
        let m = self.q() - 1;
        (MultChar::new(a as i64, m), MultChar::new(b as i64, m))
    }

    /// Serre weights of `rho`: one for each subset `I` of `Z(rho)`.
    pub fn serre_weights(&self) -> Result<Vec<SerreWeight>, RhoError> {
        let ctx = &self.ctx;
        let (p, f) = (self.p(), self.f());
        let target = ctx.weighted((0..f).map(|i| (i, self.r[i as usize] as i64 + 1)));
        let mut out = BTreeSet::new();
        for i_set in self.zset().subsets() {
            let eps: Vec<i64> = (0..f).map(|i| if i_set.contains((i + 1) % f) { -1 } else { 1 }).collect();
            let mut sols = Vec::new();
            let total = (p as u64).pow(f);
            for code in 0..total {
                let mut c = code;
                let s: Vec<u32> = (0..f)
                    .map(|_| {
                        let d = (c % p as u64) as u32;
                        c /= p as u64;
                        d
                    })
                    .collect();
                let v = ctx.weighted((0..f).map(|i| (i, eps[i as usize] * (s[i as usize] as i64 + 1))));
                if v == target {
                    sols.push(s);
                }
            }
            if sols.len() > 1 {
                sols.retain(|s| s.iter().all(|&d| d + 2 <= p));
            }
            if sols.len() != 1 {
                return Err(RhoError::NoWeight(i_set));
            }
            let s = sols.pop().unwrap();
            let twist = ctx.weighted(
                (0..f)
                    .filter(|&i| i_set.contains((i + 1) % f))
                    .map(|i| (i, -(s[i as usize] as i64 + 1))),
            );
            out.insert(SerreWeight::new(s, (twist + self.t) as i64, self.q()));
        }
        Ok(out.into_iter().collect())
    }

    fn check_leaving(&self, j: SubsetJ) -> Result<(), RhoError> {
        if !self.zset().intersect(frontier_leaving(j, self.f())).is_empty() {
            return Err(RhoError::PreconditionViolated(j));
        }
        Ok(())
    }

    fn check_frontier(&self, j: SubsetJ) -> Result<(), RhoError> {
        if !self.zset().intersect(frontier(j, self.f())).is_empty() {
            return Err(RhoError::PreconditionViolated(j));
        }
        Ok(())
    }

    /// `(prod_J alpha prod_{not J} beta)^{-1}`.
    fn ab_factor(&self, j: SubsetJ) -> Fe {
        let pr = self.prod((0..self.f()).map(|i| {
            if j.contains(i) {
                self.alpha[i as usize]
            } else {
                self.beta[i as usize]
            }
        }));
        self.ke().inv(pr)
    }

    /// Ratio `prod_{entering} g_i / prod_{leaving} g_i` with `g_i = x_i * w_i`.
    fn frontier_ratio(&self, j: SubsetJ, with_weights: bool) -> Fe {
        let ke = self.ke();
        let f = self.f();
        let g = |i: u32| {
            let xi = self.x[i as usize];
            if with_weights {
                ke.mul(xi, ke.from_int(self.r[i as usize] as i64 + 1))
            } else {
                xi
            }
        };
        let num = self.prod(frontier_entering(j, f).positions(f).into_iter().map(g));
        let den = self.prod(frontier_leaving(j, f).positions(f).into_iter().map(g));
        ke.div(num, den)
    }

    /// The presentation-independent scalar attached to `J`; requires `x_i != 0`
    /// at positions leaving `J`.
    pub fn lemma211_scalar(&self, j: SubsetJ) -> Result<Fe, RhoError> {
        self.check_leaving(j)?;
        Ok(self.ke().mul(self.ab_factor(j), self.frontier_ratio(j, false)))
    }

    /// Change of basis `e_i -> u_i e_i`, `f_i -> v_i f_i`.
    pub fn reparametrize(&self, u: &[Fe], v: &[Fe]) -> Result<GenericRho, RhoError> {
        let f = self.f();
        if u.len() != f as usize || v.len() != f as usize {
            return Err(RhoError::BadLength {
                expected: f as usize,
                got: u.len().min(v.len()),
            });
        }
        if u.iter().chain(v.iter()).any(|&a| a == 0) {
            return Err(RhoError::ZeroScale);
        }
        let ke = self.ke();
        let mut out = self.clone();
        for i in 0..f as usize {
            let pi = prev(i as u32, f) as usize;
            out.alpha[i] = ke.div(ke.mul(u[i], self.alpha[i]), u[pi]);
            out.beta[i] = ke.div(ke.mul(v[i], self.beta[i]), v[pi]);
            out.x[i] = ke.mul(ke.div(v[pi], u[pi]), self.x[i]);
        }
        Ok(out)
    }

    /// Normal form: `alpha = (mu^{-1}, 1, ..., 1)`, `beta = (lambda^{-1}, 1, ..., 1)`,
    /// first nonzero `x` equal to 1. For split data the presentation with the
    /// lexicographically smaller weight vector is chosen.
    pub fn canonical_form(&self) -> GenericRho {
        let ke = self.ke();
        let f = self.f() as usize;
        let mut base = self.clone();
        if self.is_split() {
            let other: Vec<u32> = self.r.iter().map(|&v| self.p() - 3 - v).collect();
            if other < self.r {
                let shift = self.ctx.weighted((0..self.f()).map(|i| (i, self.r[i as usize] as i64 + 1)));
                let (lam, mu) = (self.lambda(), self.mu());
                base.r = other;
                base.t = (self.t + shift) % (self.q() - 1);
                base.alpha = vec![1; f];
                base.beta = vec![1; f];
                base.alpha[0] = ke.inv(lam);
                base.beta[0] = ke.inv(mu);
            }
        }
        let mut u = vec![1; f];
        let mut v = vec![1; f];
        for i in 1..f {
            u[i] = ke.div(u[i - 1], base.alpha[i]);
            v[i] = ke.div(v[i - 1], base.beta[i]);
        }
        let mut out = base.reparametrize(&u, &v).expect("nonzero scales");
        if let Some(&x0) = out.x.iter().find(|&&x| x != 0) {
            out = out.reparametrize(&vec![x0; f], &vec![1; f]).expect("nonzero scales");
        }
        out
    }

    /// `x(J) = -theta(-1) (prod_J alpha prod_{not J} beta)^{-1}
    ///  prod_{entering} x_i (r_i+1) / prod_{leaving} x_i (r_i+1)`.
    pub fn x_invariant(&self, j: SubsetJ) -> Result<Fe, RhoError> {
        self.x_invariant_variant(j, Mutation::None)
    }

    #[doc(hidden)]
    pub fn x_invariant_variant(&self, j: SubsetJ, m: Mutation) -> Result<Fe, RhoError> {
        self.check_frontier(j)?;
        let ke = self.ke();
        let mut sign = ke.neg(self.theta_minus_one());
        if m == Mutation::XInvariantSign {
            sign = ke.neg(sign);
        }
        Ok(ke.mul(sign, ke.mul(self.ab_factor(j), self.frontier_ratio(j, true))))
    }

    /// The same invariant through the telescoping product over `J`, valid
    /// when no `x_i` vanishes.
    pub fn x_invariant_telescoped(&self, j: SubsetJ) -> Result<Fe, RhoError> {
        if !self.zset().is_empty() {
            return Err(RhoError::PreconditionViolated(j));
        }
        let ke = self.ke();
        let f = self.f();
        let g = |i: u32| ke.mul(self.x[i as usize], ke.from_int(self.r[i as usize] as i64 + 1));
        let ratio = self.prod(j.positions(f).into_iter().map(|i| ke.div(g(i), g((i + 1) % f))));
        let sign = ke.neg(self.theta_minus_one());
        Ok(ke.mul(sign, ke.mul(self.ab_factor(j), ratio)))
    }

    /// Reduction of the Frobenius unit on the `eta'(J)`-part of the potentially
    /// Barsotti-Tate lift of type `J`.
    pub fn frobenius_unit(&self, j: SubsetJ) -> Result<Fe, RhoError> {
        self.frobenius_unit_variant(j, Mutation::None)
    }

    #[doc(hidden)]
    pub fn frobenius_unit_variant(&self, j: SubsetJ, m: Mutation) -> Result<Fe, RhoError> {
        self.check_frontier(j)?;
        let ke = self.ke();
        let half = frontier(j, self.f()).len() / 2;
        let mut sign = if half.is_multiple_of(2) { 1 } else { ke.neg(1) };
        if m == Mutation::FrobeniusUnitSign {
            sign = ke.neg(sign);
        }
        Ok(ke.mul(sign, ke.mul(self.ab_factor(j), self.frontier_ratio(j, false))))
    }

    /// Rebuild a canonical presentation from the weights, the zero set and the
    /// scalars attached to `J = {}`, `J = S` and to the cyclic runs of `J`
    /// needed to separate the nonzero `x_i`.
    pub fn recover_from_invariants(
        ctx: Arc<RhoContext>,
        r: Vec<u32>,
        z: SubsetJ,
        t: i64,
        values: &BTreeMap<SubsetJ, Fe>,
    ) -> Result<GenericRho, RhoError> {
        let f = ctx.f;
        let ke = ctx.ke.clone();
        let get = |j: SubsetJ| {
            values
                .get(&j)
                .copied()
                .ok_or_else(|| RhoError::InconsistentValues(format!("missing value for J = {j}")))
        };
        let lam = get(SubsetJ::empty())?;
        let mu = get(SubsetJ::full(f))?;
        if lam == 0 || mu == 0 {
            return Err(RhoError::InconsistentValues("lambda and mu must be nonzero".into()));
        }
        let fu = f as usize;
        let mut alpha = vec![1; fu];
        let mut beta = vec![1; fu];
        alpha[0] = ke.inv(mu);
        beta[0] = ke.inv(lam);
        let mut x = vec![0; fu];
        let nonzero: Vec<u32> = (0..f).filter(|&i| !z.contains(i)).collect();
        if let Some(&k0) = nonzero.first() {
            x[k0 as usize] = 1;
            let probe = GenericRho::new_extended(ctx.clone(), r.clone(), alpha.clone(), beta.clone(), x.clone(), t)?;
            for &k in &nonzero[1..] {
                let run = SubsetJ::from_positions(&(k0..k).collect::<Vec<_>>());
                let val = get(run)?;
                if val == 0 {
                    return Err(RhoError::InconsistentValues(format!("zero value for J = {run}")));
                }
                // value = ab * x_{k0} / x_k
                x[k as usize] = ke.div(probe.ab_factor(run), val);
            }
        }
        let rho = GenericRho::new_extended(ctx, r, alpha, beta, x, t)?;
        for (&j, &v) in values {
            let expect = match rho.lemma211_scalar(j) {
                Ok(e) => e,
                Err(_) => {
                    return Err(RhoError::InconsistentValues(format!("J = {j} is not admissible")));
                }
            };
            if expect != v {
                return Err(RhoError::InconsistentValues(format!("value for J = {j} does not match")));
            }
        }
        Ok(rho)
    }

    /// Iwahori character `(eta'(J) on a, eta(J) on d)` of the invariants of
    /// `tau(J)`, and the weight itself.
    pub fn tau(&self, j: SubsetJ) -> SerreWeight {
        let (eta, etap) = self.eta_exponents(j);
        let m = self.q() - 1;
        let s = self.ctx.digits((etap + m - eta) % m);
        SerreWeight { s, d: eta }
    }

    /// `(tau(J) criterion, tau(S \ J) criterion)` for membership in the
    /// representation generated by `tau({})`.
    pub fn lemma262_criterion(&self, j: SubsetJ) -> (bool, bool) {
        let z = self.zset();
        let f = self.f();
        (
            z.intersect(frontier_leaving(j, f)).is_empty(),
            z.intersect(frontier_entering(j, f)).is_empty(),
        )
    }

    /// `eta(J) * omega_{sigma_0}^h` with unramified value `lambda`.
    pub fn prop224_subcharacter(&self, j: SubsetJ) -> TameChar {
        let (p, f) = (self.p() as u64, self.f());
        let m = self.q() - 1;
        let mut h: i64 = 0;
        for jj in 0..f {
            let pos = (f - jj) % f;
            let pw = p.pow(f - jj) % m;
            h += pw as i64;
            if !j.contains(pos) {
                h -= (pw * (p - 1 - self.r[pos as usize] as u64) % m) as i64;
            }
        }
        let (eta, _) = self.eta_exponents(j);
        TameChar {
            exponent: ((eta as i64 + h).rem_euclid(m as i64)) as u64,
            modulus: m,
            unramified: self.lambda(),
        }
    }

    /// Constituents of the reduction of the Iwahori induction of
    /// `eta'(J) (x) eta(J)`, each tagged with membership in `D(rho)`.
    pub fn induced_constituents(&self, j: SubsetJ) -> InducedConstituents {
        self.induced_constituents_variant(j, Mutation::None)
    }

    #[doc(hidden)]
    pub fn induced_constituents_variant(&self, j: SubsetJ, m: Mutation) -> InducedConstituents {
        let f = self.f();
        let c = self.c_exponents_variant(j, m);
        let (_, etap) = self.eta_exponents(j);
        let z = self.zset();
        let entries = iwahori_constituents(self.p(), f, &c, etap)
            .into_iter()
            .map(|(index, weight)| Constituent {
                index,
                weight,
                flagged: false,
            })
            .collect::<Vec<_>>();
        let mut entries = entries;
        // J^min and J^max from the type of lambda_{j+1}.
        let mut jmin = SubsetJ::empty();
        let mut jmax = SubsetJ::empty();
        for jj in 0..f {
            let n = (jj + 1) % f;
            let (in_n, in_prev) = (j.contains(n), j.contains(jj));
            let zn = z.contains(n);
            // types: p-2-x (out, prev in), p-1-x (out, out), x+1 (in, out), x (in, in)
            let (is_min, is_max) = match (in_n, in_prev) {
                (false, false) => (true, true),
                (true, false) => (!zn, true),
                (false, true) => (false, zn),
                (true, true) => (false, false),
            };
            if is_min {
                jmin.0 |= 1 << jj;
            }
            if is_max {
                jmax.0 |= 1 << jj;
            }
        }
        for e in entries.iter_mut() {
            e.flagged = jmin.is_subset(e.index) && e.index.is_subset(jmax);
        }
        InducedConstituents {
            socle: SerreWeight::new(c, etap as i64, self.q()),
            jmin,
            jmax,
            entries,
        }
    }
}

/// Constituents `(J', weight)` of the reduction of an Iwahori induction whose
/// socle is `(c; twist)`, indexed by the subsets `J'` they come from.
pub fn iwahori_constituents(p: u32, f: u32, c: &[u32], twist: u64) -> Vec<(SubsetJ, SerreWeight)> {
    let (p, q) = (p as i64, (p as u64).pow(f));
    let mut out = Vec::new();
    for jp in SubsetJ::all(f) {
        let mut lam = Vec::with_capacity(f as usize);
        for i in 0..f {
            let ci = c[i as usize] as i64;
            lam.push(match (jp.contains(prev(i, f)), jp.contains(i)) {
                (false, false) => ci,
                (false, true) => p - 2 - ci,
                (true, false) => ci - 1,
                (true, true) => p - 1 - ci,
            });
        }
        if lam.iter().any(|l| !(0..p).contains(l)) {
            continue;
        }
        let mut diff: i64 = (0..f).map(|i| p.pow(i) * (c[i as usize] as i64 - lam[i as usize])).sum();
        if jp.contains(f - 1) {
            diff += q as i64 - 1;
        }
        debug_assert!(diff % 2 == 0);
        let d = twist as i64 + diff / 2;
        out.push((jp, SerreWeight::new(lam.iter().map(|&v| v as u32).collect(), d, q)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constituent {
    pub index: SubsetJ,
    pub weight: SerreWeight,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedConstituents {
    pub socle: SerreWeight,
    pub jmin: SubsetJ,
    pub jmax: SubsetJ,
    pub entries: Vec<Constituent>,
}

impl InducedConstituents {
    pub fn flagged_weights(&self) -> BTreeSet<SerreWeight> {
        self.entries.iter().filter(|e| e.flagged).map(|e| e.weight.clone()).collect()
    }
    pub fn weights(&self) -> BTreeSet<SerreWeight> {
        self.entries.iter().map(|e| e.weight.clone()).collect()
    }
    pub fn total_dim(&self) -> u64 {
        self.entries.iter().map(|e| e.weight.dim()).sum()
    }
}

/// Generic weight vector, uniform among the allowed ones.
pub fn random_weights<R: Rng + ?Sized>(ctx: &RhoContext, rng: &mut R) -> Vec<u32> {
    loop {
        let r: Vec<u32> = (0..ctx.f).map(|_| rng.gen_range(0..=ctx.p - 3)).collect();
        if !(r.iter().all(|&v| v == 0) || r.iter().all(|&v| v == ctx.p - 3)) {
            return r;
        }
    }
}

/// Random generic data; each `x_i` vanishes independently with probability
/// `zero_prob`.
pub fn random_rho<R: Rng + ?Sized>(ctx: &Arc<RhoContext>, rng: &mut R, zero_prob: f64) -> GenericRho {
    let r = random_weights(ctx, rng);
    let order = ctx.ke.order();
    let f = ctx.f as usize;
    let unit = |rng: &mut R| rng.gen_range(1..order);
    let alpha = (0..f).map(|_| unit(rng)).collect();
    let beta = (0..f).map(|_| unit(rng)).collect();
    let x = (0..f)
        .map(|_| if rng.gen_bool(zero_prob) { 0 } else { unit(rng) })
        .collect();
    let t = rng.gen_range(0..ctx.q - 1) as i64;
    GenericRho::new(ctx.clone(), r, alpha, beta, x, t).expect("valid random data")
}

/// Random generic data with prescribed zero set.
pub fn random_rho_with_zset<R: Rng + ?Sized>(ctx: &Arc<RhoContext>, rng: &mut R, z: SubsetJ) -> GenericRho {
    let mut rho = random_rho(ctx, rng, 0.0);
    for i in 0..ctx.f {
        if z.contains(i) {
            rho.x[i as usize] = 0;
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::Rng;

    fn ctx(p: u32, f: u32) -> Arc<RhoContext> {
        RhoContext::new(p, f).unwrap()
    }

    #[test]
    fn frontier_examples() {
        assert_eq!(frontier(SubsetJ::empty(), 3), SubsetJ::empty());
        assert_eq!(frontier(SubsetJ(0b001), 3), SubsetJ(0b011));
        for f in 1..=6 {
            for j in SubsetJ::all(f) {
                assert_eq!(frontier(j, f).len() % 2, 0);
                assert_eq!(frontier(j.complement(f), f), frontier(j, f));
            }
        }
    }

    #[test]
    fn zset_examples() {
        let c = ctx(5, 2);
        let rho = GenericRho::new(c.clone(), vec![1, 2], vec![1, 1], vec![1, 2], vec![0, 1], 0).unwrap();
        assert_eq!(rho.zset(), SubsetJ(0b01));
        let split = GenericRho::new(c, vec![1, 2], vec![1, 1], vec![1, 2], vec![0, 0], 0).unwrap();
        assert!(split.is_split());
    }

    #[test]
    fn rejects_constant_weights() {
        let c = ctx(5, 2);
        assert!(matches!(
            GenericRho::new(c.clone(), vec![0, 0], vec![1, 1], vec![1, 1], vec![1, 1], 0),
            Err(RhoError::NotGeneric(_))
        ));
        assert!(GenericRho::new(c.clone(), vec![2, 2], vec![1, 1], vec![1, 1], vec![1, 1], 0).is_err());
        assert!(matches!(
            GenericRho::new(c.clone(), vec![3, 0], vec![1, 1], vec![1, 1], vec![1, 1], 0),
            Err(RhoError::WeightOutOfRange(3))
        ));
        let ext = GenericRho::new_extended(c, vec![0, 0], vec![1, 1], vec![1, 1], vec![1, 1], 0).unwrap();
        assert!(!ext.in_proven_range());
    }

    #[test]
    fn c_exponent_examples() {
        let c = ctx(5, 1);
        let rho = GenericRho::new(c, vec![1], vec![1], vec![1], vec![1], 0).unwrap();
        assert_eq!(rho.c_exponents(SubsetJ::empty()), vec![3]);
        assert_eq!(rho.c_exponents(SubsetJ::full(1)), vec![1]);
        let c2 = ctx(5, 2);
        let rho2 = GenericRho::new(c2, vec![1, 2], vec![1, 1], vec![1, 1], vec![1, 1], 0).unwrap();
        assert_eq!(rho2.c_exponents(SubsetJ(0b01)), vec![2, 1]);
    }

    #[test]
    fn eta_examples() {
        let c = ctx(5, 1);
        let rho = GenericRho::new(c, vec![1], vec![1], vec![1], vec![1], 0).unwrap();
        let (eta, etap) = rho.eta_exponents(SubsetJ::full(1));
        assert_eq!((eta, etap), (1, 0));
        // 4 = 0 mod 4: eta'(S) is the character x -> x^4, i.e. trivial
        let (e0, _) = rho.eta_exponents(SubsetJ::empty());
        assert_eq!(e0, 0);
    }

    #[test]
    fn lemma211_boundary_values() {
        let c = ctx(7, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let rho = random_rho(&c, &mut rng, 0.3);
            assert_eq!(rho.lemma211_scalar(SubsetJ::empty()).unwrap(), rho.lambda());
            assert_eq!(rho.lemma211_scalar(SubsetJ::full(2)).unwrap(), rho.mu());
        }
    }

    #[test]
    fn x_invariant_single_embedding() {
        let c = ctx(7, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let rho = random_rho(&c, &mut rng, 0.0);
            let ke = &c.ke;
            let s = ke.neg(rho.theta_minus_one());
            assert_eq!(rho.x_invariant(SubsetJ::empty()).unwrap(), ke.mul(s, rho.lambda()));
            assert_eq!(rho.x_invariant(SubsetJ::full(1)).unwrap(), ke.mul(s, rho.mu()));
            assert_eq!(rho.frobenius_unit(SubsetJ::empty()).unwrap(), rho.lambda());
            assert_eq!(rho.frobenius_unit(SubsetJ::full(1)).unwrap(), rho.mu());
        }
    }

    #[test]
    fn inadmissible_subsets_error() {
        let c = ctx(5, 2);
        let rho = GenericRho::new(c, vec![1, 2], vec![1, 1], vec![1, 2], vec![0, 1], 0).unwrap();
        assert!(matches!(rho.x_invariant(SubsetJ(0b01)), Err(RhoError::PreconditionViolated(_))));
        assert!(rho.x_invariant(SubsetJ::empty()).is_ok());
    }

    #[test]
    fn serre_weight_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (p, f) in [(5, 1), (5, 2), (7, 2), (5, 3)] {
            let c = ctx(p, f);
            for _ in 0..25 {
                let rho = random_rho(&c, &mut rng, 0.4);
                let w = rho.serre_weights().unwrap();
                assert_eq!(w.len(), 1 << rho.zset().len());
                assert!(w.contains(&rho.tau(SubsetJ::empty())));
            }
        }
    }

    #[test]
    fn tau_boundary_forms() {
        let c = ctx(7, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let rho = random_rho(&c, &mut rng, 0.0);
            let t0 = rho.tau(SubsetJ::empty());
            assert_eq!(t0.s, rho.r().to_vec());
            assert_eq!(t0.d, rho.t());
            let ts = rho.tau(SubsetJ::full(2));
            assert_eq!(ts.s, rho.r().iter().map(|&v| 6 - v).collect::<Vec<_>>());
            let d = c.weighted((0..2).map(|i| (i, rho.r()[i as usize] as i64)));
            assert_eq!(ts.d, (d + rho.t()) % 48);
        }
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let c = ctx(5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let rho = random_rho(&c, &mut rng, 0.3);
            let cf = rho.canonical_form();
            assert_eq!(cf.canonical_form(), cf);
            assert_eq!(cf.alpha()[1..], [1, 1]);
            assert_eq!(cf.lambda(), rho.lambda());
        }
    }

    #[test]
    fn recover_single_embedding() {
        let c = ctx(5, 1);
        let mut vals = BTreeMap::new();
        vals.insert(SubsetJ::empty(), 3);
        vals.insert(SubsetJ::full(1), 2);
        let rho = GenericRho::recover_from_invariants(c, vec![1], SubsetJ::empty(), 0, &vals).unwrap();
        assert_eq!((rho.lambda(), rho.mu()), (3, 2));
    }

    #[test]
    fn prop224_single_embedding() {
        let c = ctx(5, 1);
        let rho = GenericRho::new(c, vec![1], vec![1], vec![3], vec![1], 1).unwrap();
        let ch = rho.prop224_subcharacter(SubsetJ::full(1));
        // theta * omega * omega^r = omega^{1 + 1 + 1}
        assert_eq!(ch.exponent, 3);
        assert_eq!(ch.unramified, rho.lambda());
    }

    #[test]
    fn constituents_cover_induction_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (p, f) in [(5, 1), (7, 1), (5, 2), (7, 2)] {
            let c = ctx(p, f);
            for _ in 0..20 {
                let rho = random_rho(&c, &mut rng, 0.4);
                for j in SubsetJ::all(f) {
                    let ic = rho.induced_constituents(j);
                    assert_eq!(ic.total_dim(), c.q + 1, "{rho:?} {j}");
                    assert_eq!(ic.entries.iter().find(|e| e.index.is_empty()).unwrap().weight, ic.socle);
                    if rho.zset().intersect(frontier(j, f)).is_empty() {
                        assert_eq!(ic.jmin, ic.jmax);
                        let flagged = ic.flagged_weights();
                        assert_eq!(flagged.len(), 1);
                        assert!(flagged.contains(&rho.tau(SubsetJ::empty())));
                        let e = ic.entries.iter().find(|e| e.flagged).unwrap();
                        assert_eq!(e.index, j.complement(f));
                    }
                }
            }
        }
    }

    #[test]
    fn cosocle_is_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = ctx(7, 2);
        for _ in 0..20 {
            let rho = random_rho(&c, &mut rng, 0.0);
            for j in SubsetJ::all(2) {
                let ic = rho.induced_constituents(j);
                let top = ic.entries.iter().find(|e| e.index == SubsetJ::full(2)).unwrap();
                assert_eq!(top.weight, rho.tau(j));
                assert_eq!(ic.socle, rho.tau(j.complement(2)));
            }
        }
    }

    #[test]
    fn tau_unique_among_all_labels() {
        let c = ctx(5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_rho(&c, &mut rng, 0.0);
        let m = c.q - 1;
        for j in SubsetJ::all(2) {
            let (eta, etap) = rho.eta_exponents(j);
            let mut hits = 0;
            for code in 0..c.q {
                let s = c.digits(code);
                let s_val = code; // s as an integer in [0, q-1]
                for d in 0..m {
                    // I1-invariants of Sym^s (x) det^d carry a^{s+d} d^d
                    if d == eta && (s_val + d) % m == etap {
                        hits += 1;
                        assert_eq!(SerreWeight { s: s.clone(), d }, rho.tau(j));
                    }
                }
            }
            assert_eq!(hits, 1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn complement_swaps_eta(seed in any::<u64>(), f in 1u32..=4) {
            let c = ctx(5, f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&c, &mut rng, 0.3);
            for j in SubsetJ::all(f) {
                let (e, ep) = rho.eta_exponents(j);
                let (ec, _) = rho.eta_exponents(j.complement(f));
                prop_assert_eq!(ec, ep);
                prop_assert_ne!(e, ep);
                let cs = rho.c_exponents(j);
                let shift = c.weighted((0..f).map(|i| (i, cs[i as usize] as i64)));
                prop_assert_eq!((ep + shift) % (c.q - 1), e);
            }
        }

        #[test]
        fn reparametrization_invariance(seed in any::<u64>(), f in 1u32..=3) {
            let c = ctx(7, f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&c, &mut rng, 0.3);
            let n = c.ke.order();
            let u: Vec<Fe> = (0..f).map(|_| rng.gen_range(1..n)).collect();
            let v: Vec<Fe> = (0..f).map(|_| rng.gen_range(1..n)).collect();
            let re = rho.reparametrize(&u, &v).unwrap();
            prop_assert_eq!(re.lambda(), rho.lambda());
            prop_assert_eq!(re.mu(), rho.mu());
            prop_assert_eq!(re.zset(), rho.zset());
            prop_assert_eq!(re.canonical_form(), rho.canonical_form());
            for j in SubsetJ::all(f) {
                prop_assert_eq!(re.lemma211_scalar(j).ok(), rho.lemma211_scalar(j).ok());
                prop_assert_eq!(re.x_invariant(j).ok(), rho.x_invariant(j).ok());
            }
        }

        #[test]
        fn product_law_and_telescoping(seed in any::<u64>(), f in 1u32..=3) {
            let c = ctx(5, f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&c, &mut rng, 0.0);
            let ke = &c.ke;
            for j in SubsetJ::all(f) {
                let a = rho.x_invariant(j).unwrap();
                let b = rho.x_invariant(j.complement(f)).unwrap();
                prop_assert_eq!(ke.mul(a, b), ke.mul(rho.lambda(), rho.mu()));
                prop_assert_eq!(rho.x_invariant_telescoped(j).unwrap(), a);
            }
        }

        #[test]
        fn recover_round_trip(seed in any::<u64>(), f in 1u32..=3) {
            let c = ctx(5, f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&c, &mut rng, 0.0);
            let mut vals = BTreeMap::new();
            for j in SubsetJ::all(f) {
                vals.insert(j, rho.lemma211_scalar(j).unwrap());
            }
            let back = GenericRho::recover_from_invariants(c.clone(), rho.r().to_vec(), rho.zset(), rho.t() as i64, &vals).unwrap();
            prop_assert_eq!(back.canonical_form(), rho.canonical_form());
            if f > 1 {
                let k = *vals.keys().nth(1).unwrap();
                let v = vals[&k];
                vals.insert(k, c.ke.mul(v, c.ke.generator()));
                let res = GenericRho::recover_from_invariants(c, rho.r().to_vec(), rho.zset(), 0, &vals);
                prop_assert!(
                    matches!(res, Err(RhoError::InconsistentValues(_))),
                    "perturbed values accepted"
                );
            }
        }

        #[test]
        fn prop224_identity(seed in any::<u64>(), f in 1u32..=4) {
            let c = ctx(5, f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&c, &mut rng, 0.3);
            let expect = c.weighted((0..f).map(|i| (i, 1 + rho.r()[i as usize] as i64)));
            for j in SubsetJ::all(f) {
                let ch = rho.prop224_subcharacter(j);
                prop_assert_eq!(ch.exponent, (expect + rho.t()) % (c.q - 1));
            }
        }

        #[test]
        fn lemma262_matches_frontier(seed in any::<u64>(), f in 1u32..=4) {
            let c = ctx(5, f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&c, &mut rng, 0.5);
            for j in SubsetJ::all(f) {
                let (a, b) = rho.lemma262_criterion(j);
                prop_assert_eq!(a && b, rho.zset().intersect(frontier(j, f)).is_empty());
            }
        }
    }
}
