//! A finite exact model of the tamely ramified principal series
//! `Ind_B chi1 (x) chi2` with `chi1 = eta'(J) nr(V') |.|`, `chi2 = eta(J) nr(V)`.
//!
//! Vectors are functions on `K = GL2(O_L)` fixed by a principal congruence
//! subgroup `K(m)`, stored by their values on fixed sections of
//! `P^1(O_L / p^m)`. Points are `[1 : z]` (section `(0 1; 1 z)`) and
//! `[c : 1]` with `c` in `pO_L` (section `(1 0; c 1)`). Values live in
//! `p^shift W(k_E) / p^N`.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::exactnum::{NumError, PadicScaled, WittElem, WittRing};
use crate::ffield::{Fe, FiniteField};
use crate::jacobi::jacobi_sum_via;
use crate::rhobar::{GenericRho, RhoContext, SubsetJ};
use crate::sdiv::{from_rho_in, SdivError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PsError {
    #[error("bottom row vanishes modulo p")]
    PrecisionLoss,
    #[error("level {need} exceeds model depth {max}")]
    DepthExceeded { need: u32, max: u32 },
    #[error("Iwahori eigenvector check failed")]
    ProjectionVanished,
    #[error("vectors are not proportional: {0}")]
    InconsistentSolve(String),
    #[error("J must differ from the empty set and from S")]
    BoundaryJ,
    #[error("J must be the empty set or S")]
    NotBoundary,
    #[error("identity failed: {0}")]
    IdentityFailed(String),
    #[error(transparent)]
    Sdiv(#[from] SdivError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// 2x2 matrix over `W(F_q)/p^N`, row major.
pub type Mat2 = [[WittElem; 2]; 2];

fn mat_mul(o: &WittRing, a: &Mat2, b: &Mat2) -> Mat2 {
    let e = |i: usize, j: usize| o.add(o.mul(a[i][0], b[0][j]), o.mul(a[i][1], b[1][j]));
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn det(o: &WittRing, a: &Mat2) -> WittElem {
    o.sub(o.mul(a[0][0], a[1][1]), o.mul(a[0][1], a[1][0]))
}

/// `p^val * [unit mod p]`, the data a tame character sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TameEntry {
    pub val: i64,
    pub residue: Fe,
}

/// `h = (b11 *; 0 b22) * section(point)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Iwasawa {
    pub b11: TameEntry,
    pub b22: TameEntry,
    pub point: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PSVector {
    pub level: u32,
    pub shift: i64,
    pub vals: Vec<WittElem>,
}

#[derive(Debug)]
pub struct PSParams {
    pub rho: GenericRho,
    pub j: SubsetJ,
    pub depth: u32,
    /// `W(F_q)/p^N`.
    pub o: Arc<WittRing>,
    /// `W(k_E)/p^N`.
    pub e: Arc<WittRing>,
    pub alpha: WittElem,
    pub alpha_p: WittElem,
    pub v: PadicScaled,
    pub v_p: PadicScaled,
    /// Exponents of `eta(J)`, `eta'(J)` as powers of `sigma_0`.
    pub eta: u64,
    pub eta_p: u64,
    chi1_unit: Vec<WittElem>,
    chi2_unit: Vec<WittElem>,
    teich_q: Vec<WittElem>,
    q: u64,
}

impl PSParams {
    pub fn new(rho: &GenericRho, j: SubsetJ, depth: u32, precision: u32) -> Result<Self, PsError> {
        let ctx = rho.ctx().clone();
        let o = WittRing::new(ctx.fq.clone(), precision)?;
        let e = WittRing::new(ctx.ke.clone(), precision)?;
        o.warm_teichmuller();
        e.warm_teichmuller();
        let m = from_rho_in(rho, j, &e)?;
        let (v, v_p) = m.frobenius_eigenvalues()?;
        Ok(Self::from_parts(rho, j, depth, o, e, m.alpha, m.alpha_p, v, v_p))
    }

    /// Default precision, enough for the valuations the identities reach.
    pub fn with_defaults(rho: &GenericRho, j: SubsetJ) -> Result<Self, PsError> {
        Self::new(rho, j, 3, 2 * rho.f() + 6)
    }

    /// Same model with `V'` multiplied by the unit `gamma`.
    pub fn perturbed(&self, gamma: WittElem) -> PSParams {
        let e = &self.e;
        let alpha_p = e.mul(self.alpha_p, gamma);
        let v_p = PadicScaled::new(e, self.v_p.val, e.mul(self.v_p.unit, gamma));
        Self::from_parts(&self.rho, self.j, self.depth, self.o.clone(), e.clone(), self.alpha, alpha_p, self.v, v_p)
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        rho: &GenericRho,
        j: SubsetJ,
        depth: u32,
        o: Arc<WittRing>,
        e: Arc<WittRing>,
        alpha: WittElem,
        alpha_p: WittElem,
        v: PadicScaled,
        v_p: PadicScaled,
    ) -> Self {
        let ctx = rho.ctx();
        let (eta, eta_p) = rho.eta_exponents(j);
        let fq = &ctx.fq;
        let q = ctx.q;
        let n_e = ctx.ke.units();
        let ratio = ctx.embs[0].ratio;
        let lift = |exp: u64| -> Vec<WittElem> {
            (0..q as Fe)
                .map(|x| match fq.dlog(x) {
                    None => e.zero(),
                    Some(l) => e.teich_power(((l as u128 * ratio as u128 % n_e as u128) * exp as u128 % n_e as u128) as i64),
                })
                .collect()
        };
        let chi1_unit = lift(eta_p);
        let chi2_unit = lift(eta);
        let teich_q = (0..q as Fe).map(|x| o.teichmuller(x)).collect();
        PSParams {
            rho: rho.clone(),
            j,
            depth,
            o,
            e,
            alpha,
            alpha_p,
            v,
            v_p,
            eta,
            eta_p,
            chi1_unit,
            chi2_unit,
            teich_q,
            q,
        }
    }

    pub fn ctx(&self) -> &Arc<RhoContext> {
        self.rho.ctx()
    }

    fn fq(&self) -> &FiniteField {
        &self.ctx().fq
    }

    /// `q^{m-1}(q+1)`.
    pub fn point_count(&self, m: u32) -> u64 {
        self.q.pow(m) + self.q.pow(m - 1)
    }

    fn expand(&self, code: u64, digits: u32) -> WittElem {
        let o = &self.o;
        let mut acc = o.zero();
        let mut c = code;
        for k in 0..digits {
            let d = (c % self.q) as usize;
            c /= self.q;
            acc = o.add(acc, o.mul_p_pow(self.teich_q[d], k));
        }
        acc
    }

    fn code_of(&self, z: WittElem, digits: u32) -> u64 {
        let o = &self.o;
        let mut z = z;
        let mut code = 0u64;
        let mut base = 1u64;
        for _ in 0..digits {
            let d = o.reduce(z);
            code += d as u64 * base;
            base *= self.q;
            z = o.div_p_pow(o.sub(z, self.teich_q[d as usize]), 1).expect("digit removed");
        }
        code
    }

    /// Section of the point with the given code at level `m`.
    pub fn section(&self, code: u64, m: u32) -> Mat2 {
        let o = &self.o;
        let qm = self.q.pow(m);
        if code < qm {
            [[o.zero(), o.one()], [o.one(), self.expand(code, m)]]
        } else {
            let c = o.mul_p_pow(self.expand(code - qm, m - 1), 1);
            [[o.one(), o.zero()], [c, o.one()]]
        }
    }

    fn tame(&self, x: WittElem) -> Result<(u32, WittElem, Fe), PsError> {
        let o = &self.o;
        let v = o.valuation(x).ok_or(PsError::PrecisionLoss)?;
        let u = o.div_p_pow(x, v).expect("valuation");
        Ok((v, u, o.reduce(u)))
    }

    /// Decompose `h = b * section(point)` with `b` upper triangular; the point
    /// is reported at level `m`.
    pub fn iwasawa(&self, h: &Mat2, m: u32) -> Result<Iwasawa, PsError> {
        let o = &self.o;
        let fq = self.fq();
        let (c, d) = (h[1][0], h[1][1]);
        let vc = o.valuation(c).map(|v| v as i64).unwrap_or(i64::MAX);
        let vd = o.valuation(d).map(|v| v as i64).unwrap_or(i64::MAX);
        if vc == i64::MAX && vd == i64::MAX {
            return Err(PsError::PrecisionLoss);
        }
        let (vdet, _, rdet) = self.tame(det(o, h))?;
        if vc <= vd {
            let (v0, uc, rc) = self.tame(c)?;
            let dd = o.div_p_pow(d, v0).expect("vd >= vc");
            let z = o.mul(dd, o.inv(uc).expect("unit"));
            Ok(Iwasawa {
                b11: TameEntry {
                    val: vdet as i64 - v0 as i64,
                    residue: fq.neg(fq.div(rdet, rc)),
                },
                b22: TameEntry {
                    val: v0 as i64,
                    residue: rc,
                },
                point: self.code_of(z, m),
            })
        } else {
            let (v0, ud, rd) = self.tame(d)?;
            let cc = o.div_p_pow(c, v0 + 1).expect("vc > vd");
            let cp = o.mul(cc, o.inv(ud).expect("unit"));
            Ok(Iwasawa {
                b11: TameEntry {
                    val: vdet as i64 - v0 as i64,
                    residue: fq.div(rdet, rd),
                },
                b22: TameEntry {
                    val: v0 as i64,
                    residue: rd,
                },
                point: self.q.pow(m) + self.code_of(cp, m - 1),
            })
        }
    }

    fn unit_pow(&self, u: WittElem, k: i64) -> WittElem {
        let e = &self.e;
        if k >= 0 {
            e.pow(u, k as u64)
        } else {
            e.pow(e.inv(u).expect("unit"), k.unsigned_abs())
        }
    }

    /// `chi1(b11) chi2(b22)` as `p^k * w`.
    pub fn chi(&self, b11: TameEntry, b22: TameEntry) -> (i64, WittElem) {
        let e = &self.e;
        let w = e.mul(
            e.mul(self.chi1_unit[b11.residue as usize], self.unit_pow(self.alpha_p, b11.val)),
            e.mul(self.chi2_unit[b22.residue as usize], self.unit_pow(self.alpha, b22.val)),
        );
        let f = self.rho.f() as i64;
        // chi1(p) = V'/q, chi2(p) = V
        let k = b11.val * (self.v_p.val - f) + b22.val * self.v.val;
        (k, w)
    }

    fn value_at(&self, v: &PSVector, code: u64) -> WittElem {
        v.vals[code as usize]
    }

    /// Right translation by `g`; raises the level by `val(det g)`.
    pub fn apply(&self, v: &PSVector, g: &Mat2) -> Result<PSVector, PsError> {
        let o = &self.o;
        let e = &self.e;
        // pull out the central factor p^k
        let k = g
            .iter()
            .flatten()
            .filter_map(|&x| o.valuation(x))
            .min()
            .ok_or(PsError::PrecisionLoss)?;
        let g: Mat2 = if k == 0 {
            *g
        } else {
            let d = |x: WittElem| o.div_p_pow(x, k).unwrap_or(o.zero());
            [[d(g[0][0]), d(g[0][1])], [d(g[1][0]), d(g[1][1])]]
        };
        let central = TameEntry {
            val: k as i64,
            residue: 1,
        };
        let (kc, wc) = self.chi(central, central);
        let g = &g;
        let dv = o.valuation(det(o, g)).ok_or(PsError::PrecisionLoss)?;
        let target = v.level + dv;
        if target > self.depth {
            return Err(PsError::DepthExceeded {
                need: target,
                max: self.depth,
            });
        }
        let n = self.point_count(target);
        let mut raw = Vec::with_capacity(n as usize);
        for code in 0..n {
            let h = mat_mul(o, &self.section(code, target), g);
            let iw = self.iwasawa(&h, v.level)?;
            let val = self.value_at(v, iw.point);
            if val == e.zero() {
                raw.push((i64::MAX, val));
                continue;
            }
            let (k, w) = self.chi(iw.b11, iw.b22);
            raw.push((k + kc, e.mul(e.mul(w, wc), val)));
        }
        let kmin = raw.iter().map(|r| r.0).min().unwrap_or(i64::MAX);
        let kmin = if kmin == i64::MAX { 0 } else { kmin };
        let vals = raw
            .into_iter()
            .map(|(k, w)| if k == i64::MAX { e.zero() } else { e.mul_p_pow(w, (k - kmin) as u32) })
            .collect();
        let out = PSVector {
            level: target,
            shift: v.shift + kmin,
            vals,
        };
        Ok(self.compress(out))
    }

    fn parent(&self, code: u64, m: u32) -> u64 {
        let qm = self.q.pow(m);
        if code < qm {
            code % self.q.pow(m - 1)
        } else {
            self.q.pow(m - 1) + (code - qm) % self.q.pow(m - 2)
        }
    }

    /// Lower the level while the values are constant on fibres.
    pub fn compress(&self, mut v: PSVector) -> PSVector {
        while v.level > 1 {
            let m = v.level;
            let mut vals: Vec<Option<WittElem>> = vec![None; self.point_count(m - 1) as usize];
            let mut ok = true;
            for code in 0..self.point_count(m) {
                let par = self.parent(code, m) as usize;
                let x = v.vals[code as usize];
                match vals[par] {
                    None => vals[par] = Some(x),
                    Some(y) if y != x => {
                        ok = false;
                        break;
                    }
                    _ => {}
                }
            }
            if !ok {
                break;
            }
            v = PSVector {
                level: m - 1,
                shift: v.shift,
                vals: vals.into_iter().map(|x| x.expect("fibres are nonempty")).collect(),
            };
        }
        v
    }

    /// Pull a vector up to level `m`.
    pub fn lift(&self, v: &PSVector, m: u32) -> PSVector {
        let mut cur = v.clone();
        while cur.level < m {
            let nm = cur.level + 1;
            let vals = (0..self.point_count(nm))
                .map(|c| cur.vals[self.parent(c, nm) as usize])
                .collect();
            cur = PSVector {
                level: nm,
                shift: cur.shift,
                vals,
            };
        }
        cur
    }

    fn at_shift(&self, v: &PSVector, s: i64) -> Vec<WittElem> {
        debug_assert!(s <= v.shift);
        let d = (v.shift - s) as u32;
        v.vals.iter().map(|&x| self.e.mul_p_pow(x, d)).collect()
    }

    pub fn zero(&self) -> PSVector {
        PSVector {
            level: 1,
            shift: 0,
            vals: vec![self.e.zero(); self.point_count(1) as usize],
        }
    }

    pub fn add(&self, a: &PSVector, b: &PSVector) -> PSVector {
        let m = a.level.max(b.level);
        let (a, b) = (self.lift(a, m), self.lift(b, m));
        let s = a.shift.min(b.shift);
        let (va, vb) = (self.at_shift(&a, s), self.at_shift(&b, s));
        let vals = va.iter().zip(&vb).map(|(&x, &y)| self.e.add(x, y)).collect();
        self.compress(PSVector { level: m, shift: s, vals })
    }

    /// Multiply by `p^k c`.
    pub fn scale(&self, v: &PSVector, k: i64, c: WittElem) -> PSVector {
        PSVector {
            level: v.level,
            shift: v.shift + k,
            vals: v.vals.iter().map(|&x| self.e.mul(x, c)).collect(),
        }
    }

    /// Exact equality modulo the working precision.
    pub fn equal(&self, a: &PSVector, b: &PSVector) -> bool {
        let m = a.level.max(b.level);
        let (a, b) = (self.lift(a, m), self.lift(b, m));
        let s = a.shift.min(b.shift);
        self.at_shift(&a, s) == self.at_shift(&b, s)
    }

    /// The `I(O_L)`-eigenvector: supported on `B I`, value 1 at the identity.
    pub fn iwahori_eigenvector(&self) -> PSVector {
        let mut v = self.zero();
        v.vals[self.q as usize] = self.e.one();
        v
    }

    /// `Pi = (0 1; p 0)`.
    pub fn pi(&self) -> Mat2 {
        let o = &self.o;
        [[o.zero(), o.one()], [o.from_int(self.rho.p() as i64), o.zero()]]
    }

    /// `([s] 1; 1 0)`.
    pub fn coset_matrix(&self, s: Fe) -> Mat2 {
        let o = &self.o;
        [[self.teich_q[s as usize], o.one()], [o.one(), o.zero()]]
    }

    pub fn diag(&self, a: WittElem, d: WittElem) -> Mat2 {
        let o = &self.o;
        [[a, o.zero()], [o.zero(), d]]
    }

    /// `(0 1; 1 0)`.
    pub fn weyl(&self) -> Mat2 {
        let o = &self.o;
        [[o.zero(), o.one()], [o.one(), o.zero()]]
    }

    /// `prod_{i in set} [sigma_i(s)]^{p-1-r_i}`, with empty product 1.
    pub fn weight(&self, set: SubsetJ, s: Fe) -> WittElem {
        let e = &self.e;
        let a = self.weight_exponent(set);
        if a == 0 {
            return e.one();
        }
        match self.fq().dlog(s) {
            None => e.zero(),
            Some(l) => {
                let n = self.ctx().ke.units() as u128;
                let ratio = self.ctx().embs[0].ratio as u128;
                e.teich_power((l as u128 * ratio % n * a as u128 % n) as i64)
            }
        }
    }

    /// `sum_{i in set} p^i (p-1-r_i)`.
    pub fn weight_exponent(&self, set: SubsetJ) -> u64 {
        let p = self.rho.p() as u64;
        set.positions(self.rho.f())
            .into_iter()
            .map(|i| p.pow(i) * (p - 1 - self.rho.r()[i as usize] as u64))
            .sum()
    }

    /// `sum_s weight(set, s) ([s] 1; 1 0) v`.
    pub fn weighted_coset_sum(&self, set: SubsetJ, v: &PSVector) -> Result<PSVector, PsError> {
        let mut acc = self.zero();
        for s in 0..self.q as Fe {
            let w = self.weight(set, s);
            if w == self.e.zero() {
                continue;
            }
            let t = self.apply(v, &self.coset_matrix(s))?;
            acc = self.add(&acc, &self.scale(&t, 0, w));
        }
        Ok(acc)
    }

    fn theta_teich(&self) -> WittElem {
        if self.rho.t().is_multiple_of(2) {
            self.e.one()
        } else {
            self.e.neg(self.e.one())
        }
    }

    /// The two sides `(L, R)` of the defining relation of `x^(J)`.
    pub fn xhat_sides(&self) -> Result<(PSVector, PSVector), PsError> {
        let f = self.rho.f();
        let vhat = self.iwahori_eigenvector();
        let pv = self.apply(&vhat, &self.pi())?;
        let l = self.weighted_coset_sum(self.j, &pv)?;
        let r = self.weighted_coset_sum(self.j.complement(f), &vhat)?;
        Ok((l, r))
    }

    /// The unit `x^(J)` with `L = x^(J) R`.
    pub fn extract_xhat(&self) -> Result<WittElem, PsError> {
        let f = self.rho.f();
        if self.j.is_empty() || self.j == SubsetJ::full(f) {
            return Err(PsError::BoundaryJ);
        }
        let (l, r) = self.xhat_sides()?;
        solve_proportional(&self.e, self, &l, &r)
    }

    /// `x(J)` from the reductions modulo `p` of `p^{-shift} L` and `R`.
    pub fn reduce_and_extract(&self) -> Result<Fe, PsError> {
        let f = self.rho.f();
        if self.j.is_empty() || self.j == SubsetJ::full(f) {
            return Err(PsError::BoundaryJ);
        }
        let (l, r) = self.xhat_sides()?;
        let e = &self.e;
        let ke = &self.ctx().ke;
        let m = l.level.max(r.level);
        let (l, r) = (self.lift(&l, m), self.lift(&r, m));
        // both sides as integral lattice vectors
        let lv: Vec<Fe> = self.at_or_above(&l, 0)?.into_iter().map(|x| e.reduce(x)).collect();
        let rv: Vec<Fe> = self.at_or_above(&r, 0)?.into_iter().map(|x| e.reduce(x)).collect();
        let c = rv.iter().position(|&x| x != 0).ok_or(PsError::InconsistentSolve("R vanishes mod p".into()))?;
        let x = ke.div(lv[c], rv[c]);
        for (i, (&a, &b)) in lv.iter().zip(&rv).enumerate() {
            if a != ke.mul(x, b) {
                return Err(PsError::InconsistentSolve(format!("coordinate {i}")));
            }
        }
        Ok(x)
    }

    /// Values of `v` written at shift `s`, requiring them to be divisible
    /// enough when `s > v.shift`.
    fn at_or_above(&self, v: &PSVector, s: i64) -> Result<Vec<WittElem>, PsError> {
        if s <= v.shift {
            return Ok(self.at_shift(v, s));
        }
        let d = (s - v.shift) as u32;
        v.vals
            .iter()
            .map(|&x| {
                if x == self.e.zero() {
                    Ok(x)
                } else {
                    self.e
                        .div_p_pow(x, d)
                        .ok_or_else(|| PsError::InconsistentSolve("non-integral value".into()))
                }
            })
            .collect()
    }

    /// `x^(J)` from the closed expression with the character sum `T`.
    pub fn xhat_closed(&self) -> Result<WittElem, PsError> {
        let f = self.rho.f();
        if self.j.is_empty() || self.j == SubsetJ::full(f) {
            return Err(PsError::BoundaryJ);
        }
        let e = &self.e;
        let p = self.rho.p() as u64;
        let a = self.weight_exponent(self.j);
        let c = self.rho.c_exponents(self.j);
        let b: u64 = c.iter().enumerate().map(|(i, &ci)| p.pow(i as u32) * ci as u64).sum();
        let t = jacobi_sum_via(e, &self.ctx().embs[0], a, b).map_err(|err| PsError::IdentityFailed(err.to_string()))?;
        let sum_r: u32 = self.j.positions(f).iter().map(|&i| self.rho.r()[i as usize]).sum();
        let mut sign = self.theta_teich();
        if sum_r % 2 == 1 {
            sign = e.neg(sign);
        }
        // V'/p^f = p^{|J|-f} alpha'
        let drop = f as i64 - self.v_p.val;
        let t = e.div_p_pow(t, drop as u32).ok_or_else(|| PsError::InconsistentSolve("T too small".into()))?;
        Ok(e.mul(sign, e.mul(self.v_p.unit, t)))
    }

    /// The two displayed boundary relations for `J = S` and `J = {}`.
    pub fn boundary_identities(&self) -> Result<(), PsError> {
        let f = self.rho.f();
        let full = SubsetJ::full(f);
        let e = &self.e;
        let vhat = self.iwahori_eigenvector();
        let pv = self.apply(&vhat, &self.pi())?;
        let th = self.theta_teich();
        let q_val = f as i64;
        if self.j == full {
            let lhs = self.weighted_coset_sum(full, &pv)?;
            let s0 = self.weighted_coset_sum(SubsetJ::empty(), &vhat)?;
            let wv = self.apply(&vhat, &self.weyl())?;
            let rhs = self.add(
                &self.scale(&s0, 0, e.neg(e.mul(th, self.alpha_p))),
                &self.scale(&wv, q_val, e.mul(th, self.alpha_p)),
            );
            if !self.equal(&lhs, &rhs) {
                return Err(PsError::IdentityFailed("J = S".into()));
            }
            Ok(())
        } else if self.j.is_empty() {
            let lhs = self.weighted_coset_sum(SubsetJ::empty(), &pv)?;
            let s1 = self.weighted_coset_sum(full, &vhat)?;
            let o = &self.o;
            let dp = self.diag(o.from_int(self.rho.p() as i64), o.one());
            let dv = self.apply(&vhat, &dp)?;
            let rhs = self.add(
                &self.scale(&s1, 0, e.neg(e.mul(th, self.alpha_p))),
                &self.scale(&dv, q_val, e.one()),
            );
            if !self.equal(&lhs, &rhs) {
                return Err(PsError::IdentityFailed("J = {}".into()));
            }
            Ok(())
        } else {
            Err(PsError::NotBoundary)
        }
    }

    /// Random element `(a b; pc d)` of the Iwahori subgroup, with `a`, `d`
    /// units; `pro_p` forces `a`, `d` to be `1 mod p`.
    pub fn random_iwahori<R: Rng + ?Sized>(&self, rng: &mut R, pro_p: bool) -> Mat2 {
        let o = &self.o;
        let n = self.o.precision();
        let mut rnd = |unit: bool| {
            let mut acc = o.zero();
            for k in 0..n {
                let d = if k == 0 && unit {
                    if pro_p {
                        1
                    } else {
                        rng.gen_range(1..self.q)
                    }
                } else {
                    rng.gen_range(0..self.q)
                };
                acc = o.add(acc, o.mul_p_pow(self.teich_q[d as usize], k));
            }
            acc
        };
        let a = rnd(true);
        let b = rnd(false);
        let c = o.mul_p_pow(rnd(false), 1);
        let d = rnd(true);
        [[a, b], [c, d]]
    }

    /// Character `eta'(a) eta(d)` of an Iwahori element.
    pub fn iwahori_char(&self, g: &Mat2) -> WittElem {
        let o = &self.o;
        let e = &self.e;
        e.mul(
            self.chi1_unit[o.reduce(g[0][0]) as usize],
            self.chi2_unit[o.reduce(g[1][1]) as usize],
        )
    }

    /// Check `g v = chi(g) v` for `count` random Iwahori elements.
    pub fn check_eigenvector<R: Rng + ?Sized>(&self, v: &PSVector, rng: &mut R, count: usize) -> Result<(), PsError> {
        if v.vals.iter().all(|&x| x == self.e.zero()) {
            return Err(PsError::ProjectionVanished);
        }
        for _ in 0..count {
            let g = self.random_iwahori(rng, false);
            let gv = self.apply(v, &g)?;
            if !self.equal(&gv, &self.scale(v, 0, self.iwahori_char(&g))) {
                return Err(PsError::ProjectionVanished);
            }
        }
        Ok(())
    }

    /// Dimension over `k_E` of the `eta' (x) eta`-eigenspace of the Iwahori
    /// subgroup inside the level-1 block.
    pub fn eigenspace_dim_mod_p(&self) -> Result<usize, PsError> {
        let o = &self.o;
        let ke = &self.ctx().ke;
        let fq = self.fq();
        let n = self.point_count(1) as usize;
        let gamma = self.teich_q[fq.generator() as usize];
        let mut gens = vec![self.diag(gamma, o.one()), self.diag(o.one(), gamma)];
        for k in 0..fq.degree() {
            let t = self.teich_q[fq.from_digits(&[0; 8][..k as usize].iter().copied().chain([1]).collect::<Vec<_>>()) as usize];
            gens.push([[o.one(), t], [o.zero(), o.one()]]);
        }
        let mut rows: Vec<Vec<Fe>> = Vec::new();
        for g in &gens {
            let chi = self.e.reduce(self.iwahori_char(g));
            let mut mat = vec![vec![0 as Fe; n]; n];
            for col in 0..n {
                let mut basis = self.zero();
                basis.vals[col] = self.e.one();
                let img = self.apply(&basis, g)?;
                let img = self.at_or_above(&img, 0)?;
                for (row, x) in img.iter().enumerate() {
                    mat[row][col] = self.e.reduce(*x);
                }
                mat[col][col] = ke.sub(mat[col][col], chi);
            }
            rows.extend(mat);
        }
        Ok(n - rank(ke, rows, n))
    }
}

fn rank(ke: &FiniteField, mut rows: Vec<Vec<Fe>>, ncols: usize) -> usize {
    let mut r = 0;
    for c in 0..ncols {
        let Some(piv) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r, piv);
        let inv = ke.inv(rows[r][c]);
        for x in rows[r].iter_mut() {
            *x = ke.mul(*x, inv);
        }
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[c] != 0 {
                let k = row[c];
                for (x, &y) in row.iter_mut().zip(&pivot) {
                    *x = ke.sub(*x, ke.mul(k, y));
                }
            }
        }
        r += 1;
    }
    r
}

/// Solve `l = x r` for a unit `x`, checking every coordinate.
fn solve_proportional(e: &WittRing, ps: &PSParams, l: &PSVector, r: &PSVector) -> Result<WittElem, PsError> {
    let m = l.level.max(r.level);
    let (l, r) = (ps.lift(l, m), ps.lift(r, m));
    let s = l.shift.min(r.shift);
    let lv = ps.at_shift(&l, s);
    let rv = ps.at_shift(&r, s);
    // a coordinate where r is least divisible
    let (c, vr) = rv
        .iter()
        .enumerate()
        .filter_map(|(i, &x)| e.valuation(x).map(|v| (i, v)))
        .min_by_key(|&(_, v)| v)
        .ok_or_else(|| PsError::InconsistentSolve("R vanishes".into()))?;
    let rc = e.div_p_pow(rv[c], vr).expect("valuation");
    let lc = e
        .div_p_pow(lv[c], vr)
        .ok_or_else(|| PsError::InconsistentSolve("L less divisible than R".into()))?;
    let x = e.mul(lc, e.inv(rc).expect("unit"));
    // x is known modulo p^{N - vr}
    let keep = e.precision().saturating_sub(vr);
    for (i, (&a, &b)) in lv.iter().zip(&rv).enumerate() {
        let diff = e.sub(a, e.mul(x, b));
        if e.truncate(diff, keep) != e.zero() {
            return Err(PsError::InconsistentSolve(format!("coordinate {i}")));
        }
    }
    if !e.is_unit(x) {
        return Err(PsError::InconsistentSolve("solution is not a unit".into()));
    }
    Ok(e.truncate(x, keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhobar::{frontier, random_rho};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(p: u32, f: u32, seed: u64, j: SubsetJ) -> Option<PSParams> {
        let ctx = RhoContext::new(p, f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_rho(&ctx, &mut rng, 0.0);
        if !rho.zset().intersect(frontier(j, f)).is_empty() {
            return None;
        }
        Some(PSParams::with_defaults(&rho, j).unwrap())
    }

    #[test]
    fn model_dimension_and_compression() {
        let ps = params(5, 1, 1, SubsetJ::empty()).unwrap();
        assert_eq!(ps.point_count(1), 6);
        assert_eq!(ps.point_count(3), 150);
        let v = ps.iwahori_eigenvector();
        let up = ps.lift(&v, 3);
        assert_eq!(up.vals.len(), 150);
        assert_eq!(ps.compress(up), v);
    }

    #[test]
    fn point_codes_round_trip() {
        let ps = params(5, 2, 2, SubsetJ::empty()).unwrap();
        for m in 1..=2 {
            for code in 0..ps.point_count(m) {
                let sec = ps.section(code, m);
                let iw = ps.iwasawa(&sec, m).unwrap();
                assert_eq!(iw.point, code);
                assert_eq!(iw.b11.val, 0);
            }
        }
    }

    #[test]
    fn iwasawa_examples() {
        let ps = params(7, 1, 3, SubsetJ::empty()).unwrap();
        let o = &ps.o;
        let id = ps.diag(o.one(), o.one());
        let iw = ps.iwasawa(&id, 2).unwrap();
        assert_eq!(iw.point, ps.q.pow(2));
        let iw = ps.iwasawa(&ps.coset_matrix(3), 2).unwrap();
        assert_eq!(iw.point, 0);
        // the product of two coset matrices
        for s in 0..7 {
            for t in 1..7 {
                let lhs = mat_mul(o, &ps.coset_matrix(s), &ps.coset_matrix(t));
                let fq = ps.fq();
                let ti = ps.teich_q[fq.inv(t) as usize];
                let a: Mat2 = [[o.add(ps.teich_q[s as usize], ti), o.one()], [o.one(), o.zero()]];
                let b: Mat2 = [[ps.teich_q[t as usize], o.one()], [o.zero(), o.neg(ti)]];
                assert_eq!(lhs, mat_mul(o, &a, &b));
                let iw = ps.iwasawa(&lhs, 1).unwrap();
                assert_eq!(iw.point, fq.inv(t) as u64);
            }
            let lhs = mat_mul(o, &ps.coset_matrix(s), &ps.coset_matrix(0));
            assert_eq!(lhs, [[o.one(), ps.teich_q[s as usize]], [o.zero(), o.one()]]);
        }
    }

    #[test]
    fn eigenvector_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (p, f) in [(5, 1), (5, 2), (7, 1)] {
            for j in SubsetJ::all(f) {
                let Some(ps) = params(p, f, 5, j) else { continue };
                let v = ps.iwahori_eigenvector();
                ps.check_eigenvector(&v, &mut rng, 100).unwrap();
                for _ in 0..20 {
                    let g = ps.random_iwahori(&mut rng, true);
                    assert!(ps.equal(&ps.apply(&v, &g).unwrap(), &v));
                }
                assert_eq!(ps.eigenspace_dim_mod_p().unwrap(), 1);
            }
        }
    }

    #[test]
    fn pi_relations() {
        for (p, f) in [(5, 1), (5, 2), (7, 2)] {
            for j in SubsetJ::all(f) {
                let Some(ps) = params(p, f, 6, j) else { continue };
                let e = &ps.e;
                let o = &ps.o;
                let v = ps.iwahori_eigenvector();
                let aa = e.mul(ps.alpha, ps.alpha_p);
                let pp = o.from_int(p as i64);
                let central = ps.apply(&v, &ps.diag(pp, pp)).unwrap();
                assert!(ps.equal(&central, &ps.scale(&v, 0, aa)));
                let pv = ps.apply(&v, &ps.pi()).unwrap();
                assert_eq!(pv.level, 1);
                let ppv = ps.apply(&pv, &ps.pi()).unwrap();
                assert!(ps.equal(&ppv, &ps.scale(&v, 0, aa)));
                let s = ps.weighted_coset_sum(SubsetJ::empty(), &v).unwrap();
                let expect = ps.scale(&s, ps.v_p.val - f as i64, ps.v_p.unit);
                assert!(ps.equal(&pv, &expect));
            }
        }
    }

    #[test]
    fn depth_budget_enforced() {
        let ctx = RhoContext::new(5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_rho(&ctx, &mut rng, 0.0);
        let ps = PSParams::new(&rho, SubsetJ::empty(), 1, 8).unwrap();
        let v = ps.iwahori_eigenvector();
        let o = &ps.o;
        let g = ps.diag(o.from_int(25), o.one());
        assert!(matches!(ps.apply(&v, &g), Err(PsError::DepthExceeded { .. })));
    }

    #[test]
    fn vanishing_weight_sum() {
        let ps = params(5, 2, 8, SubsetJ(0b01)).unwrap();
        for j in SubsetJ::all(2).filter(|j| !j.is_empty()) {
            let total = (0..25).fold(ps.e.zero(), |acc, s| ps.e.add(acc, ps.weight(j, s)));
            assert_eq!(total, ps.e.zero());
        }
    }

    #[test]
    fn xhat_matches_invariant_and_closed_form() {
        for (p, f, seeds) in [(5, 2, 0..4u64), (7, 2, 0..3), (5, 3, 0..2)] {
            for seed in seeds {
                for j in SubsetJ::all(f) {
                    if j.is_empty() || j == SubsetJ::full(f) {
                        continue;
                    }
                    let Some(ps) = params(p, f, seed, j) else { continue };
                    let xh = ps.extract_xhat().unwrap();
                    let keep = ps.e.precision() - f;
                    assert_eq!(ps.e.truncate(xh, keep), ps.e.truncate(ps.xhat_closed().unwrap(), keep));
                    let x = ps.rho.x_invariant(j).unwrap();
                    assert_eq!(ps.e.reduce(xh), x, "p={p} f={f} seed={seed} j={j}");
                    assert_eq!(ps.reduce_and_extract().unwrap(), x);
                }
            }
        }
    }

    #[test]
    fn xhat_scales_with_v_prime() {
        let ps = params(5, 2, 9, SubsetJ(0b10)).unwrap();
        let e = &ps.e;
        let gamma = e.teich_power(7);
        let base = ps.extract_xhat().unwrap();
        let moved = ps.perturbed(gamma).extract_xhat().unwrap();
        let keep = e.precision() - 2;
        assert_eq!(e.truncate(moved, keep), e.truncate(e.mul(base, gamma), keep));
    }

    #[test]
    fn boundary_relations_hold() {
        for (p, f) in [(5, 1), (7, 1), (5, 2), (7, 2)] {
            for seed in 0..3 {
                for j in [SubsetJ::empty(), SubsetJ::full(f)] {
                    let ps = params(p, f, seed, j).unwrap();
                    ps.boundary_identities().unwrap();
                }
            }
        }
    }

    #[test]
    fn boundary_j_rejected() {
        let ps = params(5, 2, 10, SubsetJ::empty()).unwrap();
        assert_eq!(ps.extract_xhat(), Err(PsError::BoundaryJ));
        let ps = params(5, 2, 10, SubsetJ(0b01)).unwrap();
        assert_eq!(ps.boundary_identities(), Err(PsError::NotBoundary));
    }
}
