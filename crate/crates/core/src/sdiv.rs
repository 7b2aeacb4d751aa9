//! Strongly divisible modules of type `J`: the scalar data `(a_j, alpha, alpha')`
//! of a potentially Barsotti-Tate lift, its descent to Fontaine-Laffaille
//! data, and the Frobenius eigenvalues.
//!
//! Index `j` here stands for `sigma_0 o phi^{-j}`, i.e. position `(f - j) mod f`.

use std::sync::Arc;

use thiserror::Error;

use crate::exactnum::{NumError, PadicScaled, WittElem, WittRing};
use crate::ffield::Fe;
use crate::rhobar::{frontier, GenericRho, RhoContext, RhoError, SubsetJ};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SdivError {
    #[error("module is not of type J: {0}")]
    InvalidModule(String),
    #[error(transparent)]
    Rho(#[from] RhoError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Position of the embedding `sigma_0 o phi^{-j}`.
#[inline]
pub fn position(j: u32, f: u32) -> u32 {
    (f - j % f) % f
}

#[derive(Clone, Debug)]
pub struct SDivModule {
    pub ctx: Arc<RhoContext>,
    /// `W(k_E)` at the working precision.
    pub ring: Arc<WittRing>,
    pub r: Vec<u32>,
    pub t: u64,
    pub j: SubsetJ,
    /// Positions whose filtration has the shape led by `e_eta` (the others are
    /// led by `e_eta'`).
    pub i_eta: SubsetJ,
    /// `a[j] = a_{sigma_0 o phi^{-j}}`.
    pub a: Vec<WittElem>,
    pub alpha: WittElem,
    pub alpha_p: WittElem,
}

/// Outcome of the type-`J` check; `violation` names the first failed inclusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeCheck {
    pub valid: bool,
    pub violation: Option<String>,
}

impl SDivModule {
    fn f(&self) -> u32 {
        self.ctx.f
    }

    fn in_frontier(&self, j: u32) -> bool {
        frontier(self.j, self.f()).contains(position(j, self.f()))
    }

    /// Residues `a_j mod p`.
    pub fn a_bar(&self) -> Vec<Fe> {
        self.a.iter().map(|&x| self.ring.reduce(x)).collect()
    }

    /// The four inclusion conditions defining type `J`, checked on unit status.
    pub fn validate_type_j(&self) -> TypeCheck {
        let f = self.f();
        let jset = self.j;
        let fail = |msg: String| TypeCheck {
            valid: false,
            violation: Some(msg),
        };
        if !self.ring.is_unit(self.alpha) || !self.ring.is_unit(self.alpha_p) {
            return fail("alpha and alpha' must be units".into());
        }
        for jj in 0..f {
            let pos = position(jj, f);
            let prev_in = jset.contains((pos + f - 1) % f);
            let here_in = jset.contains(pos);
            let unit = self.ring.is_unit(self.a[jj as usize]);
            let eta_side = self.i_eta.contains(pos);
            match (eta_side, unit) {
                (true, true) if prev_in => {
                    return fail(format!("unit a at position {pos} in I_eta with predecessor in J"));
                }
                (false, true) if !prev_in => {
                    return fail(format!("unit a at position {pos} in I_eta' with predecessor outside J"));
                }
                (true, false) if here_in || prev_in => {
                    return fail(format!("non-unit a at position {pos} in I_eta outside (not J, not J)"));
                }
                (false, false) if !(here_in && prev_in) => {
                    return fail(format!("non-unit a at position {pos} in I_eta' outside (J, J)"));
                }
                _ => {}
            }
        }
        TypeCheck {
            valid: true,
            violation: None,
        }
    }

    fn require_valid(&self) -> Result<(), SdivError> {
        let chk = self.validate_type_j();
        if chk.valid {
            Ok(())
        } else {
            Err(SdivError::InvalidModule(chk.violation.unwrap_or_default()))
        }
    }

    /// The same data read as a module of type `S \ J`.
    pub fn complement(&self) -> SDivModule {
        let f = self.f();
        SDivModule {
            j: self.j.complement(f),
            i_eta: self.i_eta.complement(f),
            alpha: self.alpha_p,
            alpha_p: self.alpha,
            ..self.clone()
        }
    }

    fn prod_frontier_abar(&self) -> Fe {
        let ke = &self.ctx.ke;
        let ab = self.a_bar();
        (0..self.f())
            .filter(|&j| self.in_frontier(j))
            .fold(1, |acc, j| ke.mul(acc, ab[j as usize]))
    }

    /// `A = alpha * prod_{F(J)} a` if `sigma_0 in J`, else `alpha' * prod_{F(J)} a`.
    pub fn big_a(&self) -> Result<Fe, SdivError> {
        self.require_valid()?;
        let ke = &self.ctx.ke;
        let lead = if self.j.contains(0) { self.alpha } else { self.alpha_p };
        Ok(ke.mul(self.ring.reduce(lead), self.prod_frontier_abar()))
    }

    /// The scalars `A_j` of the Fontaine-Laffaille reduction.
    pub fn fl_scalars(&self) -> Result<Vec<Fe>, SdivError> {
        self.require_valid()?;
        let ke = &self.ctx.ke;
        let f = self.f();
        let ab = self.a_bar();
        let big_a = self.big_a()?;
        let abar_al = self.ring.reduce(self.alpha);
        let abar_alp = self.ring.reduce(self.alpha_p);
        let mut out = Vec::with_capacity(f as usize);
        // running prod_{i<j, i in F} (-a_i^{-2})
        let mut run: Fe = 1;
        for j in 0..f {
            let aj = ab[j as usize];
            let inf = self.in_frontier(j);
            let lead = if inf { ke.inv(aj) } else { aj };
            let mut v = ke.mul(lead, run);
            if j == f - 1 {
                v = ke.mul(v, ke.div(big_a, ke.mul(abar_al, abar_alp)));
            }
            out.push(v);
            if inf {
                run = ke.mul(run, ke.neg(ke.inv(ke.mul(aj, aj))));
            }
        }
        Ok(out)
    }

    /// Fontaine-Laffaille data in the shape of a [`GenericRho`]: all Frobenius
    /// scalars are 1 except at `sigma_0 o phi^{-(f-1)}`.
    pub fn to_fontaine_laffaille(&self) -> Result<GenericRho, SdivError> {
        let ke = &self.ctx.ke;
        let f = self.f();
        let big_a = self.big_a()?;
        let aj = self.fl_scalars()?;
        let fu = f as usize;
        let mut alpha = vec![1; fu];
        let mut beta = vec![1; fu];
        let mut x = vec![0; fu];
        for j in 0..f {
            let pos = position(j, f) as usize;
            x[pos] = ke.neg(aj[j as usize]);
        }
        let last = position(f - 1, f) as usize;
        let ab = ke.mul(self.ring.reduce(self.alpha), self.ring.reduce(self.alpha_p));
        alpha[last] = ke.div(big_a, ab);
        beta[last] = ke.inv(big_a);
        x[last] = ke.mul(big_a, x[last]);
        Ok(GenericRho::new_extended(
            self.ctx.clone(),
            self.r.clone(),
            alpha,
            beta,
            x,
            self.t as i64,
        )?)
    }

    /// `(V, V') = (p^{|S \ J|} alpha, p^{|J|} alpha')`.
    pub fn frobenius_eigenvalues(&self) -> Result<(PadicScaled, PadicScaled), SdivError> {
        self.require_valid()?;
        let f = self.f();
        let nj = self.j.len() as i64;
        Ok((
            PadicScaled::new(&self.ring, f as i64 - nj, self.alpha),
            PadicScaled::new(&self.ring, nj, self.alpha_p),
        ))
    }

    /// Inertia weight of `eta'(J)` per position count; `|I_eta'| = |J|`.
    pub fn i_eta_prime(&self) -> SubsetJ {
        self.i_eta.complement(self.f())
    }
}

/// `a_bar_j` by the recurrence running over `j = 0, ..., f-1`.
pub fn abar_recurrence(rho: &GenericRho, j: SubsetJ) -> Result<Vec<Fe>, SdivError> {
    let f = rho.f();
    if !rho.zset().intersect(frontier(j, f)).is_empty() {
        return Err(RhoError::PreconditionViolated(j).into());
    }
    let ke = &rho.ctx().ke;
    let fr = frontier(j, f);
    let mut out = Vec::with_capacity(f as usize);
    // prod_{i<=j} beta_i / alpha_i
    let mut ratio: Fe = 1;
    let mut sq: Fe = 1; // prod_{i<j, F} (-a_i^2)
    for jj in 0..f {
        let pos = position(jj, f) as usize;
        ratio = ke.mul(ratio, ke.div(rho.beta()[pos], rho.alpha()[pos]));
        let x = rho.x()[pos];
        let inf = fr.contains(pos as u32);
        let a = if inf {
            ke.neg(ke.mul(ke.inv(x), ke.mul(ke.inv(ratio), ke.inv(sq))))
        } else {
            ke.neg(ke.mul(x, ke.mul(ratio, sq)))
        };
        if inf {
            sq = ke.mul(sq, ke.neg(ke.mul(a, a)));
        }
        out.push(a);
    }
    Ok(out)
}

/// Frobenius unit from the recurrence: `mu prod_F a` if `sigma_0 in J`,
/// otherwise `lambda prod_F a^{-1}`.
pub fn frobenius_unit_recurrence(rho: &GenericRho, j: SubsetJ) -> Result<Fe, SdivError> {
    let f = rho.f();
    let ke = &rho.ctx().ke;
    let ab = abar_recurrence(rho, j)?;
    let fr = frontier(j, f);
    let prod = (0..f)
        .filter(|&jj| fr.contains(position(jj, f)))
        .fold(1, |acc, jj| ke.mul(acc, ab[jj as usize]));
    Ok(if j.contains(0) {
        ke.mul(rho.mu(), prod)
    } else {
        ke.div(rho.lambda(), prod)
    })
}

/// Closed forms for the partial products `a_{j_1} ... a_{j_k}` over the
/// frontier indices `j_1 < j_2 < ...`, for `k = 1, ..., |F(J)|`.
pub fn frontier_partial_products_closed(rho: &GenericRho, j: SubsetJ) -> Result<Vec<Fe>, SdivError> {
    let f = rho.f();
    if !rho.zset().intersect(frontier(j, f)).is_empty() {
        return Err(RhoError::PreconditionViolated(j).into());
    }
    let ke = &rho.ctx().ke;
    let fr = frontier(j, f);
    let idx: Vec<u32> = (0..f).filter(|&jj| fr.contains(position(jj, f))).collect();
    // cumulative prod_{k<=j} alpha_k / beta_k
    let mut cum = Vec::with_capacity(f as usize);
    let mut c: Fe = 1;
    for jj in 0..f {
        let pos = position(jj, f) as usize;
        c = ke.mul(c, ke.div(rho.alpha()[pos], rho.beta()[pos]));
        cum.push(c);
    }
    let xs = |jj: u32| rho.x()[position(jj, f) as usize];
    let sign = |s: usize| if s.is_multiple_of(2) { 1 } else { ke.neg(1) };
    let mut out = Vec::new();
    for k in 1..=idx.len() {
        let v = if k % 2 == 1 {
            let s = k.div_ceil(2);
            let mut num = cum[idx[2 * s - 2] as usize];
            let mut den = xs(idx[2 * s - 2]);
            for i in 1..s {
                num = ke.mul(num, ke.mul(xs(idx[2 * i - 1]), cum[idx[2 * i - 2] as usize]));
                den = ke.mul(den, ke.mul(xs(idx[2 * i - 2]), cum[idx[2 * i - 1] as usize]));
            }
            ke.mul(sign(s), ke.div(num, den))
        } else {
            let s = k / 2;
            let mut num: Fe = 1;
            let mut den: Fe = 1;
            for i in 1..=s {
                num = ke.mul(num, ke.mul(xs(idx[2 * i - 2]), cum[idx[2 * i - 1] as usize]));
                den = ke.mul(den, ke.mul(xs(idx[2 * i - 1]), cum[idx[2 * i - 2] as usize]));
            }
            ke.mul(sign(s), ke.div(num, den))
        };
        out.push(v);
    }
    Ok(out)
}

/// Two-case closed form of `prod_{F(J)} a`.
pub fn frontier_product_closed(rho: &GenericRho, j: SubsetJ) -> Result<Fe, SdivError> {
    let f = rho.f();
    if !rho.zset().intersect(frontier(j, f)).is_empty() {
        return Err(RhoError::PreconditionViolated(j).into());
    }
    let ke = &rho.ctx().ke;
    let half = frontier(j, f).len() / 2;
    let sign = if half.is_multiple_of(2) { 1 } else { ke.neg(1) };
    let enter = crate::rhobar::frontier_entering(j, f);
    let leave = crate::rhobar::frontier_leaving(j, f);
    let px = |s: SubsetJ| s.positions(f).iter().fold(1, |a, &i| ke.mul(a, rho.x()[i as usize]));
    let ratio_over = |s: SubsetJ| {
        s.positions(f)
            .iter()
            .fold(1, |a, &i| ke.mul(a, ke.div(rho.alpha()[i as usize], rho.beta()[i as usize])))
    };
    Ok(if j.contains(0) {
        ke.mul(sign, ke.mul(ratio_over(j.complement(f)), ke.div(px(enter), px(leave))))
    } else {
        ke.mul(sign, ke.mul(ratio_over(j), ke.div(px(leave), px(enter))))
    })
}

/// Module of type `J` whose reduction is `rho`.
pub fn from_rho(rho: &GenericRho, j: SubsetJ, precision: u32) -> Result<SDivModule, SdivError> {
    let ctx = rho.ctx().clone();
    let ring = WittRing::new(ctx.ke.clone(), precision)?;
    from_rho_in(rho, j, &ring)
}

/// As [`from_rho`], in a caller-supplied `W(k_E)`.
pub fn from_rho_in(rho: &GenericRho, j: SubsetJ, ring: &Arc<WittRing>) -> Result<SDivModule, SdivError> {
    let ctx = rho.ctx().clone();
    let f = ctx.f;
    let ke = &ctx.ke;
    let ab = abar_recurrence(rho, j)?;
    let alp = rho.frobenius_unit(j)?;
    let al = ke.div(ke.mul(rho.lambda(), rho.mu()), alp);
    let i_eta = SubsetJ::from_positions(&(0..f).filter(|&i| !j.contains((i + f - 1) % f)).collect::<Vec<_>>());
    Ok(SDivModule {
        ctx: ctx.clone(),
        ring: ring.clone(),
        r: rho.r().to_vec(),
        t: rho.t(),
        j,
        i_eta,
        a: ab.iter().map(|&v| ring.teichmuller(v)).collect(),
        alpha: ring.teichmuller(al),
        alpha_p: ring.teichmuller(alp),
    })
}

/// `c^{(j)} = sum_{i<j} c_{f-(j-i)} p^i + sum_{i>=j} c_{i-j} p^i` for the
/// digits `c` (by position).
pub fn c_shift(c: &[u32], p: u32, j: u32) -> u64 {
    let f = c.len() as u32;
    let p = p as u64;
    let mut acc = 0u64;
    for i in 0..f {
        let d = if i < j { c[(f - (j - i)) as usize] } else { c[(i - j) as usize] };
        acc += d as u64 * p.pow(i);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhobar::{random_rho, random_rho_with_zset};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(p: u32, f: u32) -> Arc<RhoContext> {
        RhoContext::new(p, f).unwrap()
    }

    fn admissible(rho: &GenericRho) -> Vec<SubsetJ> {
        let f = rho.f();
        SubsetJ::all(f)
            .filter(|&j| rho.zset().intersect(frontier(j, f)).is_empty())
            .collect()
    }

    #[test]
    fn single_embedding_empty_j() {
        let c = ctx(5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let rho = random_rho(&c, &mut rng, 0.0);
            let ke = &c.ke;
            let ab = abar_recurrence(&rho, SubsetJ::empty()).unwrap();
            assert_eq!(ab[0], ke.neg(ke.mul(rho.x()[0], ke.div(rho.beta()[0], rho.alpha()[0]))));
            let m = from_rho(&rho, SubsetJ::empty(), 6).unwrap();
            assert_eq!(m.ring.reduce(m.alpha_p), rho.lambda());
            assert_eq!(m.big_a().unwrap(), rho.lambda());
        }
    }

    #[test]
    fn boundary_frobenius_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (p, f) in [(5, 1), (5, 2), (7, 2), (5, 3)] {
            let c = ctx(p, f);
            for _ in 0..10 {
                let rho = random_rho(&c, &mut rng, 0.5);
                assert_eq!(frobenius_unit_recurrence(&rho, SubsetJ::full(f)).unwrap(), rho.mu());
                assert_eq!(frobenius_unit_recurrence(&rho, SubsetJ::empty()).unwrap(), rho.lambda());
                let ms = from_rho(&rho, SubsetJ::full(f), 6).unwrap();
                let (v, vp) = ms.frobenius_eigenvalues().unwrap();
                assert_eq!(vp.val, f as i64);
                assert_eq!(v.val, 0);
            }
        }
    }

    #[test]
    fn invalid_when_frontier_scalar_not_unit() {
        let c = ctx(5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rho = random_rho(&c, &mut rng, 0.0);
        let j = SubsetJ(0b01);
        let mut m = from_rho(&rho, j, 6).unwrap();
        assert!(m.validate_type_j().valid);
        m.a[0] = m.ring.from_int(5);
        let chk = m.validate_type_j();
        assert!(!chk.valid);
        assert!(chk.violation.is_some());
        assert!(m.big_a().is_err());
    }

    #[test]
    fn c_shift_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for (p, f) in [(5, 2), (7, 3), (5, 4)] {
            let c = ctx(p, f);
            let e = c.q - 1;
            for _ in 0..10 {
                let rho = random_rho(&c, &mut rng, 0.0);
                for j in SubsetJ::all(f) {
                    let cs = rho.c_exponents(j);
                    for jj in 1..f {
                        let cj = c_shift(&cs, p, jj);
                        let cj1 = c_shift(&cs, p, jj - 1);
                        let cf = cs[(f - jj) as usize] as u64;
                        assert_eq!(e - cj + p as u64 * cj1, e * (cf + 1));
                        assert_eq!(cj + p as u64 * (e - cj1), e * (p as u64 - cf));
                    }
                }
            }
        }
    }

    #[test]
    fn output_zero_set_matches_vanishing_scalars() {
        let c = ctx(5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for z in SubsetJ::all(3) {
            let rho = random_rho_with_zset(&c, &mut rng, z);
            for j in admissible(&rho) {
                let m = from_rho(&rho, j, 6).unwrap();
                let fl = m.to_fontaine_laffaille().unwrap();
                let zeros: Vec<u32> = (0..3).filter(|&jj| m.a_bar()[jj as usize] == 0).map(|jj| position(jj, 3)).collect();
                assert_eq!(fl.zset(), SubsetJ::from_positions(&zeros));
                assert_eq!(fl.zset(), rho.zset());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn round_trip_and_closed_forms(seed in any::<u64>(), f in 1u32..=4, zp in 0.0f64..0.5) {
            let p = if f == 4 { 5 } else { 7 };
            let c = ctx(p, f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho(&c, &mut rng, zp);
            let ke = &c.ke;
            for j in admissible(&rho) {
                let m = from_rho(&rho, j, f + 5).unwrap();
                prop_assert!(m.validate_type_j().valid);
                prop_assert!(m.complement().validate_type_j().valid);
                prop_assert_eq!(m.big_a().unwrap(), rho.lambda());
                prop_assert_eq!(frobenius_unit_recurrence(&rho, j).unwrap(), rho.frobenius_unit(j).unwrap());
                let fl = m.to_fontaine_laffaille().unwrap();
                prop_assert_eq!(fl.canonical_form(), rho.canonical_form());
                let (v, vp) = m.frobenius_eigenvalues().unwrap();
                prop_assert_eq!(ke.mul(m.ring.reduce(v.unit), m.ring.reduce(vp.unit)), ke.mul(rho.lambda(), rho.mu()));
                prop_assert_eq!(vp.val + v.val, f as i64);
                prop_assert_eq!(m.i_eta_prime().len(), j.len());
                // partial products of the recurrence against their closed forms
                let ab = m.a_bar();
                let fr = frontier(j, f);
                let mut acc: Fe = 1;
                let mut partial = Vec::new();
                for jj in 0..f {
                    if fr.contains(position(jj, f)) {
                        acc = ke.mul(acc, ab[jj as usize]);
                        partial.push(acc);
                    }
                }
                prop_assert_eq!(&partial, &frontier_partial_products_closed(&rho, j).unwrap());
                prop_assert_eq!(acc, frontier_product_closed(&rho, j).unwrap());
            }
        }
    }
}
