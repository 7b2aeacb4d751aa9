//! Seeded verification suites. Each returns a [`SuiteReport`]; failures carry
//! the full input tuple as a record line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ffield::{make_field, Fe};
use crate::jacobi::{certify, default_ring};
use crate::modrep::{self, ClassTable, IrrBasis, QuatCase};
use crate::pseries::PSParams;
use crate::record::RhoRecord;
use crate::rhobar::{frontier, random_rho, GenericRho, Mutation, RhoContext, RhoError, SerreWeight, SubsetJ};
use crate::sdiv::{self, from_rho, position};

const MAX_LISTED: usize = 20;

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub name: String,
    pub checked: u64,
    pub failed: u64,
    pub failures: Vec<String>,
    pub skipped: Vec<String>,
    pub tags: BTreeSet<String>,
}

impl SuiteReport {
    pub fn new(name: &str) -> SuiteReport {
        SuiteReport {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(detail());
            }
        }
    }

    pub fn pass(&self) -> bool {
        self.failed == 0 && self.checked > 0
    }

    pub fn merge(&mut self, o: SuiteReport) {
        self.checked += o.checked;
        self.failed += o.failed;
        for f in o.failures {
            if self.failures.len() < MAX_LISTED {
                self.failures.push(f);
            }
        }
        self.skipped.extend(o.skipped);
        self.tags.extend(o.tags);
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "suite={} status={} checked={} failed={}",
            self.name,
            if self.pass() { "pass" } else { "fail" },
            self.checked,
            self.failed
        )?;
        if !self.tags.is_empty() {
            write!(f, " tags={}", self.tags.iter().cloned().collect::<Vec<_>>().join(","))?;
        }
        for s in &self.skipped {
            write!(f, "\n  skipped: {s}")?;
        }
        for x in &self.failures {
            write!(f, "\n  failure: {x}")?;
        }
        Ok(())
    }
}

/// Parameters of the random representation grids.
#[derive(Clone, Debug)]
pub struct GridConfig {
    pub cells: Vec<(u32, u32)>,
    /// Representations with all `x_i` nonzero, per cell.
    pub free: usize,
    /// Representations with some `x_i = 0`, per cell.
    pub with_zeros: usize,
    pub seed: u64,
    pub depth: u32,
    pub precision: Option<u32>,
    pub mutation: Mutation,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            cells: vec![(5, 1), (5, 2), (7, 1), (7, 2), (5, 3)],
            free: 50,
            with_zeros: 20,
            seed: 0,
            depth: 3,
            precision: None,
            mutation: Mutation::None,
        }
    }
}

pub fn cell_rng(seed: u64, p: u32, f: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ((p as u64) << 40) ^ ((f as u64) << 32))
}

/// Deterministic sample: `free` representations with `Z = {}` then
/// `with_zeros` with `Z != {}`.
pub fn sample(ctx: &Arc<RhoContext>, seed: u64, free: usize, with_zeros: usize) -> Vec<GenericRho> {
    let mut rng = cell_rng(seed, ctx.p, ctx.f);
    let mut out: Vec<GenericRho> = (0..free).map(|_| random_rho(ctx, &mut rng, 0.0)).collect();
    while out.len() < free + with_zeros {
        let rho = random_rho(ctx, &mut rng, 0.5);
        if !rho.zset().is_empty() {
            out.push(rho);
        }
    }
    out
}

fn grid(cfg: &GridConfig) -> Result<Vec<GenericRho>, RhoError> {
    let mut out = Vec::new();
    for &(p, f) in &cfg.cells {
        let ctx = RhoContext::new(p, f)?;
        out.extend(sample(&ctx, cfg.seed, cfg.free, cfg.with_zeros));
    }
    Ok(out)
}

pub fn admissible(rho: &GenericRho) -> Vec<SubsetJ> {
    let f = rho.f();
    SubsetJ::all(f)
        .filter(|&j| rho.zset().intersect(frontier(j, f)).is_empty())
        .collect()
}

fn error_report(name: &str, e: impl fmt::Display) -> SuiteReport {
    let mut r = SuiteReport::new(name);
    r.check(false, || format!("setup error: {e}"));
    r
}

/// Reduction of the principal-series invariant against `x(J)`.
pub fn oracle_xj(cfg: &GridConfig) -> SuiteReport {
    let name = "A1-oracle-xJ";
    let rhos = match grid(cfg) {
        Ok(g) => g,
        Err(e) => return error_report(name, e),
    };
    let items: Vec<(GenericRho, SubsetJ)> = rhos
        .iter()
        .flat_map(|rho| {
            let full = SubsetJ::full(rho.f());
            admissible(rho)
                .into_iter()
                .filter(move |&j| !j.is_empty() && j != full)
                .map(move |j| (rho.clone(), j))
        })
        .collect();
    let results: Vec<(u32, u32, Result<(Fe, Fe, Fe), String>, String)> = items
        .par_iter()
        .map(|(rho, j)| {
            let line = RhoRecord::new(rho, *j).to_string();
            let run = || -> Result<(Fe, Fe, Fe), String> {
                let prec = cfg.precision.unwrap_or(2 * rho.f() + 6);
                let ps = PSParams::new(rho, *j, cfg.depth, prec).map_err(|e| e.to_string())?;
                let xh = ps.e.reduce(ps.extract_xhat().map_err(|e| e.to_string())?);
                let expect = rho.x_invariant_variant(*j, cfg.mutation).map_err(|e| e.to_string())?;
                let ratio = if expect == 0 { 0 } else { ps.e.residue().div(xh, expect) };
                Ok((xh, expect, ratio))
            };
            (rho.p(), rho.f(), run(), line)
        })
        .collect();
    let mut rep = SuiteReport::new(name);
    let mut ratios: BTreeMap<(u32, u32), BTreeSet<Fe>> = BTreeMap::new();
    for (p, f, res, line) in results {
        match res {
            Ok((xh, expect, ratio)) => {
                if xh != expect {
                    ratios.entry((p, f)).or_default().insert(ratio);
                }
                rep.check(xh == expect, || format!("{line} xhat={xh} expected={expect}"));
            }
            Err(e) => rep.check(false, || format!("{line} error={e}")),
        }
    }
    if rep.failed > 0 && rep.failed == rep.checked && ratios.values().all(|s| s.len() == 1) {
        rep.tags.insert("uniform-unit-discrepancy".into());
    }
    rep
}

/// The two boundary relations at `J = S` and `J = {}`.
pub fn boundary(cfg: &GridConfig) -> SuiteReport {
    let name = "A2-boundary";
    let rhos = match grid(cfg) {
        Ok(g) => g,
        Err(e) => return error_report(name, e),
    };
    let items: Vec<(GenericRho, SubsetJ)> = rhos
        .iter()
        .flat_map(|rho| [(rho.clone(), SubsetJ::empty()), (rho.clone(), SubsetJ::full(rho.f()))])
        .collect();
    let results: Vec<(String, Result<(), String>)> = items
        .par_iter()
        .map(|(rho, j)| {
            let prec = cfg.precision.unwrap_or(2 * rho.f() + 6);
            let r = PSParams::new(rho, *j, cfg.depth, prec)
                .map_err(|e| e.to_string())
                .and_then(|ps| ps.boundary_identities().map_err(|e| e.to_string()));
            (RhoRecord::new(rho, *j).to_string(), r)
        })
        .collect();
    let mut rep = SuiteReport::new(name);
    for (line, r) in results {
        rep.check(r.is_ok(), || format!("{line} error={}", r.unwrap_err()));
    }
    rep
}

/// Stickelberger certification: exhaustive for the listed `q`, sampled for
/// `q = 343`.
pub fn stickelberger_suite(exhaustive: &[(u32, u32)], sampled: &[(u32, u32, usize)], seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("A3-stickelberger");
    let run = |p: u32, f: u32, pairs: Vec<(u64, u64)>, rep: &mut SuiteReport| {
        let ring = match make_field(p, f).map_err(|e| e.to_string()).and_then(|fq| default_ring(&fq).map_err(|e| e.to_string())) {
            Ok(r) => r,
            Err(e) => {
                rep.check(false, || format!("p={p} f={f} setup error={e}"));
                return;
            }
        };
        let out: Vec<(u64, u64, Result<(bool, u32, u32, Option<u32>), String>)> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let r = certify(&ring, a, b)
                    .map(|c| (c.certified, c.u, c.unit, ring.valuation(c.value)))
                    .map_err(|e| e.to_string());
                (a, b, r)
            })
            .collect();
        for (a, b, r) in out {
            match r {
                Ok((ok, u, unit, val)) => rep.check(ok && val == Some(u), || {
                    format!("p={p} f={f} a={a} b={b} u={u} U={unit} valuation={val:?}")
                }),
                Err(e) => rep.check(false, || format!("p={p} f={f} a={a} b={b} error={e}")),
            }
        }
    };
    for &(p, f) in exhaustive {
        let q = (p as u64).pow(f);
        let pairs = (1..q)
            .flat_map(|a| (1..q).map(move |b| (a, b)))
            .filter(|(a, b)| (a + b) % (q - 1) != 0)
            .collect();
        run(p, f, pairs, &mut rep);
    }
    for &(p, f, n) in sampled {
        let q = (p as u64).pow(f);
        let mut rng = cell_rng(seed, p, f);
        let mut pairs = Vec::with_capacity(n);
        while pairs.len() < n {
            let (a, b) = (rng.gen_range(1..q), rng.gen_range(1..q));
            if (a + b) % (q - 1) != 0 {
                pairs.push((a, b));
            }
        }
        run(p, f, pairs, &mut rep);
    }
    rep
}

pub fn stickelberger_default(seed: u64) -> SuiteReport {
    stickelberger_suite(&[(5, 1), (7, 1), (5, 2), (7, 2)], &[(7, 3, 1000)], seed)
}

/// Closed form of the Frobenius unit against the recurrence, the two-case
/// product formula and the partial products.
pub fn frobenius_units(cells: &[(u32, u32)], per_cell: usize, seed: u64, mutation: Mutation) -> SuiteReport {
    let mut rep = SuiteReport::new("A4-frobenius-unit");
    for &(p, f) in cells {
        let ctx = match RhoContext::new(p, f) {
            Ok(c) => c,
            Err(e) => {
                rep.check(false, || format!("p={p} f={f} setup error={e}"));
                continue;
            }
        };
        let ke = &ctx.ke;
        let mut rng = cell_rng(seed, p, f);
        for _ in 0..per_cell {
            let rho = random_rho(&ctx, &mut rng, 0.3);
            for j in admissible(&rho) {
                let line = || RhoRecord::new(&rho, j).to_string();
                let closed = rho.frobenius_unit_variant(j, mutation).ok();
                let rec = sdiv::frobenius_unit_recurrence(&rho, j).ok();
                let prod = sdiv::frontier_product_closed(&rho, j).ok().map(|pr| {
                    if j.contains(0) {
                        ke.mul(rho.mu(), pr)
                    } else {
                        ke.div(rho.lambda(), pr)
                    }
                });
                rep.check(closed.is_some() && closed == rec && closed == prod, || {
                    format!("{} closed={closed:?} recurrence={rec:?} product={prod:?}", line())
                });
                let partial_ok = match (sdiv::abar_recurrence(&rho, j), sdiv::frontier_partial_products_closed(&rho, j)) {
                    (Ok(ab), Ok(cl)) => {
                        let fr = frontier(j, f);
                        let mut acc: Fe = 1;
                        let mut got = Vec::new();
                        for jj in 0..f {
                            if fr.contains(position(jj, f)) {
                                acc = ke.mul(acc, ab[jj as usize]);
                                got.push(acc);
                            }
                        }
                        got == cl
                    }
                    _ => false,
                };
                rep.check(partial_ok, || format!("{} partial products differ", line()));
                if j.is_empty() {
                    rep.check(closed == Some(rho.lambda()), || format!("{} boundary value != lambda", line()));
                }
                if j == SubsetJ::full(f) {
                    rep.check(closed == Some(rho.mu()), || format!("{} boundary value != mu", line()));
                }
            }
        }
    }
    rep
}

pub fn frobenius_default(seed: u64, mutation: Mutation) -> SuiteReport {
    frobenius_units(&[(5, 1), (7, 1), (5, 2), (7, 2), (5, 3), (7, 3), (5, 4)], 1000, seed, mutation)
}

/// Module round trip and the sub-character identity.
pub fn roundtrip(cfg: &GridConfig) -> SuiteReport {
    let name = "A5-roundtrip";
    let rhos = match grid(cfg) {
        Ok(g) => g,
        Err(e) => return error_report(name, e),
    };
    let per: Vec<SuiteReport> = rhos
        .par_iter()
        .map(|rho| {
            let mut rep = SuiteReport::new(name);
            let ctx = rho.ctx();
            let f = rho.f();
            let expect = (ctx.weighted((0..f).map(|i| (i, 1 + rho.r()[i as usize] as i64))) + rho.t()) % (ctx.q - 1);
            for j in admissible(rho) {
                let line = || RhoRecord::new(rho, j).to_string();
                let prec = cfg.precision.unwrap_or(f + 5);
                match from_rho(rho, j, prec) {
                    Ok(m) => {
                        let valid = m.validate_type_j().valid;
                        let back = m.to_fontaine_laffaille().map(|g| g.canonical_form());
                        let ok = valid && back.as_ref().ok() == Some(&rho.canonical_form());
                        rep.check(ok, || format!("{} valid={valid} round trip differs", line()));
                        rep.check(m.big_a().ok() == Some(rho.lambda()), || format!("{} unramified part != lambda", line()));
                    }
                    Err(e) => rep.check(false, || format!("{} error={e}", line())),
                }
            }
            for j in SubsetJ::all(f) {
                let ch = rho.prop224_subcharacter(j);
                rep.check(ch.exponent == expect && ch.unramified == rho.lambda(), || {
                    format!("{} subcharacter exponent={} expected={expect}", RhoRecord::new(rho, j), ch.exponent)
                });
            }
            rep
        })
        .collect();
    let mut rep = SuiteReport::new(name);
    per.into_iter().for_each(|r| rep.merge(r));
    rep
}

/// Product law and invariance under random rescaling of the bases.
pub fn invariance(cfg: &GridConfig, reparams: usize) -> SuiteReport {
    let name = "A6-product-invariance";
    let rhos = match grid(cfg) {
        Ok(g) => g,
        Err(e) => return error_report(name, e),
    };
    let per: Vec<SuiteReport> = rhos
        .par_iter()
        .enumerate()
        .map(|(idx, rho)| {
            let mut rep = SuiteReport::new(name);
            let ke = &rho.ctx().ke;
            let f = rho.f();
            let lm = ke.mul(rho.lambda(), rho.mu());
            for j in admissible(rho) {
                let a = rho.x_invariant_variant(j, cfg.mutation);
                let b = rho.x_invariant_variant(j.complement(f), cfg.mutation);
                let ok = matches!((&a, &b), (Ok(a), Ok(b)) if ke.mul(*a, *b) == lm);
                rep.check(ok, || format!("{} product law fails", RhoRecord::new(rho, j)));
            }
            let snapshot = |g: &GenericRho| {
                (
                    g.lambda(),
                    g.mu(),
                    g.zset(),
                    g.serre_weights().ok().map(|v| v.into_iter().collect::<BTreeSet<_>>()),
                    SubsetJ::all(f).map(|j| g.lemma211_scalar(j).ok()).collect::<Vec<_>>(),
                    SubsetJ::all(f).map(|j| g.x_invariant(j).ok()).collect::<Vec<_>>(),
                )
            };
            let base = snapshot(rho);
            let mut rng = cell_rng(cfg.seed.wrapping_add(idx as u64 + 1), rho.p(), f);
            let n = ke.order();
            for _ in 0..reparams {
                let u: Vec<Fe> = (0..f).map(|_| rng.gen_range(1..n)).collect();
                let v: Vec<Fe> = (0..f).map(|_| rng.gen_range(1..n)).collect();
                let ok = rho.reparametrize(&u, &v).map(|g| snapshot(&g) == base).unwrap_or(false);
                rep.check(ok, || format!("{} not invariant under u={u:?} v={v:?}", RhoRecord::new(rho, SubsetJ::empty())));
            }
            rep
        })
        .collect();
    let mut rep = SuiteReport::new(name);
    per.into_iter().for_each(|r| rep.merge(r));
    rep
}

fn add_reports(rep: &mut SuiteReport, res: Result<Vec<modrep::IdentityReport>, modrep::ModrepError>, what: &str) {
    match res {
        Ok(v) => {
            for r in v {
                rep.check(r.pass, || format!("{} [{}] {}", r.name, r.params, r.note.clone().unwrap_or_default()));
            }
        }
        Err(e) => rep.check(false, || format!("{what} error={e}")),
    }
}

/// The reduction formulas for `K`-types, checked on Brauer characters.
pub fn appendix(opt_in_large: bool) -> SuiteReport {
    let mut rep = SuiteReport::new("A7-appendix");
    let tables: BTreeMap<(u32, u32), Arc<ClassTable>> = [(3, 1), (5, 1), (7, 1), (3, 2), (5, 2)]
        .into_iter()
        .map(|(p, f)| ((p, f), ClassTable::new(p, f).expect("small field")))
        .collect();
    for (p, f) in [(5, 1), (7, 1), (3, 2), (5, 2)] {
        let t = &tables[&(p, f)];
        let basis = if t.q <= 9 || opt_in_large {
            match IrrBasis::new(t, opt_in_large) {
                Ok(b) => Some(b),
                Err(e) => {
                    rep.check(false, || format!("q={} irreducible basis error={e}", t.q));
                    None
                }
            }
        } else {
            rep.skipped.push(format!("lemma41 q={} decomposition (needs --opt-in-large)", t.q));
            None
        };
        for e in 0..t.q - 1 {
            add_reports(&mut rep, modrep::lemma41_verify(t, e, basis.as_ref()), "lemma41");
        }
    }
    for (p, n) in [(3, 1), (3, 2), (5, 1), (5, 2)] {
        for e1 in 0..(p as u64 - 1) {
            for e2 in 0..(p as u64 - 1) {
                add_reports(&mut rep, modrep::prop42_verify(p, n, e1, e2), "prop42");
            }
        }
    }
    for (p, f) in [(5, 1), (7, 1), (3, 2)] {
        let t = &tables[&(p, f)];
        for k in 0..t.n as u64 {
            add_reports(&mut rep, modrep::prop43_verify(t, 1, k), "prop43 m=1");
            for m in 3..=4 {
                add_reports(&mut rep, modrep::prop43_verify(t, m, k), "prop43 recursion");
            }
        }
    }
    for p in [3, 5] {
        let t = &tables[&(p, 1)];
        for k in 0..t.n as u64 {
            add_reports(&mut rep, modrep::prop43_verify(t, 2, k), "prop43 m=2");
        }
        for m in 1..=2 {
            for e in 0..(p as u64 - 1) {
                add_reports(&mut rep, modrep::prop44_verify(p, m, e), "prop44");
            }
        }
    }
    for q in [5u64, 7, 9, 25] {
        let n = q * q - 1;
        let mut cases = Vec::new();
        for e in 0..q - 1 {
            cases.push(QuatCase::Special { e });
            for m in 1..=4 {
                cases.push(QuatCase::Odd { m, e });
            }
        }
        for k in (1..n).filter(|k| k % (q + 1) != 0).step_by(7) {
            for m in 1..=4 {
                for conjugate in [false, true] {
                    cases.push(QuatCase::Even { m, k, conjugate });
                }
            }
        }
        for c in cases {
            add_reports(&mut rep, modrep::quaternion_verify(q, c).map(|r| vec![r]), "quaternion");
        }
    }
    rep
}

/// Every `r`, twist and zero set for `(p, f)`, with unit scalars.
fn exhaustive_small_grid(ctx: &Arc<RhoContext>) -> Vec<GenericRho> {
    let (p, f) = (ctx.p, ctx.f);
    let mut out = Vec::new();
    let count = (p - 2).pow(f);
    for code in 0..count {
        let r: Vec<u32> = (0..f).map(|i| code / (p - 2).pow(i) % (p - 2)).collect();
        if r.iter().all(|&v| v == 0) || r.iter().all(|&v| v == p - 3) {
            continue;
        }
        for t in 0..ctx.q - 1 {
            for z in SubsetJ::all(f) {
                let x = (0..f).map(|i| if z.contains(i) { 0 } else { 1 }).collect();
                let ones = vec![1; f as usize];
                out.push(GenericRho::new(ctx.clone(), r.clone(), ones.clone(), ones, x, t as i64).expect("generic"));
            }
        }
    }
    out
}

/// Constituent predictions against exact decomposition of the induced
/// Brauer character.
pub fn constituents(cells: &[(u32, u32)], include_q9: bool, mutation: Mutation) -> SuiteReport {
    let mut rep = SuiteReport::new("A8-constituents");
    for &(p, f) in cells {
        let (ctx, table) = match (RhoContext::new(p, f), ClassTable::new(p, f)) {
            (Ok(c), Ok(t)) => (c, t),
            _ => {
                rep.check(false, || format!("p={p} f={f} setup error"));
                continue;
            }
        };
        let basis = match IrrBasis::new(&table, true) {
            Ok(b) => b,
            Err(e) => {
                rep.check(false, || format!("q={} basis error={e}", table.q));
                continue;
            }
        };
        let rhos = exhaustive_small_grid(&ctx);
        let mut cache: BTreeMap<(u64, u64), Result<BTreeSet<SerreWeight>, String>> = BTreeMap::new();
        for rho in &rhos {
            let d: BTreeSet<SerreWeight> = match rho.serre_weights() {
                Ok(v) => v.into_iter().collect(),
                Err(e) => {
                    rep.check(false, || format!("{} serre weights error={e}", RhoRecord::new(rho, SubsetJ::empty())));
                    continue;
                }
            };
            let tau0 = rho.tau(SubsetJ::empty());
            for j in SubsetJ::all(f) {
                let (eta, etap) = rho.eta_exponents(j);
                let got = cache
                    .entry((etap, eta))
                    .or_insert_with(|| {
                        modrep::ind_iwahori(&table, etap, eta)
                            .and_then(|ch| basis.decompose(&ch))
                            .map_err(|e| e.to_string())
                            .and_then(|g| {
                                if g.0.values().all(|&m| m == 1) {
                                    Ok(g.support().into_iter().collect())
                                } else {
                                    Err(format!("not multiplicity free: {g}"))
                                }
                            })
                    })
                    .clone();
                let line = || RhoRecord::new(rho, j).to_string();
                let got = match got {
                    Ok(g) => g,
                    Err(e) => {
                        rep.check(false, || format!("{} error={e}", line()));
                        continue;
                    }
                };
                let ic = rho.induced_constituents_variant(j, mutation);
                rep.check(ic.weights() == got, || format!("{} constituents differ", line()));
                let inter: BTreeSet<SerreWeight> = got.intersection(&d).cloned().collect();
                rep.check(ic.flagged_weights() == inter, || format!("{} membership differs", line()));
                if rho.zset().intersect(frontier(j, f)).is_empty() {
                    rep.check(inter == BTreeSet::from([tau0.clone()]), || {
                        format!("{} intersection is not the single weight tau(empty)", line())
                    });
                }
            }
        }
    }
    if include_q9 {
        let table = ClassTable::new(3, 2).expect("small field");
        match IrrBasis::new(&table, false) {
            Ok(basis) => {
                for e1 in 0..table.q - 1 {
                    for e2 in 0..table.q - 1 {
                        let pred: BTreeSet<SerreWeight> = modrep::iwahori_constituents_predicted(&table, e1, e2)
                            .into_iter()
                            .map(|(_, w)| w)
                            .collect();
                        let got = modrep::ind_iwahori(&table, e1, e2).and_then(|c| basis.decompose(&c));
                        let ok = matches!(&got, Ok(g) if g.0.values().all(|&m| m == 1)
                            && g.support().into_iter().collect::<BTreeSet<_>>() == pred);
                        rep.check(ok, || format!("q=9 e1={e1} e2={e2} constituents differ"));
                    }
                }
                rep.skipped.push("q=9 membership flags: no generic representation exists for p = 3".into());
            }
            Err(e) => rep.check(false, || format!("q=9 basis error={e}")),
        }
    }
    rep
}

pub fn constituents_default(mutation: Mutation) -> SuiteReport {
    constituents(&[(5, 1), (7, 1), (5, 2)], true, mutation)
}

/// A suite run with one deliberate defect must fail.
pub fn mutation_controls(seed: u64) -> Vec<(String, SuiteReport)> {
    let small = GridConfig {
        cells: vec![(5, 2), (7, 2)],
        free: 4,
        with_zeros: 2,
        seed,
        mutation: Mutation::XInvariantSign,
        ..GridConfig::default()
    };
    vec![
        ("x-invariant sign".into(), oracle_xj(&small)),
        (
            "frobenius-unit sign".into(),
            frobenius_units(&[(5, 2), (7, 2), (5, 3)], 50, seed, Mutation::FrobeniusUnitSign),
        ),
        ("exponent table".into(), constituents(&[(5, 2)], false, Mutation::CTable)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GridConfig {
        GridConfig {
            cells: vec![(5, 2)],
            free: 2,
            with_zeros: 1,
            ..GridConfig::default()
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let ctx = RhoContext::new(7, 2).unwrap();
        let a = sample(&ctx, 5, 3, 2);
        assert_eq!(a, sample(&ctx, 5, 3, 2));
        assert_ne!(a, sample(&ctx, 6, 3, 2));
        assert!(a[..3].iter().all(|r| r.zset().is_empty()));
        assert!(a[3..].iter().all(|r| !r.zset().is_empty()));
    }

    #[test]
    fn small_suites_pass() {
        let cfg = tiny();
        for rep in [oracle_xj(&cfg), boundary(&cfg), roundtrip(&cfg), invariance(&cfg, 5)] {
            assert!(rep.pass(), "{rep}");
        }
        assert!(frobenius_units(&[(5, 2)], 20, 0, Mutation::None).pass());
        assert!(stickelberger_suite(&[(5, 1)], &[(5, 2, 30)], 0).pass());
    }

    #[test]
    fn mutations_are_caught() {
        for (what, rep) in mutation_controls(1) {
            assert!(!rep.pass(), "{what} not detected");
        }
        let mut cfg = tiny();
        cfg.mutation = Mutation::XInvariantSign;
        assert!(oracle_xj(&cfg).tags.contains("uniform-unit-discrepancy"));
    }

    #[test]
    fn report_display() {
        let mut r = SuiteReport::new("x");
        r.check(true, String::new);
        assert_eq!(r.to_string(), "suite=x status=pass checked=1 failed=0");
        r.check(false, || "bad".into());
        assert!(r.to_string().contains("failure: bad"));
    }
}
