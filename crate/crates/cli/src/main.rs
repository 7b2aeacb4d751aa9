use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use gl2modp::jacobi::{certify, default_ring};
use gl2modp::modrep::{self, ClassTable, IdentityReport, IrrBasis, ModrepError, QuatCase};
use gl2modp::rhobar::random_rho;
use gl2modp::suites::{self, cell_rng, GridConfig, SuiteReport};
use gl2modp::{make_field, GenericRho, Mutation, RhoContext, RhoRecord, SubsetJ};

#[derive(Parser)]
#[command(name = "gl2modp", version, about = "Exact mod-p local computations for GL2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weights, zero set and normal form of random generic representations.
    Rho(GridArgs),
    /// x(J) and the Frobenius unit for every admissible J.
    Xj(GridArgs),
    /// Run verification suites; exit status 0 iff all pass.
    Verify(VerifyArgs),
    /// Valuation and leading unit of Jacobi sums.
    Stickelberger(StickArgs),
    /// Reduction formulas for K-types on Brauer characters.
    Ktype(KtypeArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Tsv,
    Text,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_delimiter = ',', default_value = "5")]
    p: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    f: Vec<u32>,
    /// Representations per (p, f) cell.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Probability that each x_i vanishes.
    #[arg(long, default_value_t = 0.3)]
    zero_prob: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, PartialOrd, Ord)]
enum Suite {
    Oracle,
    Stickelberger,
    Appendix,
    Roundtrip,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum MutationArg {
    XSign,
    FrobSign,
    CTable,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "oracle,stickelberger,appendix,roundtrip")]
    suite: Vec<Suite>,
    /// Cells for the oracle and round-trip grids (default: the full grid).
    #[arg(long, value_delimiter = ',')]
    p: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    f: Vec<u32>,
    /// Representations per cell with no vanishing x_i (a further 40% with some).
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    opt_in_large: bool,
    /// Deliberately break one formula (falsification control).
    #[arg(long, value_enum, hide = true)]
    mutate: Option<MutationArg>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StickArgs {
    #[arg(long, default_value_t = 5)]
    p: u32,
    #[arg(long, default_value_t = 1)]
    f: u32,
    /// Sample this many pairs instead of all of them.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    precision: Option<u32>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct KtypeArgs {
    #[arg(long, default_value_t = 5)]
    p: u32,
    #[arg(long, default_value_t = 1)]
    f: u32,
    /// Level for the Borel induction.
    #[arg(long, default_value_t = 2)]
    n: u32,
    /// Conductor parameter for the cuspidal and ramified types.
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long)]
    opt_in_large: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn params<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Params(e.to_string())
}

fn output(common: &Common) -> Result<Box<dyn Write>, CliError> {
    Ok(match &common.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn grid(args: &GridArgs) -> Result<Vec<GenericRho>, CliError> {
    if !(0.0..=1.0).contains(&args.zero_prob) {
        return Err(CliError::Params("zero-prob must lie in [0, 1]".into()));
    }
    let mut cells: Vec<(u32, u32)> = args.p.iter().flat_map(|&p| args.f.iter().map(move |&f| (p, f))).collect();
    cells.sort();
    cells.dedup();
    let mut out = Vec::new();
    for (p, f) in cells {
        let ctx = RhoContext::new(p, f).map_err(params)?;
        let mut rng = cell_rng(args.common.seed, p, f);
        out.extend((0..args.trials).map(|_| random_rho(&ctx, &mut rng, args.zero_prob)));
    }
    Ok(out)
}

fn cmd_rho(args: &GridArgs) -> Result<bool, CliError> {
    let rhos = grid(args)?;
    let mut w = output(&args.common)?;
    if args.common.format == Format::Tsv {
        writeln!(w, "p\tf\tr\talpha\tbeta\tx\ttheta\tlambda\tmu\tZ\tnD\tweights\tcanonical")?;
    }
    for rho in &rhos {
        let weights = rho.serre_weights().map_err(params)?;
        let ws: Vec<String> = weights.iter().map(|x| x.to_string()).collect();
        let c = rho.canonical_form();
        let canon = format!("{}|{}|{}|{}|{}", join(c.r()), join(c.alpha()), join(c.beta()), join(c.x()), c.t());
        match args.common.format {
            Format::Tsv => writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                rho.p(),
                rho.f(),
                join(rho.r()),
                join(rho.alpha()),
                join(rho.beta()),
                join(rho.x()),
                rho.t(),
                rho.lambda(),
                rho.mu(),
                rho.zset(),
                weights.len(),
                ws.join(" "),
                canon
            )?,
            Format::Text => writeln!(
                w,
                "{}",
                RhoRecord::new(rho, SubsetJ::empty())
                    .push("lambda", rho.lambda())
                    .push("mu", rho.mu())
                    .push("Z", rho.zset())
                    .push("nD", weights.len())
                    .push("weights", ws.join(";"))
                    .push("canonical", canon)
            )?,
        }
    }
    w.flush()?;
    Ok(true)
}

fn cmd_xj(args: &GridArgs) -> Result<bool, CliError> {
    let rhos = grid(args)?;
    let mut w = output(&args.common)?;
    if args.common.format == Format::Tsv {
        writeln!(w, "p\tf\tr\talpha\tbeta\tx\ttheta\tJ\txJ\tfrobenius_unit\tproduct\tlambda_mu\tstatus")?;
    }
    let mut all_ok = true;
    for rho in &rhos {
        let ke = &rho.ctx().ke;
        let f = rho.f();
        let lm = ke.mul(rho.lambda(), rho.mu());
        for j in SubsetJ::all(f) {
            let row = match (rho.x_invariant(j), rho.frobenius_unit(j), rho.x_invariant(j.complement(f))) {
                (Ok(x), Ok(u), Ok(xc)) => {
                    let prod = ke.mul(x, xc);
                    all_ok &= prod == lm;
                    Some((x, u, prod))
                }
                _ => None,
            };
            let rec = RhoRecord::new(rho, j);
            match args.common.format {
                Format::Tsv => {
                    let (a, b, c, s) = match row {
                        Some((x, u, pr)) => (x.to_string(), u.to_string(), pr.to_string(), if pr == lm { "ok" } else { "mismatch" }),
                        None => ("-".into(), "-".into(), "-".into(), "skipped"),
                    };
                    writeln!(
                        w,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{a}\t{b}\t{c}\t{lm}\t{s}",
                        rec.p,
                        rec.f,
                        join(&rec.r),
                        join(&rec.alpha),
                        join(&rec.beta),
                        join(&rec.x),
                        rec.theta,
                        rec.j
                    )?
                }
                Format::Text => {
                    let rec = match row {
                        Some((_, u, pr)) => rec.push("frobenius_unit", u).push("product", pr).push("lambda_mu", lm),
                        None => rec.push("status", "skipped"),
                    };
                    writeln!(w, "{rec}")?
                }
            }
        }
    }
    w.flush()?;
    Ok(all_ok)
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool, CliError> {
    let mutation = match args.mutate {
        None => Mutation::None,
        Some(MutationArg::XSign) => Mutation::XInvariantSign,
        Some(MutationArg::FrobSign) => Mutation::FrobeniusUnitSign,
        Some(MutationArg::CTable) => Mutation::CTable,
    };
    let mut cfg = GridConfig {
        free: args.trials,
        with_zeros: (args.trials * 2).div_ceil(5),
        seed: args.common.seed,
        depth: args.depth,
        precision: args.precision,
        mutation,
        ..GridConfig::default()
    };
    if !args.p.is_empty() || !args.f.is_empty() {
        let ps = if args.p.is_empty() { vec![5] } else { args.p.clone() };
        let fs = if args.f.is_empty() { vec![1] } else { args.f.clone() };
        cfg.cells = ps.iter().flat_map(|&p| fs.iter().map(move |&f| (p, f))).collect();
        for &(p, f) in &cfg.cells {
            RhoContext::new(p, f).map_err(params)?;
        }
    }
    let mut suites_sel = args.suite.clone();
    suites_sel.sort();
    suites_sel.dedup();
    let mut reports: Vec<SuiteReport> = Vec::new();
    for s in suites_sel {
        match s {
            Suite::Oracle => {
                reports.push(suites::oracle_xj(&cfg));
                reports.push(suites::boundary(&cfg));
                reports.push(suites::frobenius_default(cfg.seed, mutation));
                reports.push(suites::invariance(&cfg, 1000));
            }
            Suite::Stickelberger => reports.push(suites::stickelberger_default(cfg.seed)),
            Suite::Appendix => {
                reports.push(suites::appendix(args.opt_in_large));
                reports.push(suites::constituents_default(mutation));
            }
            Suite::Roundtrip => reports.push(suites::roundtrip(&cfg)),
        }
    }
    let mut w = output(&args.common)?;
    for r in &reports {
        writeln!(w, "{r}")?;
    }
    let ok = reports.iter().all(SuiteReport::pass);
    writeln!(w, "overall={}", if ok { "pass" } else { "fail" })?;
    w.flush()?;
    Ok(ok)
}

fn cmd_stickelberger(args: &StickArgs) -> Result<bool, CliError> {
    let fq = make_field(args.p, args.f).map_err(params)?;
    if args.p < 3 {
        return Err(CliError::Params("p must be odd".into()));
    }
    let ring = match args.precision {
        Some(n) => gl2modp::WittRing::new(fq.clone(), n).map_err(params)?,
        None => default_ring(&fq).map_err(params)?,
    };
    let q = fq.order() as u64;
    let pairs: Vec<(u64, u64)> = match args.trials {
        None => (1..q).flat_map(|a| (1..q).map(move |b| (a, b))).filter(|(a, b)| (a + b) % (q - 1) != 0).collect(),
        Some(n) => {
            use rand::Rng;
            let mut rng = cell_rng(args.common.seed, args.p, args.f);
            let mut v = Vec::with_capacity(n);
            while v.len() < n {
                let (a, b) = (rng.gen_range(1..q), rng.gen_range(1..q));
                if (a + b) % (q - 1) != 0 {
                    v.push((a, b));
                }
            }
            v
        }
    };
    let pp = args.p as u64;
    let digits = |x: u64| join(&(0..args.f).map(|i| x / pp.pow(i) % pp).collect::<Vec<_>>());
    let mut w = output(&args.common)?;
    if args.common.format == Format::Tsv {
        writeln!(w, "p\tf\ta\tb\tdigits_a\tdigits_b\tu\tU\tcertified")?;
    }
    let mut ok = true;
    for (a, b) in pairs {
        let res = certify(&ring, a, b).map_err(params)?;
        ok &= res.certified;
        match args.common.format {
            Format::Tsv => writeln!(
                w,
                "{}\t{}\t{a}\t{b}\t{}\t{}\t{}\t{}\t{}",
                args.p,
                args.f,
                digits(a),
                digits(b),
                res.u,
                res.unit,
                res.certified
            )?,
            Format::Text => writeln!(
                w,
                "p={} f={} a={a} b={b} digits_a={} digits_b={} u={} U={} certified={}",
                args.p,
                args.f,
                digits(a),
                digits(b),
                res.u,
                res.unit,
                res.certified
            )?,
        }
    }
    w.flush()?;
    Ok(ok)
}

fn cmd_ktype(args: &KtypeArgs) -> Result<bool, CliError> {
    let table = ClassTable::new(args.p, args.f).map_err(params)?;
    if args.p < 3 {
        return Err(CliError::Params("p must be odd".into()));
    }
    let q = table.q;
    let mut reports: Vec<IdentityReport> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();
    let mut push = |res: Result<Vec<IdentityReport>, ModrepError>, what: String, reports: &mut Vec<IdentityReport>| match res {
        Ok(v) => reports.extend(v),
        Err(e @ (ModrepError::GroupTooLarge(_) | ModrepError::FieldTooLarge(_) | ModrepError::Unsupported(_))) => {
            skipped.push(format!("{what}: {e}"))
        }
        Err(e) => reports.push(IdentityReport::flag(&what, String::new(), false, e.to_string())),
    };
    let basis = if q <= 9 || args.opt_in_large {
        match IrrBasis::new(&table, args.opt_in_large) {
            Ok(b) => Some(b),
            Err(e) => {
                push(Err(e), "lemma41 decomposition".into(), &mut reports);
                None
            }
        }
    } else {
        push(Err(ModrepError::FieldTooLarge(q)), "lemma41 decomposition".into(), &mut reports);
        None
    };
    for e in 0..q - 1 {
        push(modrep::lemma41_verify(&table, e, basis.as_ref()), format!("lemma41 psi={e}"), &mut reports);
    }
    if args.f == 1 {
        for e1 in 0..q - 1 {
            for e2 in 0..q - 1 {
                push(modrep::prop42_verify(args.p, args.n, e1, e2), format!("prop42 n={}", args.n), &mut reports);
            }
        }
    } else {
        push(Err(ModrepError::Unsupported("Z/p^n needs q = p".into())), "prop42".into(), &mut reports);
    }
    for k in 0..table.n as u64 {
        push(modrep::prop43_verify(&table, args.m, k), format!("prop43 m={}", args.m), &mut reports);
    }
    if args.f == 1 {
        for e in 0..q - 1 {
            push(modrep::prop44_verify(args.p, args.m, e), format!("prop44 m={}", args.m), &mut reports);
        }
    } else {
        push(Err(ModrepError::Unsupported("ramified embedding needs q = p".into())), "prop44".into(), &mut reports);
    }
    for e in 0..q - 1 {
        for case in [QuatCase::Special { e }, QuatCase::Odd { m: args.m, e }] {
            push(modrep::quaternion_verify(q, case).map(|r| vec![r]), "quaternion".into(), &mut reports);
        }
    }
    for k in (1..table.n as u64).filter(|k| k % (q + 1) != 0) {
        for conjugate in [false, true] {
            let case = QuatCase::Even { m: args.m, k, conjugate };
            push(modrep::quaternion_verify(q, case).map(|r| vec![r]), "quaternion".into(), &mut reports);
        }
    }
    let mut w = output(&args.common)?;
    match args.common.format {
        Format::Tsv => {
            writeln!(w, "identity\tparams\tstatus\tnote")?;
            for r in &reports {
                writeln!(w, "{}\t{}\t{}\t{}", r.name, r.params, if r.pass { "pass" } else { "fail" }, r.note.clone().unwrap_or_default())?;
            }
        }
        Format::Text => {
            for r in &reports {
                write!(w, "{r}")?;
            }
        }
    }
    for s in &skipped {
        writeln!(w, "skipped\t{s}")?;
    }
    w.flush()?;
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Rho(a) => cmd_rho(a),
        Command::Xj(a) => cmd_xj(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Stickelberger(a) => cmd_stickelberger(a),
        Command::Ktype(a) => cmd_ktype(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
