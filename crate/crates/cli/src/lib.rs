//! Command-line driver: construction, convergence studies, verification
//! suites and online integration.

pub mod vector_file;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rpfv_core::eval::{randomized_error_sq_fixed, theorem_bound_min, BoundParams};
use rpfv_core::num::{KorobovSpaceParams, Smoothness};
use rpfv_core::primes::{PrimePool, ResidueVector};
use rpfv_core::rpfv::{construct_with_options, ConstructOptions, MemoryMode, DEFAULT_MEMORY_BUDGET};
use rpfv_core::runtime::{self, Algorithm, CosineSeries, Integrand, RunConfig};
use rpfv_core::study::{run_study, RowStatus, StudyConfig, DEFAULT_MAX_N};
use rpfv_core::verify::{parse_suites, SuiteReport};
use serde::Serialize;

pub use vector_file::{parse_gamma, Metadata, VectorFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "rpfv", version, about = "Randomised rank-1 lattice rules in weighted Korobov spaces")]
pub struct Cli {
    /// Worker threads; 0 keeps the library default.
    #[arg(long, global = true, env = "RPFV_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a fixed residue vector for budget n and write it as JSON.
    Construct(ConstructArgs),
    /// Compare deterministic CBC with the randomised rule over n ~ 1.2^k.
    Study(StudyArgs),
    /// Run oracle and property suites.
    Verify(VerifyArgs),
    /// Estimate an integral with an online randomised algorithm.
    Integrate(IntegrateArgs),
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub alpha: u32,
    /// `poly:c` for gamma_j = j^-c, or a comma-separated list.
    #[arg(long, default_value = "poly:2")]
    pub gamma_spec: String,
}

impl SpaceArgs {
    pub fn params(&self) -> anyhow::Result<KorobovSpaceParams> {
        Ok(KorobovSpaceParams::new(self.alpha, parse_gamma(&self.gamma_spec, self.d)?)?)
    }
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub n: u64,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// auto, cached or streaming.
    #[arg(long, default_value = "auto")]
    pub mode: MemoryMode,
    /// Memory allowed for cached pair tables, in bytes.
    #[arg(long, default_value_t = DEFAULT_MEMORY_BUDGET)]
    pub memory_budget: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Inclusive range `a..b` of exponents k.
    #[arg(long, default_value = "15..26")]
    pub k_range: String,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value = "auto")]
    pub mode: MemoryMode,
    /// Rows with a larger n are skipped.
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    pub max_n: u64,
    /// Lift the cap on n.
    #[arg(long)]
    pub allow_large: bool,
    /// CSV output; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Emit a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[arg(long)]
    pub vector_file: PathBuf,
    /// constant, product-cosine[:c], product-bernoulli or extremal[:h]
    #[arg(long, default_value = "product-cosine")]
    pub integrand: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    /// rpfv, rp-cbc or rp-rv; the latter two use n and the weights from the file.
    #[arg(long, default_value = "rpfv")]
    pub algorithm: Algorithm,
    /// JSON-lines output; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Result of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    VerificationFailed,
}

/// Exit code for an error raised by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use rpfv_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Capacity { .. } => EXIT_CAPACITY,
                E::SamplingFailure { .. } | E::Sequencing(_) => EXIT_RUNTIME,
                _ => EXIT_USAGE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_RUNTIME;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_USAGE;
        }
    }
    EXIT_USAGE
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<Outcome> {
    rpfv_core::par::configure_threads(cli.threads)?;
    match cli.command {
        Command::Construct(a) => cmd_construct(&a, out),
        Command::Study(a) => cmd_study(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Integrate(a) => cmd_integrate(&a, out),
    }
}

pub fn cmd_construct(a: &ConstructArgs, out: &mut dyn Write) -> anyhow::Result<Outcome> {
    let params = a.space.params()?;
    let bounds = BoundParams::new(a.tau, a.space.alpha)?;
    let pool = PrimePool::build(a.n)?;
    let opts = ConstructOptions {
        tau: a.tau,
        mode: a.mode,
        memory_budget: a.memory_budget,
    };
    let built = construct_with_options(pool, &params, &opts)?;
    let file = VectorFile::new(
        &built.vector,
        &params,
        a.tau,
        Metadata {
            construct_seconds: built.seconds,
            mode: built.mode,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    );
    file.write(&a.out)?;
    let e = randomized_error_sq_fixed(&built.vector, &params).error();
    let (bound, lambda) = theorem_bound_min(a.n, &params, &bounds)?;
    writeln!(out, "primes: {:?}", file.primes)?;
    writeln!(out, "mode: {}, construction: {:.3} s", built.mode, built.seconds)?;
    writeln!(out, "e_ran = {e:.16e}")?;
    writeln!(out, "theorem bound = {bound:.16e} (lambda = {lambda:.6})")?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(Outcome::Ok)
}

/// Parses `a..b` or `a..=b`, both inclusive.
pub fn parse_k_range(s: &str) -> anyhow::Result<(u32, u32)> {
    let (a, b) = s
        .split_once("..")
        .with_context(|| format!("k-range {s:?} is not of the form a..b"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
    if a > b {
        bail!("empty k-range {s:?}");
    }
    Ok((a, b))
}

pub fn cmd_study(a: &StudyArgs, out: &mut dyn Write) -> anyhow::Result<Outcome> {
    let (k_min, k_max) = parse_k_range(&a.k_range)?;
    let cfg = StudyConfig {
        params: a.space.params()?,
        k_min,
        k_max,
        construct: ConstructOptions {
            tau: a.tau,
            mode: a.mode,
            ..ConstructOptions::default()
        },
        max_n: if a.allow_large { u64::MAX } else { a.max_n },
    };
    let table = run_study(&cfg, |row| {
        if row.status == RowStatus::SkippedOverCap {
            eprintln!("warning: skipping k = {} (n = {}) above the cap of {}", row.k, row.n, cfg.max_n);
        } else {
            eprintln!("k = {}, n = {} done", row.k, row.n);
        }
    })?;
    let csv = table.to_csv();
    let fmt = |s: Option<f64>| s.map_or("absent".to_string(), |v| format!("{v:.6}"));
    match &a.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => write!(out, "{csv}")?,
    }
    let report = format!(
        "slope e_det(CBC) = {}, slope e_ran(RPFV) = {}",
        fmt(table.slope_det),
        fmt(table.slope_ran)
    );
    if a.out.is_some() {
        writeln!(out, "{report}")?;
    } else {
        eprintln!("{report}");
    }
    Ok(Outcome::Ok)
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> anyhow::Result<Outcome> {
    let suites = parse_suites(&a.suite)?;
    let reports = suites.into_iter().map(|s| s.run()).collect::<Result<Vec<SuiteReport>, _>>()?;
    let ok = reports.iter().all(SuiteReport::passed);
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&reports)?)?;
    } else {
        for r in &reports {
            writeln!(out, "suite {} ({:.2} s)", r.suite, r.seconds)?;
            for c in &r.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                writeln!(out, "  {tag} {}: {}", c.name, c.detail)?;
            }
        }
        writeln!(out, "{}", if ok { "all checks passed" } else { "verification FAILED" })?;
    }
    Ok(if ok { Outcome::Ok } else { Outcome::VerificationFailed })
}

/// Builds a named integrand for a vector file.
pub fn make_integrand(
    name: &str,
    v: &ResidueVector,
    params: &KorobovSpaceParams,
) -> anyhow::Result<Box<dyn Integrand>> {
    let d = v.dim();
    let (kind, arg) = match name.split_once(':') {
        Some((k, x)) => (k, Some(x)),
        None => (name, None),
    };
    let num = |default: f64| -> anyhow::Result<f64> {
        arg.map_or(Ok(default), |x| x.parse().with_context(|| format!("bad parameter in {name:?}")))
    };
    Ok(match kind {
        "constant" => Box::new(runtime::Constant { d, value: num(1.0)? }),
        "product-cosine" => Box::new(runtime::ProductCosine::with_decay(d, num(2.0)?)),
        "product-bernoulli" => Box::new(runtime::ProductBernoulli {
            alpha: Smoothness::new(params.alpha().value())?,
            gamma: params.gamma()[..d].to_vec(),
        }),
        "extremal" => Box::new(CosineSeries::extremal(v, params, num(8.0)? as i64)?.0),
        other => bail!("unknown integrand {other:?}"),
    })
}

#[derive(Serialize)]
struct EstimateLine {
    rep: usize,
    estimate: f64,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    summary: &'a runtime::Summary,
    exact: Option<f64>,
    algorithm: Algorithm,
    seed: u64,
    integrand: String,
}

pub fn cmd_integrate(a: &IntegrateArgs, out: &mut dyn Write) -> anyhow::Result<Outcome> {
    let file = VectorFile::read(&a.vector_file)?;
    let (v, params) = file.validate()?;
    let f = make_integrand(&a.integrand, &v, &params)?;
    let cfg = RunConfig {
        tau: file.tau,
        ..RunConfig::new(a.seed, a.reps, a.algorithm)
    };
    let xs = match a.algorithm {
        Algorithm::Rpfv => runtime::run_rpfv(f.as_ref(), &v, &cfg)?,
        Algorithm::RpCbc => runtime::run_rp_cbc(f.as_ref(), file.n, &params, &cfg)?,
        Algorithm::RpRv => runtime::run_rp_rv(f.as_ref(), file.n, &params, &cfg)?,
    };
    let mut text = String::new();
    for (rep, &estimate) in xs.iter().enumerate() {
        text.push_str(&serde_json::to_string(&EstimateLine { rep, estimate })?);
        text.push('\n');
    }
    let summary = runtime::summarize(&xs);
    text.push_str(&serde_json::to_string(&SummaryLine {
        summary: &summary,
        exact: f.known_integral(),
        algorithm: a.algorithm,
        seed: a.seed,
        integrand: f.description(),
    })?);
    text.push('\n');
    match &a.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            writeln!(
                out,
                "mean = {:.16e}, std_dev = {:.6e}, sem = {:.6e}",
                summary.mean, summary.std_dev, summary.sem
            )?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(Outcome::Ok)
}
