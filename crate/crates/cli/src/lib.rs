//! Command-line driver: argument parsing, orchestration and output.
//!
//! Every command prints a [`ResultRecord`] as JSON. Exit status is 0 when
//! all checks pass, 1 when one fails and 2 for usage or validation errors.

pub mod record;
pub mod suites;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use charsum_core::cache::load_or_build;
use charsum_core::charsums::{gauss_table, GaussMethod};
use charsum_core::equidist::{
    prime_scan_with, EtaChoice, Experiment, ScanResult, DEFAULT_GRID, MAX_CUTOFF,
};
use charsum_core::field::{build_field, is_prime, CharIndex, FieldCtx};
use charsum_core::moments::{
    bilinear_bound, bilinear_moment, holder_check, mixed_moment_star, moment_bounds,
    random_char_set, MomentRecord, MomentSpec,
};
use charsum_core::util::rng;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::record::{
    export_results, BilinearReport, Check, Command, ExperimentManifest, ExportFormat, FieldInfo,
    Payload, ResultRecord,
};
use crate::suites::{
    bilinear_suite, hypergeom_suite, identity_suite, moment_suite, prime_powers_upto,
    prime_range, BilinearConfig, HypergeomConfig, MomentConfig, SuiteOutput,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] charsum_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Parser, Debug)]
#[command(name = "charsum", version, about = "Character sum experiments over finite fields")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Directory for cached field tables.
    #[arg(long, global = true, env = "CHARSUM_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Modulus, generator and a few traces of F_{p^n}.
    FieldInfo(FieldArgs),
    /// The Gauss sum table of F_{p^n}.
    Gauss(GaussArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// One mixed moment of Jacobi sums over F_p.
    Moment(MomentArgs),
    /// One bilinear moment over random character sets.
    Bilinear(BilinearArgs),
    /// Angle discrepancy of Jacobi sums over one prime or a list.
    Equidist(EquidistArgs),
}

#[derive(Args, Debug)]
struct FieldArgs {
    #[arg(long)]
    p: u64,
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Modulus coefficients, constant term first.
    #[arg(long, value_delimiter = ',')]
    modulus: Option<Vec<u64>>,
}

#[derive(Args, Debug)]
struct GaussArgs {
    #[arg(long)]
    p: u64,
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[arg(long, value_enum, default_value_t = MethodArg::Fft)]
    method: MethodArg,
    /// Write the record here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Fft,
    Naive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    Identities,
    Hypergeom,
    Moments,
    Bilinear,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Largest field size in the sweep (suite-specific default).
    #[arg(long)]
    p_max: Option<u64>,
}

#[derive(Args, Debug)]
struct MomentArgs {
    #[arg(long)]
    p: u64,
    #[arg(long, value_delimiter = ',')]
    kappa: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    eta: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    rho: Vec<u32>,
}

#[derive(Args, Debug)]
struct BilinearArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    x_size: usize,
    #[arg(long)]
    y_size: usize,
    #[arg(long)]
    kappa: u32,
    #[arg(long)]
    s: u32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    FixedEta,
    Joint,
    Bilinear,
}

#[derive(Args, Debug)]
struct EquidistArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// File of primes, separated by whitespace or commas; `#` starts a comment.
    #[arg(long, conflicts_with = "p", required_unless_present = "p")]
    p_list: Option<PathBuf>,
    #[arg(long)]
    p: Option<u64>,
    /// `quadratic` or `jINDEX`; for the joint mode the first of s characters.
    #[arg(long, default_value = "quadratic")]
    eta: EtaChoice,
    #[arg(long, default_value_t = 2)]
    s: u32,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Also write the scan as CSV (and a `.tsv` of ln q, ln d_star beside it).
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command on the real
/// standard streams and returns the exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok((record, sink)) => {
            let written = match sink {
                Some(path) => export_results(&record, ExportFormat::Json, &path)
                    .map(|()| writeln!(out, "wrote {}", path.display()).unwrap_or(())),
                None => serde_json::to_writer_pretty(&mut *out, &record)
                    .map_err(CliError::from)
                    .and_then(|()| writeln!(out).map_err(CliError::from)),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return 2;
            }
            for c in record.checks.iter().filter(|c| !c.pass) {
                let kind = if c.finding { "finding" } else { "check failed" };
                let _ = writeln!(err, "{kind}: {} measured {:e} > {:e}", c.name, c.measured, c.threshold);
            }
            if record.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

/// Runs the parsed command; the path, if any, is where the record goes
/// instead of stdout.
pub fn execute(cli: &Cli) -> Result<(ResultRecord, Option<PathBuf>), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.map_or(0, usize::from))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn params(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn finish(mut manifest: ExperimentManifest, out: SuiteOutput) -> ResultRecord {
    manifest.finish();
    ResultRecord {
        manifest,
        payload: out.payload,
        checks: out.checks,
    }
}

fn field_ctx(cache: Option<&Path>, p: u64, n: u32) -> Result<FieldCtx, CliError> {
    Ok(load_or_build(cache, p, n)?)
}

fn require_prime(p: u64) -> Result<(), CliError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(charsum_core::Error::NonPrime(p).into())
    }
}

fn dispatch(cli: &Cli) -> Result<(ResultRecord, Option<PathBuf>), CliError> {
    let cache = cli.cache_dir.as_deref();
    let seed = cli.seed;
    match &cli.command {
        Cmd::FieldInfo(a) => {
            let manifest = ExperimentManifest::start(
                Command::FieldInfo,
                params(&[("p", json!(a.p)), ("n", json!(a.n)), ("modulus", json!(a.modulus))]),
            );
            let ctx = match &a.modulus {
                Some(m) => build_field(a.p, a.n, Some(m))?,
                None => field_ctx(cache, a.p, a.n)?,
            };
            let g = ctx.generator();
            let info = FieldInfo {
                p: ctx.p(),
                n: ctx.n(),
                q: ctx.q(),
                modulus: ctx.modulus().map(<[u64]>::to_vec),
                generator: g.0,
                quadratic_char: ctx.quadratic_char().map(CharIndex::index),
                generator_power_traces: (0..ctx.order().min(16)).map(|k| ctx.trace(ctx.exp(k))).collect(),
            };
            let checks = vec![Check::at_most(
                "generator_order",
                (ctx.order() - ctx.mult_order(g).unwrap_or(0)) as f64,
                0.0,
            )];
            Ok((finish(manifest, SuiteOutput { payload: Payload::FieldInfo(info), checks }), None))
        }
        Cmd::Gauss(a) => {
            let method = match a.method {
                MethodArg::Fft => GaussMethod::Fft,
                MethodArg::Naive => GaussMethod::Naive,
            };
            let manifest = ExperimentManifest::start(
                Command::Gauss,
                params(&[("p", json!(a.p)), ("n", json!(a.n)), ("method", json!(method.to_string()))]),
            );
            let ctx = field_ctx(cache, a.p, a.n)?;
            let table = gauss_table(&ctx, method);
            let q = ctx.q() as f64;
            let order = ctx.order() as f64;
            let checks = vec![
                Check::at_most("gauss_parseval", (table.parseval_sum() - order * order).abs() / (q * q), 1e-6),
                Check::at_most("gauss_trivial_is_minus_one", (table.get(CharIndex::TRIVIAL) + 1.0).norm(), 1e-12),
                Check::at_most("gauss_modulus", table.max_modulus_defect() / q.sqrt(), 1e-9),
            ];
            let out = SuiteOutput {
                payload: Payload::Gauss(table.export()),
                checks,
            };
            Ok((finish(manifest, out), a.json.clone()))
        }
        Cmd::Verify(a) => verify(a, seed, cache).map(|r| (r, None)),
        Cmd::Moment(a) => {
            let manifest = ExperimentManifest::start(
                Command::Moment,
                params(&[
                    ("p", json!(a.p)),
                    ("kappa", json!(a.kappa)),
                    ("lambda", json!(a.lambda)),
                    ("eta", json!(a.eta)),
                    ("rho", json!(a.rho)),
                ]),
            );
            require_prime(a.p)?;
            let ctx = field_ctx(cache, a.p, 1)?;
            let chars = |v: &[u32]| v.iter().map(|&j| CharIndex(j)).collect::<Vec<_>>();
            let spec = MomentSpec::new(a.kappa.clone(), a.lambda.clone(), chars(&a.eta), chars(&a.rho))?;
            spec.check_for(&ctx)?;
            let table = gauss_table(&ctx, GaussMethod::Fft);
            let d = mixed_moment_star(&ctx, &table, &spec)?;
            let record = MomentRecord::new(ctx.q(), &spec, d.m_value);
            let b = moment_bounds(ctx.q(), spec.kappa(), spec.lambda());
            let slack = 1e-9 * (d.m_value.norm() + d.mstar_value.norm() + 1.0);
            let checks = vec![
                Check::at_most("moment_theorem_bound", record.abs, b.theorem * (1.0 + 1e-9)),
                Check::at_most("moment_gap_bound", d.gap(), d.gap_bound + slack),
                Check::at_most("moment_excluded_terms_bound", d.gap(), d.excluded_terms_bound + slack),
            ];
            let out = SuiteOutput {
                payload: Payload::Moment { record, decomposition: d },
                checks,
            };
            Ok((finish(manifest, out), None))
        }
        Cmd::Bilinear(a) => {
            let manifest = ExperimentManifest::start(
                Command::Bilinear,
                params(&[
                    ("p", json!(a.p)),
                    ("x_size", json!(a.x_size)),
                    ("y_size", json!(a.y_size)),
                    ("kappa", json!(a.kappa)),
                    ("s", json!(a.s)),
                    ("seed", json!(seed)),
                ]),
            );
            require_prime(a.p)?;
            let ctx = field_ctx(cache, a.p, 1)?;
            let nontrivial = ctx.order() as usize - 1;
            for (name, size) in [("x-size", a.x_size), ("y-size", a.y_size)] {
                if size == 0 || size > nontrivial {
                    return Err(CliError::Usage(format!(
                        "--{name} must be in 1..={nontrivial} for q = {}",
                        ctx.q()
                    )));
                }
            }
            if a.kappa == 0 || a.s == 0 {
                return Err(CliError::Usage("--kappa and --s must be positive".into()));
            }
            let mut r = rng(seed);
            let x = random_char_set(&mut r, &ctx, a.x_size);
            let y = random_char_set(&mut r, &ctx, a.y_size);
            let table = gauss_table(&ctx, GaussMethod::Fft);
            let v = bilinear_moment(&ctx, &table, &x, &y, a.kappa)?;
            let bound = bilinear_bound(ctx.q(), x.len() as u64, y.len() as u64, a.kappa, a.s);
            let h = holder_check(&ctx, &table, &x, &y, a.kappa, a.s)?;
            let report = BilinearReport {
                q: ctx.q(),
                x: x.iter().map(|c| c.0).collect(),
                y: y.iter().map(|c| c.0).collect(),
                kappa: a.kappa,
                s: a.s,
                value: [v.re, v.im],
                abs: v.norm(),
                bound,
                ratio: v.norm() / bound,
                holder_ln_lhs: h.ln_lhs,
                holder_ln_rhs: h.ln_rhs,
            };
            let checks = vec![
                Check::at_most("bilinear_bound_factor2", report.ratio, 2.0),
                Check::at_most("bilinear_bound_factor1", report.ratio, 1.0).as_finding(),
                Check::at_most("holder_inequality", h.ln_lhs - h.ln_rhs, 1e-9),
            ];
            let out = SuiteOutput {
                payload: Payload::Bilinear(report),
                checks,
            };
            Ok((finish(manifest, out), None))
        }
        Cmd::Equidist(a) => equidist(a, seed, cache).map(|r| (r, None)),
    }
}

fn verify(a: &VerifyArgs, seed: u64, cache: Option<&Path>) -> Result<ResultRecord, CliError> {
    let (suite, default_max) = match a.suite {
        Suite::Identities => ("identities", 199),
        Suite::Hypergeom => ("hypergeom", 31),
        Suite::Moments => ("moments", 199),
        Suite::Bilinear => ("bilinear", 199),
    };
    let p_max = a.p_max.unwrap_or(default_max);
    let manifest = ExperimentManifest::start(
        Command::Verify,
        params(&[("suite", json!(suite)), ("p_max", json!(p_max)), ("seed", json!(seed))]),
    );
    let out = match a.suite {
        Suite::Identities => identity_suite(&prime_powers_upto(p_max), cache)?,
        Suite::Hypergeom => {
            let cfg = HypergeomConfig {
                fields: prime_range(5, p_max.min(13))?,
                specs_per_field: 100,
                max_vars: 4,
                kl_fields: prime_range(2, p_max.min(31))?,
                kl_max_m: 4,
                seed,
            };
            hypergeom_suite(&cfg, cache)?
        }
        Suite::Moments => {
            let cfg = MomentConfig {
                primes: prime_range(3, p_max)?,
                specs_per_prime: 200,
                max_weight: 6,
                reduction_q_max: 13,
                reduction_budget: 2e7,
                seed,
            };
            moment_suite(&cfg, cache)?
        }
        Suite::Bilinear => {
            let cfg = BilinearConfig {
                primes: prime_range(3, p_max)?,
                instances_per_prime: 100,
                max_kappa: 3,
                max_s: 3,
                seed,
            };
            bilinear_suite(&cfg, cache)?
        }
    };
    Ok(finish(manifest, out))
}

/// Integers separated by whitespace or commas, `#` comments allowed.
pub fn parse_prime_list(text: &str) -> Result<Vec<u64>, CliError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let p: u64 = tok
                .parse()
                .map_err(|_| CliError::Usage(format!("bad prime {tok:?} in prime list")))?;
            require_prime(p)?;
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("prime list is empty".into()));
    }
    Ok(out)
}

fn equidist(a: &EquidistArgs, seed: u64, cache: Option<&Path>) -> Result<ResultRecord, CliError> {
    let primes = match (&a.p_list, a.p) {
        (Some(path), _) => parse_prime_list(&fs::read_to_string(path)?)?,
        (None, Some(p)) => {
            require_prime(p)?;
            vec![p]
        }
        (None, None) => return Err(CliError::Usage("one of --p-list or --p is required".into())),
    };
    let experiment = match a.mode {
        Mode::FixedEta => Experiment::FixedEta { eta: a.eta },
        Mode::Joint => Experiment::Joint {
            eta: a.eta,
            s: a.s as usize,
            grid: a.grid,
        },
        Mode::Bilinear => Experiment::Bilinear {
            s: a.s,
            seed,
            cutoff_cap: MAX_CUTOFF,
        },
    };
    let manifest = ExperimentManifest::start(
        Command::Equidist,
        params(&[
            ("experiment", serde_json::to_value(&experiment)?),
            ("primes", json!(primes)),
            ("seed", json!(seed)),
        ]),
    );
    let scan = prime_scan_with(&primes, experiment.power(), |q| {
        let ctx = load_or_build(cache, q, 1)?;
        let table = gauss_table(&ctx, GaussMethod::Fft);
        experiment.run(&ctx, &table)
    })?;
    let checks = equidist_checks(&experiment, &scan);
    let mut record = finish(
        manifest,
        SuiteOutput {
            payload: Payload::Scan(scan),
            checks,
        },
    );
    if let Some(path) = &a.csv {
        export_results(&record, ExportFormat::Csv, path)?;
    }
    record.manifest.finish();
    Ok(record)
}

/// Thresholds: scaled fixed-eta discrepancy ≤ 10 and slope ≤ -1/4 over a
/// scan; scaled joint ETK ≤ 20; bilinear d_star against the theorem's
/// right side is a finding; ETK must dominate everywhere.
pub fn equidist_checks(experiment: &Experiment, scan: &ScanResult) -> Vec<Check> {
    let reports: Vec<_> = scan.reports().collect();
    let failed = scan.rows.len() - reports.len();
    let mut checks = vec![
        Check::none("scan_failed_primes", failed),
        Check::at_most(
            "etk_dominates",
            reports.iter().map(|r| r.d_star - r.etk_bound).fold(f64::NEG_INFINITY, f64::max),
            1e-9,
        ),
    ];
    let max_scaled = reports.iter().map(|r| r.scaled).fold(0.0, f64::max);
    match experiment {
        Experiment::FixedEta { .. } => {
            checks.push(Check::at_most("fixed_eta_scaled", max_scaled, 10.0));
            if reports.len() >= 5 {
                if let Some(slope) = scan.slope {
                    checks.push(Check::at_most("fixed_eta_slope", slope, -0.25));
                }
            }
        }
        Experiment::Joint { .. } => checks.push(Check::at_most("joint_scaled_etk", max_scaled, 20.0)),
        Experiment::Bilinear { .. } => {
            checks.push(Check::at_most("bilinear_d_star_over_rhs", max_scaled, 1.0).as_finding())
        }
    }
    checks
}
