//! Command-line harness for the verification suites, trajectory runs, and
//! single-value evaluation.
//!
//! Exit codes: 0 all checks passed, 1 verification failures, 2 configuration
//! errors, 3 runtime aborts (collision or step underflow).

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::mpsc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use laxkit_core::dynamics;
use laxkit_core::elliptic::{EllipticModulus, FunctionClass, ThetaChar};
use laxkit_core::error::Error as CoreError;
use laxkit_core::linalg::C64;
use laxkit_core::models::{self, ModelSpec, PhasePoint};
use laxkit_core::rmatrix::{RMatrixKind, RMatrixSpec};
use laxkit_core::verify::{self, ClassLabel, Suite, SuiteConfig, VerificationReport};

#[derive(Parser)]
#[command(name = "laxkit", about = "Lax pair and R-matrix identity checker", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and stream JSON-lines reports.
    Verify(VerifyArgs),
    /// Integrate a model trajectory and report conservation drift.
    Evolve(EvolveArgs),
    /// Evaluate a single named object at given arguments.
    Eval(EvalArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated suite names (special-functions, factorization,
    /// irf-vertex, theorem1, theorem2, zero-curvature, root-systems, dynamics)
    /// or "all".
    #[arg(long, value_delimiter = ',')]
    suites: Vec<String>,
    /// Particle-number range, e.g. 2..4 (inclusive).
    #[arg(long = "N", default_value = "2..4")]
    n_range: String,
    /// Comma-separated function classes (elliptic, trig, rational).
    #[arg(long, value_delimiter = ',', default_value = "elliptic,trig,rational")]
    classes: Vec<String>,
    /// Seed for the phase-point samplers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Elliptic modulus, e.g. "i", "2i" or "0.3+0.8i".
    #[arg(long, default_value = "i")]
    tau: String,
    /// Random points per factorization cell.
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Tolerance override case=value; repeatable.
    #[arg(long = "tol")]
    tolerance: Vec<String>,
    /// Restrict root-system cases to one preset (Bn, Cn, Dn).
    #[arg(long)]
    preset: Option<String>,
    /// Output path for the JSON-lines report stream (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct EvolveArgs {
    /// Model: rs, rs-prime or cm.
    #[arg(long)]
    model: String,
    /// Function class: elliptic, trig or rational.
    #[arg(long)]
    class: String,
    /// Spectral-parameter mode for the conservation report.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    spectral: bool,
    #[arg(long, default_value = "i")]
    tau: String,
    #[arg(long, default_value = "0.11+0.02i")]
    hbar: String,
    #[arg(long, default_value = "1")]
    c_light: String,
    #[arg(long, default_value = "0.37")]
    nu: String,
    /// JSON file with {"q": [...], "p": [...]} (complex entries as
    /// [re, im] pairs or "a+bi" strings).
    #[arg(long)]
    initial: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Spectral point for the conservation table.
    #[arg(long, default_value = "0.27+0.13i")]
    z: String,
    /// Output path for the trajectory (JSON lines of t, q, p).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Object: theta, phi, f, e1, e2, wp, lax, m, rmatrix-entry.
    what: String,
    #[arg(long, default_value = "i")]
    tau: String,
    #[arg(long, default_value = "0.5")]
    a: String,
    #[arg(long, default_value = "0.5")]
    b: String,
    #[arg(long, default_value = "0")]
    z: String,
    #[arg(long, default_value = "0")]
    z2: String,
    #[arg(long, default_value = "0.3")]
    eta: String,
    #[arg(long, default_value = "elliptic")]
    class: String,
    #[arg(long, default_value = "cm")]
    model: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, value_delimiter = ',')]
    q: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    p: Vec<String>,
    #[arg(long, default_value = "0.37")]
    nu: String,
    #[arg(long, default_value = "0.11+0.02i")]
    hbar: String,
    #[arg(long, default_value = "1")]
    c_light: String,
    #[arg(long, default_value = "true")]
    spectral: String,
    /// Row/column of the requested matrix entry.
    #[arg(long, default_value_t = 0)]
    row: usize,
    #[arg(long, default_value_t = 0)]
    col: usize,
    /// R-matrix kind for rmatrix-entry: bb, felder, acf.
    #[arg(long, default_value = "bb")]
    kind: String,
}

/// Parses complex numbers in the forms "1.5", "2i", "1.5+2.3i", "1.5-2.3i",
/// "i", "-i" (also accepting the trailing letter j).
fn parse_complex(s: &str) -> anyhow::Result<Complex64> {
    let t = s.trim().replace(' ', "");
    let t = t.replace('j', "i");
    if t.is_empty() {
        return Err(anyhow!("empty complex literal"));
    }
    let parse_imag_coeff = |txt: &str| -> anyhow::Result<f64> {
        match txt {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => Ok(txt.parse::<f64>()?),
        }
    };
    if let Some(stripped) = t.strip_suffix('i') {
        // find the split between the real part and the imaginary coefficient
        let bytes = stripped.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-') && bytes[k - 1] != b'e' && bytes[k - 1] != b'E'
            {
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re: f64 = stripped[..k].parse()?;
                let im = parse_imag_coeff(&stripped[k..])?;
                Ok(Complex64::new(re, im))
            }
            None => Ok(Complex64::new(0.0, parse_imag_coeff(stripped)?)),
        }
    } else {
        Ok(Complex64::new(t.parse::<f64>()?, 0.0))
    }
}

fn parse_class(s: &str, tau: Complex64) -> anyhow::Result<FunctionClass> {
    match s {
        "elliptic" => Ok(FunctionClass::Elliptic(
            EllipticModulus::new(tau).map_err(|e| anyhow!("{e}"))?,
        )),
        "trig" | "trigonometric" => Ok(FunctionClass::Trigonometric),
        "rational" => Ok(FunctionClass::Rational),
        other => Err(anyhow!("unknown class {other}")),
    }
}

fn format_complex(v: C64) -> String {
    format!("{:+.17e}{:+.17e}i", v.re, v.im)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Evolve(args) => cmd_evolve(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match code {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    // LAXKIT_THREADS preferred; LAXFACTOR_THREADS kept as an alias.
    let cap = std::env::var("LAXKIT_THREADS").or_else(|_| std::env::var("LAXFACTOR_THREADS"));
    if let Ok(v) = cap {
        builder = builder.num_threads(v.parse().context("thread cap must be an integer")?);
    }
    Ok(builder.build()?)
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    if args.suites.is_empty() {
        return Err(anyhow!("no suites requested; pass --suites <names> or --suites all"));
    }
    let mut suites: Vec<Suite> = Vec::new();
    for s in &args.suites {
        if s == "all" {
            suites.extend(Suite::ALL);
        } else {
            suites.push(Suite::parse(s).ok_or_else(|| anyhow!("unknown suite {s}"))?);
        }
    }
    suites.dedup();
    let (n_min, n_max) = parse_range(&args.n_range)?;
    let mut classes = Vec::new();
    for c in &args.classes {
        classes.push(ClassLabel::parse(c).ok_or_else(|| anyhow!("unknown class {c}"))?);
    }
    let tau = parse_complex(&args.tau)?;
    if tau.im <= 0.0 {
        return Err(anyhow!("tau must lie in the upper half plane"));
    }
    let mut overrides = HashMap::new();
    for t in &args.tolerance {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| anyhow!("tolerance override must be case=value"))?;
        overrides.insert(k.to_string(), v.parse::<f64>()?);
    }
    if !matches!(args.format.as_str(), "json" | "text") {
        return Err(anyhow!("format must be json or text"));
    }
    if let Some(p) = &args.preset {
        if !matches!(p.as_str(), "Bn" | "bn" | "Cn" | "cn" | "Dn" | "dn") {
            return Err(anyhow!("unknown preset {p}"));
        }
    }
    let config = SuiteConfig {
        n_min,
        n_max,
        classes,
        seed: args.seed,
        tau,
        points: args.points,
        tolerance_overrides: overrides,
        bcn_preset: args.preset.clone(),
    };

    let cases: Vec<_> = suites
        .iter()
        .flat_map(|s| verify::suite_cases(*s, &config))
        .collect();

    let mut sink: Box<dyn Write + Send> = match &args.output {
        Some(path) => Box::new(std::fs::File::create(path).context("creating report file")?),
        None => Box::new(std::io::stdout()),
    };

    // Cases run on a bounded pool; the report stream goes through a single
    // writer on this thread.
    let pool = thread_pool()?;
    let (tx, rx) = mpsc::channel::<VerificationReport>();
    let config_ref = &config;
    let mut all_passed = true;
    pool.in_place_scope(|scope| {
        for case in &cases {
            let tx = tx.clone();
            scope.spawn(move |_| {
                let rep = case.run(config_ref);
                let _ = tx.send(rep);
            });
        }
        drop(tx);
        for rep in rx.iter() {
            all_passed &= rep.passed;
            let line = match args.format.as_str() {
                "json" => serde_json::to_string(&rep).expect("report serialization"),
                _ => format!(
                    "[{}] {}/{} residual {:.3e} tol {:.1e} ({:.0} ms)",
                    if rep.passed { "PASS" } else { "FAIL" },
                    rep.suite,
                    rep.case_id,
                    rep.residual,
                    rep.tolerance,
                    rep.wall_time_ms
                ),
            };
            let _ = writeln!(sink, "{line}");
        }
    });
    sink.flush().ok();
    Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn parse_range(s: &str) -> anyhow::Result<(usize, usize)> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: usize = a.parse()?;
        let hi: usize = b.trim_start_matches('=').parse()?;
        if lo < 1 || hi < lo {
            return Err(anyhow!("invalid range {s}"));
        }
        Ok((lo, hi))
    } else {
        let n: usize = s.parse()?;
        Ok((n, n))
    }
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

fn parse_state_file(path: &PathBuf) -> anyhow::Result<PhasePoint> {
    let text = std::fs::read_to_string(path).context("reading initial condition file")?;
    let v: serde_json::Value =
        serde_json::from_str(&text).context("parsing initial condition JSON")?;
    let read_vec = |key: &str| -> anyhow::Result<Vec<C64>> {
        let arr = v
            .get(key)
            .and_then(|x| x.as_array())
            .ok_or_else(|| anyhow!("missing array field {key}"))?;
        arr.iter()
            .map(|e| match e {
                serde_json::Value::Array(pair) if pair.len() == 2 => Ok(Complex64::new(
                    pair[0].as_f64().ok_or_else(|| anyhow!("non-numeric entry"))?,
                    pair[1].as_f64().ok_or_else(|| anyhow!("non-numeric entry"))?,
                )),
                serde_json::Value::Number(x) => Ok(Complex64::new(x.as_f64().unwrap(), 0.0)),
                serde_json::Value::String(s) => parse_complex(s),
                _ => Err(anyhow!("entries must be numbers, [re, im] pairs or strings")),
            })
            .collect()
    };
    let q = read_vec("q")?;
    let p = read_vec("p")?;
    PhasePoint::new(q, p).map_err(|e| anyhow!("{e}"))
}

fn cmd_evolve(args: EvolveArgs) -> anyhow::Result<ExitCode> {
    let tau = parse_complex(&args.tau)?;
    let class = parse_class(&args.class, tau)?;
    let initial = parse_state_file(&args.initial)?;
    let n = initial.n();
    let spec = match args.model.as_str() {
        "rs" => ModelSpec::rs(
            class,
            args.spectral,
            n,
            parse_complex(&args.hbar)?,
            parse_complex(&args.c_light)?,
        ),
        "rs-prime" => ModelSpec::rs_prime(
            class,
            args.spectral,
            n,
            parse_complex(&args.hbar)?,
            parse_complex(&args.c_light)?,
        ),
        "cm" => ModelSpec::cm(class, args.spectral, n, parse_complex(&args.nu)?),
        other => return Err(anyhow!("unknown model {other}")),
    }
    .map_err(|e| anyhow!("{e}"))?;

    let traj = match dynamics::integrate(&spec, &initial, args.t_end, args.tol) {
        Ok(t) => t,
        Err(CoreError::CollisionDetected { time, pair }) => {
            eprintln!("collision at t = {time} between particles {pair:?}");
            return Ok(ExitCode::from(3));
        }
        Err(CoreError::StepUnderflow(t)) => {
            eprintln!("step underflow at t = {t}");
            return Ok(ExitCode::from(3));
        }
        Err(e) => return Err(anyhow!("{e}")),
    };

    let mut sink: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout()),
    };
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let rec = serde_json::json!({
            "t": t,
            "q": state.q.iter().map(|v| vec![v.re, v.im]).collect::<Vec<_>>(),
            "p": state.p.iter().map(|v| vec![v.re, v.im]).collect::<Vec<_>>(),
        });
        writeln!(sink, "{rec}")?;
    }
    let z = parse_complex(&args.z)?;
    let rep = dynamics::conservation_report(&spec, &traj, z).map_err(|e| anyhow!("{e}"))?;
    let table = serde_json::json!({
        "conservation": {
            "trace_drifts": rep.trace_drifts,
            "eigenvalue_drift": rep.eigenvalue_drift,
            "energy_drift": rep.energy_drift,
        }
    });
    writeln!(sink, "{table}")?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn cmd_eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let tau = parse_complex(&args.tau)?;
    let z = parse_complex(&args.z)?;
    let modulus = EllipticModulus::new(tau).map_err(|e| anyhow!("{e}"))?;
    let class = parse_class(&args.class, tau)?;
    let value: C64 = match args.what.as_str() {
        "theta" => {
            let a = parse_rational(&args.a)?;
            let b = parse_rational(&args.b)?;
            let chr = ThetaChar::from_parts(a.0, a.1, b.0, b.1);
            laxkit_core::elliptic::theta_char(&chr, z, &modulus).map_err(|e| anyhow!("{e}"))?
        }
        "phi" => laxkit_core::elliptic::kronecker_phi(z, parse_complex(&args.eta)?, &class)
            .map_err(|e| anyhow!("{e}"))?,
        "f" => laxkit_core::elliptic::kronecker_f(z, parse_complex(&args.eta)?, &class)
            .map_err(|e| anyhow!("{e}"))?,
        "e1" => laxkit_core::elliptic::eisenstein1(z, &class).map_err(|e| anyhow!("{e}"))?,
        "e2" => laxkit_core::elliptic::eisenstein2(z, &class).map_err(|e| anyhow!("{e}"))?,
        "wp" => laxkit_core::elliptic::weierstrass_p(z, &class).map_err(|e| anyhow!("{e}"))?,
        "lax" | "m" => {
            let phase = phase_from_args(&args)?;
            let spectral: bool = args.spectral.parse().unwrap_or(true);
            let spec = match args.model.as_str() {
                "rs" => ModelSpec::rs(
                    class,
                    spectral,
                    phase.n(),
                    parse_complex(&args.hbar)?,
                    parse_complex(&args.c_light)?,
                ),
                "rs-prime" => ModelSpec::rs_prime(
                    class,
                    spectral,
                    phase.n(),
                    parse_complex(&args.hbar)?,
                    parse_complex(&args.c_light)?,
                ),
                "cm" => ModelSpec::cm(class, spectral, phase.n(), parse_complex(&args.nu)?),
                other => return Err(anyhow!("unknown model {other}")),
            }
            .map_err(|e| anyhow!("{e}"))?;
            let mat = if args.what == "lax" {
                models::lax(&spec, &phase, z).map_err(|e| anyhow!("{e}"))?
            } else {
                models::m_matrix(&spec, &phase, z).map_err(|e| anyhow!("{e}"))?
            };
            // print the full matrix, return the requested entry
            for i in 0..mat.rows() {
                let row: Vec<String> =
                    (0..mat.cols()).map(|j| format_complex(mat[(i, j)])).collect();
                println!("[{}]", row.join(", "));
            }
            mat[(args.row, args.col)]
        }
        "rmatrix-entry" => {
            let kind = match args.kind.as_str() {
                "bb" => RMatrixKind::BaxterBelavin,
                "felder" => RMatrixKind::Felder,
                "acf" => RMatrixKind::Acf,
                other => return Err(anyhow!("unknown R-matrix kind {other}")),
            };
            let q = if args.q.is_empty() {
                None
            } else {
                Some(
                    args.q
                        .iter()
                        .map(|s| parse_complex(s))
                        .collect::<anyhow::Result<Vec<_>>>()?,
                )
            };
            let spec = RMatrixSpec::new(kind, args.n, parse_complex(&args.hbar)?, modulus, q)
                .map_err(|e| anyhow!("{e}"))?;
            let r = laxkit_core::rmatrix::r_matrix(&spec, z, parse_complex(&args.z2)?)
                .map_err(|e| anyhow!("{e}"))?;
            r.matrix()[(args.row, args.col)]
        }
        other => return Err(anyhow!("unknown object {other}")),
    };
    println!("{}", format_complex(value));
    Ok(ExitCode::SUCCESS)
}

fn parse_rational(s: &str) -> anyhow::Result<(i64, i64)> {
    if let Some((a, b)) = s.split_once('/') {
        Ok((a.parse()?, b.parse()?))
    } else {
        let v: f64 = s.parse()?;
        // decimals restricted to small denominators
        for den in [1i64, 2, 3, 4, 5, 6, 8, 10, 12] {
            let num = (v * den as f64).round();
            if ((num / den as f64) - v).abs() < 1e-12 {
                return Ok((num as i64, den));
            }
        }
        Err(anyhow!("characteristic {s} is not a small rational"))
    }
}

fn phase_from_args(args: &EvalArgs) -> anyhow::Result<PhasePoint> {
    if args.q.is_empty() || args.p.is_empty() {
        return Err(anyhow!("--q and --p are required for matrix evaluation"));
    }
    let q = args
        .q
        .iter()
        .map(|s| parse_complex(s))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let p = args
        .p
        .iter()
        .map(|s| parse_complex(s))
        .collect::<anyhow::Result<Vec<_>>>()?;
    PhasePoint::new(q, p).map_err(|e| anyhow!("{e}"))
}
