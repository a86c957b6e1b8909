use clap::{Parser, Subcommand};
use hankel_gof::alternatives::{power_sim, AlternativeFamily, FamilyKind};
use hankel_gof::goftest::{calibrate, gof_test, GofConfig, Method, DEFAULT_SEED};
use hankel_gof::pipeline::{load_prices, log_returns, period_covariances, read_calendar, MatrixSample, DEFAULT_PERIOD};
use hankel_gof::spectrum::{cross_check, eigen_spectrum, eigen_spectrum_roots, find_deltas_by_roots, truncation_rank};
use hankel_gof::{Error, VERSION};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_REJECT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "hankel-gof", version, about = "Goodness-of-fit tests for Wishart samples")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum SpectrumMethodArg {
    Matrix,
    Roots,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum FamilyArg {
    Scale,
    Shape,
    Contam,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of the limiting covariance operator.
    Spectrum {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        max_weight: Option<usize>,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        #[arg(long, value_enum, default_value = "matrix")]
        method: SpectrumMethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncation ranks (r, N) for a list of shapes.
    Tables {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
    },
    /// Test a matrix sample against W(alpha, Sigma).
    Test {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value = "mc")]
        method: Method,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        /// Null replicates (mc) or limit draws (asymptotic, conservative).
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, env = "HANKEL_GOF_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        allow_small_alpha: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical value of the test for a sample shape.
    Calibrate {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, env = "HANKEL_GOF_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "mc")]
        method: Method,
        #[arg(long)]
        allow_small_alpha: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prices to period covariance matrices.
    Ingest {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        calendar: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PERIOD)]
        period: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rejection rate under a contiguous alternative.
    Power {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long)]
        reps: usize,
        #[arg(long, env = "HANKEL_GOF_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Null replicates for the critical value.
        #[arg(long, default_value_t = 2000)]
        calibration_reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(value: &serde_json::Value, out: Option<&PathBuf>) -> hankel_gof::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> hankel_gof::Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

fn config(alpha: f64, method: Method, level: f64, reps: Option<usize>, seed: u64, allow: bool) -> GofConfig {
    let mut cfg = GofConfig::new(alpha);
    cfg.method = method;
    cfg.level = level;
    cfg.seed = seed;
    cfg.allow_alpha_below_theorem_bound = allow;
    if let Some(r) = reps {
        match method {
            Method::Mc => cfg.mc_reps = r,
            _ => cfg.limit_reps = r,
        }
    }
    cfg
}

fn run(cmd: Command) -> hankel_gof::Result<u8> {
    match cmd {
        Command::Spectrum { alpha, m, max_weight, eps, method, out } => {
            let res = match method {
                SpectrumMethodArg::Matrix => eigen_spectrum(alpha, m, max_weight, None, eps)?,
                SpectrumMethodArg::Roots => {
                    let ctrl = hankel_gof::linalg::SeriesControl::default();
                    let res = eigen_spectrum_roots(alpha, m, max_weight, None, eps, &ctrl)?;
                    let roots = find_deltas_by_roots(alpha, m, res.max_weight, &ctrl)?;
                    cross_check(&res, &roots)?;
                    res
                }
            };
            emit(&to_value(&res)?, out.as_ref())?;
        }
        Command::Tables { m, eps, alphas } => {
            let rows = alphas
                .iter()
                .map(|&a| {
                    let (r, n) = truncation_rank(a, m, eps)?;
                    Ok(json!({ "alpha": a, "r": r, "N": n }))
                })
                .collect::<hankel_gof::Result<Vec<_>>>()?;
            emit(&json!({ "version": VERSION, "m": m, "eps": eps, "rows": rows }), None)?;
        }
        Command::Test { input, alpha, method, level, reps, seed, allow_small_alpha, out } => {
            let sample = MatrixSample::load(&input)?;
            let cfg = config(alpha, method, level, reps, seed, allow_small_alpha);
            let report = gof_test(sample.matrices(), &cfg)?;
            emit(&to_value(&report)?, out.as_ref())?;
            return Ok(if report.reject { EXIT_REJECT } else { 0 });
        }
        Command::Calibrate { alpha, m, n, level, reps, seed, method, allow_small_alpha, out } => {
            let cfg = config(alpha, method, level, reps, seed, allow_small_alpha);
            let cal = calibrate(&cfg, m, n)?;
            let (crit, se) = cal.distribution.upper_quantile(level);
            let body = json!({
                "version": VERSION,
                "m": m,
                "n": n,
                "method": cal.method,
                "reps": cal.reps,
                "critical_value": crit,
                "critical_value_se": se,
                "config": to_value(&cfg)?,
            });
            emit(&body, out.as_ref())?;
        }
        Command::Ingest { prices, calendar, period, out } => {
            let cal = match &calendar {
                Some(p) => Some(read_calendar(std::fs::File::open(p)?)?),
                None => None,
            };
            let table = load_prices(&prices, cal.as_deref())?;
            let returns = log_returns(&table)?;
            let sample = period_covariances(&returns, period)?;
            sample.save(&out)?;
            let body = json!({
                "version": VERSION,
                "symbols": table.symbols(),
                "price_rows": table.len(),
                "return_rows": returns.len(),
                "period": period,
                "matrices": sample.len(),
                "dropped_rows": returns.len() % period,
                "calendar_fill": calendar.is_some(),
                "covariance": "mean-centered per period, denominator period - 1",
            });
            emit(&body, None)?;
        }
        Command::Power { family, alpha, m, n, level, reps, seed, calibration_reps, out } => {
            let kind = match family {
                FamilyArg::Scale => FamilyKind::Scale,
                FamilyArg::Shape => FamilyKind::Shape,
                FamilyArg::Contam => FamilyKind::Contamination,
            };
            let fam = AlternativeFamily::new(kind, alpha, m, n)?;
            let cfg = config(alpha, Method::Mc, level, Some(calibration_reps), seed, false);
            let res = power_sim(&fam, n, level, reps, seed, &cfg)?;
            let mut body = to_value(&res)?;
            body["config"] = to_value(&cfg)?;
            emit(&body, out.as_ref())?;
        }
    }
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Domain(_) | Error::NotImplemented(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
