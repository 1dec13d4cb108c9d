//! Command-line front end: construct a run, verify it, read density
//! profiles, and export spectra.
//!
//! Exit codes: 0 on success (and a passing verification), 1 when a
//! verification report fails, 2 on operational errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use thinspec::construction::{run, RunConfig, SchedulerMode, SchedulerPolicy};
use thinspec::intervals::{DensityPoint, Rational};
use thinspec::io::{load_state, save_state, write_density_csv};
use thinspec::verify::{full_report, Fault, ToleranceConfig, VerificationReport};
use thinspec::GrowthIndex;

/// Environment variable overriding output precision: significant digits for
/// sample/spectrum CSVs (default 17) and decimal places for density output
/// (default 12).
const PRECISION_ENV: &str = "THINSPEC_PRECISION";

#[derive(Parser)]
#[command(
    name = "thinspec",
    version,
    about = "Iterative construction of near-indicator signals with sparse spectra",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the construction and save the state directory.
    Construct(ConstructArgs),
    /// Recompute the per-stage identities of a saved state and report
    /// residuals.
    Verify(VerifyArgs),
    /// Exact windowed measures of the accumulated spectrum.
    Density(DensityArgs),
    /// Export the discrete spectrum of a stored signal as CSV.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchedulerArg {
    Minimal,
    SlowDensity,
}

#[derive(Args)]
struct ConstructArgs {
    /// Number of correction stages.
    #[arg(long, default_value_t = 4)]
    iters: usize,
    #[arg(long, value_enum, default_value_t = SchedulerArg::Minimal)]
    scheduler: SchedulerArg,
    /// Extra separation added to the minimal admissible frequency.
    #[arg(long, default_value_t = 1)]
    margin: i64,
    /// Sparsity index for the slow-density scheduler: `linear`,
    /// `linear:SCALE`, or `constant:VALUE`.
    #[arg(long)]
    growth: Option<String>,
    /// Window half-width T (powers of two keep sample times exact).
    #[arg(long, default_value_t = 128.0)]
    window: f64,
    /// Grid Nyquist target as a multiple of the final hull radius.
    #[arg(long, default_value_t = 4.0)]
    oversample: f64,
    /// Refuse grids needing more samples than this.
    #[arg(long, default_value_t = 1 << 24)]
    sample_cap: usize,
    /// Keep per-stage correction samples (needed by sample-level checks).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    retain_g: bool,
    /// Output directory for state.json and the sample CSVs.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// State directory (or path to its state.json).
    #[arg(long)]
    state: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    rel_quad: f64,
    #[arg(long, default_value_t = 1e-6)]
    rel_ortho: f64,
    #[arg(long, default_value_t = 1e-5)]
    rel_leak: f64,
    #[arg(long, default_value_t = 4)]
    guard_bins: u32,
    /// Deliberately corrupt one quantity first, as CHECK@STAGE
    /// (e.g. `mass@1`); the report must then fail exactly that record.
    #[arg(long)]
    inject: Option<String>,
    /// Write the full report as JSON to this path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    /// State directory (or path to its state.json).
    #[arg(long)]
    state: PathBuf,
    /// Largest window radius; requires --step. Decimal values are parsed
    /// exactly (e.g. 12 or 0.5).
    #[arg(long)]
    rmax: Option<String>,
    /// Radius increment; requires --rmax.
    #[arg(long)]
    step: Option<String>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// State directory (or path to its state.json).
    #[arg(long)]
    state: PathBuf,
    /// Which signal: `f0`, `final`, or `g:N` for stage N.
    #[arg(long)]
    which: String,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Construct(args) => cmd_construct(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Density(args) => cmd_density(args),
        Command::Spectrum(args) => cmd_spectrum(args),
    }
}

fn csv_sig_digits() -> usize {
    precision_override().map(|p| p.clamp(1, 17)).unwrap_or(17)
}

fn density_decimal_digits() -> u32 {
    precision_override()
        .map(|p| p.clamp(1, 17) as u32)
        .unwrap_or(12)
}

fn precision_override() -> Option<usize> {
    std::env::var(PRECISION_ENV).ok()?.trim().parse().ok()
}

fn parse_growth(spec: Option<&str>) -> Result<GrowthIndex> {
    let Some(spec) = spec else {
        return Ok(GrowthIndex::default());
    };
    let (kind, value) = match spec.split_once(':') {
        Some((kind, value)) => (kind.trim(), Some(value.trim())),
        None => (spec.trim(), None),
    };
    let parse = |v: Option<&str>, default: i64| -> Result<i64> {
        match v {
            None => Ok(default),
            Some(text) => text
                .parse()
                .with_context(|| format!("bad growth parameter '{text}'")),
        }
    };
    match kind {
        "linear" => Ok(GrowthIndex::Linear {
            scale: parse(value, 1)?,
        }),
        "constant" => {
            let value =
                value.ok_or_else(|| anyhow!("growth 'constant' needs a value, e.g. constant:3"))?;
            Ok(GrowthIndex::Constant {
                value: value.parse().context("bad growth parameter")?,
            })
        }
        other => bail!("unknown growth '{other}': expected linear[:SCALE] or constant:VALUE"),
    }
}

fn cmd_construct(args: ConstructArgs) -> Result<ExitCode> {
    if args.iters == 0 {
        bail!("--iters must be at least 1");
    }
    let policy = SchedulerPolicy {
        mode: match args.scheduler {
            SchedulerArg::Minimal => SchedulerMode::Minimal,
            SchedulerArg::SlowDensity => SchedulerMode::SlowDensity,
        },
        margin: args.margin,
        growth: parse_growth(args.growth.as_deref())?,
    };
    let config = RunConfig {
        iters: args.iters,
        half_width: args.window,
        oversample: args.oversample,
        sample_cap: args.sample_cap,
        retain_g: args.retain_g,
    };
    let state = run(&config, &policy).context("construction refused")?;
    save_state(&state, &args.out, csv_sig_digits())
        .with_context(|| format!("writing state to {}", args.out.display()))?;
    let grid = state.grid();
    println!(
        "constructed {} stages on [-{}, {}] with {} samples (delta = {}, nyquist = {:.2})",
        state.stages(),
        grid.half_width(),
        grid.half_width(),
        grid.len(),
        grid.step(),
        grid.nyquist()
    );
    println!("C = ∫F = {:.12e}", state.mass());
    println!(
        "{:>5} {:>10} {:>10} {:>16} {:>16}",
        "stage", "k", "radius", "I_n", "∫G_n²"
    );
    println!(
        "{:>5} {:>10} {:>10} {:>16.9e} {:>16}",
        0,
        "-",
        state.q_hulls()[0].hi(),
        state.i_seq()[0],
        "-"
    );
    for n in 1..=state.stages() {
        println!(
            "{:>5} {:>10} {:>10} {:>16.9e} {:>16.9e}",
            n,
            state.k_seq()[n - 1],
            state.q_hulls()[n].hi(),
            state.i_seq()[n],
            state.g_energy()[n - 1]
        );
    }
    println!("state written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_report(report: &VerificationReport) {
    for check in &report.checks {
        let verdict = if check.pass { "PASS" } else { "FAIL" };
        let stage = check
            .stage
            .map(|s| s.to_string())
            .unwrap_or_else(|| "run".into());
        let tol = check
            .tol
            .map(|t| format!("{t:.3e}"))
            .unwrap_or_else(|| "info".into());
        let detail = check
            .detail
            .as_deref()
            .map(|d| format!("  ({d})"))
            .unwrap_or_default();
        println!(
            "[{verdict}] {:<20} stage {:<4} residual {:>12.5e}  tol {tol}{detail}",
            check.name, stage, check.residual
        );
    }
    let failing = report.failing().count();
    println!(
        "{}: {} checks, {} failing",
        if report.pass { "PASS" } else { "FAIL" },
        report.checks.len(),
        failing
    );
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let state = load_state(&args.state)
        .with_context(|| format!("loading state from {}", args.state.display()))?;
    let tol = ToleranceConfig {
        rel_quad: args.rel_quad,
        rel_ortho: args.rel_ortho,
        rel_leak: args.rel_leak,
        guard_bins: args.guard_bins,
        ..ToleranceConfig::default()
    };
    let fault = args
        .inject
        .as_deref()
        .map(Fault::parse)
        .transpose()
        .context("bad --inject")?;
    let report = full_report(&state, &tol, fault)?;
    print_report(&report);
    if let Some(path) = &args.report {
        let mut w = BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
        println!("report written to {}", path.display());
    }
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Parse a nonnegative decimal literal ("12", "0.5") into an exact rational.
fn parse_decimal(text: &str) -> Result<Rational> {
    let text = text.trim();
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        bail!("empty decimal literal");
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || int_part.len() + frac_part.len() > 24
    {
        bail!("bad decimal literal '{text}'");
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i128 = if digits.is_empty() {
        bail!("bad decimal literal '{text}'")
    } else {
        digits.parse().context("decimal out of range")?
    };
    let denom = 10i128.pow(frac_part.len() as u32);
    Ok(Rational::new(numer, denom))
}

fn cmd_density(args: DensityArgs) -> Result<ExitCode> {
    let state = load_state(&args.state)
        .with_context(|| format!("loading state from {}", args.state.display()))?;
    let radii: Vec<Rational> = match (&args.rmax, &args.step) {
        (Some(rmax), Some(step)) => {
            let rmax = parse_decimal(rmax)?;
            let step = parse_decimal(step)?;
            if step <= Rational::from_integer(0) {
                bail!("--step must be positive");
            }
            if rmax < step {
                bail!("--rmax must be at least --step");
            }
            let mut radii = Vec::new();
            let mut r = step;
            while r <= rmax {
                radii.push(r);
                r += step;
            }
            radii
        }
        (None, None) => state
            .q_hulls()
            .iter()
            .skip(1)
            .map(|h| Rational::from_integer(h.hi() as i128))
            .collect(),
        _ => bail!("--rmax and --step must be given together"),
    };
    if radii.is_empty() {
        bail!("no checkpoints: the state has no stages; pass --rmax and --step");
    }
    let profile: Vec<DensityPoint> = state.q_pieces().density_profile(&radii)?;
    let digits = density_decimal_digits();
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            write_density_csv(&profile, &mut w, digits)?;
            w.flush()?;
            println!("density profile written to {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            write_density_csv(&profile, &mut stdout, digits)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<ExitCode> {
    let state = load_state(&args.state)
        .with_context(|| format!("loading state from {}", args.state.display()))?;
    let which = args.which.trim().to_ascii_lowercase();
    let signal = match which.as_str() {
        "f0" => state.f0().clone(),
        "final" | "f" => state.f_final().clone(),
        g_spec if g_spec.starts_with('g') => {
            let digits = g_spec[1..].trim_start_matches(':');
            let stage: usize = digits
                .parse()
                .map_err(|_| anyhow!("bad --which '{}': expected f0, final, or g:N", args.which))?;
            let history = state
                .g_history()
                .ok_or_else(|| anyhow!("state did not retain correction samples"))?;
            if stage == 0 || stage > history.len() {
                bail!(
                    "stage {stage} out of range: state has {} correction stages",
                    history.len()
                );
            }
            history[stage - 1].clone()
        }
        _ => bail!("bad --which '{}': expected f0, final, or g:N", args.which),
    };
    let spectrum = signal.dft_spectrum();
    let digits = csv_sig_digits();
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            spectrum.write_csv(&mut w, digits)?;
            w.flush()?;
            println!("spectrum written to {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            spectrum.write_csv(&mut stdout, digits)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_decimal("12").unwrap(), Rational::from_integer(12));
        assert_eq!(parse_decimal("0.5").unwrap(), Rational::new(1, 2));
        assert_eq!(parse_decimal("1.25").unwrap(), Rational::new(5, 4));
        assert_eq!(parse_decimal(" 3 ").unwrap(), Rational::from_integer(3));
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("-1").is_err());
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("abc").is_err());
    }

    #[test]
    fn growth_parsing() {
        assert_eq!(
            parse_growth(None).unwrap(),
            GrowthIndex::Linear { scale: 1 }
        );
        assert_eq!(
            parse_growth(Some("linear")).unwrap(),
            GrowthIndex::Linear { scale: 1 }
        );
        assert_eq!(
            parse_growth(Some("linear:3")).unwrap(),
            GrowthIndex::Linear { scale: 3 }
        );
        assert_eq!(
            parse_growth(Some("constant:5")).unwrap(),
            GrowthIndex::Constant { value: 5 }
        );
        assert!(parse_growth(Some("constant")).is_err());
        assert!(parse_growth(Some("cubic")).is_err());
    }
}
