//! Command-line front end: `generate`, `estimate`, `verify`, `bench`.

mod bench;
mod svg;

pub use bench::{run_bench, BenchConfig, BenchRecord, BenchStatus, CSV_HEADER};
pub use svg::render_svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cascade::{verify_chain, verify_monolithic, Algorithm, Certificate, DEFAULT_MONOLITHIC_CAP, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimateOptions, SdpBackend};
use crate::netio::{load_network_any, random_network, save_network, NetFormat, Network, DEFAULT_NORM_RANGE};
use crate::sdpsolve::DEFAULT_SDP_TOL;
use crate::spectral::spectral_norm;

#[derive(Parser, Debug)]
#[command(name = "lipcert", version, about = "Certified Lipschitz bounds for feed-forward networks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded random (or identity) network.
    Generate(GenerateArgs),
    /// Compute a certified bound and optionally write the certificate.
    Estimate(EstimateArgs),
    /// Check a certificate against a network.
    Verify(VerifyArgs),
    /// Run an estimator grid and write CSV (and optionally SVG) results.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Number of weight layers.
    #[arg(long)]
    layers: usize,
    /// Width of every hidden layer.
    #[arg(long)]
    neurons: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NORM_RANGE[0])]
    norm_lo: f64,
    #[arg(long, default_value_t = DEFAULT_NORM_RANGE[1])]
    norm_hi: f64,
    #[arg(long, default_value_t = 4)]
    input_dim: usize,
    #[arg(long, default_value_t = 1)]
    output_dim: usize,
    /// Identity weights of size `neurons` everywhere (seed and norms ignored).
    #[arg(long)]
    identity: bool,
    /// Output format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Barrier,
    Bisection,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long, default_value = "fast", value_parser = parse_algo)]
    algo: Algorithm,
    /// Where to write the certificate JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative tolerance of the SDP solves.
    #[arg(long, default_value_t = DEFAULT_SDP_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    slack: f64,
    /// Replay the chain conditions before reporting.
    #[arg(long)]
    verify: bool,
    #[arg(long, value_enum, default_value = "barrier")]
    backend: BackendArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Chain,
    Monolithic,
    Both,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    cert: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    mode: VerifyMode,
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    slack: f64,
    /// Largest dimension the monolithic check will assemble.
    #[arg(long, default_value_t = DEFAULT_MONOLITHIC_CAP)]
    cap: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "fast,trivial", value_parser = parse_algo)]
    algos: Vec<Algorithm>,
    /// Per-run limit in seconds.
    #[arg(long, default_value_t = 900.0)]
    timeout: f64,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    if a.layers == 0 || a.neurons == 0 {
        return Err(Error::Argument("--layers and --neurons must be positive".into()));
    }
    let net = if a.identity {
        Network::identity(a.layers, a.neurons)?
    } else {
        let mut dims = vec![a.input_dim];
        dims.extend(std::iter::repeat(a.neurons).take(a.layers - 1));
        dims.push(a.output_dim);
        random_network(&dims, a.seed, [a.norm_lo, a.norm_hi])?
    };
    let format = match &a.format {
        Some(f) => f.parse()?,
        None => NetFormat::from_path(&a.out).unwrap_or(NetFormat::Json),
    };
    save_network(&net, &a.out, format)?;
    let mut out = std::io::stdout().lock();
    for (i, w) in net.weights().enumerate() {
        writeln!(out, "layer {}: {}x{} norm={:.6}", i + 1, w.nrows(), w.ncols(), spectral_norm(w)?)?;
    }
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let net = load_network_any(&a.net)?;
    let opts = EstimateOptions {
        algo: a.algo,
        sdp_tol: a.tol,
        joint_tol: a.tol.min(crate::sdpsolve::DEFAULT_JOINT_TOL),
        slack: a.slack,
        verify: a.verify,
        backend: match a.backend {
            BackendArg::Barrier => SdpBackend::Barrier,
            BackendArg::Bisection => SdpBackend::Bisection,
        },
        ..Default::default()
    };
    let start = Instant::now();
    let cert = estimate(&net, &opts)?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(path) = &a.out {
        cert.save(path)?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "algo={}", cert.algo)?;
    writeln!(out, "L={:.6}", cert.bound)?;
    writeln!(out, "wall_time_s={elapsed:.6}")?;
    if !cert.fallback_layers.is_empty() {
        writeln!(out, "fallback_layers={:?}", cert.fallback_layers)?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let net = load_network_any(&a.net)?;
    let cert = Certificate::load(&a.cert)?;
    let mut out = std::io::stdout().lock();
    let mut failures = Vec::new();
    if matches!(a.mode, VerifyMode::Chain | VerifyMode::Both) {
        let r = verify_chain(&net, &cert, a.slack)?;
        for (i, m) in r.stage_min_eigs.iter().enumerate() {
            writeln!(out, "chain stage {}: min_eig={m:.6e}", i + 1)?;
        }
        writeln!(out, "chain: {}", if r.ok { "ok" } else { "FAILED" })?;
        if !r.ok {
            failures.push(format!("chain condition {} failed", r.failed_at.unwrap_or(0)));
        }
    }
    if matches!(a.mode, VerifyMode::Monolithic | VerifyMode::Both) {
        let r = verify_monolithic(&net, &cert, a.slack, a.cap)?;
        writeln!(
            out,
            "monolithic: dim={} min_eig={:.6e} scaled_min_eig={:.6e}",
            r.dim, r.min_eig, r.scaled_min_eig
        )?;
        writeln!(out, "monolithic: {}", if r.ok { "ok" } else { "FAILED" })?;
        if !r.ok {
            failures.push("monolithic matrix is not positive definite".into());
        }
    }
    if failures.is_empty() {
        writeln!(out, "certificate valid: L={:.6}", cert.bound)?;
        Ok(())
    } else {
        Err(Error::Verification(failures.join("; ")))
    }
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if !(a.timeout > 0.0 && a.timeout.is_finite()) {
        return Err(Error::Argument("--timeout must be positive".into()));
    }
    let threads = match std::env::var("ECLIPSE_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Argument(format!("ECLIPSE_THREADS={v:?} is not a positive integer")))?,
        ),
        Err(_) => None,
    };
    let config = BenchConfig {
        depths: a.depths,
        widths: a.widths,
        seeds: a.seeds,
        algos: a.algos,
        timeout: std::time::Duration::from_secs_f64(a.timeout),
        threads,
    };
    let records = run_bench(&config)?;
    bench::write_csv(&records, &a.csv)?;
    if let Some(path) = &a.svg {
        std::fs::write(path, render_svg(&records))?;
    }
    let timeouts = records.iter().filter(|r| r.status == BenchStatus::Timeout).count();
    let errors = records.iter().filter(|r| r.status == BenchStatus::Error).count();
    println!("{} records written to {}", records.len(), a.csv.display());
    if timeouts > 0 {
        eprintln!("warning: {timeouts} runs timed out");
    }
    if errors > 0 {
        eprintln!("warning: {errors} runs failed");
    }
    Ok(())
}
