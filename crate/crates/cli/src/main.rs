use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpv::dgp::Model;
use gpv::error::Error;
use gpv::harness::{self, EstimateOptions, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gpv", version, about = "Valuation density estimation for first-price auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo coverage of the uniform confidence band.
    Coverage(CoverageArgs),
    /// Tabulate the asymptotic variance ratio V_QB / V_GPV.
    RatioCheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the valuation density from a bid file.
    Estimate(EstimateArgs),
    /// Run internal consistency checks.
    Selftest,
}

#[derive(Args)]
struct CoverageArgs {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "sigma")]
    theta: Option<f64>,
    /// Use the covariate design with this spread.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    n_bidders: Option<usize>,
    #[arg(long)]
    total_obs: Option<usize>,
    /// `lo,hi`
    #[arg(long)]
    range: Option<String>,
    /// Comma-separated significance levels.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    mc_reps: Option<usize>,
    #[arg(long)]
    boot_reps: Option<usize>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    trim_scale: Option<f64>,
    /// Covariate value for the covariate design.
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV with header `auction,bidder,bid[,x]`.
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 500)]
    boot_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `lo,hi`; defaults to the trimmed pseudo-valuation range.
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[arg(long)]
    h_g: Option<f64>,
    #[arg(long)]
    h_f: Option<f64>,
    #[arg(long, default_value_t = harness::DEFAULT_TRIM_SCALE)]
    trim_scale: f64,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_range(s: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Config(format!("--range: expected `lo,hi`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn coverage_config(a: &CoverageArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.apply(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
    }
    if let Some(t) = a.theta {
        cfg.model = Model::PowerHomogeneous { theta: t };
    }
    if let Some(s) = a.sigma {
        cfg.model = Model::PowerHetero { sigma: s };
    }
    if let Some(r) = &a.range {
        cfg.range = parse_range(r)?;
    }
    if let Some(al) = &a.alpha {
        cfg.set("alpha", al, 0).map_err(|_| Error::Config(format!("--alpha: invalid list `{al}`")))?;
    }
    macro_rules! take {
        ($($f:ident => $g:ident),*) => { $( if let Some(v) = a.$f { cfg.$g = v; } )* };
    }
    take!(n_bidders => n_bidders, total_obs => total_obs, mc_reps => mc_reps, boot_reps => boot_reps,
          grid_step => grid_step, seed => seed, threads => threads, trim_scale => trim_scale, x => x);
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Coverage(a) => {
            let cfg = coverage_config(&a)?;
            let rows = harness::run_coverage(&cfg)?;
            harness::write_coverage_csv(&rows, output(cfg.out.as_ref())?)?;
        }
        Command::RatioCheck { out } => {
            harness::write_ratio_csv(&harness::run_ratio_check()?, output(out.as_ref())?)?;
        }
        Command::Estimate(a) => {
            let opts = EstimateOptions {
                range: a.range.as_deref().map(parse_range).transpose()?,
                grid_step: a.grid_step,
                points: a.points,
                alpha: a.alpha,
                boot_reps: a.boot_reps,
                seed: a.seed,
                h_g: a.h_g,
                h_f: a.h_f,
                trim_scale: a.trim_scale,
                x: a.x,
                threads: a.threads,
                ..EstimateOptions::default()
            };
            let rows = harness::estimate_file(&a.input, &opts)?;
            harness::write_estimate_csv(&rows, output(a.out.as_ref())?)?;
        }
        Command::Selftest => {
            let mut all = true;
            for (name, ok, detail) in harness::selftest() {
                all &= ok;
                println!("{} {name} {detail}", if ok { "ok  " } else { "FAIL" });
            }
            if !all {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gpv: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
