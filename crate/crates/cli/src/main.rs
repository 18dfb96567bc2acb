//! `wecfarm`: site climates, hydrodynamic dumps, farm simulation,
//! optimization studies and layout sweeps from the command line.

mod commands;
mod failure;
mod manifest;
mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wecfarm::hydro::BackendKind;
use wecfarm::optimize::WaveSpec;

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "wecfarm", version, about = "Wave energy converter farm simulation and co-design studies")]
struct Cli {
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or check a site-climate CSV.
    Site(SiteArgs),
    /// Dump array hydrodynamic coefficients over the frequency grid.
    Hydro(StudyArgs),
    /// Evaluate a fixed design: power, p_v, q-factor, natural frequency.
    Simulate(StudyArgs),
    /// Run an optimization study.
    Optimize(StudyArgs),
    /// Sweep the position of one device over a grid.
    Sweep(StudyArgs),
}

#[derive(Debug, Args)]
pub struct SiteArgs {
    /// Synthetic profile: high-energy or low-energy.
    #[arg(long, value_name = "PROFILE", conflicts_with = "check")]
    pub synth: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Climate CSV to validate and summarize.
    #[arg(long, value_name = "CSV")]
    pub check: Option<PathBuf>,
    /// Output CSV for `--synth`.
    #[arg(short, long, value_name = "CSV")]
    pub out: Option<PathBuf>,
    /// Overwrite existing output.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Study TOML, or a `manifest.json` from an earlier run.
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in study preset.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Site-climate CSV; repeat for several sites. Replaces the spec's climates.
    #[arg(long, value_name = "CSV")]
    pub climate: Vec<PathBuf>,
    #[arg(long, value_name = "isolated|pa|ms")]
    pub backend: Option<BackendKind>,
    /// Device power limit in W, or `none`.
    #[arg(long, value_name = "W")]
    pub p_limit: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// climate | regular-modal | regular:H,T | irregular:Hs,Tp
    #[arg(long, value_name = "WAVE")]
    pub wave: Option<WaveSpec>,
    /// Override any spec field, e.g. `--set ga.generations=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Coefficient cache file (default: `<out>/coefficients.cache`).
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    /// Print the resolved study TOML and exit.
    #[arg(long)]
    pub print_spec: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let out = commands::Output { quiet: cli.quiet };
    let result = match &cli.command {
        Command::Site(a) => commands::site(a, &out),
        Command::Hydro(a) => commands::hydro(a, &out),
        Command::Simulate(a) => commands::simulate(a, &out),
        Command::Optimize(a) => commands::optimize(a, &out),
        Command::Sweep(a) => commands::sweep(a, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
