//! Command-line front end: `simulate`, `diagnose`, `rates`, `verify`.

pub mod commands;
pub mod config;
pub mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::rates::TheoremId;
use commands::Which;
use config::RunConfig;
use verify::Suite;

#[derive(Debug, Parser)]
#[command(name = "landau-lab", version, about = "Landau equation laboratory")]
pub struct Cli {
    /// Run configuration (TOML or JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for randomized sweeps; overrides the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "K", env = "LANDAU_LAB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation into a run directory.
    Simulate,
    /// Compute reports for a run directory or a snapshot file.
    Diagnose {
        /// weights, poincare or coefficients.
        which: String,
        /// Run directory or snapshot file.
        input: PathBuf,
        /// Required when the input is a bare snapshot.
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Fit decay exponents to a stored run.
    Rates {
        /// Run directory.
        input: PathBuf,
        /// main_1, very_soft or coulomb.
        #[arg(long)]
        theorem: String,
        /// Ball radii; repeat or separate with commas.
        #[arg(long = "radius", value_delimiter = ',', default_value = "2")]
        radii: Vec<f64>,
    },
    /// Run the acceptance suite.
    Verify {
        /// quick or full.
        suite: String,
    },
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(k) = threads {
        if k == 0 {
            return Err(Error::Config("threads: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(format!("threads: {e}")))?;
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for simulate".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

/// Parses arguments, runs the command and maps the outcome to an exit code:
/// 0 on success, 1 when a verification gate fails, 2 on usage or input errors.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    init_threads(cli.threads)?;
    match &cli.command {
        Command::Simulate => {
            let (cfg, base) = load_config(cli)?;
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("output directory: pass --out or set output_dir".into()))?;
            let manifest = commands::simulate(&cfg, &out, &base)?;
            println!(
                "{}: {} snapshots, {} files",
                out.display(),
                manifest.snapshots.len(),
                manifest.files.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose { which, input, gamma } => {
            let which: Which = which.parse()?;
            let loaded = commands::load_input(input)?;
            let out = cli.out.clone().unwrap_or_else(|| loaded.dir.clone());
            std::fs::create_dir_all(&out)?;
            for name in commands::diagnose(&loaded, which, *gamma, &out)? {
                println!("{}", out.join(name).display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Rates { input, theorem, radii } => {
            let theorem: TheoremId = theorem.parse()?;
            let out = cli.out.clone().unwrap_or_else(|| input.clone());
            std::fs::create_dir_all(&out)?;
            for name in commands::rates_command(input, theorem, radii, &out)? {
                println!("{}", out.join(name).display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let seed = cli.seed.unwrap_or(0);
            println!("verify {suite} (seed {seed})");
            let outcomes = verify::run_suite(suite, seed, |o| {
                println!("{}", o.line());
                eprintln!("   criterion {} took {:.1} s", o.id, o.elapsed.as_secs_f64());
            });
            if let Some(out) = &cli.out {
                verify::write_outputs(out, suite, seed, &outcomes)?;
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
