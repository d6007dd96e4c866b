//! Command-line driver for thermotopo: JSON configuration, the six pipeline
//! commands, and VTK/CSV/PNG output.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod heatmap;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "thermotopo",
    version,
    about = "Thermal topology and fin layout optimisation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Steady temperature of a fixed design.
    Solve(CommonArgs),
    /// Density-based topology optimisation.
    Topopt(CommonArgs),
    /// Objective against fin count for single and paired fins.
    Sweep(CommonArgs),
    /// Nelder–Mead search over the fin and post dimensions of one setup.
    Paramopt(CommonArgs),
    /// Thermoelectric conversion efficiency.
    Teg(CommonArgs),
    /// Time-dependent warm-up of a fixed design.
    Transient(CommonArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for the Nelder–Mead initial simplex.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; falls back to THERMOTOPO_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Topopt(_) => "topopt",
            Command::Sweep(_) => "sweep",
            Command::Paramopt(_) => "paramopt",
            Command::Teg(_) => "teg",
            Command::Transient(_) => "transient",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Topopt(a)
            | Command::Sweep(a)
            | Command::Paramopt(a)
            | Command::Teg(a)
            | Command::Transient(a) => a,
        }
    }
}

fn thread_count(arg: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match arg {
        Some(n) => Some(n),
        None => match std::env::var("THERMOTOPO_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Usage {
                message: format!("THERMOTOPO_THREADS must be a positive integer, got `{v}`"),
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Usage {
            message: "thread count must be at least 1".into(),
        });
    }
    Ok(n)
}

/// Parses arguments and runs one command inside a worker pool of the
/// requested size.
pub fn run<I, T>(argv: I) -> Result<commands::Summary, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage {
        message: e.to_string(),
    })?;
    let args = cli.command.args();
    let threads = thread_count(args.threads)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage {
        message: format!("cannot start worker pool: {e}"),
    })?;
    let cfg = RunConfig::load(&args.config)?;
    pool.install(|| commands::execute(&cli.command, &cfg, args.seed))
}

/// Entry point returning the process exit code. Help and version requests
/// print to stdout and exit 0; every other failure prints one JSON line on
/// stderr.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<T> = argv.into_iter().collect();
    if let Err(e) = Cli::try_parse_from(argv.clone()) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = e.print();
            return 0;
        }
        eprint!("{}", e.render());
    }
    match run(argv) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string(&summary).expect("summary serializes")
            );
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code()
        }
    }
}
