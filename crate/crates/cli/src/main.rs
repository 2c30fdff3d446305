mod commands;
mod config;
mod selftest;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::{LemmaChoice, Violation};
use config::{RunConfig, OUT_DIR_ENV};

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "sphloc", version, about = "Localization experiments for spherical partial sums of multiple Fourier series")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides SPHLOC_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Torus dimension.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Outer radius R of the vanishing ball.
    #[arg(long, global = true)]
    outer_radius: Option<f64>,
    /// Inner radius r where convergence is measured.
    #[arg(long, global = true)]
    inner_radius: Option<f64>,
    /// Cutoff transition profile: bump or smootherstep.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Quadrature grid per axis for the cutoff coefficients.
    #[arg(long, global = true)]
    psi_grid: Option<usize>,
    /// Largest cutoff coefficient index kept per axis.
    #[arg(long, global = true)]
    psi_max_index: Option<usize>,
    /// Evaluation grid per axis, a power of two.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Spectral band of the test function.
    #[arg(long, global = true)]
    band: Option<usize>,
    /// Largest shell or grouping level.
    #[arg(long, global = true)]
    kmax: Option<u32>,
    /// Largest frequency coordinate in kernel sweeps.
    #[arg(long, global = true)]
    nmax: Option<i64>,
    /// Comma-separated lambda values.
    #[arg(long, global = true)]
    lambdas: Option<String>,
    /// Test function kind.
    #[arg(long, global = true)]
    kind: Option<String>,
    /// Seed for sampled centers and random test functions.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sampled centers for grouping verification.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Comma-separated decay exponents for the cutoff report.
    #[arg(long, global = true)]
    exponents: Option<String>,
    /// Skip CSV output.
    #[arg(long, global = true)]
    no_csv: bool,
    /// Smaller problem sizes for a fast run.
    #[arg(long, global = true)]
    quick: bool,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate a lattice shell or ball.
    Enumerate {
        /// Squared radius of the shell.
        #[arg(long, conflicts_with = "ball")]
        shell: Option<i64>,
        /// Open ball |n|^2 < lambda.
        #[arg(long)]
        ball: Option<f64>,
        /// Shell center as comma-separated integers.
        #[arg(long, allow_hyphen_values = true)]
        center: Option<String>,
    },
    /// Build the annulus grouping or verify its bounds.
    Grouping {
        /// Build a single table at this k instead of verifying.
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        center: Option<String>,
    },
    /// Cutoff coefficient table and decay report.
    Cutoff,
    /// Kernel coefficient bounds.
    Kernels {
        #[arg(long, value_enum, default_value = "all")]
        verify: LemmaChoice,
    },
    /// Maximal-operator ratio on the inner ball.
    Maxop,
    /// Localization curves on the inner ball.
    Localize,
    /// Run the invariant suite.
    Selftest,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.load_file(path)?;
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.out_dir = dir.into();
        }
    }
    macro_rules! take {
        ($flag:ident => $field:ident) => {
            if let Some(v) = cli.$flag.clone() {
                cfg.$field = v.into();
            }
        };
    }
    take!(out => out_dir);
    take!(threads => threads);
    take!(dim => dim);
    take!(outer_radius => outer_radius);
    take!(inner_radius => inner_radius);
    take!(profile => profile);
    take!(psi_grid => psi_grid);
    take!(psi_max_index => psi_max_index);
    take!(grid => grid);
    take!(band => band);
    take!(kmax => k_max);
    take!(nmax => n_max);
    take!(kind => kind);
    take!(seed => seed);
    take!(samples => samples);
    if let Some(v) = &cli.lambdas {
        cfg.set("lambdas", v)?;
    }
    if let Some(v) = &cli.exponents {
        cfg.set("exponents", v)?;
    }
    if cli.no_csv {
        cfg.csv = false;
    }
    if cli.quick {
        cfg.quick = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    match &cli.command {
        Command::Enumerate { shell, ball, center } => commands::enumerate(cfg, *shell, *ball, center.as_deref()),
        Command::Grouping { k, center } => commands::grouping(cfg, *k, center.as_deref()),
        Command::Cutoff => commands::cutoff(cfg),
        Command::Kernels { verify } => commands::kernels(cfg, *verify),
        Command::Maxop => commands::experiment(cfg, true),
        Command::Localize => commands::experiment(cfg, false),
        Command::Selftest => commands::selftest(cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Violation>() {
            return EXIT_VIOLATION;
        }
        if let Some(e) = cause.downcast_ref::<sphloc::Error>() {
            return match e {
                sphloc::Error::Io(_) | sphloc::Error::Format(_) => EXIT_IO,
                _ => EXIT_CONFIG,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_CONFIG
}

fn kind_name(code: u8) -> &'static str {
    match code {
        EXIT_VIOLATION => "violation",
        EXIT_IO => "io",
        _ => "config",
    }
}

fn report(err: &anyhow::Error, code: u8) -> ExitCode {
    let body = serde_json::json!({
        "error": {
            "kind": kind_name(code),
            "message": format!("{err:#}"),
            "exit_code": code,
        }
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    // An unreadable config file is a config error, not an I/O one.
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => return report(&e, EXIT_CONFIG),
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            return report(&e.into(), EXIT_CONFIG);
        }
    }
    match dispatch(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e, exit_code(&e)),
    }
}
