use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use iwkb::commands::{self, OutputFormat};
use iwkb::config::RunConfig;
use iwkb::Error;

#[derive(Parser)]
#[command(name = "iwkb", version, about = "Instantaneous WKB reflection/transmission profiles")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Number of grid points.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    xmin: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    xmax: Option<f64>,
    /// Oracle convergence tolerance on T.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Kv,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample the potential: x,V,E.
    Potential,
    /// Fit piecewise segments and print the model.
    Fit,
    /// Solve the boundary constants c, c1, c2.
    Constants,
    /// Instantaneous T(x), R(x) profile.
    Profile,
    /// IWKB far-field T against the step oracle.
    Compare,
    /// Converged transfer-matrix scattering.
    Oracle,
}

fn run(cli: &Cli) -> Result<String, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config { line: None, msg: "--config is required".into() })?;
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(n) = cli.grid {
        cfg.grid = n;
    }
    if let Some(x) = cli.xmin {
        cfg.x_min = x;
    }
    if let Some(x) = cli.xmax {
        cfg.x_max = x;
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    cfg.validate()?;
    let format = cli.format.map(|f| match f {
        Format::Csv => OutputFormat::Csv,
        Format::Kv => OutputFormat::Kv,
    });
    match cli.command {
        Command::Potential => commands::cmd_potential(&cfg, format),
        Command::Fit => commands::cmd_fit(&cfg, format),
        Command::Constants => commands::cmd_constants(&cfg, format),
        Command::Profile => commands::cmd_profile(&cfg, format),
        Command::Compare => commands::cmd_compare(&cfg, format),
        Command::Oracle => commands::cmd_oracle(&cfg, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iwkb: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
