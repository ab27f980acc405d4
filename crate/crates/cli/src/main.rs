use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mcmp_cli::{report, run_experiment, sweep, sweep_csv, CliError, ExperimentConfig, SweepOptions};

#[derive(Parser)]
#[command(name = "mcmp", version, about = "Maximum and comparison principle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run a template once per value of a parameter.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Dotted path into the config, e.g. `params.H`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values (may be empty).
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        values: String,
        /// Bisection steps on the first flip of `summary.exists`.
        #[arg(long, default_value_t = 0)]
        bisect: usize,
        #[arg(long)]
        parallel: bool,
    },
    /// Tables and SVG plots from a run log.
    Report {
        #[arg(short, long)]
        log: PathBuf,
        /// Only runs of this experiment.
        #[arg(short, long)]
        experiment: Option<String>,
        /// Directory for the SVG files (default: next to the log).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)?.with_env_seed()
}

fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Schema { path: "--values".into(), message: format!("not a number: {t:?}") }))
        .collect()
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let rec = run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&rec.summary).expect("summary serializes"));
            eprintln!("config {} -> {} outputs", &rec.config_digest[..12], rec.outputs.len());
        }
        Command::Sweep { config, axis, values, bisect, parallel } => {
            let cfg = load(&config)?;
            let values = parse_values(&values)?;
            let rows = sweep(&cfg, &axis, &values, SweepOptions { parallel, bisect })?;
            let csv = sweep_csv(&rows);
            fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("sweep.csv");
            fs::write(&path, &csv)?;
            print!("{csv}");
            eprintln!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Report { log, experiment, out } => {
            let out = out.unwrap_or_else(|| log.parent().map(|p| p.join("report")).unwrap_or_else(|| PathBuf::from("report")));
            let rep = report::report(&log, experiment.as_deref(), &out)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", rep.text);
            for p in &rep.plots {
                println!("plot: {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", e.payload());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
