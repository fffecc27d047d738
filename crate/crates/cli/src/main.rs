use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use uqtrack_cli::config::{load_config, CliError, ENV_PREFIX};
use uqtrack_cli::pipeline::run_experiment;
use uqtrack_cli::plot::{emit_plot_data, XAxis};

#[derive(Parser)]
#[command(name = "uqtrack", version, about = "Discontinuity tracking and surrogate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Worker threads for parallel sections (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Root directory for run outputs.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Merge metrics CSV files into one plot-ready series CSV.
    PlotData {
        /// Metrics CSV files produced by `run`.
        inputs: Vec<PathBuf>,
        /// Column used as the x coordinate.
        #[arg(long, value_enum, default_value = "order")]
        x: XArg,
        /// Output file (default: stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum XArg {
    Order,
    NEv,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, workers, out, seed } => {
            if let Some(n) = workers {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
            let env: Vec<(String, String)> =
                std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
            let mut cfg = load_config(&config, &env)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let output = run_experiment(&cfg, &out)?;
            for row in &output.rows {
                println!(
                    "{} {} N={} P={} n_ev={} eps_l1={:.4e} eps_mean={:.4e} eps_std={:.4e}",
                    row.experiment,
                    row.method,
                    row.order,
                    row.basis_size,
                    row.n_ev,
                    row.eps_l1,
                    row.eps_mean,
                    row.eps_std
                );
            }
            println!("wrote {}", output.run_dir.display());
            Ok(())
        }
        Command::PlotData { inputs, x, out } => {
            let x = match x {
                XArg::Order => XAxis::Order,
                XArg::NEv => XAxis::NEv,
            };
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)?;
                    let mut w = BufWriter::new(file);
                    emit_plot_data(&inputs, x, &mut w)?;
                    w.flush()?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut w = stdout.lock();
                    emit_plot_data(&inputs, x, &mut w)?;
                }
            }
            Ok(())
        }
    }
}
