use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ris_hst::harness::{emit_csv, metadata_path, run_metadata, simulate, ConfigFile, Experiment};
use ris_hst::{Error, Result};

#[derive(Parser)]
#[command(name = "ris-hst-sim", version, about = "RIS-assisted high-speed-train downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; defaults to the config's output_path, then `<experiment>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the experiment named in the config.
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Validate { config } => {
            let cfg = ConfigFile::load(&config)?.resolve()?;
            println!(
                "ok: {} with {} trials, {} sweep points, config sha256 {}",
                cfg.experiment.name(),
                cfg.trials,
                cfg.sweep.len(),
                cfg.config_hash
            );
            Ok(())
        }
        Command::Run {
            config,
            out,
            trials,
            seed,
            experiment,
        } => {
            let mut file = ConfigFile::load(&config)?;
            if let Some(name) = experiment {
                let e = Experiment::parse(&name)
                    .ok_or_else(|| Error::Config {
                        path: "--experiment".into(),
                        message: format!("unknown experiment `{name}`"),
                    })?;
                file.experiment = Some(e);
            }
            if trials.is_some() {
                file.trials = trials;
            }
            if seed.is_some() {
                file.seed = seed;
            }
            let cfg = file.resolve()?;
            let out = out
                .or_else(|| cfg.output_path.clone())
                .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.experiment.name())));

            let sim = simulate(&cfg)?;
            let table = sim.table();
            emit_csv(&table, &out, &run_metadata(&cfg))?;
            report(&out, table.rows.len());
            sim.check_failure_budget()
        }
    }
}

fn report(out: &Path, rows: usize) {
    eprintln!(
        "wrote {rows} rows to {} (metadata in {})",
        out.display(),
        metadata_path(out).display()
    );
}
