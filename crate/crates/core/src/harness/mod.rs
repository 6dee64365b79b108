//! Experiment configuration, Monte Carlo runner and CSV output.

mod config;
mod run;
mod table;

pub use config::{
    db_to_linear, dbm_to_watts, load_config, BcdFile, ConfigFile, Experiment, ExperimentConfig, Flags, ScenarioFile,
    DEFAULT_BER_BITS_PER_SLOT, DEFAULT_SEED,
};
pub use run::{mean_stderr, run_experiment, simulate, SchemeTrace, Simulation, TrialTrace};
pub use table::{emit_csv, metadata_path, Cell, ResultTable, RunMetadata};

/// Metadata for a finished run of `cfg`.
pub fn run_metadata(cfg: &ExperimentConfig) -> RunMetadata {
    RunMetadata {
        experiment: cfg.experiment.name().to_string(),
        config_sha256: cfg.config_hash.clone(),
        seed: cfg.seed,
        trials: cfg.trials,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}
