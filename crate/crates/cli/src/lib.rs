//! Command-line orchestration for vibetap: flag and config handling, the
//! pipeline stages, and reproducible artifact output.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

use std::path::{Path, PathBuf};

pub use artifacts::Manifest;
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Segment,
    Features,
    Spectrogram,
    Train,
    Eval,
    Simulate,
    Pipeline,
}

/// Builds the config from an optional file plus overrides (applied in order)
/// and runs `command`.
pub fn run(command: Command, config_file: Option<&Path>, overrides: &[(String, String)]) -> Result<Manifest, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    run_with(command, &cfg, config_file)
}

pub fn run_with(command: Command, cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    use commands::*;
    match command {
        Command::Ingest => cmd_ingest(cfg, config_file),
        Command::Segment => cmd_segment(cfg, config_file),
        Command::Features => cmd_features(cfg, config_file),
        Command::Spectrogram => cmd_spectrogram(cfg, config_file),
        Command::Train => cmd_train(cfg, config_file),
        Command::Eval => cmd_eval(cfg, config_file),
        Command::Simulate => cmd_simulate(cfg, config_file),
        Command::Pipeline => cmd_pipeline(cfg, config_file),
    }
}

/// Path of the bundled demo configuration inside the source tree.
pub fn demo_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/demo.conf")
}
