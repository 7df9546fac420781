use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vibetap_cli::{run, Command};

#[derive(Parser)]
#[command(name = "vibetap", version, about = "Accelerometer speech side-channel toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Parse a raw CSV trace and write a uniform stream.
    Ingest(Common),
    /// Detect word regions in a stream.
    Segment(Common),
    /// Extract the 25 features for each region.
    Features(Common),
    /// Render region (or whole-stream) spectrogram images.
    Spectrogram(Common),
    /// Train a classifier on a feature file.
    Train(Common),
    /// Evaluate a model, a feature file, or a stream with ground truth.
    Eval(Common),
    /// Generate a synthetic corpus with ground truth.
    Simulate(Common),
    /// Simulate or ingest, then segment, extract, train and evaluate.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Resample loaded streams to this rate (Hz) first.
    #[arg(long)]
    rate: Option<f64>,
    /// Feature high-pass cutoff (Hz).
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long, value_parser = ["rf", "rss", "dt"])]
    classifier: Option<String>,
    #[arg(long, value_parser = ["holdout", "cv10"])]
    split: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stream CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ground-truth region CSV.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Region CSV.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Feature CSV.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Any other config key, as KEY=VALUE; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("seed", self.seed.map(|s| s.to_string()));
        put("rate", self.rate.map(|r| r.to_string()));
        put("cutoff", self.cutoff.map(|c| c.to_string()));
        put("classifier", self.classifier.clone());
        put("split", self.split.clone());
        put("out", path(&self.out));
        put("input", path(&self.input));
        put("truth", path(&self.truth));
        put("regions", path(&self.regions));
        put("features", path(&self.features));
        put("model", path(&self.model));
        Ok(out)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, common) = match cli.command {
        Sub::Ingest(c) => (Command::Ingest, c),
        Sub::Segment(c) => (Command::Segment, c),
        Sub::Features(c) => (Command::Features, c),
        Sub::Spectrogram(c) => (Command::Spectrogram, c),
        Sub::Train(c) => (Command::Train, c),
        Sub::Eval(c) => (Command::Eval, c),
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Pipeline(c) => (Command::Pipeline, c),
    };
    let overrides = match common.overrides() {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    match run(command, common.config.as_deref(), &overrides) {
        Ok(manifest) => {
            for out in &manifest.outputs {
                println!("{}", out.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
