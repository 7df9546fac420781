//! One function per subcommand. Each reads only the inputs named in the
//! config, stages its outputs and commits them with a manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use vibetap::dsp::{encode_png, highpass_stream, render_image, stft, DspError};
use vibetap::features::read_features;
use vibetap::ml::{accuracy_on, derive_seed, Dataset, TrainedModel};
use vibetap::segment::TimeBase;
use vibetap::SampleStream;

use crate::artifacts::{Manifest, Run};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{self, EvalOutput, STREAM_CLASSIFIER};

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.out
        .clone()
        .ok_or_else(|| CliError::Usage("an output directory is required (--out DIR)".into()))
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("this command needs --{flag}")))
}

fn start(command: &'static str, cfg: &RunConfig, config_file: Option<&Path>) -> Result<Run, CliError> {
    let mut run = Run::new(command, &out_dir(cfg)?);
    if let Some(path) = config_file {
        run.read_input(path)?;
    }
    Ok(run)
}

fn load_stream(run: &mut Run, cfg: &RunConfig) -> Result<SampleStream, CliError> {
    let path = require(&cfg.input, "input")?;
    let bytes = run.read_input(path)?;
    pipeline::prepare_stream(pipeline::parse_stream(&bytes)?, cfg)
}

fn dataset_name(cfg: &RunConfig, rate: f64) -> String {
    let source = cfg
        .input
        .as_deref()
        .and_then(Path::file_stem)
        .map_or_else(|| "simulated".to_string(), |s| s.to_string_lossy().into_owned());
    format!("{source} @ {} Hz", round_rate(rate))
}

fn round_rate(rate: f64) -> f64 {
    (rate * 1e6).round() / 1e6
}

#[derive(Serialize)]
struct IngestSummary {
    samples_in: usize,
    nominal_rate_in: f64,
    irregular: bool,
    samples: usize,
    rate: f64,
    duration_s: f64,
    units: String,
}

pub fn cmd_ingest(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let mut run = start("ingest", cfg, config_file)?;
    let path = require(&cfg.input, "input")?;
    let raw = pipeline::parse_stream(&run.read_input(path)?)?;
    let summary_in = (raw.len(), raw.nominal_rate(), raw.is_irregular());
    let stream = pipeline::prepare_stream(raw, cfg)?;
    run.add_output("stream.csv", pipeline::stream_csv(&stream)?);
    run.add_json(
        "ingest.json",
        &IngestSummary {
            samples_in: summary_in.0,
            nominal_rate_in: summary_in.1,
            irregular: summary_in.2,
            samples: stream.len(),
            rate: stream.nominal_rate(),
            duration_s: stream.duration(),
            units: stream.units.clone(),
        },
    )?;
    run.commit(cfg)
}

pub fn cmd_simulate(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let seed = cfg.require_seed()?;
    let mut run = start("simulate", cfg, config_file)?;
    let corpus = pipeline::simulate_corpus(cfg, seed)?;
    run.add_output("corpus.csv", corpus.stream_csv);
    run.add_output("truth.csv", corpus.truth_csv);
    run.add_json("simulate.json", &corpus.summary)?;
    run.commit(cfg)
}

pub fn cmd_segment(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let mut run = start("segment", cfg, config_file)?;
    let stream = load_stream(&mut run, cfg)?;
    let truth = match &cfg.truth {
        Some(path) => Some(pipeline::parse_regions(&run.read_input(path)?, &stream)?),
        None => None,
    };
    let seg = pipeline::segment(&stream, cfg, truth.as_deref())?;
    run.add_output("regions.csv", pipeline::regions_csv(&seg.regions, TimeBase::of(&stream))?);
    run.add_json("segment.json", &seg.summary)?;
    run.commit(cfg)
}

pub fn cmd_features(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let mut run = start("features", cfg, config_file)?;
    let stream = load_stream(&mut run, cfg)?;
    let regions_path = require(&cfg.regions, "regions")?;
    let regions = pipeline::parse_regions(&run.read_input(regions_path)?, &stream)?;
    let column = cfg
        .label_column
        .clone()
        .or_else(|| regions.first().and_then(|r| r.labels.first()).map(|(k, _)| k.clone()));
    if let Some(c) = &column {
        if let Some(r) = regions.iter().position(|r| r.label(c).is_none()) {
            return Err(CliError::data(format!("region {r} has no `{c}` label")));
        }
    }
    let vectors = pipeline::features(&stream, &regions, cfg, column.as_deref())?;
    run.add_output("features.csv", pipeline::features_csv(&vectors)?);
    run.commit(cfg)
}

#[derive(Serialize)]
struct ImageRecord {
    path: String,
    start_s: f64,
    end_s: f64,
    frames: usize,
    bins: usize,
}

#[derive(Serialize)]
struct SpectrogramSummary {
    axis: vibetap::Axis,
    window_len: usize,
    hop: usize,
    image_size: usize,
    images: Vec<ImageRecord>,
    /// Regions shorter than one STFT window.
    skipped: Vec<usize>,
}

pub fn cmd_spectrogram(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let mut run = start("spectrogram", cfg, config_file)?;
    let stream = load_stream(&mut run, cfg)?;
    let base = TimeBase::of(&stream);
    let rate = stream.nominal_rate();
    let regions = match &cfg.regions {
        Some(path) => Some(pipeline::parse_regions(&run.read_input(path)?, &stream)?),
        None => None,
    };
    let axis = match regions.as_ref().and_then(|r| r.first()) {
        Some(r) => r.region.axis,
        None => pipeline::segment(&stream, cfg, None)?.summary.axis,
    };
    let signal = highpass_stream(&stream, axis, &cfg.feature_filter())?;
    let spans: Vec<(usize, usize)> = match &regions {
        Some(list) => list.iter().map(|r| (r.region.start, r.region.end)).collect(),
        None => vec![(0, signal.len())],
    };
    let mut summary = SpectrogramSummary {
        axis,
        window_len: cfg.stft.window_len,
        hop: cfg.stft.hop,
        image_size: cfg.image_size,
        images: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, &(s, e)) in spans.iter().enumerate() {
        if e > signal.len() || s >= e {
            return Err(CliError::data(format!("region {i} lies outside the stream")));
        }
        let spec = match stft(&signal[s..e], rate, cfg.stft.window_len, cfg.stft.hop) {
            Ok(spec) => spec,
            Err(DspError::SegmentTooShort { .. }) if regions.is_some() => {
                summary.skipped.push(i);
                continue;
            }
            Err(err) => return Err(err.into()),
        };
        let img = render_image(&spec, cfg.image_size)?;
        let name = match regions {
            Some(_) => format!("spectrograms/region_{i:04}.png"),
            None => "spectrogram.png".to_string(),
        };
        if regions.is_none() {
            let mut csv = Vec::new();
            spec.write_csv(&mut csv)?;
            run.add_output("spectrogram.csv", csv);
        }
        run.add_output(name.clone(), encode_png(&img).map_err(CliError::data)?);
        summary.images.push(ImageRecord {
            path: name,
            start_s: base.seconds(s),
            end_s: base.seconds(e),
            frames: spec.n_frames(),
            bins: spec.n_bins(),
        });
    }
    run.add_json("spectrogram.json", &summary)?;
    run.commit(cfg)
}

fn load_vectors(run: &mut Run, cfg: &RunConfig) -> Result<Vec<vibetap::features::FeatureVector>, CliError> {
    let path = require(&cfg.features, "features")?;
    let bytes = run.read_input(path)?;
    Ok(read_features(bytes.as_slice())?)
}

#[derive(Serialize)]
struct TrainSummary {
    classifier: String,
    classes: Vec<String>,
    vectors: usize,
    training_accuracy: f64,
}

pub fn cmd_train(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let seed = cfg.require_seed()?;
    let mut run = start("train", cfg, config_file)?;
    let data = Dataset::from_vectors(&load_vectors(&mut run, cfg)?)?;
    let spec = cfg.classifier_spec(derive_seed(seed, STREAM_CLASSIFIER));
    let model = spec.train(&data)?;
    let mut json = model.to_json();
    json.push('\n');
    run.add_output("model.json", json.into_bytes());
    run.add_json(
        "train.json",
        &TrainSummary {
            classifier: spec.display_name().into(),
            classes: model.classes.clone(),
            vectors: data.len(),
            training_accuracy: accuracy_on(&model, &data)?,
        },
    )?;
    run.commit(cfg)
}

fn add_eval(run: &mut Run, output: &EvalOutput) -> Result<(), CliError> {
    run.add_json("eval.json", output)?;
    run.add_output("report.txt", pipeline::render_report(output).into_bytes());
    Ok(())
}

/// Three modes: a saved model scored on a feature file; the split protocol on
/// a feature file; or the whole analysis on a stream with ground truth.
pub fn cmd_eval(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let seed = cfg.require_seed()?;
    let mut run = start("eval", cfg, config_file)?;
    let output = if let Some(model_path) = &cfg.model {
        let text = run.read_input_text(model_path)?;
        let model = TrainedModel::from_json(&text)?;
        let data = Dataset::from_vectors(&load_vectors(&mut run, cfg)?)?;
        let report = pipeline::predict_report(&model, &data)?;
        EvalOutput {
            seed,
            dataset: dataset_name_for_features(cfg),
            detection: None,
            tasks: vec![pipeline::TaskResult {
                task: cfg.label_column.clone().unwrap_or_else(|| "label".into()),
                classifier: display_kind(model.kind()).into(),
                split: "saved model".into(),
                vectors: data.len(),
                report,
            }],
        }
    } else if cfg.features.is_some() {
        let vectors = load_vectors(&mut run, cfg)?;
        let task = cfg.label_column.clone().unwrap_or_else(|| "label".into());
        let (result, _) = pipeline::evaluate_vectors(&task, &vectors, cfg, seed)?;
        EvalOutput {
            seed,
            dataset: dataset_name_for_features(cfg),
            detection: None,
            tasks: vec![result],
        }
    } else {
        let stream = load_stream(&mut run, cfg)?;
        let truth_path = require(&cfg.truth, "truth")?;
        let truth = pipeline::parse_regions(&run.read_input(truth_path)?, &stream)?;
        let name = dataset_name(cfg, stream.nominal_rate());
        pipeline::analyse(&stream, &truth, cfg, seed, name)?.output
    };
    add_eval(&mut run, &output)?;
    run.commit(cfg)
}

fn dataset_name_for_features(cfg: &RunConfig) -> String {
    cfg.features
        .as_deref()
        .and_then(Path::file_stem)
        .map_or_else(|| "features".into(), |s| s.to_string_lossy().into_owned())
}

fn display_kind(kind: &str) -> &'static str {
    match kind {
        "random_forest" => "Random Forest",
        "random_subspace" => "Random Subspace",
        _ => "Decision Table",
    }
}

/// Simulate (or ingest) → segment → features → train/evaluate per task.
pub fn cmd_pipeline(cfg: &RunConfig, config_file: Option<&Path>) -> Result<Manifest, CliError> {
    let seed = cfg.require_seed()?;
    let mut run = start("pipeline", cfg, config_file)?;
    let (stream_bytes, truth_bytes) = match &cfg.input {
        Some(input) => {
            let truth_path = require(&cfg.truth, "truth")?;
            (run.read_input(input)?, run.read_input(truth_path)?)
        }
        None => {
            let corpus = pipeline::simulate_corpus(cfg, seed)?;
            run.add_json("simulate.json", &corpus.summary)?;
            run.add_output("corpus.csv", corpus.stream_csv.clone());
            run.add_output("truth.csv", corpus.truth_csv.clone());
            (corpus.stream_csv, corpus.truth_csv)
        }
    };
    let stream = pipeline::prepare_stream(pipeline::parse_stream(&stream_bytes)?, cfg)?;
    let truth = pipeline::parse_regions(&truth_bytes, &stream)?;
    let name = dataset_name(cfg, stream.nominal_rate());
    let analysis = pipeline::analyse(&stream, &truth, cfg, seed, name)?;
    run.add_output(
        "regions.csv",
        pipeline::regions_csv(&analysis.segmented.regions, TimeBase::of(&stream))?,
    );
    for (task, (vectors, model)) in cfg.tasks.iter().zip(&analysis.per_task) {
        run.add_output(format!("features_{task}.csv"), pipeline::features_csv(vectors)?);
        let mut json = model.to_json();
        json.push('\n');
        run.add_output(format!("model_{task}.json"), json.into_bytes());
    }
    add_eval(&mut run, &analysis.output)?;
    run.commit(cfg)
}
