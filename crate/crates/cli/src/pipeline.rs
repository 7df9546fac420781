//! Stage functions shared by the subcommands.

use std::fmt::Write as _;

use serde::Serialize;
use vibetap::features::{extract_all, write_features, FeatureConfig, FeatureVector};
use vibetap::ingest::{parse_csv_reader, resample, write_csv, ColumnMapping};
use vibetap::ml::{
    cross_validate, derive_seed, evaluate, render_table, split_train_test, Dataset, EvalReport, ReportRow,
    TrainedModel,
};
use vibetap::segment::{
    detection_rate, read_regions, segment_stream, transfer_labels, write_regions, AnnotatedRegion,
    AxisVarianceReport, TimeBase, WordRegion,
};
use vibetap::simulate::{demo_profiles, make_corpus_with, SynthConfig, DEMO_SPEAKERS, DIGIT_WORDS};
use vibetap::{Axis, SampleStream};

use crate::config::{RunConfig, SplitMode};
use crate::error::CliError;

/// Seed streams derived from the run seed.
pub const STREAM_CHANNEL: u64 = 1;
pub const STREAM_CORPUS: u64 = 2;
pub const STREAM_CLASSIFIER: u64 = 3;
pub const STREAM_SPLIT: u64 = 4;

pub fn parse_stream(bytes: &[u8]) -> Result<SampleStream, CliError> {
    Ok(parse_csv_reader(bytes, &ColumnMapping::default())?)
}

pub fn stream_csv(stream: &SampleStream) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    write_csv(stream, &ColumnMapping::default(), &mut out)?;
    Ok(out)
}

/// Applies the configured resampling; irregular streams are always put on a
/// uniform grid at their nominal rate.
pub fn prepare_stream(stream: SampleStream, cfg: &RunConfig) -> Result<SampleStream, CliError> {
    match cfg.rate {
        Some(rate) => Ok(resample(&stream, rate)?),
        None if stream.is_irregular() || !stream.is_uniform(1e-3) => {
            Ok(resample(&stream, stream.nominal_rate())?)
        }
        None => Ok(stream),
    }
}

pub fn regions_csv(regions: &[AnnotatedRegion], base: TimeBase) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    write_regions(regions, base, &mut out)?;
    Ok(out)
}

pub fn parse_regions(bytes: &[u8], stream: &SampleStream) -> Result<Vec<AnnotatedRegion>, CliError> {
    Ok(read_regions(bytes, TimeBase::of(stream))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub samples: usize,
    pub sensor_rate: f64,
    pub snr_db: f64,
    pub speakers: Vec<String>,
    pub words: Vec<String>,
    pub repetitions: usize,
    pub utterances: usize,
}

pub struct SimulatedCorpus {
    pub stream_csv: Vec<u8>,
    pub truth_csv: Vec<u8>,
    pub summary: CorpusSummary,
}

pub fn simulate_corpus(cfg: &RunConfig, seed: u64) -> Result<SimulatedCorpus, CliError> {
    if cfg.speakers == 0 || cfg.speakers > DEMO_SPEAKERS.len() {
        return Err(CliError::Usage(format!("speakers must be in 1..={}", DEMO_SPEAKERS.len())));
    }
    if cfg.words == 0 || cfg.words > DIGIT_WORDS.len() {
        return Err(CliError::Usage(format!("words must be in 1..={}", DIGIT_WORDS.len())));
    }
    let speakers = &DEMO_SPEAKERS[..cfg.speakers];
    let profiles = demo_profiles(speakers, cfg.words);
    let channel = cfg.channel(derive_seed(seed, STREAM_CHANNEL));
    let corpus = make_corpus_with(
        &profiles,
        cfg.reps,
        &channel,
        derive_seed(seed, STREAM_CORPUS),
        &cfg.layout(),
        &SynthConfig::default(),
    )?;
    Ok(SimulatedCorpus {
        stream_csv: stream_csv(&corpus.stream)?,
        truth_csv: regions_csv(&corpus.truth, TimeBase::of(&corpus.stream))?,
        summary: CorpusSummary {
            samples: corpus.stream.len(),
            sensor_rate: channel.sensor_rate,
            snr_db: channel.snr_db(),
            speakers: speakers.iter().map(|s| s.0.to_string()).collect(),
            words: DIGIT_WORDS[..cfg.words].iter().map(|w| w.0.to_string()).collect(),
            repetitions: cfg.reps,
            utterances: corpus.truth.len(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionSummary {
    pub rate: f64,
    pub axis: Axis,
    pub variances: AxisVarianceReport,
    pub detected: usize,
    /// Present when ground truth was supplied.
    pub truth_regions: Option<usize>,
    pub labelled: Option<usize>,
    /// Share of truth regions matched at IoU >= 0.5.
    pub detection_rate: Option<f64>,
    /// Share of truth regions matched at IoU >= 0.7.
    pub detection_rate_iou70: Option<f64>,
}

pub struct Segmented {
    /// Detections, labelled from the truth when it was given.
    pub regions: Vec<AnnotatedRegion>,
    pub summary: DetectionSummary,
}

pub fn segment(stream: &SampleStream, cfg: &RunConfig, truth: Option<&[AnnotatedRegion]>) -> Result<Segmented, CliError> {
    let seg = segment_stream(stream, &cfg.segment_filter(), &cfg.segment)?;
    let mut summary = DetectionSummary {
        rate: stream.nominal_rate(),
        axis: seg.axis,
        variances: seg.variances,
        detected: seg.regions.len(),
        truth_regions: None,
        labelled: None,
        detection_rate: None,
        detection_rate_iou70: None,
    };
    let regions = match truth {
        Some(truth) => {
            let plain: Vec<WordRegion> = truth.iter().map(|t| t.region).collect();
            let labelled = transfer_labels(&seg.regions, truth, cfg.match_iou);
            summary.truth_regions = Some(truth.len());
            summary.labelled = Some(labelled.len());
            summary.detection_rate = Some(detection_rate(&seg.regions, &plain, 0.5));
            summary.detection_rate_iou70 = Some(detection_rate(&seg.regions, &plain, 0.7));
            labelled
        }
        None => seg
            .regions
            .iter()
            .map(|&region| AnnotatedRegion {
                region,
                labels: Vec::new(),
            })
            .collect(),
    };
    Ok(Segmented { regions, summary })
}

/// Feature vectors for `regions`, labelled from `label_column` when given.
pub fn features(
    stream: &SampleStream,
    regions: &[AnnotatedRegion],
    cfg: &RunConfig,
    label_column: Option<&str>,
) -> Result<Vec<FeatureVector>, CliError> {
    let config = FeatureConfig {
        filter: Some(cfg.feature_filter()),
        label_column: label_column.map(str::to_string),
    };
    Ok(extract_all(stream, regions, &config)?)
}

/// Copies of `vectors` labelled by another annotation column.
pub fn relabel(
    vectors: &[FeatureVector],
    regions: &[AnnotatedRegion],
    column: &str,
) -> Result<Vec<FeatureVector>, CliError> {
    vectors
        .iter()
        .map(|v| {
            let label = regions[v.region_id]
                .label(column)
                .ok_or_else(|| CliError::data(format!("region {} has no `{column}` label", v.region_id)))?;
            Ok(FeatureVector {
                label: label.to_string(),
                ..v.clone()
            })
        })
        .collect()
}

pub fn features_csv(vectors: &[FeatureVector]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    write_features(vectors, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskResult {
    pub task: String,
    pub classifier: String,
    pub split: String,
    pub vectors: usize,
    pub report: EvalReport,
}

/// Runs the configured protocol on one labelled vector set. Also returns the
/// model that the protocol's final fit produced (the training side for a
/// holdout split, all vectors for cross-validation).
pub fn evaluate_vectors(
    task: &str,
    vectors: &[FeatureVector],
    cfg: &RunConfig,
    seed: u64,
) -> Result<(TaskResult, TrainedModel), CliError> {
    let data = Dataset::from_vectors(vectors)?;
    let spec = cfg.classifier_spec(derive_seed(seed, STREAM_CLASSIFIER));
    let (report, model) = match cfg.split {
        SplitMode::Holdout => {
            let (train, test) = split_train_test(&data, cfg.train_fraction, derive_seed(seed, STREAM_SPLIT))?;
            let model = spec.train(&train)?;
            (predict_report(&model, &test)?, model)
        }
        SplitMode::Cv10 => {
            let report = cross_validate(&data, 10, &spec, derive_seed(seed, STREAM_SPLIT))?;
            (report, spec.train(&data)?)
        }
    };
    Ok((
        TaskResult {
            task: task.to_string(),
            classifier: spec.display_name().to_string(),
            split: cfg.split.to_string(),
            vectors: data.len(),
            report,
        },
        model,
    ))
}

/// Confusion-matrix report of `model` on `data`; classes follow the model.
pub fn predict_report(model: &TrainedModel, data: &Dataset) -> Result<EvalReport, CliError> {
    let n = model.classes.len();
    let mut confusion = vec![vec![0u64; n]; n];
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        let actual = model
            .classes
            .iter()
            .position(|c| *c == data.classes[label])
            .ok_or_else(|| CliError::data(format!("class `{}` is unknown to the model", data.classes[label])))?;
        confusion[actual][model.predict_index(row)?] += 1;
    }
    Ok(evaluate(&confusion, &model.classes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutput {
    pub seed: u64,
    pub dataset: String,
    pub detection: Option<DetectionSummary>,
    pub tasks: Vec<TaskResult>,
}

/// Plain-text report: the detection table, then per-task detail.
pub fn render_report(out: &EvalOutput) -> String {
    let rows: Vec<ReportRow<'_>> = out
        .tasks
        .iter()
        .map(|t| ReportRow {
            detection: &t.task,
            classifier: &t.classifier,
            dataset: &out.dataset,
            report: &t.report,
        })
        .collect();
    let mut text = render_table(&rows);
    if let Some(d) = &out.detection {
        let _ = writeln!(text, "\nSegmentation: axis {}, {} regions at {} Hz", d.axis, d.detected, d.rate);
        if let (Some(t), Some(r)) = (d.truth_regions, d.detection_rate) {
            let _ = writeln!(text, "Detection rate: {:.1}% of {t} truth regions (IoU >= 0.5)", 100.0 * r);
        }
    }
    for t in &out.tasks {
        let _ = writeln!(text, "\n== {} ({}, {}, {} vectors) ==", t.task, t.classifier, t.split, t.vectors);
        text.push_str(&t.report.render_detail());
    }
    text
}

/// Everything downstream of a loaded stream: segmentation against `truth`,
/// features and one evaluation per configured task.
pub struct Analysis {
    pub segmented: Segmented,
    pub per_task: Vec<(Vec<FeatureVector>, TrainedModel)>,
    pub output: EvalOutput,
}

pub fn analyse(
    stream: &SampleStream,
    truth: &[AnnotatedRegion],
    cfg: &RunConfig,
    seed: u64,
    dataset: String,
) -> Result<Analysis, CliError> {
    if cfg.tasks.is_empty() {
        return Err(CliError::Usage("no tasks configured".into()));
    }
    let segmented = segment(stream, cfg, Some(truth))?;
    if segmented.regions.is_empty() {
        return Err(CliError::data("no detected region matches the ground truth"));
    }
    let base = features(stream, &segmented.regions, cfg, None)?;
    let mut per_task = Vec::new();
    let mut tasks = Vec::new();
    for task in &cfg.tasks {
        let vectors = relabel(&base, &segmented.regions, task)?;
        let (result, model) = evaluate_vectors(task, &vectors, cfg, seed)?;
        tasks.push(result);
        per_task.push((vectors, model));
    }
    let output = EvalOutput {
        seed,
        dataset,
        detection: Some(segmented.summary.clone()),
        tasks,
    };
    Ok(Analysis {
        segmented,
        per_task,
        output,
    })
}
