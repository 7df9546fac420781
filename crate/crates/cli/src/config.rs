//! Run configuration: a flat `key = value` file, overridden by flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use vibetap::dsp::{FilterSpec, StftParams};
use vibetap::ml::{ClassifierSpec, ForestParams, SubspaceParams, TableParams};
use vibetap::segment::{SegmentParams, DEFAULT_SEGMENT_CUTOFF};
use vibetap::simulate::{ChannelSpec, CorpusLayout, DEMO_SPEAKERS, DIGIT_WORDS};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Rf,
    Rss,
    Dt,
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rf" => Ok(ClassifierKind::Rf),
            "rss" => Ok(ClassifierKind::Rss),
            "dt" => Ok(ClassifierKind::Dt),
            _ => Err(format!("unknown classifier `{s}` (expected rf, rss or dt)")),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Rf => "rf",
            ClassifierKind::Rss => "rss",
            ClassifierKind::Dt => "dt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Stratified train/test split at `train_fraction`.
    Holdout,
    /// Stratified 10-fold cross-validation.
    Cv10,
}

impl FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "holdout" => Ok(SplitMode::Holdout),
            "cv10" => Ok(SplitMode::Cv10),
            _ => Err(format!("unknown split `{s}` (expected holdout or cv10)")),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Holdout => "holdout",
            SplitMode::Cv10 => "cv10",
        })
    }
}

/// Everything a command needs besides its subcommand name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Resample every loaded stream to this rate first.
    pub rate: Option<f64>,
    /// High-pass cutoff applied before feature extraction and spectrograms.
    pub cutoff: f64,
    pub filter_order: usize,
    /// High-pass cutoff used to find word regions.
    pub segment_cutoff: f64,
    pub segment: SegmentParams,
    /// Minimum IoU for a detection to inherit a truth region's labels.
    pub match_iou: f64,
    pub stft: StftParams,
    pub image_size: usize,
    pub classifier: ClassifierKind,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: Option<usize>,
    pub n_members: usize,
    pub subspace_fraction: f64,
    pub table_folds: usize,
    pub table_bins: usize,
    pub search_termination: usize,
    pub split: SplitMode,
    pub train_fraction: f64,
    /// Label columns to evaluate, in order.
    pub tasks: Vec<String>,
    /// Label column used by `features`; defaults to the first one present.
    pub label_column: Option<String>,
    pub speakers: usize,
    pub words: usize,
    pub reps: usize,
    pub sensor_rate: f64,
    pub snr_db: f64,
    pub attenuation_db: f64,
    pub gap_s: f64,
    pub margin_s: f64,
    pub input: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let forest = ForestParams::default();
        let subspace = SubspaceParams::default();
        let table = TableParams::default();
        let layout = CorpusLayout::default();
        let channel = ChannelSpec::default();
        RunConfig {
            seed: None,
            rate: None,
            cutoff: FilterSpec::default().cutoff,
            filter_order: FilterSpec::default().order,
            segment_cutoff: DEFAULT_SEGMENT_CUTOFF,
            segment: SegmentParams::default(),
            match_iou: 0.5,
            stft: StftParams::default(),
            image_size: 128,
            classifier: ClassifierKind::Rf,
            n_trees: forest.n_trees,
            max_depth: forest.max_depth,
            min_leaf: forest.min_leaf,
            mtry: forest.mtry,
            n_members: subspace.n_members,
            subspace_fraction: subspace.subspace_fraction,
            table_folds: table.eval_folds,
            table_bins: table.bins,
            search_termination: table.search_termination,
            split: SplitMode::Cv10,
            train_fraction: 0.8,
            tasks: vec!["gender".into(), "speaker".into(), "word".into()],
            label_column: None,
            speakers: DEMO_SPEAKERS.len(),
            words: DIGIT_WORDS.len(),
            reps: 15,
            sensor_rate: channel.sensor_rate,
            snr_db: 10.0,
            attenuation_db: channel.attenuation_db,
            gap_s: layout.gap,
            margin_s: layout.margin,
            input: None,
            truth: None,
            regions: None,
            features: None,
            model: None,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
    if value == "none" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn show_path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse_opt(key, v)?,
            "rate" => self.rate = parse_opt(key, v)?,
            "cutoff" => self.cutoff = parse(key, v)?,
            "filter_order" => self.filter_order = parse(key, v)?,
            "segment_cutoff" => self.segment_cutoff = parse(key, v)?,
            "window_s" => self.segment.window_s = parse(key, v)?,
            "threshold_k" => self.segment.k = parse(key, v)?,
            "min_dur" => self.segment.min_dur = parse(key, v)?,
            "max_dur" => self.segment.max_dur = parse(key, v)?,
            "merge_gap" => self.segment.merge_gap = parse(key, v)?,
            "match_iou" => self.match_iou = parse(key, v)?,
            "stft_window" => self.stft.window_len = parse(key, v)?,
            "stft_hop" => self.stft.hop = parse(key, v)?,
            "image_size" => self.image_size = parse(key, v)?,
            "classifier" => self.classifier = v.parse().map_err(CliError::Usage)?,
            "n_trees" => self.n_trees = parse(key, v)?,
            "max_depth" => self.max_depth = parse_opt(key, v)?,
            "min_leaf" => self.min_leaf = parse(key, v)?,
            "mtry" => self.mtry = parse_opt(key, v)?,
            "n_members" => self.n_members = parse(key, v)?,
            "subspace_fraction" => self.subspace_fraction = parse(key, v)?,
            "table_folds" => self.table_folds = parse(key, v)?,
            "table_bins" => self.table_bins = parse(key, v)?,
            "search_termination" => self.search_termination = parse(key, v)?,
            "split" => self.split = v.parse().map_err(CliError::Usage)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "tasks" => {
                self.tasks = v
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect()
            }
            "label_column" => self.label_column = parse_opt(key, v)?,
            "speakers" => self.speakers = parse(key, v)?,
            "words" => self.words = parse(key, v)?,
            "reps" => self.reps = parse(key, v)?,
            "sensor_rate" => self.sensor_rate = parse(key, v)?,
            "snr_db" => self.snr_db = parse(key, v)?,
            "attenuation_db" => self.attenuation_db = parse(key, v)?,
            "gap_s" => self.gap_s = parse(key, v)?,
            "margin_s" => self.margin_s = parse(key, v)?,
            "input" => self.input = parse_opt(key, v)?,
            "truth" => self.truth = parse_opt(key, v)?,
            "regions" => self.regions = parse_opt(key, v)?,
            "features" => self.features = parse_opt(key, v)?,
            "model" => self.model = parse_opt(key, v)?,
            "out" => self.out = parse_opt(key, v)?,
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            self.set(k, v)
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Canonical `(key, value)` pairs describing the run; the output
    /// directory is left out so that runs into different directories hash alike.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", show_opt(&self.seed)),
            ("rate", show_opt(&self.rate)),
            ("cutoff", self.cutoff.to_string()),
            ("filter_order", self.filter_order.to_string()),
            ("segment_cutoff", self.segment_cutoff.to_string()),
            ("window_s", self.segment.window_s.to_string()),
            ("threshold_k", self.segment.k.to_string()),
            ("min_dur", self.segment.min_dur.to_string()),
            ("max_dur", self.segment.max_dur.to_string()),
            ("merge_gap", self.segment.merge_gap.to_string()),
            ("match_iou", self.match_iou.to_string()),
            ("stft_window", self.stft.window_len.to_string()),
            ("stft_hop", self.stft.hop.to_string()),
            ("image_size", self.image_size.to_string()),
            ("classifier", self.classifier.to_string()),
            ("n_trees", self.n_trees.to_string()),
            ("max_depth", show_opt(&self.max_depth)),
            ("min_leaf", self.min_leaf.to_string()),
            ("mtry", show_opt(&self.mtry)),
            ("n_members", self.n_members.to_string()),
            ("subspace_fraction", self.subspace_fraction.to_string()),
            ("table_folds", self.table_folds.to_string()),
            ("table_bins", self.table_bins.to_string()),
            ("search_termination", self.search_termination.to_string()),
            ("split", self.split.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("tasks", self.tasks.join(",")),
            ("label_column", show_opt(&self.label_column)),
            ("speakers", self.speakers.to_string()),
            ("words", self.words.to_string()),
            ("reps", self.reps.to_string()),
            ("sensor_rate", self.sensor_rate.to_string()),
            ("snr_db", self.snr_db.to_string()),
            ("attenuation_db", self.attenuation_db.to_string()),
            ("gap_s", self.gap_s.to_string()),
            ("margin_s", self.margin_s.to_string()),
            ("input", show_path(&self.input)),
            ("truth", show_path(&self.truth)),
            ("regions", show_path(&self.regions)),
            ("features", show_path(&self.features)),
            ("model", show_path(&self.model)),
        ]
    }

    /// The config in file form; re-reading it gives back the same config
    /// (apart from `out`).
    pub fn to_text(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("a seed is required (--seed or `seed =` in the config)".into()))
    }

    pub fn feature_filter(&self) -> FilterSpec {
        FilterSpec::highpass(self.cutoff, self.filter_order)
    }

    pub fn segment_filter(&self) -> FilterSpec {
        FilterSpec::highpass(self.segment_cutoff, self.filter_order)
    }

    pub fn classifier_spec(&self, seed: u64) -> ClassifierSpec {
        match self.classifier {
            ClassifierKind::Rf => ClassifierSpec::RandomForest(ForestParams {
                n_trees: self.n_trees,
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
                mtry: self.mtry,
                seed,
            }),
            ClassifierKind::Rss => ClassifierSpec::RandomSubspace(SubspaceParams {
                n_members: self.n_members,
                subspace_fraction: self.subspace_fraction,
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
                seed,
            }),
            ClassifierKind::Dt => ClassifierSpec::DecisionTable(TableParams {
                eval_folds: self.table_folds,
                bins: self.table_bins,
                search_termination: self.search_termination,
                seed,
            }),
        }
    }

    pub fn channel(&self, seed: u64) -> ChannelSpec {
        ChannelSpec {
            sensor_rate: self.sensor_rate,
            attenuation_db: self.attenuation_db,
            seed,
            ..ChannelSpec::default()
        }
        .with_snr_db(self.snr_db)
    }

    pub fn layout(&self) -> CorpusLayout {
        CorpusLayout {
            gap: self.gap_s,
            margin: self.margin_s,
            ..CorpusLayout::default()
        }
    }
}
