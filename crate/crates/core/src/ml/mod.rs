//! Classical classifiers, the evaluation protocol and its metrics.
//!
//! Three learners are provided: a bootstrap random forest, a random-subspace
//! ensemble of CART trees, and a best-first decision table. All of them are
//! deterministic given the dataset, parameters and seed; ensemble members get
//! seeds derived from the master seed, so parallel training order does not
//! affect the result. Ties (leaf majorities, votes, table cells) always go to
//! the earliest class in the dataset's class order.

mod ensemble;
mod eval;
mod info_gain;
mod table;
pub mod tree;

pub use ensemble::{
    train_random_forest, train_random_subspace, ForestParams, SubspaceMember, SubspaceParams,
};
pub use eval::{
    cross_validate, evaluate, render_table, split_train_test, stratified_folds, ClassMetrics, EvalReport,
    ReportRow, WeightedMetrics,
};
pub use info_gain::info_gain_ranking;
pub use table::{train_decision_table, DecisionTable, TableParams};
pub use tree::{Tree, TreeParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_NAMES};
pub use crate::seed::derive_seed;
pub(crate) use crate::seed::rng_for;

pub const MODEL_FORMAT: &str = "vibetap-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("class `{class}` has {count} members, need at least {needed}")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },
    #[error("input has a non-finite value at feature {0}")]
    NonFiniteInput(usize),
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("confusion matrix is not square")]
    NotSquare,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("model file: {0}")]
    ModelFormat(String),
}

/// Labelled rows over named features; labels index into `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        classes: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
    ) -> Result<Self, MlError> {
        if rows.len() != labels.len() {
            return Err(MlError::InvalidDataset("rows and labels differ in length".into()));
        }
        if classes.is_empty() {
            return Err(MlError::InvalidDataset("no classes".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(MlError::InvalidDataset(format!("row {i} has {} values", row.len())));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(MlError::InvalidDataset(format!("row {i} feature {j} is not finite")));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(MlError::InvalidDataset(format!("label {l} outside class list")));
        }
        Ok(Dataset {
            feature_names,
            classes,
            rows,
            labels,
        })
    }

    /// Builds a dataset from feature vectors; classes are the sorted distinct labels.
    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self, MlError> {
        let mut classes: Vec<String> = vectors.iter().map(|v| v.label.clone()).collect();
        classes.sort();
        classes.dedup();
        let labels = vectors
            .iter()
            .map(|v| classes.binary_search(&v.label).expect("label collected above"))
            .collect();
        let rows = vectors.iter().map(|v| v.values.to_vec()).collect();
        Dataset::new(
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            classes,
            rows,
            labels,
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, keeping the full class list.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            classes: self.classes.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Copy with labels shuffled by `seed`; used as a leakage null.
    pub fn with_permuted_labels(&self, seed: u64) -> Dataset {
        use rand::seq::SliceRandom;
        let mut labels = self.labels.clone();
        labels.shuffle(&mut rng_for(seed, 0));
        Dataset {
            labels,
            ..self.clone()
        }
    }

    fn present_classes(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }
}

/// Which learner to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    RandomForest(ForestParams),
    RandomSubspace(SubspaceParams),
    DecisionTable(TableParams),
}

impl ClassifierSpec {
    pub fn display_name(&self) -> &'static str {
        match self {
            ClassifierSpec::RandomForest(_) => "Random Forest",
            ClassifierSpec::RandomSubspace(_) => "Random Subspace",
            ClassifierSpec::DecisionTable(_) => "Decision Table",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ClassifierSpec::RandomForest(p) => p.seed,
            ClassifierSpec::RandomSubspace(p) => p.seed,
            ClassifierSpec::DecisionTable(p) => p.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> ClassifierSpec {
        let mut out = self.clone();
        match &mut out {
            ClassifierSpec::RandomForest(p) => p.seed = seed,
            ClassifierSpec::RandomSubspace(p) => p.seed = seed,
            ClassifierSpec::DecisionTable(p) => p.seed = seed,
        }
        out
    }

    pub fn train(&self, data: &Dataset) -> Result<TrainedModel, MlError> {
        match self {
            ClassifierSpec::RandomForest(p) => train_random_forest(data, p),
            ClassifierSpec::RandomSubspace(p) => train_random_subspace(data, p),
            ClassifierSpec::DecisionTable(p) => train_decision_table(data, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    RandomForest {
        params: ForestParams,
        trees: Vec<Tree>,
    },
    RandomSubspace {
        params: SubspaceParams,
        members: Vec<SubspaceMember>,
    },
    DecisionTable {
        params: TableParams,
        table: DecisionTable,
    },
}

/// A fitted classifier plus the metadata needed to use it elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub training_rows: usize,
    /// Set when the training data held a single class; the model is then constant.
    pub single_class: bool,
    pub model: ModelBody,
}

impl TrainedModel {
    pub(crate) fn new(data: &Dataset, model: ModelBody) -> Self {
        TrainedModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            classes: data.classes.clone(),
            feature_names: data.feature_names.clone(),
            training_rows: data.len(),
            single_class: data.present_classes() <= 1,
            model,
        }
    }

    pub fn seed(&self) -> u64 {
        match &self.model {
            ModelBody::RandomForest { params, .. } => params.seed,
            ModelBody::RandomSubspace { params, .. } => params.seed,
            ModelBody::DecisionTable { params, .. } => params.seed,
        }
    }

    pub fn kind(&self) -> &'static str {
        match &self.model {
            ModelBody::RandomForest { .. } => "random_forest",
            ModelBody::RandomSubspace { .. } => "random_subspace",
            ModelBody::DecisionTable { .. } => "decision_table",
        }
    }

    /// Class index for a finite input vector.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize, MlError> {
        if x.len() != self.feature_names.len() {
            return Err(MlError::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(MlError::NonFiniteInput(i));
        }
        let n = self.classes.len();
        Ok(match &self.model {
            ModelBody::RandomForest { trees, .. } => vote(n, trees.iter().map(|t| t.predict(x))),
            ModelBody::RandomSubspace { members, .. } => vote(n, members.iter().map(|m| m.tree.predict(x))),
            ModelBody::DecisionTable { table, .. } => table.predict(x),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<&str, MlError> {
        Ok(&self.classes[self.predict_index(x)?])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, MlError> {
        let model: TrainedModel = serde_json::from_str(text).map_err(|e| MlError::ModelFormat(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(MlError::ModelFormat(format!("unknown format `{}`", model.format)));
        }
        if model.version != MODEL_VERSION {
            return Err(MlError::ModelFormat(format!("unsupported version {}", model.version)));
        }
        Ok(model)
    }
}

/// Plurality vote; ties go to the lowest class index.
fn vote(n_classes: usize, ballots: impl Iterator<Item = usize>) -> usize {
    let mut counts = vec![0usize; n_classes];
    for b in ballots {
        counts[b] += 1;
    }
    tree::argmax_first(&counts)
}

/// Convenience: predict a dataset's rows and return the accuracy.
pub fn accuracy_on(model: &TrainedModel, data: &Dataset) -> Result<f64, MlError> {
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let mut hits = 0;
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        if model.classes[model.predict_index(row)?] == data.classes[label] {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}
