//! Decision-table classifier.
//!
//! Features are discretised into equal-frequency bins; a best-first forward
//! search picks the feature subset whose lookup table scores best under
//! internal stratified cross-validation. Unseen cells fall back to the global
//! majority class.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::eval::stratified_folds;
use super::tree::argmax_first;
use super::{derive_seed, Dataset, MlError, ModelBody, TrainedModel};
use crate::features::quantile_sorted;

const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    /// Folds of the internal cross-validation that scores candidate subsets.
    pub eval_folds: usize,
    /// Equal-frequency bins per feature.
    pub bins: usize,
    /// Stop after this many consecutive expansions without improvement.
    pub search_termination: usize,
    pub seed: u64,
}

impl Default for TableParams {
    fn default() -> Self {
        TableParams {
            eval_folds: 5,
            bins: 10,
            search_termination: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub key: Vec<u16>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    /// Selected feature indices, ascending.
    pub features: Vec<usize>,
    /// Bin edges for each selected feature.
    pub cuts: Vec<Vec<f64>>,
    /// Cells sorted by key.
    pub entries: Vec<TableEntry>,
    pub default_class: usize,
    /// Internal cross-validated accuracy of the selected subset.
    pub search_merit: f64,
}

impl DecisionTable {
    pub fn predict(&self, x: &[f64]) -> usize {
        let key: Vec<u16> = self
            .features
            .iter()
            .zip(&self.cuts)
            .map(|(&f, cuts)| bin_of(x[f], cuts))
            .collect();
        match self.entries.binary_search_by(|e| e.key.cmp(&key)) {
            Ok(i) => self.entries[i].class,
            Err(_) => self.default_class,
        }
    }
}

fn bin_of(value: f64, cuts: &[f64]) -> u16 {
    cuts.partition_point(|&c| c < value) as u16
}

fn equal_frequency_cuts(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..bins)
        .map(|i| quantile_sorted(&sorted, i as f64 / bins as f64))
        .collect();
    cuts.dedup();
    cuts
}

struct Search<'a> {
    /// `binned[feature][row]`
    binned: &'a [Vec<u16>],
    labels: &'a [usize],
    n_classes: usize,
    folds: &'a [usize],
    n_folds: usize,
}

impl Search<'_> {
    fn key(&self, subset: &[usize], row: usize) -> Vec<u16> {
        subset.iter().map(|&f| self.binned[f][row]).collect()
    }

    /// Cross-validated accuracy of a table over `subset`.
    fn merit(&self, subset: &[usize]) -> f64 {
        let n = self.labels.len();
        let keys: Vec<Vec<u16>> = (0..n).map(|i| self.key(subset, i)).collect();
        let mut full: HashMap<&[u16], Vec<usize>> = HashMap::new();
        let mut totals = vec![0usize; self.n_classes];
        for (k, &l) in keys.iter().zip(self.labels) {
            full.entry(k.as_slice()).or_insert_with(|| vec![0; self.n_classes])[l] += 1;
            totals[l] += 1;
        }
        let mut hits = 0usize;
        for fold in 0..self.n_folds {
            let members: Vec<usize> = (0..n).filter(|&i| self.folds[i] == fold).collect();
            let mut held: HashMap<&[u16], Vec<usize>> = HashMap::new();
            let mut held_totals = vec![0usize; self.n_classes];
            for &i in &members {
                held.entry(keys[i].as_slice()).or_insert_with(|| vec![0; self.n_classes])[self.labels[i]] += 1;
                held_totals[self.labels[i]] += 1;
            }
            let train_totals: Vec<usize> = totals.iter().zip(&held_totals).map(|(a, b)| a - b).collect();
            let fallback = argmax_first(&train_totals);
            for &i in &members {
                let k = keys[i].as_slice();
                let train: Vec<usize> = full[k].iter().zip(&held[k]).map(|(a, b)| a - b).collect();
                let guess = if train.iter().any(|&c| c > 0) {
                    argmax_first(&train)
                } else {
                    fallback
                };
                if guess == self.labels[i] {
                    hits += 1;
                }
            }
        }
        hits as f64 / n as f64
    }
}

pub fn train_decision_table(data: &Dataset, params: &TableParams) -> Result<TrainedModel, MlError> {
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    if params.bins < 2 {
        return Err(MlError::BadParameter("decision table needs at least 2 bins".into()));
    }
    if params.eval_folds < 2 {
        return Err(MlError::BadParameter("decision table needs at least 2 folds".into()));
    }
    let p = data.n_features();
    let n = data.len();
    let all_cuts: Vec<Vec<f64>> = (0..p)
        .map(|f| {
            let col: Vec<f64> = data.rows.iter().map(|r| r[f]).collect();
            equal_frequency_cuts(&col, params.bins)
        })
        .collect();
    let binned: Vec<Vec<u16>> = (0..p)
        .map(|f| data.rows.iter().map(|r| bin_of(r[f], &all_cuts[f])).collect())
        .collect();
    // small classes simply end up in fewer folds
    let n_folds = params.eval_folds.min(n.max(2));
    let folds = stratified_folds(&data.labels, data.n_classes(), n_folds, derive_seed(params.seed, 0));
    let search = Search {
        binned: &binned,
        labels: &data.labels,
        n_classes: data.n_classes(),
        folds: &folds,
        n_folds,
    };

    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let start: Vec<usize> = Vec::new();
    let start_merit = search.merit(&start);
    visited.insert(start.clone());
    let mut open: Vec<(f64, Vec<usize>)> = vec![(start_merit, start.clone())];
    let (mut best_merit, mut best) = (start_merit, start);
    let mut stale = 0;
    while stale < params.search_termination && !open.is_empty() {
        let pick = open
            .iter()
            .enumerate()
            .fold(0, |b, (i, (m, _))| if *m > open[b].0 { i } else { b });
        let (_, parent) = open.remove(pick);
        let mut improved = false;
        for f in 0..p {
            if parent.contains(&f) {
                continue;
            }
            let mut child = parent.clone();
            child.push(f);
            child.sort_unstable();
            if !visited.insert(child.clone()) {
                continue;
            }
            let m = search.merit(&child);
            if m > best_merit + IMPROVEMENT_EPS {
                best_merit = m;
                best = child.clone();
                improved = true;
            }
            open.push((m, child));
        }
        stale = if improved { 0 } else { stale + 1 };
    }

    let mut cells: HashMap<Vec<u16>, Vec<usize>> = HashMap::new();
    for i in 0..n {
        cells.entry(search.key(&best, i)).or_insert_with(|| vec![0; data.n_classes()])[data.labels[i]] += 1;
    }
    let mut entries: Vec<TableEntry> = cells
        .into_iter()
        .map(|(key, counts)| TableEntry {
            key,
            class: argmax_first(&counts),
        })
        .collect();
    entries.sort_by(|a, b| a.key.cmp(&b.key));
    let table = DecisionTable {
        cuts: best.iter().map(|&f| all_cuts[f].clone()).collect(),
        features: best,
        entries,
        default_class: argmax_first(&data.class_counts()),
        search_merit: best_merit,
    };
    Ok(TrainedModel::new(
        data,
        ModelBody::DecisionTable {
            params: params.clone(),
            table,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuts_split_into_equal_counts() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        let cuts = equal_frequency_cuts(&v, 4);
        assert_eq!(cuts.len(), 3);
        let mut counts = [0; 4];
        for x in &v {
            counts[bin_of(*x, &cuts) as usize] += 1;
        }
        assert_eq!(counts, [25, 25, 25, 25]);
    }

    #[test]
    fn constant_column_collapses_to_one_bin() {
        let cuts = equal_frequency_cuts(&[3.0; 20], 10);
        assert_eq!(cuts, vec![3.0]);
        assert_eq!(bin_of(3.0, &cuts), 0);
    }
}
