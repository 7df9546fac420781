//! Train/test protocol and the per-class metrics reported for each classifier.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, rng_for, ClassifierSpec, Dataset, MlError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    /// `confusion[actual][predicted]`
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted averages of the per-class metrics.
    pub weighted: WeightedMetrics,
    pub accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and weighted metrics of a confusion matrix (`[actual][predicted]`).
pub fn evaluate(confusion: &[Vec<u64>], classes: &[String]) -> Result<EvalReport, MlError> {
    let k = confusion.len();
    if k == 0 {
        return Err(MlError::EmptyMatrix);
    }
    if confusion.iter().any(|row| row.len() != k) || classes.len() != k {
        return Err(MlError::NotSquare);
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(MlError::EmptyMatrix);
    }
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
            let fp = predicted - tp;
            let recall = ratio(tp, support);
            ClassMetrics {
                class: classes[c].clone(),
                support,
                tp_rate: recall,
                fp_rate: ratio(fp, total - support),
                precision: ratio(tp, predicted),
                recall,
            }
        })
        .collect();
    let weigh = |f: fn(&ClassMetrics) -> f64| -> f64 {
        per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total as f64
    };
    let weighted = WeightedMetrics {
        tp_rate: weigh(|m| m.tp_rate),
        fp_rate: weigh(|m| m.fp_rate),
        precision: weigh(|m| m.precision),
        recall: weigh(|m| m.recall),
    };
    let trace: u64 = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        classes: classes.to_vec(),
        confusion: confusion.to_vec(),
        per_class,
        weighted,
        accuracy: ratio(trace, total),
        total,
    })
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

impl EvalReport {
    /// One-line weighted summary, e.g. `TP 98.7% | FP 1.3% | Precision 98.7% | Recall 98.7%`.
    pub fn summary_line(&self) -> String {
        let w = &self.weighted;
        format!(
            "TP {} | FP {} | Precision {} | Recall {}",
            pct(w.tp_rate),
            pct(w.fp_rate),
            pct(w.precision),
            pct(w.recall)
        )
    }

    /// Per-class breakdown plus the confusion matrix, as plain text.
    pub fn render_detail(&self) -> String {
        let width = self.classes.iter().map(|c| c.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} | {:>7} | {:>7} | {:>9} | {:>7} | {:>7}",
            "Class", "TP Rate", "FP Rate", "Precision", "Recall", "Support"
        );
        for m in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$} | {:>7} | {:>7} | {:>9} | {:>7} | {:>7}",
                m.class,
                pct(m.tp_rate),
                pct(m.fp_rate),
                pct(m.precision),
                pct(m.recall),
                m.support
            );
        }
        let w = &self.weighted;
        let _ = writeln!(
            out,
            "{:<width$} | {:>7} | {:>7} | {:>9} | {:>7} | {:>7}",
            "Weighted",
            pct(w.tp_rate),
            pct(w.fp_rate),
            pct(w.precision),
            pct(w.recall),
            self.total
        );
        let _ = writeln!(out, "Accuracy: {}", pct(self.accuracy));
        let _ = writeln!(out, "Confusion (rows = actual, columns = predicted):");
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>5}")).collect();
            let _ = writeln!(out, "{c:<width$} {}", cells.join(" "));
        }
        out
    }
}

/// One line of a detection-performance table.
#[derive(Debug, Clone)]
pub struct ReportRow<'a> {
    pub detection: &'a str,
    pub classifier: &'a str,
    pub dataset: &'a str,
    pub report: &'a EvalReport,
}

/// Renders rows with the columns Detection, Classifier, Data set, TP Rate,
/// FP Rate, Precision, Recall (weighted metrics).
pub fn render_table(rows: &[ReportRow<'_>]) -> String {
    let headers = ["Detection", "Classifier", "Data set", "TP Rate", "FP Rate", "Precision", "Recall"];
    let body: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            let w = &r.report.weighted;
            [
                r.detection.to_string(),
                r.classifier.to_string(),
                r.dataset.to_string(),
                pct(w.tp_rate),
                pct(w.fp_rate),
                pct(w.precision),
                pct(w.recall),
            ]
        })
        .collect();
    let mut widths = headers.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = String::new();
    let header_cells: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "{}", line(&header_cells));
    let _ = writeln!(
        out,
        "{}",
        widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-")
    );
    for row in &body {
        let _ = writeln!(out, "{}", line(row));
    }
    out
}

/// Fold index per row; each class is shuffled and dealt round-robin, with the
/// dealing position carried over between classes.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, 0);
    let mut folds = vec![0; labels.len()];
    let mut cursor = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = cursor % k;
            cursor += 1;
        }
    }
    folds
}

fn check_class_sizes(data: &Dataset, needed: usize) -> Result<(), MlError> {
    for (c, &count) in data.class_counts().iter().enumerate() {
        if count < needed {
            return Err(MlError::ClassTooSmall {
                class: data.classes[c].clone(),
                count,
                needed,
            });
        }
    }
    Ok(())
}

/// Stratified random split; each class contributes `round(fraction * n_c)`
/// rows to the training side (at least one row on each side).
pub fn split_train_test(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), MlError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(MlError::BadParameter(format!("split fraction {fraction} outside (0, 1)")));
    }
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    check_class_sizes(data, 2)?;
    let mut rng = rng_for(seed, 0);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..data.n_classes() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == c).collect();
        members.shuffle(&mut rng);
        let n_train = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// Stratified k-fold cross-validation; the report aggregates every held-out prediction.
pub fn cross_validate(data: &Dataset, k: usize, spec: &ClassifierSpec, seed: u64) -> Result<EvalReport, MlError> {
    if k < 2 {
        return Err(MlError::BadParameter(format!("k = {k}, need at least 2 folds")));
    }
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    check_class_sizes(data, k)?;
    let folds = stratified_folds(&data.labels, data.n_classes(), k, seed);
    let per_fold: Vec<Vec<(usize, usize)>> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<Vec<(usize, usize)>, MlError> {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != fold).collect();
            let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == fold).collect();
            let fold_spec = spec.with_seed(derive_seed(spec.seed(), 1 + fold as u64));
            let model = fold_spec.train(&data.subset(&train_idx))?;
            test_idx
                .iter()
                .map(|&i| Ok((data.labels[i], model.predict_index(&data.rows[i])?)))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let n = data.n_classes();
    let mut confusion = vec![vec![0u64; n]; n];
    for (actual, predicted) in per_fold.into_iter().flatten() {
        confusion[actual][predicted] += 1;
    }
    evaluate(&confusion, &data.classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn two_class_hand_arithmetic() {
        let r = evaluate(&[vec![8, 2], vec![1, 9]], &names(2)).unwrap();
        assert_eq!(r.accuracy, 0.85);
        assert_eq!(r.per_class[0].tp_rate, 0.8);
        assert_eq!(r.per_class[0].precision, 8.0 / 9.0);
        assert_eq!(r.per_class[0].fp_rate, 0.1);
        assert_eq!(r.per_class[1].fp_rate, 0.2);
    }

    #[test]
    fn perfect_matrix() {
        let r = evaluate(&[vec![5, 0], vec![0, 5]], &names(2)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for m in &r.per_class {
            assert_eq!((m.tp_rate, m.precision, m.recall, m.fp_rate), (1.0, 1.0, 1.0, 0.0));
        }
        assert_eq!(r.summary_line(), "TP 100.0% | FP 0.0% | Precision 100.0% | Recall 100.0%");
    }

    #[test]
    fn empty_and_ragged() {
        assert!(matches!(evaluate(&[], &[]), Err(MlError::EmptyMatrix)));
        assert!(matches!(evaluate(&[vec![0, 0], vec![0, 0]], &names(2)), Err(MlError::EmptyMatrix)));
        assert!(matches!(evaluate(&[vec![1, 0]], &names(1)), Err(MlError::NotSquare)));
    }

    #[test]
    fn summary_formats_like_published_rows() {
        // 987 of 1000 right in each direction gives 98.7% / 1.3%
        let r = evaluate(&[vec![987, 13], vec![13, 987]], &names(2)).unwrap();
        assert_eq!(r.summary_line(), "TP 98.7% | FP 1.3% | Precision 98.7% | Recall 98.7%");
    }

    #[test]
    fn folds_are_balanced_per_class() {
        let labels: Vec<usize> = (0..53).map(|i| i % 3).collect();
        let folds = stratified_folds(&labels, 3, 10, 5);
        for c in 0..3 {
            let mut sizes = [0; 10];
            for (i, &f) in folds.iter().enumerate() {
                if labels[i] == c {
                    sizes[f] += 1;
                }
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
        }
    }
}
