use super::{Dataset, MlError};

fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

/// Mutual information (bits) between each feature, binned into `bins`
/// equal-width intervals over its observed range, and the class label.
///
/// Sorted by decreasing gain; equal gains keep the dataset's feature order.
pub fn info_gain_ranking(data: &Dataset, bins: usize) -> Result<Vec<(String, f64)>, MlError> {
    if bins < 2 {
        return Err(MlError::BadParameter(format!("bins = {bins}, need at least 2")));
    }
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let k = data.n_classes();
    let h_label = entropy_bits(&data.class_counts());
    let n = data.len() as f64;
    let mut gains: Vec<(String, f64)> = (0..data.n_features())
        .map(|f| {
            let (lo, hi) = data
                .rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[f]), hi.max(r[f])));
            let mut table = vec![vec![0usize; k]; bins];
            for (row, &label) in data.rows.iter().zip(&data.labels) {
                let b = if hi > lo {
                    (((row[f] - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
                } else {
                    0
                };
                table[b][label] += 1;
            }
            let conditional: f64 = table
                .iter()
                .map(|counts| counts.iter().sum::<usize>() as f64 / n * entropy_bits(counts))
                .sum();
            (data.feature_names[f].clone(), (h_label - conditional).max(0.0))
        })
        .collect();
    gains.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(gains)
}
