use serde::{Deserialize, Serialize};

/// Where a source tone lands after point-sampling at `sensor_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AliasPrediction {
    pub source_freq: f64,
    pub sensor_rate: f64,
    pub fold_index: u64,
    /// Always in `[0, sensor_rate / 2]` and equal to `|source_freq - fold_index * sensor_rate|`.
    pub alias_freq: f64,
}

/// Folds `freq` into the baseband of a sensor sampling at `sensor_rate`.
///
/// Picks the fold index minimising `|f - N * f_s|`; a tone exactly on an odd
/// multiple of the Nyquist frequency takes the lower index.
pub fn predict_alias(freq: f64, sensor_rate: f64) -> AliasPrediction {
    debug_assert!(freq >= 0.0 && sensor_rate > 0.0);
    let below = (freq / sensor_rate).floor();
    let residue = freq - below * sensor_rate;
    let fold = if residue <= sensor_rate / 2.0 { below } else { below + 1.0 };
    let alias = (freq - fold * sensor_rate).abs();
    AliasPrediction {
        source_freq: freq,
        sensor_rate,
        fold_index: fold as u64,
        alias_freq: alias,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fold() {
        let p = predict_alias(420.0, 420.0);
        assert_eq!((p.fold_index, p.alias_freq), (1, 0.0));
    }

    #[test]
    fn quoted_examples() {
        let p = predict_alias(500.0, 420.0);
        assert_eq!((p.fold_index, p.alias_freq), (1, 80.0));
        let p = predict_alias(3300.0, 520.0);
        assert_eq!((p.fold_index, p.alias_freq), (6, 180.0));
    }

    #[test]
    fn in_band_is_fixed_point() {
        for f in [0.0, 1.0, 99.5, 210.0] {
            let p = predict_alias(f, 420.0);
            assert_eq!((p.fold_index, p.alias_freq), (0, f));
        }
    }
}
