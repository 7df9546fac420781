//! Time- and frequency-domain statistics of a word region.
//!
//! Every region yields 25 values in a fixed order: 13 time-domain moments and
//! order statistics of the raw samples, then 12 descriptors of the region's
//! magnitude spectrum. The spectrum is taken once over the whole region after
//! mean removal and a Hann window, zero-padded to a power of two, with the DC
//! bin dropped.
//!
//! Degenerate inputs never produce NaN: moments of a flat signal are 0 and
//! every ratio with a zero denominator is defined as 0.

use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{hann_window, highpass, magnitude_spectrum, DspError, FilterSpec};
use crate::ingest::{Axis, SampleStream};
use crate::segment::AnnotatedRegion;

pub const N_TIME: usize = 13;
pub const N_FREQ: usize = 12;
pub const N_FEATURES: usize = N_TIME + N_FREQ;

pub const MIN_TIME_LEN: usize = 4;
pub const MIN_FREQ_LEN: usize = 8;

/// Canonical feature names, in storage order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "min",
    "max",
    "mean",
    "std",
    "variance",
    "range",
    "cv",
    "skewness",
    "kurtosis",
    "q25",
    "q50",
    "q85",
    "mean_crossing_rate",
    "energy",
    "entropy",
    "freq_ratio",
    "irregularity_k",
    "irregularity_j",
    "sharpness",
    "smoothness",
    "spec_centroid",
    "spec_stddev",
    "spec_crest",
    "spec_skewness",
    "spec_kurtosis",
];

const MOMENT_EPS: f64 = 1e-24;
const CV_EPS: f64 = 1e-12;
const LOG_EPS: f64 = 1e-12;
const SHARPNESS_EXPONENT: f64 = 0.23;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("region of {len} samples is too short (need {min})")]
    RegionTooShort { len: usize, min: usize },
    #[error("region {region_id}: feature `{feature}` is not finite")]
    NonFiniteFeature { region_id: usize, feature: &'static str },
    #[error("region {region_id} [{start}, {end}) lies outside the stream of {len} samples")]
    RegionOutOfBounds {
        region_id: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("feature file line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
    pub label: String,
    pub region_id: usize,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

/// Arithmetic mean; exact for constant input, so constant regions have no
/// rounding residue after mean removal.
fn mean_of(x: &[f64]) -> f64 {
    if x.iter().all(|&v| v == x[0]) {
        x[0]
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// The 13 time-domain statistics. Total for any non-empty input.
pub fn time_stats(x: &[f64]) -> [f64; N_TIME] {
    assert!(!x.is_empty(), "time_stats on empty slice");
    let n = x.len() as f64;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = mean_of(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    let (skew, kurt) = if m2 < MOMENT_EPS {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };

    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let crossings = x
        .windows(2)
        .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
        .count();
    let mcr = if x.len() > 1 {
        crossings as f64 / (x.len() - 1) as f64
    } else {
        0.0
    };

    [
        min,
        max,
        mean,
        std,
        m2,
        max - min,
        std / (mean.abs() + CV_EPS),
        skew,
        kurt,
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.50),
        quantile_sorted(&sorted, 0.85),
        mcr,
    ]
}

/// Linear interpolation between order statistics at 0-based position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Magnitudes and centre frequencies of bins `1..=nfft/2` of the region spectrum.
pub fn region_spectrum(x: &[f64], rate: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mean = mean_of(x);
    let window = hann_window(n);
    let frame: Vec<f64> = x.iter().zip(&window).map(|(v, w)| (v - mean) * w).collect();
    let nfft = n.next_power_of_two().max(2);
    let mags = magnitude_spectrum(&frame, nfft)[1..].to_vec();
    let freqs = (1..=nfft / 2).map(|k| k as f64 * rate / nfft as f64).collect();
    (mags, freqs)
}

/// The 12 spectral descriptors of a DC-free magnitude spectrum.
///
/// `mags[i]` is the magnitude at `freqs[i]`; bins are indexed `1..=K` in
/// the formulas. Total for any non-empty spectrum.
pub fn spectral_stats(mags: &[f64], freqs: &[f64], rate: f64) -> [f64; N_FREQ] {
    assert_eq!(mags.len(), freqs.len());
    assert!(!mags.is_empty());
    let k_bins = mags.len();
    let sum: f64 = mags.iter().sum();
    let energy: f64 = mags.iter().map(|m| m * m).sum();

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };

    let entropy = if energy > 0.0 && k_bins > 1 {
        let h: f64 = mags
            .iter()
            .map(|m| m * m / energy)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum();
        h / (k_bins as f64).log2()
    } else {
        0.0
    };
    let upper: f64 = mags
        .iter()
        .zip(freqs)
        .filter(|(_, &f)| f > rate / 4.0)
        .map(|(m, _)| m * m)
        .sum();
    let freq_ratio = ratio(upper, energy);

    let local_deviation = |v: &[f64]| -> f64 {
        v.windows(3)
            .map(|w| (w[1] - (w[0] + w[1] + w[2]) / 3.0).abs())
            .sum()
    };
    let irregularity_k = local_deviation(mags);
    let jumps: f64 = mags.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum();
    let irregularity_j = ratio(jumps, energy);

    let weighted: f64 = mags
        .iter()
        .enumerate()
        .map(|(i, m)| ((i + 1) as f64 / k_bins as f64).powf(SHARPNESS_EXPONENT) * m)
        .sum();
    let sharpness = ratio(weighted, sum);

    let levels: Vec<f64> = mags.iter().map(|m| 20.0 * (m + LOG_EPS).log10()).collect();
    let smoothness = local_deviation(&levels);

    let centroid = ratio(mags.iter().zip(freqs).map(|(m, f)| m * f).sum(), sum);
    let moment = |p: i32| ratio(mags.iter().zip(freqs).map(|(m, f)| m * (f - centroid).powi(p)).sum(), sum);
    let spread2 = moment(2);
    let stddev = spread2.sqrt();
    let (skew, kurt) = if spread2 < MOMENT_EPS {
        (0.0, 0.0)
    } else {
        (moment(3) / spread2.powf(1.5), moment(4) / (spread2 * spread2))
    };
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let crest = ratio(peak, sum / k_bins as f64);

    [
        energy,
        entropy,
        freq_ratio,
        irregularity_k,
        irregularity_j,
        sharpness,
        smoothness,
        centroid,
        stddev,
        crest,
        skew,
        kurt,
    ]
}

pub fn time_features(x: &[f64]) -> Result<[f64; N_TIME], FeatureError> {
    if x.len() < MIN_TIME_LEN {
        return Err(FeatureError::RegionTooShort {
            len: x.len(),
            min: MIN_TIME_LEN,
        });
    }
    Ok(time_stats(x))
}

pub fn freq_features(x: &[f64], rate: f64) -> Result<[f64; N_FREQ], FeatureError> {
    if x.len() < MIN_FREQ_LEN {
        return Err(FeatureError::RegionTooShort {
            len: x.len(),
            min: MIN_FREQ_LEN,
        });
    }
    let (mags, freqs) = region_spectrum(x, rate);
    Ok(spectral_stats(&mags, &freqs, rate))
}

/// All 25 features of one region, checked for finiteness.
pub fn region_features(x: &[f64], rate: f64, region_id: usize) -> Result<[f64; N_FEATURES], FeatureError> {
    let t = time_features(x)?;
    let f = freq_features(x, rate)?;
    let mut out = [0.0; N_FEATURES];
    out[..N_TIME].copy_from_slice(&t);
    out[N_TIME..].copy_from_slice(&f);
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFiniteFeature {
            region_id,
            feature: FEATURE_NAMES[i],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// High-pass applied to the whole axis before regions are cut out.
    pub filter: Option<FilterSpec>,
    /// Annotation column copied into [`FeatureVector::label`].
    pub label_column: Option<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            filter: Some(FilterSpec::default()),
            label_column: None,
        }
    }
}

/// One feature vector per region; region ids are list positions.
pub fn extract_all(
    stream: &SampleStream,
    regions: &[AnnotatedRegion],
    config: &FeatureConfig,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let rate = stream.nominal_rate();
    let mut filtered: Vec<(Axis, Vec<f64>)> = Vec::new();
    for axis in Axis::ALL {
        if regions.iter().any(|r| r.region.axis == axis) {
            let raw = stream.axis(axis);
            let sig = match &config.filter {
                Some(spec) => highpass(raw, rate, spec)?,
                None => raw.to_vec(),
            };
            filtered.push((axis, sig));
        }
    }
    regions
        .par_iter()
        .enumerate()
        .map(|(id, ann)| {
            let r = &ann.region;
            let sig = &filtered.iter().find(|(a, _)| *a == r.axis).expect("axis filtered").1;
            if r.end > sig.len() || r.start >= r.end {
                return Err(FeatureError::RegionOutOfBounds {
                    region_id: id,
                    start: r.start,
                    end: r.end,
                    len: sig.len(),
                });
            }
            let values = region_features(&sig[r.start..r.end], rate, id)?;
            let label = config
                .label_column
                .as_deref()
                .and_then(|c| ann.label(c))
                .unwrap_or_default()
                .to_string();
            Ok(FeatureVector {
                values,
                label,
                region_id: id,
            })
        })
        .collect()
}

/// Writes the feature CSV: 25 canonical columns, then `label` and `region_id`.
pub fn write_features<W: Write>(vectors: &[FeatureVector], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{},label,region_id", FEATURE_NAMES.join(","))?;
    for v in vectors {
        if v.label.contains([',', '\n', '\r']) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("label `{}` contains a separator", v.label),
            ));
        }
        for x in &v.values {
            write!(out, "{x},")?;
        }
        writeln!(out, "{},{}", v.label, v.region_id)?;
    }
    Ok(())
}

pub fn read_features<R: Read>(input: R) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let expected = format!("{},label,region_id", FEATURE_NAMES.join(","));
    if header.trim() != expected {
        return Err(FeatureError::MalformedRow {
            line: 1,
            reason: "header does not list the canonical feature columns".into(),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |reason: String| FeatureError::MalformedRow { line: line_no, reason };
        if fields.len() != N_FEATURES + 2 {
            return Err(bad(format!("expected {} fields, got {}", N_FEATURES + 2, fields.len())));
        }
        let mut values = [0.0; N_FEATURES];
        for (slot, (field, name)) in values.iter_mut().zip(fields.iter().zip(FEATURE_NAMES)) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{field}` in `{name}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite `{name}`")));
            }
            *slot = v;
        }
        let region_id = fields[N_FEATURES + 1]
            .trim()
            .parse()
            .map_err(|_| bad("bad region_id".into()))?;
        out.push(FeatureVector {
            values,
            label: fields[N_FEATURES].trim().to_string(),
            region_id,
        });
    }
    Ok(out)
}
