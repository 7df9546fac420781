//! Word-region detection on a high-passed accelerometer axis.
//!
//! The detector thresholds a short-time RMS envelope against its own median
//! plus a multiple of its (σ-scaled) median absolute deviation, so the decision is
//! invariant to the overall amplitude of the trace.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{highpass_stream, DspError, FilterSpec};
use crate::ingest::{median_in_place, Axis, SampleStream};

/// High-pass cutoff used to find word regions. Higher than the feature
/// cutoff so that hand motion and near-DC aliases do not stretch regions.
pub const DEFAULT_SEGMENT_CUTOFF: f64 = 8.0;

/// Scales a median absolute deviation to a Gaussian standard deviation.
pub const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("signal of {len} samples is shorter than the {window}-sample envelope window")]
    SignalTooShort { len: usize, window: usize },
    #[error("invalid segmentation parameter: {0}")]
    BadParameter(String),
    #[error("region file line {line}: {reason}")]
    MalformedRegion { line: usize, reason: String },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    /// RMS envelope window, seconds.
    pub window_s: f64,
    /// Threshold above the median envelope, in σ-scaled median absolute deviations.
    pub k: f64,
    pub min_dur: f64,
    pub max_dur: f64,
    /// Runs separated by less than this many seconds are merged.
    pub merge_gap: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            window_s: 0.05,
            k: 4.0,
            min_dur: 0.1,
            max_dur: 2.0,
            merge_gap: 0.15,
        }
    }
}

/// A detected segment `[start, end)` in sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordRegion {
    pub start: usize,
    pub end: usize,
    /// Peak envelope power relative to the largest envelope power in the signal.
    pub peak_energy: f64,
    pub axis: Axis,
}

impl WordRegion {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn iou(&self, other: &WordRegion) -> f64 {
        let inter = self.end.min(other.end).saturating_sub(self.start.max(other.start));
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisVarianceReport {
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
}

impl AxisVarianceReport {
    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.var_x,
            Axis::Y => self.var_y,
            Axis::Z => self.var_z,
        }
    }
}

/// Variance of each axis after high-pass filtering.
pub fn axis_variances(stream: &SampleStream, filter: &FilterSpec) -> Result<AxisVarianceReport, DspError> {
    let var = |axis| -> Result<f64, DspError> {
        let y = highpass_stream(stream, axis, filter)?;
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        Ok(y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
    };
    Ok(AxisVarianceReport {
        var_x: var(Axis::X)?,
        var_y: var(Axis::Y)?,
        var_z: var(Axis::Z)?,
    })
}

/// Axis with the largest variance; ties resolve in the order Z, Y, X.
pub fn select_axis(report: &AxisVarianceReport) -> Axis {
    let mut best = Axis::Z;
    for axis in [Axis::Y, Axis::X] {
        if report.get(axis) > report.get(best) {
            best = axis;
        }
    }
    best
}

/// Centred moving RMS with a `window`-sample support, truncated at the edges.
pub fn rms_envelope(signal: &[f64], window: usize) -> Vec<f64> {
    let n = signal.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (lo + window).min(n);
            let sum: f64 = signal[lo..hi].iter().map(|v| v * v).sum();
            (sum / (hi - lo) as f64).sqrt()
        })
        .collect()
}

/// Detects word regions in a filtered, uniformly sampled signal.
///
/// Returns sorted, disjoint regions tagged with `axis`.
pub fn detect_regions(
    signal: &[f64],
    rate: f64,
    params: &SegmentParams,
    axis: Axis,
) -> Result<Vec<WordRegion>, SegmentError> {
    if !(rate > 0.0) || !(params.min_dur > 0.0 && params.min_dur <= params.max_dur) || params.k < 0.0 {
        return Err(SegmentError::BadParameter(format!("{params:?} at {rate} Hz")));
    }
    let window = ((params.window_s * rate).round() as usize).max(1);
    if signal.len() < window.max(2) {
        return Err(SegmentError::SignalTooShort {
            len: signal.len(),
            window,
        });
    }
    let env = rms_envelope(signal, window);
    let mut scratch = env.clone();
    let floor = median_in_place(&mut scratch);
    scratch.iter_mut().zip(&env).for_each(|(s, e)| *s = (e - floor).abs());
    let mad = median_in_place(&mut scratch);
    let threshold = floor + params.k * MAD_TO_SIGMA * mad;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &e) in env.iter().enumerate() {
        match (e > threshold, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push((s, env.len()));
    }

    let merge_gap = (params.merge_gap * rate).round() as usize;
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for run in runs {
        match merged.last_mut() {
            Some(last) if run.0 - last.1 < merge_gap => last.1 = run.1,
            _ => merged.push(run),
        }
    }

    let min_len = (params.min_dur * rate).round() as usize;
    let max_len = ((params.max_dur * rate).round() as usize).max(min_len);
    let global_peak = env.iter().copied().fold(0.0, f64::max);
    Ok(merged
        .into_iter()
        .filter(|(s, e)| e - s >= min_len)
        .map(|(s, e)| {
            let end = e.min(s + max_len);
            let peak = env[s..end].iter().copied().fold(0.0, f64::max);
            WordRegion {
                start: s,
                end,
                peak_energy: (peak / global_peak).powi(2),
                axis,
            }
        })
        .collect())
}

/// Index of the best-overlapping truth region for each detection (IoU > 0).
pub fn match_regions(detected: &[WordRegion], truth: &[WordRegion]) -> Vec<Option<usize>> {
    detected
        .iter()
        .map(|d| {
            truth
                .iter()
                .enumerate()
                .map(|(i, t)| (i, d.iou(t)))
                .filter(|&(_, iou)| iou > 0.0)
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                })
                .map(|(i, _)| i)
        })
        .collect()
}

/// Fraction of truth regions covered by some detection with IoU at least `min_iou`.
pub fn detection_rate(detected: &[WordRegion], truth: &[WordRegion], min_iou: f64) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth
        .iter()
        .filter(|t| detected.iter().any(|d| d.iou(t) >= min_iou))
        .count();
    hits as f64 / truth.len() as f64
}

/// Result of [`segment_stream`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    pub variances: AxisVarianceReport,
    pub axis: Axis,
    pub regions: Vec<WordRegion>,
}

/// High-passes every axis, picks the axis with the most variance and detects
/// word regions on it.
pub fn segment_stream(
    stream: &SampleStream,
    filter: &FilterSpec,
    params: &SegmentParams,
) -> Result<Segmentation, SegmentError> {
    let variances = axis_variances(stream, filter)?;
    let axis = select_axis(&variances);
    let signal = highpass_stream(stream, axis, filter)?;
    let regions = detect_regions(&signal, stream.nominal_rate(), params, axis)?;
    Ok(Segmentation {
        variances,
        axis,
        regions,
    })
}

/// Copies labels from the best-matching truth region onto each detection.
/// Detections whose best match has IoU below `min_iou` are dropped.
pub fn transfer_labels(detected: &[WordRegion], truth: &[AnnotatedRegion], min_iou: f64) -> Vec<AnnotatedRegion> {
    let plain: Vec<WordRegion> = truth.iter().map(|t| t.region).collect();
    detected
        .iter()
        .zip(match_regions(detected, &plain))
        .filter_map(|(d, m)| {
            let i = m.filter(|&i| d.iou(&plain[i]) >= min_iou)?;
            Some(AnnotatedRegion {
                region: *d,
                labels: truth[i].labels.clone(),
            })
        })
        .collect()
}

/// A region plus named label columns, as stored in region CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRegion {
    pub region: WordRegion,
    pub labels: Vec<(String, String)>,
}

impl AnnotatedRegion {
    pub fn label(&self, name: &str) -> Option<&str> {
        self.labels.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

/// Time base used to convert sample indices to seconds in region files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBase {
    pub t0: f64,
    pub rate: f64,
}

impl TimeBase {
    pub fn of(stream: &SampleStream) -> Self {
        TimeBase {
            t0: stream.timestamps()[0],
            rate: stream.nominal_rate(),
        }
    }

    pub fn seconds(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.rate
    }

    pub fn index(&self, seconds: f64) -> usize {
        ((seconds - self.t0) * self.rate).round().max(0.0) as usize
    }
}

/// Writes `start_s,end_s,peak_energy,axis` followed by any label columns.
///
/// All rows must carry the same label names as the first row.
pub fn write_regions<W: Write>(regions: &[AnnotatedRegion], base: TimeBase, mut out: W) -> std::io::Result<()> {
    write!(out, "start_s,end_s,peak_energy,axis")?;
    if let Some(first) = regions.first() {
        for (name, _) in &first.labels {
            write!(out, ",{name}")?;
        }
    }
    writeln!(out)?;
    for r in regions {
        write!(
            out,
            "{},{},{},{}",
            base.seconds(r.region.start),
            base.seconds(r.region.end),
            r.region.peak_energy,
            r.region.axis
        )?;
        for (_, v) in &r.labels {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a region CSV written by [`write_regions`] or annotated by hand.
pub fn read_regions<R: Read>(input: R, base: TimeBase) -> Result<Vec<AnnotatedRegion>, SegmentError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if cols.len() < 4 || cols[..4] != ["start_s", "end_s", "peak_energy", "axis"] {
        return Err(SegmentError::MalformedRegion {
            line: 1,
            reason: format!("unexpected header `{header}`"),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |reason: String| SegmentError::MalformedRegion { line: line_no, reason };
        if fields.len() != cols.len() {
            return Err(bad(format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
        let start = base.index(num(fields[0])?);
        let end = base.index(num(fields[1])?);
        if end <= start {
            return Err(bad("end does not follow start".into()));
        }
        let axis = fields[3].parse::<Axis>().map_err(bad)?;
        let labels = cols[4..]
            .iter()
            .zip(&fields[4..])
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect();
        out.push(AnnotatedRegion {
            region: WordRegion {
                start,
                end,
                peak_energy: num(fields[2])?,
                axis,
            },
            labels,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bursts(noise: f64, amp: f64, seed: u64) -> (Vec<f64>, Vec<WordRegion>) {
        use rand::{Rng, SeedableRng};
        let rate = 420.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = (32.0 * rate) as usize;
        let mut x: Vec<f64> = (0..n).map(|_| noise * (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt()).collect();
        let mut truth = Vec::new();
        for b in 0..6 {
            let start = ((1.0 + 5.0 * b as f64) * rate) as usize;
            let len = (0.3 * rate) as usize;
            for i in 0..len {
                x[start + i] += amp * (2.0 * std::f64::consts::PI * 60.0 * i as f64 / rate).sin();
            }
            truth.push(WordRegion {
                start,
                end: start + len,
                peak_energy: 1.0,
                axis: Axis::Z,
            });
        }
        (x, truth)
    }

    #[test]
    fn zero_signal_has_no_regions() {
        let r = detect_regions(&[0.0; 5000], 420.0, &SegmentParams::default(), Axis::Z).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn six_clean_bursts() {
        // unit noise, 20 dB burst power
        let (x, truth) = bursts(1.0, 10.0 * 2f64.sqrt(), 7);
        let r = detect_regions(&x, 420.0, &SegmentParams::default(), Axis::Z).unwrap();
        assert_eq!(r.len(), 6, "{r:?}");
        for (d, t) in r.iter().zip(&truth) {
            assert!((d.start as f64 - t.start as f64).abs() / 420.0 <= 0.05);
            assert!((d.end as f64 - t.end as f64).abs() / 420.0 <= 0.05);
        }
    }

    #[test]
    fn scale_invariance() {
        let (x, _) = bursts(1.0, 5.0, 11);
        let base = detect_regions(&x, 420.0, &SegmentParams::default(), Axis::Z).unwrap();
        for c in [0.25, 8.0, 1024.0] {
            let y: Vec<f64> = x.iter().map(|v| v * c).collect();
            let r = detect_regions(&y, 420.0, &SegmentParams::default(), Axis::Z).unwrap();
            assert_eq!(r, base);
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            detect_regions(&[0.0; 5], 420.0, &SegmentParams::default(), Axis::Z),
            Err(SegmentError::SignalTooShort { .. })
        ));
    }

    #[test]
    fn axis_selection() {
        let r = |x, y, z| AxisVarianceReport { var_x: x, var_y: y, var_z: z };
        assert_eq!(select_axis(&r(1.7029e-6, 1.7029e-6, 1.946e-4)), Axis::Z);
        assert_eq!(select_axis(&r(1e-6, 1e-6, 1.9e-4)), Axis::Z);
        assert_eq!(select_axis(&r(0.0, 0.0, 0.0)), Axis::Z);
        assert_eq!(select_axis(&r(5.0, 1.0, 1.0)), Axis::X);
        assert_eq!(select_axis(&r(1.0, 5.0, 5.0)), Axis::Z);
        assert_eq!(select_axis(&r(5.0, 5.0, 1.0)), Axis::Y);
    }

    #[test]
    fn constant_stream_has_zero_variance() {
        let s = SampleStream::uniform(0.0, 420.0, vec![0.1; 2000], vec![0.2; 2000], vec![9.8; 2000]).unwrap();
        let v = axis_variances(&s, &FilterSpec::default()).unwrap();
        assert!(v.var_x < 1e-20 && v.var_y < 1e-20 && v.var_z < 1e-20);
    }

    #[test]
    fn region_csv_round_trip() {
        let base = TimeBase { t0: 0.5, rate: 420.0 };
        let regions = vec![
            AnnotatedRegion {
                region: WordRegion { start: 42, end: 200, peak_energy: 0.25, axis: Axis::Z },
                labels: vec![("word".into(), "three".into())],
            },
            AnnotatedRegion {
                region: WordRegion { start: 900, end: 1100, peak_energy: 1.0, axis: Axis::Y },
                labels: vec![("word".into(), "seven".into())],
            },
        ];
        let mut buf = Vec::new();
        write_regions(&regions, base, &mut buf).unwrap();
        let back = read_regions(buf.as_slice(), base).unwrap();
        assert_eq!(back, regions);
    }

    #[test]
    fn malformed_region_rows() {
        let base = TimeBase { t0: 0.0, rate: 100.0 };
        let bad_header = read_regions("a,b\n".as_bytes(), base).unwrap_err();
        assert!(matches!(bad_header, SegmentError::MalformedRegion { line: 1, .. }));
        let reversed = read_regions("start_s,end_s,peak_energy,axis\n1.0,0.5,1,Z\n".as_bytes(), base).unwrap_err();
        assert!(matches!(reversed, SegmentError::MalformedRegion { line: 2, .. }));
    }

    #[test]
    fn iou_and_matching() {
        let a = WordRegion { start: 0, end: 10, peak_energy: 1.0, axis: Axis::Z };
        let b = WordRegion { start: 5, end: 15, ..a };
        let c = WordRegion { start: 100, end: 110, ..a };
        assert!((a.iou(&b) - 5.0 / 15.0).abs() < 1e-15);
        assert_eq!(a.iou(&c), 0.0);
        assert_eq!(match_regions(&[b, c], &[a]), vec![Some(0), None]);
        assert_eq!(detection_rate(&[b], &[a, c], 0.3), 0.5);
    }
}
