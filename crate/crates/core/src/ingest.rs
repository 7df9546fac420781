//! Accelerometer trace ingestion.
//!
//! Traces arrive as CSV exports with a header row, one timestamp column and
//! three acceleration columns. The default column names follow the Physics
//! Toolbox export (`time`, `ax`, `ay`, `az`); other layouts are handled with a
//! [`ColumnMapping`]. Units are carried through untouched as metadata.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the median sampling interval before a stream is flagged irregular.
pub const IRREGULAR_TOLERANCE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("timestamps not strictly increasing at line {line}")]
    NonMonotonicTimestamps { line: usize },
    #[error("too few samples: {0} (need at least 2)")]
    TooFewSamples(usize),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("axis arrays have mismatched lengths")]
    LengthMismatch,
    #[error("invalid sampling rate {0}")]
    InvalidRate(f64),
    #[error("upsampling requested: target {target} Hz exceeds nominal {nominal} Hz")]
    UpsamplingRequested { target: f64, nominal: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "X" | "x" => Ok(Axis::X),
            "Y" | "y" => Ok(Axis::Y),
            "Z" | "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis `{other}`")),
        }
    }
}

/// Header names of the timestamp and acceleration columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub time: String,
    pub x: String,
    pub y: String,
    pub z: String,
    /// Free-text unit tag stored on the parsed stream (e.g. `m/s^2` or `g`).
    pub units: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            time: "time".into(),
            x: "ax".into(),
            y: "ay".into(),
            z: "az".into(),
            units: "m/s^2".into(),
        }
    }
}

/// A timestamped 3-axis accelerometer trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    timestamps: Vec<f64>,
    ax: Vec<f64>,
    ay: Vec<f64>,
    az: Vec<f64>,
    nominal_rate: f64,
    irregular: bool,
    pub source_label: String,
    pub units: String,
}

impl SampleStream {
    /// Builds a validated stream. The nominal rate is estimated from the
    /// timestamp span when `nominal_rate` is `None`.
    pub fn new(
        timestamps: Vec<f64>,
        ax: Vec<f64>,
        ay: Vec<f64>,
        az: Vec<f64>,
        nominal_rate: Option<f64>,
    ) -> Result<Self, IngestError> {
        let n = timestamps.len();
        if ax.len() != n || ay.len() != n || az.len() != n {
            return Err(IngestError::LengthMismatch);
        }
        if n < 2 {
            return Err(IngestError::TooFewSamples(n));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            // 1-based data line, header is line 1
            return Err(IngestError::NonMonotonicTimestamps { line: i + 3 });
        }
        let rate = match nominal_rate {
            Some(r) => r,
            None => (n - 1) as f64 / (timestamps[n - 1] - timestamps[0]),
        };
        if !(rate.is_finite() && rate > 0.0) {
            return Err(IngestError::InvalidRate(rate));
        }
        let irregular = {
            let mut dts: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
            let median = median_in_place(&mut dts);
            ((median * rate) - 1.0).abs() > IRREGULAR_TOLERANCE
        };
        Ok(SampleStream {
            timestamps,
            ax,
            ay,
            az,
            nominal_rate: rate,
            irregular,
            source_label: String::new(),
            units: "m/s^2".into(),
        })
    }

    /// Stream on the uniform grid `t0 + k / rate`.
    pub fn uniform(
        t0: f64,
        rate: f64,
        ax: Vec<f64>,
        ay: Vec<f64>,
        az: Vec<f64>,
    ) -> Result<Self, IngestError> {
        let timestamps = (0..ax.len()).map(|k| t0 + k as f64 / rate).collect();
        SampleStream::new(timestamps, ax, ay, az, Some(rate))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn axis(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.ax,
            Axis::Y => &self.ay,
            Axis::Z => &self.az,
        }
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    pub fn is_irregular(&self) -> bool {
        self.irregular
    }

    pub fn duration(&self) -> f64 {
        self.timestamps[self.len() - 1] - self.timestamps[0]
    }

    /// True when every interval is within `rel_tol` of `1 / nominal_rate`.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let period = 1.0 / self.nominal_rate;
        self.timestamps
            .windows(2)
            .all(|w| ((w[1] - w[0]) - period).abs() <= rel_tol * period)
    }
}

pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Parses an accelerometer CSV file.
pub fn parse_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<SampleStream, IngestError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let label = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(parse_csv_reader(file, mapping)?.with_label(label))
}

/// Parses CSV text from any reader. Rows with unparseable numerics are errors.
pub fn parse_csv_reader<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<SampleStream, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let cols = [find(&mapping.time)?, find(&mapping.x)?, find(&mapping.y)?, find(&mapping.z)?];
    let names = [&mapping.time, &mapping.x, &mapping.y, &mapping.z];

    let mut t = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut vals = [0.0; 4];
        for (slot, (&col, name)) in vals.iter_mut().zip(cols.iter().zip(names)) {
            let field = record.get(col).ok_or_else(|| IngestError::MalformedRow {
                line,
                reason: format!("missing field `{name}`"),
            })?;
            let v: f64 = field.parse().map_err(|_| IngestError::MalformedRow {
                line,
                reason: format!("`{field}` in column `{name}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("non-finite value in column `{name}`"),
                });
            }
            *slot = v;
        }
        if let Some(&last) = t.last() {
            if !(vals[0] > last) {
                return Err(IngestError::NonMonotonicTimestamps { line });
            }
        }
        t.push(vals[0]);
        x.push(vals[1]);
        y.push(vals[2]);
        z.push(vals[3]);
    }
    Ok(SampleStream::new(t, x, y, z, None)?.with_units(mapping.units.clone()))
}

fn csv_error(e: csv::Error, fallback_line: usize) -> IngestError {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Writes the stream as CSV using the mapping's header names.
///
/// Values use the shortest representation that parses back to the same
/// `f64`, so a write/parse cycle is lossless.
pub fn write_csv<W: Write>(stream: &SampleStream, mapping: &ColumnMapping, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{},{},{},{}", mapping.time, mapping.x, mapping.y, mapping.z)?;
    for i in 0..stream.len() {
        writeln!(
            out,
            "{},{},{},{}",
            stream.timestamps[i], stream.ax[i], stream.ay[i], stream.az[i]
        )?;
    }
    Ok(())
}

/// Linear-interpolation resampling onto the uniform grid `t0 + k / target_rate`.
///
/// Only down-sampling (or re-gridding at the same rate) is allowed.
pub fn resample(stream: &SampleStream, target_rate: f64) -> Result<SampleStream, IngestError> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(IngestError::InvalidRate(target_rate));
    }
    let nominal = stream.nominal_rate;
    if target_rate > nominal * (1.0 + 1e-9) {
        return Err(IngestError::UpsamplingRequested {
            target: target_rate,
            nominal,
        });
    }
    let ts = &stream.timestamps;
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    let m = (span * target_rate + 1e-9).floor() as usize + 1;
    if m < 2 {
        return Err(IngestError::TooFewSamples(m));
    }

    let grid: Vec<f64> = (0..m).map(|k| t0 + k as f64 / target_rate).collect();
    let mut ax = Vec::with_capacity(m);
    let mut ay = Vec::with_capacity(m);
    let mut az = Vec::with_capacity(m);
    let mut j = 0usize;
    let last = ts.len() - 1;
    for &t in &grid {
        while j + 1 < last && ts[j + 1] <= t {
            j += 1;
        }
        let (a, b) = (ts[j], ts[j + 1]);
        let frac = ((t - a) / (b - a)).clamp(0.0, 1.0);
        let lerp = |v: &[f64]| v[j] + frac * (v[j + 1] - v[j]);
        ax.push(lerp(&stream.ax));
        ay.push(lerp(&stream.ay));
        az.push(lerp(&stream.az));
    }
    let mut out = SampleStream::new(grid, ax, ay, az, Some(target_rate))?;
    out.source_label = stream.source_label.clone();
    out.units = stream.units.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SampleStream, IngestError> {
        parse_csv_reader(text.as_bytes(), &ColumnMapping::default())
    }

    #[test]
    fn three_row_csv() {
        let s = parse("time,ax,ay,az\n0.0,1,2,3\n0.5,1,2,3\n1.0,1,2,3\n").unwrap();
        assert_eq!(s.len(), 3);
        assert!((s.nominal_rate() - 2.0).abs() < 1e-12);
        assert!(!s.is_irregular());
    }

    #[test]
    fn decreasing_timestamp_is_rejected() {
        let err = parse("time,ax,ay,az\n1.0,0,0,0\n0.5,0,0,0\n").unwrap_err();
        assert!(matches!(err, IngestError::NonMonotonicTimestamps { line: 3 }));
    }

    #[test]
    fn missing_column() {
        let err = parse("time,ax,ay\n0,0,0\n1,0,0\n").unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(ref c) if c == "az"));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse("time,ax,ay,az\n0,0,0,0\n0.1,0,abc,0\n0.2,0,0,0\n").unwrap_err();
        match err {
            IngestError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            parse("time,ax,ay,az\n0,0,0,0\n").unwrap_err(),
            IngestError::TooFewSamples(1)
        ));
    }

    #[test]
    fn custom_mapping() {
        let mapping = ColumnMapping {
            time: "t".into(),
            x: "gFx".into(),
            y: "gFy".into(),
            z: "gFz".into(),
            units: "g".into(),
        };
        let s = parse_csv_reader("gFz,t,gFx,gFy\n3,0,1,2\n6,0.01,4,5\n".as_bytes(), &mapping).unwrap();
        assert_eq!(s.axis(Axis::Z), &[3.0, 6.0]);
        assert_eq!(s.axis(Axis::X), &[1.0, 4.0]);
        assert_eq!(s.units, "g");
    }

    #[test]
    fn default_phone_rate_is_recovered() {
        let mut text = String::from("time,ax,ay,az\n");
        for k in 0..840 {
            text.push_str(&format!("{:.6},0.01,0.02,9.81\n", k as f64 / 420.0));
        }
        let s = parse(&text).unwrap();
        assert!((s.nominal_rate() - 420.0).abs() < 0.01, "{}", s.nominal_rate());
        assert!(s.is_uniform(0.01));
    }

    #[test]
    fn jittery_timestamps_are_flagged_not_rejected() {
        // median gap 0.01 but one long dropout stretches the mean rate
        let mut t: Vec<f64> = (0..50).map(|k| k as f64 * 0.01).collect();
        t.extend((0..50).map(|k| 5.0 + k as f64 * 0.01));
        let n = t.len();
        let s = SampleStream::new(t, vec![0.0; n], vec![0.0; n], vec![0.0; n], None).unwrap();
        assert!(s.is_irregular());
    }

    #[test]
    fn resample_identity_grid() {
        let n = 420;
        let vals: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let s = SampleStream::uniform(0.0, 420.0, vals.clone(), vals.clone(), vals.clone()).unwrap();
        let r = resample(&s, 420.0).unwrap();
        assert_eq!(r.len(), n);
        for (a, b) in r.axis(Axis::Z).iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_ramp_is_exact() {
        let n = 4200;
        let t: Vec<f64> = (0..n).map(|k| k as f64 / 420.0).collect();
        let s = SampleStream::new(t.clone(), t.clone(), t.clone(), t.clone(), Some(420.0)).unwrap();
        let r = resample(&s, 200.0).unwrap();
        for (ti, v) in r.timestamps().iter().zip(r.axis(Axis::X)) {
            assert!((ti - v).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_rejects_upsampling() {
        let s = SampleStream::uniform(0.0, 100.0, vec![0.0; 10], vec![0.0; 10], vec![0.0; 10]).unwrap();
        assert!(matches!(
            resample(&s, 200.0).unwrap_err(),
            IngestError::UpsamplingRequested { .. }
        ));
    }

    #[test]
    fn resample_constant_mean_exact() {
        let c = 9.80665;
        let s = SampleStream::uniform(0.0, 420.0, vec![c; 1000], vec![c; 1000], vec![c; 1000]).unwrap();
        let r = resample(&s, 200.0).unwrap();
        assert!(r.axis(Axis::Z).iter().all(|&v| v == c));
    }
}
