//! Butterworth IIR design (bilinear transform, second-order sections) and
//! zero-phase forward-backward application.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;
use crate::ingest::{Axis, SampleStream};

/// Relative timestamp jitter tolerated before a stream counts as non-uniform.
const UNIFORM_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterKind {
    HighPass,
    LowPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// Cutoff (-3 dB of a single pass) in Hz.
    pub cutoff: f64,
    pub order: usize,
}

impl FilterSpec {
    pub fn highpass(cutoff: f64, order: usize) -> Self {
        FilterSpec {
            kind: FilterKind::HighPass,
            cutoff,
            order,
        }
    }

    pub fn lowpass(cutoff: f64, order: usize) -> Self {
        FilterSpec {
            kind: FilterKind::LowPass,
            cutoff,
            order,
        }
    }

    fn validate(&self, rate: f64) -> Result<(), DspError> {
        if !(1..=8).contains(&self.order) {
            return Err(DspError::BadOrder(self.order));
        }
        let nyquist = rate / 2.0;
        if !(self.cutoff > 0.0 && self.cutoff < nyquist) {
            return Err(DspError::CutoffAboveNyquist {
                cutoff: self.cutoff,
                nyquist,
            });
        }
        Ok(())
    }
}

impl Default for FilterSpec {
    /// 1 Hz, order 4 high-pass used ahead of feature extraction.
    fn default() -> Self {
        FilterSpec::highpass(1.0, 4)
    }
}

/// One transposed direct-form II section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Internal state reached after a unit step has settled.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let y = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * y;
        let z1 = b1 - a1 * y + z2;
        [z1, z2]
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (1.0 + z_inv * self.a[1] + z2 * self.a[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Designs a digital Butterworth filter with a pre-warped cutoff.
    pub fn butterworth(spec: &FilterSpec, rate: f64) -> Result<Self, DspError> {
        spec.validate(rate)?;
        let n = spec.order;
        let fs2 = 2.0 * rate;
        let warped = fs2 * (PI * spec.cutoff / rate).tan();
        let bilinear = |s: Complex64| (1.0 + s / fs2) / (1.0 - s / fs2);

        let mut sections = Vec::with_capacity(n.div_ceil(2));
        // upper-half-plane poles of the analog prototype, plus the real pole for odd orders
        for k in 0..n / 2 {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let proto = Complex64::from_polar(1.0, theta);
            let s = match spec.kind {
                FilterKind::HighPass => warped / proto,
                FilterKind::LowPass => warped * proto,
            };
            let p = bilinear(s);
            let a = [1.0, -2.0 * p.re, p.norm_sqr()];
            sections.push(second_order(spec.kind, a));
        }
        if n % 2 == 1 {
            // the real prototype pole -1 lands on -warped for both kinds
            let p = bilinear(Complex64::new(-warped, 0.0)).re;
            sections.push(first_order(spec.kind, p));
        }
        Ok(SosFilter { sections })
    }

    /// Magnitude of the digital response at `freq` Hz.
    pub fn magnitude(&self, freq: f64, rate: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / rate);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
            .norm()
    }

    fn initial_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let zi = s.steady_state();
                let out = [zi[0] * scale, zi[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    fn run(&self, data: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            for x in data.iter_mut() {
                let xin = *x;
                let y = b0 * xin + z[0];
                z[0] = b1 * xin - a1 * y + z[1];
                z[1] = b2 * xin - a2 * y;
                *x = y;
            }
        }
    }

    /// Zero-phase forward-backward filtering with odd extension at both ends
    /// and steady-state initial conditions.
    pub fn filtfilt(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n < 2 {
            return signal.to_vec();
        }
        let padlen = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        let (first, last) = (signal[0], signal[n - 1]);
        ext.extend((1..=padlen).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=padlen).map(|i| 2.0 * last - signal[n - 1 - i]));

        let zi = self.initial_state();
        let scaled = |x0: f64| zi.iter().map(|z| [z[0] * x0, z[1] * x0]).collect::<Vec<_>>();

        let x0 = ext[0];
        self.run(&mut ext, scaled(x0));
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, scaled(y0));
        ext.reverse();
        ext[padlen..padlen + n].to_vec()
    }
}

fn second_order(kind: FilterKind, a: [f64; 3]) -> Biquad {
    match kind {
        // double zero at z = 1, unit gain at Nyquist
        FilterKind::HighPass => {
            let g = (1.0 - a[1] + a[2]) / 4.0;
            Biquad { b: [g, -2.0 * g, g], a }
        }
        // double zero at z = -1, unit gain at DC
        FilterKind::LowPass => {
            let g = (1.0 + a[1] + a[2]) / 4.0;
            Biquad { b: [g, 2.0 * g, g], a }
        }
    }
}

fn first_order(kind: FilterKind, p: f64) -> Biquad {
    let a = [1.0, -p, 0.0];
    match kind {
        FilterKind::HighPass => {
            let g = (1.0 + p) / 2.0;
            Biquad { b: [g, -g, 0.0], a }
        }
        FilterKind::LowPass => {
            let g = (1.0 - p) / 2.0;
            Biquad { b: [g, g, 0.0], a }
        }
    }
}

/// Zero-phase Butterworth high-pass of a uniformly sampled signal.
pub fn highpass(signal: &[f64], rate: f64, spec: &FilterSpec) -> Result<Vec<f64>, DspError> {
    if spec.kind != FilterKind::HighPass {
        return Err(DspError::BadParameter("expected a high-pass spec".into()));
    }
    Ok(SosFilter::butterworth(spec, rate)?.filtfilt(signal))
}

/// Zero-phase Butterworth low-pass.
pub fn lowpass(signal: &[f64], rate: f64, spec: &FilterSpec) -> Result<Vec<f64>, DspError> {
    if spec.kind != FilterKind::LowPass {
        return Err(DspError::BadParameter("expected a low-pass spec".into()));
    }
    Ok(SosFilter::butterworth(spec, rate)?.filtfilt(signal))
}

/// High-passes one axis of a stream; the stream must be on a uniform grid.
pub fn highpass_stream(stream: &SampleStream, axis: Axis, spec: &FilterSpec) -> Result<Vec<f64>, DspError> {
    if !stream.is_uniform(UNIFORM_TOLERANCE) {
        return Err(DspError::NonUniformGrid);
    }
    highpass(stream.axis(axis), stream.nominal_rate(), spec)
}
