use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::DspError;

pub const DEFAULT_WINDOW_LEN: usize = 64;
pub const DEFAULT_HOP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftParams {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            window_len: DEFAULT_WINDOW_LEN,
            hop: DEFAULT_HOP,
        }
    }
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// One-sided magnitude spectrum (bins `0..=nfft/2`) of `frame` zero-padded to `nfft`.
pub fn magnitude_spectrum(frame: &[f64], nfft: usize) -> Vec<f64> {
    assert!(nfft >= frame.len() && nfft > 0);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let mut buf: Vec<Complex64> = frame
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    fft.process(&mut buf);
    buf[..=nfft / 2].iter().map(|c| c.norm()).collect()
}

/// Magnitude short-time Fourier transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// `magnitudes[frame][bin]`, unnormalised `|X_k|`.
    pub magnitudes: Vec<Vec<f64>>,
    /// Frame centre times in seconds, relative to the first sample.
    pub frame_times: Vec<f64>,
    pub bin_freqs: Vec<f64>,
    pub window_len: usize,
    pub hop: usize,
    pub nfft: usize,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn n_bins(&self) -> usize {
        self.bin_freqs.len()
    }

    /// Bin holding the largest summed magnitude over all frames.
    pub fn peak_bin(&self) -> usize {
        let mut totals = vec![0.0; self.n_bins()];
        for frame in &self.magnitudes {
            for (t, m) in totals.iter_mut().zip(frame) {
                *t += m;
            }
        }
        totals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }

    pub fn bin_width(&self) -> f64 {
        if self.bin_freqs.len() > 1 {
            self.bin_freqs[1] - self.bin_freqs[0]
        } else {
            0.0
        }
    }

    /// CSV with a `time_s` column followed by one column per bin frequency.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "time_s")?;
        for f in &self.bin_freqs {
            write!(out, ",{f}")?;
        }
        writeln!(out)?;
        for (t, row) in self.frame_times.iter().zip(&self.magnitudes) {
            write!(out, "{t}")?;
            for m in row {
                write!(out, ",{m}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Hann-windowed magnitude STFT. Frames are zero-padded to the next power of two.
pub fn stft(signal: &[f64], rate: f64, window_len: usize, hop: usize) -> Result<Spectrogram, DspError> {
    if window_len == 0 || window_len > signal.len() {
        return Err(DspError::SegmentTooShort {
            len: signal.len(),
            window: window_len,
        });
    }
    if hop == 0 || hop > window_len {
        return Err(DspError::BadParameter(format!(
            "hop {hop} must be in [1, {window_len}]"
        )));
    }
    if !(rate > 0.0) {
        return Err(DspError::BadParameter(format!("rate {rate}")));
    }
    let nfft = window_len.next_power_of_two();
    let window = hann_window(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let n_frames = (signal.len() - window_len) / hop + 1;

    let mut magnitudes = Vec::with_capacity(n_frames);
    let mut frame_times = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for f in 0..n_frames {
        let start = f * hop;
        for (slot, (x, w)) in buf.iter_mut().zip(signal[start..start + window_len].iter().zip(&window)) {
            *slot = Complex64::new(x * w, 0.0);
        }
        buf[window_len..].fill(Complex64::new(0.0, 0.0));
        fft.process(&mut buf);
        magnitudes.push(buf[..=nfft / 2].iter().map(|c| c.norm()).collect());
        frame_times.push((start as f64 + window_len as f64 / 2.0) / rate);
    }
    let bin_freqs = (0..=nfft / 2).map(|k| k as f64 * rate / nfft as f64).collect();
    Ok(Spectrogram {
        magnitudes,
        frame_times,
        bin_freqs,
        window_len,
        hop,
        nfft,
    })
}
