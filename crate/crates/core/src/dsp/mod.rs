//! Filtering, spectral analysis and the under-sampling alias model.

mod alias;
mod filter;
mod image;
mod spectral;

pub use alias::{predict_alias, AliasPrediction};
pub use filter::{highpass, highpass_stream, lowpass, Biquad, FilterKind, FilterSpec, SosFilter};
pub use image::{encode_png, render_image, save_png, DB_FLOOR};
pub use spectral::{
    hann_window, magnitude_spectrum, stft, Spectrogram, StftParams, DEFAULT_HOP, DEFAULT_WINDOW_LEN,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff} Hz is not inside (0, {nyquist}) Hz")]
    CutoffAboveNyquist { cutoff: f64, nyquist: f64 },
    #[error("filter order {0} outside [1, 8]")]
    BadOrder(usize),
    #[error("signal is not on a uniform time grid")]
    NonUniformGrid,
    #[error("segment of {len} samples is shorter than window {window}")]
    SegmentTooShort { len: usize, window: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("spectrogram has no frames or bins")]
    EmptySpectrogram,
}
