//! Synthetic speaker-to-accelerometer vibration channel.
//!
//! Utterances are synthesised at an audio rate as a fundamental plus formant
//! tones under a smooth envelope. The channel band-limits them to the
//! speaker/body response band, attenuates, and point-samples at the sensor
//! rate with no anti-alias filter, so every tone folds to `|f - N * f_s|`.
//! Hand motion (a slow leaky random walk, low-passed at 5 Hz) and white
//! sensor noise are added on every axis. The vibration lands on Z with a
//! small leakage into X and Y.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{lowpass, DspError, FilterSpec};
use crate::ingest::{Axis, IngestError, SampleStream};
use crate::seed::{derive_seed, rng_for};
use crate::segment::{AnnotatedRegion, WordRegion};

pub const DEFAULT_SOURCE_RATE: f64 = 16_000.0;
/// Half-width, in source samples, of the band-limited interpolation kernel.
const SINC_HALF_WIDTH: isize = 16;
const HAND_MOTION_CUTOFF: f64 = 5.0;
/// Corner of the leak that keeps the hand-motion walk stationary.
const HAND_MOTION_LEAK: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("utterance duration {0} s outside [0.1, 2] s")]
    BadDuration(f64),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("need at least 2 profiles, got {0}")]
    TooFewProfiles(usize),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Step standard deviation of the hand-motion walk.
    pub hand_motion_walk_std: f64,
    pub white_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub sensor_rate: f64,
    /// Source band that reaches the sensor, Hz.
    pub response_band: (f64, f64),
    /// In-band loss from speaker to sensor.
    pub attenuation_db: f64,
    /// Level of the X/Y copies relative to Z (negative dB).
    pub leakage_db: f64,
    /// Constant offset on Z.
    pub gravity: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            sensor_rate: 420.0,
            response_band: (100.0, 3300.0),
            attenuation_db: 60.0,
            leakage_db: -20.0,
            gravity: 9.81,
            noise: NoiseSpec {
                hand_motion_walk_std: 2e-5,
                white_std: 1e-4,
            },
            seed: 0,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let (lo, hi) = self.response_band;
        let bad = |m: String| Err(SimError::InvalidChannel(m));
        if !(self.sensor_rate > 0.0 && self.sensor_rate.is_finite()) {
            return bad(format!("sensor rate {}", self.sensor_rate));
        }
        if !(lo >= 0.0 && lo < hi) {
            return bad(format!("response band ({lo}, {hi})"));
        }
        if !(self.noise.white_std >= 0.0 && self.noise.hand_motion_walk_std >= 0.0) {
            return bad("negative noise level".into());
        }
        if !self.attenuation_db.is_finite() || !self.leakage_db.is_finite() || !self.gravity.is_finite() {
            return bad("non-finite gain".into());
        }
        Ok(())
    }

    /// Linear in-band amplitude gain.
    pub fn gain(&self) -> f64 {
        10f64.powf(-self.attenuation_db / 20.0)
    }

    /// Ratio of a unit-RMS source, after the channel, to the white noise level.
    pub fn snr_db(&self) -> f64 {
        20.0 * (self.gain() / self.noise.white_std).log10()
    }

    /// Rescales both noise terms together so that [`ChannelSpec::snr_db`]
    /// equals `snr_db`; the hand-motion to white ratio is kept.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let white = self.gain() / 10f64.powf(snr_db / 20.0);
        if self.noise.white_std > 0.0 {
            self.noise.hand_motion_walk_std *= white / self.noise.white_std;
        }
        self.noise.white_std = white;
        self
    }
}

/// Voice model for one (speaker, word) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    /// Fundamental frequency, Hz, at unit amplitude.
    pub fundamental: f64,
    /// `(frequency Hz, amplitude relative to the fundamental)`.
    pub formants: Vec<(f64, f64)>,
    /// Nominal utterance length, seconds.
    pub duration: f64,
    pub speaker_id: String,
    pub gender_tag: String,
    pub word_id: String,
}

impl SpeakerProfile {
    fn validate(&self) -> Result<(), SimError> {
        if !(self.fundamental > 0.0) {
            return Err(SimError::InvalidProfile(format!("fundamental {}", self.fundamental)));
        }
        if self.formants.iter().any(|&(f, a)| !(f > 0.0 && a > 0.0)) {
            return Err(SimError::InvalidProfile("formants need positive frequency and amplitude".into()));
        }
        Ok(())
    }
}

/// Per-utterance variation applied by [`synth_utterance_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub source_rate: f64,
    /// Relative spread (uniform, ±) of the fundamental.
    pub pitch_jitter: f64,
    /// Relative spread of each formant frequency.
    pub formant_jitter: f64,
    /// Relative spread of each formant amplitude.
    pub amplitude_jitter: f64,
    /// Raised-cosine attack and release, seconds.
    pub ramp: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            source_rate: DEFAULT_SOURCE_RATE,
            pitch_jitter: 0.015,
            formant_jitter: 0.004,
            amplitude_jitter: 0.1,
            ramp: 0.03,
        }
    }
}

/// Audio-rate waveform starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceWaveform {
    pub samples: Vec<f64>,
    pub rate: f64,
}

impl SourceWaveform {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }
}

/// Constant-amplitude tone, useful for probing the channel.
pub fn tone(freq: f64, duration: f64, rate: f64, amplitude: f64, phase: f64) -> SourceWaveform {
    let n = (duration * rate).round() as usize;
    SourceWaveform {
        samples: (0..n)
            .map(|i| amplitude * (2.0 * PI * freq * i as f64 / rate + phase).sin())
            .collect(),
        rate,
    }
}

pub fn synth_utterance(profile: &SpeakerProfile, duration: f64, seed: u64) -> Result<SourceWaveform, SimError> {
    synth_utterance_with(profile, duration, seed, &SynthConfig::default())
}

/// Fundamental plus formant tones with seeded jitter under a Tukey envelope.
pub fn synth_utterance_with(
    profile: &SpeakerProfile,
    duration: f64,
    seed: u64,
    config: &SynthConfig,
) -> Result<SourceWaveform, SimError> {
    if !(0.1..=2.0).contains(&duration) {
        return Err(SimError::BadDuration(duration));
    }
    profile.validate()?;
    let mut rng = rng_for(seed, 0);
    let mut spread = |rel: f64| if rel > 0.0 { 1.0 + rng.random_range(-rel..=rel) } else { 1.0 };

    let mut partials = vec![(profile.fundamental * spread(config.pitch_jitter), 1.0)];
    for &(f, a) in &profile.formants {
        let freq = f * spread(config.formant_jitter);
        let amp = a * spread(config.amplitude_jitter);
        partials.push((freq, amp));
    }
    let phases: Vec<f64> = partials.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let rate = config.source_rate;
    let n = (duration * rate).round() as usize;
    let ramp = ((config.ramp * rate) as usize).min(n / 2).max(1);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let edge = i.min(n - 1 - i);
            let env = if edge < ramp {
                0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            let carrier: f64 = partials
                .iter()
                .zip(&phases)
                .map(|(&(f, a), &ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum();
            env * carrier
        })
        .collect();
    Ok(SourceWaveform { samples, rate })
}

/// Zeroes every spectral component outside `[lo, hi]` Hz.
fn band_limit(source: &SourceWaveform, (lo, hi): (f64, f64)) -> Vec<f64> {
    let n = source.samples.len();
    if n == 0 {
        return Vec::new();
    }
    let nfft = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = source
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    planner.plan_fft_forward(nfft).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(nfft - k) as f64 * source.rate / nfft as f64;
        if bin < lo || bin > hi {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(nfft).process(&mut buf);
    buf[..n].iter().map(|c| c.re / nfft as f64).collect()
}

fn lanczos(x: f64) -> f64 {
    let a = SINC_HALF_WIDTH as f64;
    if x == 0.0 {
        1.0
    } else if x.abs() >= a {
        0.0
    } else {
        let px = PI * x;
        a * px.sin() * (px / a).sin() / (px * px)
    }
}

/// Band-limited reconstruction of `samples` (at `rate`) evaluated at `t` seconds.
fn interpolate(samples: &[f64], rate: f64, t: f64) -> f64 {
    let u = t * rate;
    let centre = u.floor() as isize;
    let mut acc = 0.0;
    for j in centre - SINC_HALF_WIDTH + 1..=centre + SINC_HALF_WIDTH {
        if j < 0 || j as usize >= samples.len() {
            continue;
        }
        acc += samples[j as usize] * lanczos(u - j as f64);
    }
    acc
}

/// Sensor-rate vibration caused by `source`, before noise: sample `k` is the
/// band-limited, attenuated source at `k / sensor_rate` seconds.
pub fn vibration(source: &SourceWaveform, channel: &ChannelSpec) -> Result<Vec<f64>, SimError> {
    channel.validate()?;
    let limited = band_limit(source, channel.response_band);
    let gain = channel.gain();
    let m = (source.duration() * channel.sensor_rate).floor() as usize;
    Ok((0..m)
        .map(|k| gain * interpolate(&limited, source.rate, k as f64 / channel.sensor_rate))
        .collect())
}

/// Hand motion plus white noise for one axis.
fn axis_noise(n: usize, channel: &ChannelSpec, stream: u64) -> Result<Vec<f64>, SimError> {
    let mut rng = rng_for(channel.seed, stream);
    let white = Normal::new(0.0, channel.noise.white_std).expect("validated std");
    let mut out: Vec<f64> = (0..n).map(|_| white.sample(&mut rng)).collect();
    if channel.noise.hand_motion_walk_std > 0.0 && n > 1 {
        let step = Normal::new(0.0, channel.noise.hand_motion_walk_std).expect("validated std");
        let leak = (-2.0 * PI * HAND_MOTION_LEAK / channel.sensor_rate).exp();
        let mut level = 0.0;
        let walk: Vec<f64> = (0..n)
            .map(|_| {
                level = leak * level + step.sample(&mut rng);
                level
            })
            .collect();
        let cutoff = HAND_MOTION_CUTOFF.min(0.4 * channel.sensor_rate);
        let smooth = lowpass(&walk, channel.sensor_rate, &FilterSpec::lowpass(cutoff, 2))?;
        out.iter_mut().zip(smooth).for_each(|(o, w)| *o += w);
    }
    Ok(out)
}

/// Builds the three sensor axes from a Z vibration track.
fn assemble(z_signal: &[f64], channel: &ChannelSpec, label: &str) -> Result<SampleStream, SimError> {
    let n = z_signal.len();
    let leak = 10f64.powf(channel.leakage_db / 20.0);
    let mut axes = Vec::with_capacity(3);
    for (i, axis) in Axis::ALL.into_iter().enumerate() {
        let noise = axis_noise(n, channel, 1 + i as u64)?;
        let (scale, offset) = match axis {
            Axis::Z => (1.0, channel.gravity),
            _ => (leak, 0.0),
        };
        axes.push(
            noise
                .into_iter()
                .zip(z_signal)
                .map(|(e, s)| offset + scale * s + e)
                .collect::<Vec<f64>>(),
        );
    }
    let az = axes.pop().expect("three axes");
    let ay = axes.pop().expect("three axes");
    let ax = axes.pop().expect("three axes");
    Ok(SampleStream::uniform(0.0, channel.sensor_rate, ax, ay, az)?
        .with_label(label)
        .with_units("m/s^2"))
}

/// Passes `source` through the channel and returns the recorded sensor stream.
pub fn transmit(source: &SourceWaveform, channel: &ChannelSpec) -> Result<SampleStream, SimError> {
    let z = vibration(source, channel)?;
    assemble(&z, channel, "simulated")
}

/// Timing of utterances inside a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusLayout {
    /// Silence between the end of one utterance and the start of the next.
    pub gap: f64,
    /// Silence before the first and after the last utterance.
    pub margin: f64,
    /// Relative spread of each utterance's duration around its profile's.
    pub duration_jitter: f64,
}

impl Default for CorpusLayout {
    fn default() -> Self {
        CorpusLayout {
            gap: 5.0,
            margin: 1.0,
            duration_jitter: 0.08,
        }
    }
}

/// A simulated recording with exact region boundaries and labels.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub stream: SampleStream,
    /// Regions annotated with `speaker`, `gender` and `word` columns.
    pub truth: Vec<AnnotatedRegion>,
}

pub fn make_corpus(
    profiles: &[SpeakerProfile],
    words_per_class: usize,
    channel: &ChannelSpec,
    seed: u64,
) -> Result<Corpus, SimError> {
    make_corpus_with(
        profiles,
        words_per_class,
        channel,
        seed,
        &CorpusLayout::default(),
        &SynthConfig::default(),
    )
}

/// Plays each profile `words_per_class` times, one class after another.
pub fn make_corpus_with(
    profiles: &[SpeakerProfile],
    words_per_class: usize,
    channel: &ChannelSpec,
    seed: u64,
    layout: &CorpusLayout,
    synth: &SynthConfig,
) -> Result<Corpus, SimError> {
    if profiles.len() < 2 {
        return Err(SimError::TooFewProfiles(profiles.len()));
    }
    channel.validate()?;
    let plan: Vec<(usize, u64)> = profiles
        .iter()
        .enumerate()
        .flat_map(|(p, _)| (0..words_per_class).map(move |r| (p, (p * words_per_class + r) as u64)))
        .collect();

    let rendered: Vec<(usize, Vec<f64>)> = plan
        .par_iter()
        .map(|&(p, id)| -> Result<(usize, Vec<f64>), SimError> {
            let utt_seed = derive_seed(seed, id);
            let mut rng = rng_for(utt_seed, 1);
            let jitter = layout.duration_jitter;
            let scale = if jitter > 0.0 { 1.0 + rng.random_range(-jitter..=jitter) } else { 1.0 };
            let duration = (profiles[p].duration * scale).clamp(0.1, 2.0);
            let source = synth_utterance_with(&profiles[p], duration, utt_seed, synth)?;
            Ok((p, vibration(&source, channel)?))
        })
        .collect::<Result<_, _>>()?;

    let rate = channel.sensor_rate;
    let gap = (layout.gap * rate).round() as usize;
    let margin = (layout.margin * rate).round() as usize;
    let total = 2 * margin + rendered.iter().map(|(_, v)| v.len()).sum::<usize>() + gap * rendered.len().saturating_sub(1);
    let mut z = vec![0.0; total];
    let mut truth = Vec::with_capacity(rendered.len());
    let mut cursor = margin;
    for (p, vib) in &rendered {
        z[cursor..cursor + vib.len()].copy_from_slice(vib);
        let profile = &profiles[*p];
        truth.push(AnnotatedRegion {
            region: WordRegion {
                start: cursor,
                end: cursor + vib.len(),
                peak_energy: 1.0,
                axis: Axis::Z,
            },
            labels: vec![
                ("speaker".into(), profile.speaker_id.clone()),
                ("gender".into(), profile.gender_tag.clone()),
                ("word".into(), profile.word_id.clone()),
            ],
        });
        cursor += vib.len() + gap;
    }
    let stream = assemble(&z, channel, "simulated-corpus")?;
    Ok(Corpus { stream, truth })
}

/// Digit words as (label, first three formants in Hz, duration in seconds).
pub const DIGIT_WORDS: [(&str, [f64; 3], f64); 10] = [
    ("zero", [390.0, 2300.0, 2900.0], 0.45),
    ("one", [640.0, 1190.0, 2390.0], 0.35),
    ("two", [300.0, 870.0, 2240.0], 0.30),
    ("three", [270.0, 2290.0, 3010.0], 0.40),
    ("four", [570.0, 840.0, 2410.0], 0.38),
    ("five", [730.0, 1090.0, 2440.0], 0.45),
    ("six", [390.0, 1990.0, 2550.0], 0.42),
    ("seven", [530.0, 1840.0, 2480.0], 0.48),
    ("eight", [440.0, 2100.0, 2700.0], 0.33),
    ("nine", [660.0, 1720.0, 2410.0], 0.43),
];

const FORMANT_LEVELS: [f64; 3] = [0.7, 0.45, 0.25];

/// Speakers as (id, gender, fundamental Hz, vocal-tract formant scale).
pub const DEMO_SPEAKERS: [(&str, &str, f64, f64); 4] = [
    ("m1", "male", 115.0, 1.0),
    ("m2", "male", 135.0, 1.06),
    ("f1", "female", 205.0, 1.17),
    ("f2", "female", 240.0, 1.24),
];

/// One profile per (speaker, word) for the first `n_words` digit words.
pub fn demo_profiles(speakers: &[(&str, &str, f64, f64)], n_words: usize) -> Vec<SpeakerProfile> {
    let mut out = Vec::new();
    for &(id, gender, f0, scale) in speakers {
        for &(word, formants, duration) in DIGIT_WORDS.iter().take(n_words) {
            out.push(SpeakerProfile {
                fundamental: f0,
                formants: formants
                    .iter()
                    .zip(FORMANT_LEVELS)
                    .map(|(&f, a)| ((f * scale).min(3250.0), a))
                    .collect(),
                duration,
                speaker_id: id.into(),
                gender_tag: gender.into(),
                word_id: word.into(),
            });
        }
    }
    out
}
