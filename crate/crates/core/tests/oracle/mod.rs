//! Independent reference implementations used by the integration and
//! acceptance tests. Everything here is written as plain loops straight from
//! the definitions, without calling into the library's numeric code.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Enumerates every fold index and keeps the in-band alias closest to `f`.
pub fn brute_alias(f: f64, fs: f64) -> (u64, f64) {
    let top = (f / fs).ceil() as u64 + 1;
    let mut best: Option<(u64, f64)> = None;
    for n in 0..=top {
        let fa = (f - n as f64 * fs).abs();
        if fa <= fs / 2.0 {
            match best {
                Some((_, b)) if b <= fa => {}
                _ => best = Some((n, fa)),
            }
        }
    }
    best.expect("some fold lands in band")
}

/// Zero-phase gain in dB of an analog Butterworth high-pass, i.e. the
/// single-pass power response `|H(jw)|^2` expressed as an amplitude ratio.
pub fn butterworth_zero_phase_db(f: f64, cutoff: f64, order: usize) -> f64 {
    let power = 1.0 / (1.0 + (cutoff / f).powi(2 * order as i32));
    20.0 * power.log10()
}

/// Least-squares amplitude of a sinusoid at `freq` in `x[lo..hi]`.
pub fn fitted_amplitude(x: &[f64], rate: f64, freq: f64, lo: usize, hi: usize) -> f64 {
    let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &y) in x.iter().enumerate().take(hi).skip(lo) {
        let ph = 2.0 * PI * freq * i as f64 / rate;
        let (s, c) = ph.sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        ys += y * s;
        yc += y * c;
    }
    let det = ss * cc - sc * sc;
    let a = (ys * cc - yc * sc) / det;
    let b = (yc * ss - ys * sc) / det;
    (a * a + b * b).sqrt()
}

fn insertion_sort(x: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::with_capacity(x.len());
    for &item in x {
        let mut i = v.len();
        v.push(item);
        while i > 0 && v[i - 1] > item {
            v[i] = v[i - 1];
            i -= 1;
        }
        v[i] = item;
    }
    v
}

/// Quantile at 1-based position `p (n - 1) + 1`, interpolated linearly.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() as f64 - 1.0) + 1.0;
    let below = pos.floor();
    let frac = pos - below;
    let i = below as usize - 1;
    if i + 1 >= sorted.len() {
        return sorted[i];
    }
    sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
}

pub fn naive_time(x: &[f64]) -> [f64; 13] {
    let n = x.len() as f64;
    let mut min = x[0];
    let mut max = x[0];
    let mut sum = 0.0;
    for &v in x {
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
        sum += v;
    }
    let mean = if min == max { min } else { sum / n };
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in x {
        m2 += (v - mean).powi(2);
        m3 += (v - mean).powi(3);
        m4 += (v - mean).powi(4);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    let skew = if m2 < 1e-24 { 0.0 } else { m3 / (m2 * m2.sqrt()) };
    let kurt = if m2 < 1e-24 { 0.0 } else { m4 / m2.powi(2) };
    let sorted = insertion_sort(x);
    let mut changes = 0;
    for i in 1..x.len() {
        let a = x[i - 1] - mean;
        let b = x[i] - mean;
        if (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) {
            changes += 1;
        }
    }
    [
        min,
        max,
        mean,
        std,
        std * std,
        max - min,
        std / (mean.abs() + 1e-12),
        skew,
        kurt,
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.85),
        changes as f64 / (x.len() as f64 - 1.0),
    ]
}

/// Bins `1..=nfft/2` of the mean-removed, periodic-Hann-windowed region,
/// zero-padded to the next power of two, by direct DFT summation.
pub fn naive_spectrum(x: &[f64], rate: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let naive_mean = {
        let first = x[0];
        if x.iter().all(|&v| v == first) {
            first
        } else {
            x.iter().sum::<f64>() / n as f64
        }
    };
    let mut nfft = 1;
    while nfft < n.max(2) {
        nfft *= 2;
    }
    let mut mags = Vec::new();
    let mut freqs = Vec::new();
    for k in 1..=nfft / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in x.iter().enumerate() {
            let w = 0.5 * (1.0 - (2.0 * PI * t as f64 / n as f64).cos());
            let ang = -2.0 * PI * ((k * t) % nfft) as f64 / nfft as f64;
            re += (v - naive_mean) * w * ang.cos();
            im += (v - naive_mean) * w * ang.sin();
        }
        mags.push((re * re + im * im).sqrt());
        freqs.push(k as f64 * rate / nfft as f64);
    }
    (mags, freqs)
}

pub fn naive_spectral(m: &[f64], f: &[f64], rate: f64) -> [f64; 12] {
    let k = m.len();
    let safe = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut sum = 0.0;
    let mut energy = 0.0;
    let mut upper = 0.0;
    let mut peak = 0.0f64;
    for i in 0..k {
        sum += m[i];
        energy += m[i] * m[i];
        if f[i] > rate / 4.0 {
            upper += m[i] * m[i];
        }
        peak = peak.max(m[i]);
    }
    let mut entropy = 0.0;
    if energy > 0.0 && k > 1 {
        for &v in m {
            let p = v * v / energy;
            if p > 0.0 {
                entropy -= p * p.ln() / 2f64.ln();
            }
        }
        entropy /= (k as f64).ln() / 2f64.ln();
    }
    let mut irr_k = 0.0;
    let mut smooth = 0.0;
    let level = |v: f64| 20.0 * (v + 1e-12).log10();
    for i in 1..k.saturating_sub(1) {
        irr_k += (m[i] - (m[i - 1] + m[i] + m[i + 1]) / 3.0).abs();
        smooth += (level(m[i]) - (level(m[i - 1]) + level(m[i]) + level(m[i + 1])) / 3.0).abs();
    }
    let mut jumps = 0.0;
    for i in 0..k.saturating_sub(1) {
        jumps += (m[i] - m[i + 1]).powi(2);
    }
    let mut sharp = 0.0;
    let mut cen = 0.0;
    for i in 0..k {
        sharp += ((i + 1) as f64 / k as f64).powf(0.23) * m[i];
        cen += f[i] * m[i];
    }
    let centroid = safe(cen, sum);
    let mut mom = [0.0; 5];
    for i in 0..k {
        for (p, slot) in mom.iter_mut().enumerate().skip(2) {
            *slot += m[i] * (f[i] - centroid).powi(p as i32);
        }
    }
    let var = safe(mom[2], sum);
    let (sk, ku) = if var < 1e-24 {
        (0.0, 0.0)
    } else {
        (safe(mom[3], sum) / var.powf(1.5), safe(mom[4], sum) / (var * var))
    };
    [
        energy,
        entropy,
        safe(upper, energy),
        irr_k,
        safe(jumps, energy),
        safe(sharp, sum),
        smooth,
        centroid,
        var.sqrt(),
        safe(peak, sum / k as f64),
        sk,
        ku,
    ]
}

pub fn naive_features(x: &[f64], rate: f64) -> [f64; 25] {
    let mut out = [0.0; 25];
    out[..13].copy_from_slice(&naive_time(x));
    let (m, f) = naive_spectrum(x, rate);
    out[13..].copy_from_slice(&naive_spectral(&m, &f, rate));
    out
}

/// Magnitude against which a feature's rounding error is judged: the
/// feature's own size, or its natural unit when the value happens to be near 0.
pub fn feature_scale(index: usize, x: &[f64], rate: f64) -> f64 {
    let amp = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let spread = x.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v)) - x.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    match index {
        0..=2 | 9..=11 => amp,
        3 | 5 => spread.max(f64::MIN_POSITIVE),
        4 => spread.powi(2).max(f64::MIN_POSITIVE),
        // energy scales with n * amplitude^2
        13 => (spread.powi(2) * x.len() as f64 * x.len() as f64).max(f64::MIN_POSITIVE),
        // irregularity_k has the units of a magnitude
        16 => (spread * x.len() as f64).max(f64::MIN_POSITIVE),
        // centroid and spread are frequencies
        20 | 21 => rate,
        // smoothness is a sum of dB differences
        19 => 240.0,
        _ => 1.0,
    }
}

/// Relative error with a scale guard for values that sit near zero.
pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(scale)
}

/// A random test signal of random length, shape, offset and scale.
pub fn random_signal(r: &mut ChaCha8Rng) -> Vec<f64> {
    let n = r.random_range(8..=600);
    let scale = 10f64.powf(r.random_range(-4.0..3.0));
    let offset = r.random_range(-5.0..5.0) * scale;
    let kind = r.random_range(0..4);
    let mut level = 0.0;
    let f0 = r.random_range(0.01..0.45);
    (0..n)
        .map(|i| {
            let noise: f64 = r.random_range(-1.0..1.0);
            let v = match kind {
                0 => noise,
                1 => {
                    level += noise;
                    level
                }
                2 => (2.0 * PI * f0 * i as f64).sin() + 0.3 * noise,
                _ => noise.powi(3) + if r.random_bool(0.05) { 4.0 } else { 0.0 },
            };
            offset + scale * v
        })
        .collect()
}

/// Gaussian blobs in `dims` dimensions; class `c` is centred at `sep * c` on
/// the first `informative` coordinates.
pub fn blobs(n_per_class: usize, classes: usize, dims: usize, informative: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_per_class * classes {
        let c = i % classes;
        let row: Vec<f64> = (0..dims)
            .map(|d| {
                let z: f64 = StandardNormal.sample(&mut r);
                if d < informative {
                    z + sep * c as f64
                } else {
                    z
                }
            })
            .collect();
        rows.push(row);
        labels.push(c);
    }
    (rows, labels)
}
