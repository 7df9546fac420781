//! Spectrogram to grayscale image conversion.

use std::path::Path;

use image::{GrayImage, Luma};

use super::{DspError, Spectrogram};

/// Lowest level kept in the log-magnitude image, relative to the peak.
pub const DB_FLOOR: f64 = -80.0;

/// Renders a spectrogram as a `size`×`size` 8-bit image.
///
/// Magnitudes go to dB relative to the spectrogram maximum, floored at
/// [`DB_FLOOR`], then min-max normalised to `0..=255` and bilinearly resized.
/// Row 0 holds the highest frequency bin; columns run forward in time.
pub fn render_image(spec: &Spectrogram, size: usize) -> Result<GrayImage, DspError> {
    if size < 8 {
        return Err(DspError::BadParameter(format!("image size {size} < 8")));
    }
    let frames = spec.n_frames();
    let bins = spec.n_bins();
    if frames == 0 || bins == 0 || spec.magnitudes.iter().any(|f| f.len() != bins) {
        return Err(DspError::EmptySpectrogram);
    }

    let peak = spec.magnitudes.iter().flatten().copied().fold(0.0, f64::max);
    // db[row][col]: row = bin counted from the top
    let db: Vec<Vec<f64>> = (0..bins)
        .map(|row| {
            let bin = bins - 1 - row;
            (0..frames)
                .map(|col| {
                    let m = spec.magnitudes[col][bin];
                    if peak > 0.0 && m > 0.0 {
                        (20.0 * (m / peak).log10()).max(DB_FLOOR)
                    } else {
                        DB_FLOOR
                    }
                })
                .collect()
        })
        .collect();

    let (lo, hi) = db
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let norm = |v: f64| if span > 0.0 { (v - lo) / span * 255.0 } else { 0.0 };

    let src_coord = |dst: usize, src_len: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * src_len as f64 / size as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, pos - i0 as f64)
    };

    let mut img = GrayImage::new(size as u32, size as u32);
    for y in 0..size {
        let (r0, r1, fy) = src_coord(y, bins);
        for x in 0..size {
            let (c0, c1, fx) = src_coord(x, frames);
            let top = norm(db[r0][c0]) * (1.0 - fx) + norm(db[r0][c1]) * fx;
            let bottom = norm(db[r1][c0]) * (1.0 - fx) + norm(db[r1][c1]) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            img.put_pixel(x as u32, y as u32, Luma([v.round().clamp(0.0, 255.0) as u8]));
        }
    }
    Ok(img)
}

pub fn save_png(img: &GrayImage, path: impl AsRef<Path>) -> image::ImageResult<()> {
    img.save_with_format(path, image::ImageFormat::Png)
}

/// PNG file contents for `img`.
pub fn encode_png(img: &GrayImage) -> image::ImageResult<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}
