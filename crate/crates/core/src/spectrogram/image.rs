use std::io::Write;

use super::{PowerScale, Spectrogram, SpectrogramError};

/// Side length of the square model input.
pub const MODEL_INPUT_SIZE: usize = 224;

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub levels: Vec<u8>,
}

/// Model input: `size × size × 3` values in `[0, 1]`, height-width-channel
/// order, all three channels identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroImage {
    pub size: usize,
    pub pixels: Vec<f32>,
    pub window_s: (f64, f64),
    pub source_id: String,
}

impl SpectroImage {
    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.pixels.iter().skip(c).step_by(3).copied().collect()
    }
}

/// Min-max maps the matrix to levels 0..=255 with frequency increasing
/// upward (row 0 is the highest bin) and time to the right. A constant
/// matrix maps to all zeros.
pub fn gray_levels(spec: &Spectrogram) -> GrayImage {
    let (lo, hi) = spec
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let rows = spec.n_bins;
    let cols = spec.n_frames;
    let mut levels = vec![0u8; rows * cols];
    if range > 0.0 {
        for t in 0..cols {
            for k in 0..rows {
                let v = (spec.at(t, k) - lo) / range;
                levels[(rows - 1 - k) * cols + t] = (255.0 * v).round() as u8;
            }
        }
    }
    GrayImage { rows, cols, levels }
}

/// Bilinear resampling with half-pixel centres and edge clamping: output
/// pixel `i` samples source coordinate `(i + 0.5)·in/out − 0.5`.
pub fn resize_bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    assert_eq!(src.len(), rows * cols);
    let taps = |out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * n_in as f64 / out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = pos.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, pos - i0 as f64)
            })
            .collect()
    };
    let (rt, ct) = (taps(out_rows, rows), taps(out_cols, cols));
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for &(r0, r1, fr) in &rt {
        for &(c0, c1, fc) in &ct {
            let top = src[r0 * cols + c0] * (1.0 - fc) + src[r0 * cols + c1] * fc;
            let bottom = src[r1 * cols + c0] * (1.0 - fc) + src[r1 * cols + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

/// Gray levels, bilinear resize to `size × size`, scale by 1/255 and
/// replicate into three channels.
pub fn render_to_image(spec: &Spectrogram, size: usize, window_s: (f64, f64), source_id: &str) -> SpectroImage {
    debug_assert_eq!(spec.scale, PowerScale::Decibel);
    let gray = gray_levels(spec);
    let levels: Vec<f64> = gray.levels.iter().map(|&l| l as f64).collect();
    let resized = resize_bilinear(&levels, gray.rows, gray.cols, size, size);
    let mut pixels = Vec::with_capacity(size * size * 3);
    for v in resized {
        let p = (v / 255.0).clamp(0.0, 1.0) as f32;
        pixels.extend_from_slice(&[p, p, p]);
    }
    SpectroImage {
        size,
        pixels,
        window_s,
        source_id: source_id.to_string(),
    }
}

pub fn write_png<W: Write>(img: &GrayImage, out: W) -> Result<(), SpectrogramError> {
    let mut encoder = png::Encoder::new(out, img.cols as u32, img.rows as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| SpectrogramError::Png(e.to_string()))?;
    writer
        .write_image_data(&img.levels)
        .map_err(|e| SpectrogramError::Png(e.to_string()))?;
    writer.finish().map_err(|e| SpectrogramError::Png(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrogram::StftParams;

    fn db_spec(values: Vec<f64>, n_frames: usize, n_bins: usize) -> Spectrogram {
        Spectrogram {
            values,
            n_frames,
            n_bins,
            time_axis_s: (0..n_frames).map(|i| i as f64).collect(),
            freq_axis_khz: (0..n_bins).map(|i| i as f64).collect(),
            params: StftParams::default(),
            scale: PowerScale::Decibel,
        }
    }

    #[test]
    fn constant_matrix_renders_black() {
        let img = render_to_image(&db_spec(vec![-40.0; 12], 3, 4), 224, (0.0, 0.8), "c");
        assert_eq!(img.pixels.len(), 224 * 224 * 3);
        assert!(img.pixels.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn two_values_map_to_extremes() {
        let g = gray_levels(&db_spec(vec![-3.0, 7.0, 7.0, -3.0, -3.0, 7.0], 2, 3));
        assert!(g.levels.iter().all(|&l| l == 0 || l == 255));
    }

    #[test]
    fn frequency_increases_upward() {
        // one frame, three bins with rising values: the top row is the highest bin
        let g = gray_levels(&db_spec(vec![0.0, 1.0, 2.0], 1, 3));
        assert_eq!(g.levels, vec![255, 128, 0]);
    }

    #[test]
    fn bilinear_two_by_two_to_four_by_four() {
        // per-axis weights for 2 → 4 are [1,0], [.75,.25], [.25,.75], [0,1]
        let out = resize_bilinear(&[0.0, 255.0, 255.0, 0.0], 2, 2, 4, 4);
        let expected = [
            0.0, 63.75, 191.25, 255.0,
            63.75, 95.625, 159.375, 191.25,
            191.25, 159.375, 95.625, 63.75,
            255.0, 191.25, 63.75, 0.0,
        ];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn channels_identical_and_bounded() {
        let values: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
        let img = render_to_image(&db_spec(values, 6, 10), 32, (1.0, 1.8), "x");
        assert_eq!(img.channel(0), img.channel(1));
        assert_eq!(img.channel(1), img.channel(2));
        assert!(img.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn png_has_signature() {
        let g = GrayImage { rows: 2, cols: 3, levels: vec![0, 50, 100, 150, 200, 250] };
        let mut buf = Vec::new();
        write_png(&g, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"\x89PNG\r\n\x1a\n");
    }
}
