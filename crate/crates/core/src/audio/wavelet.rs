//! Periodic orthogonal discrete wavelet transform and coefficient thresholding.

use serde::{Deserialize, Serialize};

/// Orthogonal wavelet families with their low-pass analysis taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wavelet {
    /// `[1, 1] / sqrt(2)`
    #[default]
    Haar,
    /// Daubechies D4: `[1+√3, 3+√3, 3−√3, 1−√3] / (4·√2)`
    Daubechies4,
}

impl Wavelet {
    pub fn lowpass(self) -> Vec<f64> {
        match self {
            Wavelet::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            Wavelet::Daubechies4 => {
                let s3 = 3f64.sqrt();
                let norm = 4.0 * 2f64.sqrt();
                vec![(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm, (1.0 - s3) / norm]
            }
        }
    }

    /// Quadrature mirror of the low-pass taps: `g[k] = (-1)^k h[L-1-k]`.
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let l = h.len();
        (0..l)
            .map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] })
            .collect()
    }
}

/// How detail coefficients are thresholded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Soft shrinkage of every detail level by `σ·sqrt(2 ln N)`, with σ the
    /// median absolute deviation of the finest level over 0.6745.
    Universal,
    /// Per-level universal threshold; coefficients above it are clipped back to
    /// the threshold. Cancels isolated transients and leaves the bulk intact.
    #[default]
    TransientClip,
}

/// Multi-level decomposition: coarse approximation plus details, finest first.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for i in 0..half {
        for (k, (&hk, &gk)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * i + k) % n];
            a[i] += hk * v;
            d[i] += gk * v;
        }
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = a.len() * 2;
    let mut x = vec![0.0; n];
    for i in 0..a.len() {
        for (k, (&hk, &gk)) in h.iter().zip(g).enumerate() {
            x[(2 * i + k) % n] += hk * a[i] + gk * d[i];
        }
    }
    x
}

/// Forward transform. `x.len()` must be divisible by `2^levels`.
pub fn decompose(x: &[f64], wavelet: Wavelet, levels: u32) -> Decomposition {
    assert!(x.len().is_multiple_of(1usize << levels), "length not divisible by 2^levels");
    let (h, g) = (wavelet.lowpass(), wavelet.highpass());
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels as usize);
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, &h, &g);
        details.push(d);
        approx = a;
    }
    Decomposition { approx, details }
}

pub fn reconstruct(dec: &Decomposition, wavelet: Wavelet) -> Vec<f64> {
    let (h, g) = (wavelet.lowpass(), wavelet.highpass());
    let mut x = dec.approx.clone();
    for d in dec.details.iter().rev() {
        x = synthesis_step(&x, d, &h, &g);
    }
    x
}

/// Median absolute value divided by 0.6745 (Gaussian-consistent MAD).
pub fn mad_sigma(coeffs: &[f64]) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let mut abs: Vec<f64> = coeffs.iter().map(|c| c.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let m = abs.len();
    let median = if m % 2 == 1 {
        abs[m / 2]
    } else {
        0.5 * (abs[m / 2 - 1] + abs[m / 2])
    };
    median / 0.6745
}

pub fn soft_threshold(c: f64, t: f64) -> f64 {
    c.signum() * (c.abs() - t).max(0.0)
}

/// Thresholds every detail level in place and returns, per level, the
/// indices of coefficients that exceeded their threshold.
pub fn threshold_details(dec: &mut Decomposition, rule: ThresholdRule, n: usize) -> Vec<Vec<usize>> {
    let scale = (2.0 * (n as f64).ln()).sqrt();
    let finest = dec.details.first().map(|d| mad_sigma(d)).unwrap_or(0.0) * scale;
    dec.details
        .iter_mut()
        .map(|level| {
            let t = match rule {
                ThresholdRule::Universal => finest,
                ThresholdRule::TransientClip => mad_sigma(level) * scale,
            };
            let mut hits = Vec::new();
            for (i, c) in level.iter_mut().enumerate() {
                if c.abs() > t {
                    hits.push(i);
                }
                *c = match rule {
                    ThresholdRule::Universal => soft_threshold(*c, t),
                    ThresholdRule::TransientClip => c.clamp(-t, t),
                };
            }
            hits
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_are_orthonormal() {
        for w in [Wavelet::Haar, Wavelet::Daubechies4] {
            let h = w.lowpass();
            let g = w.highpass();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            assert!((dot(&h, &h) - 1.0).abs() < 1e-12);
            assert!((dot(&g, &g) - 1.0).abs() < 1e-12);
            assert!(dot(&h, &g).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_reconstruction() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for w in [Wavelet::Haar, Wavelet::Daubechies4] {
            let dec = decompose(&x, w, 4);
            let y = reconstruct(&dec, w);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-10);
            }
            // Parseval for an orthonormal transform
            let e_in: f64 = x.iter().map(|v| v * v).sum();
            let e_coef: f64 = dec.approx.iter().chain(dec.details.iter().flatten()).map(|v| v * v).sum();
            assert!((e_in - e_coef).abs() < 1e-9 * e_in);
        }
    }

    #[test]
    fn haar_detail_of_pair() {
        let dec = decompose(&[3.0, 1.0], Wavelet::Haar, 1);
        assert!((dec.details[0][0] - 2.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((dec.approx[0] - 4.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }
}
