//! Quality checks on traced whistle contours.

use serde::{Deserialize, Serialize};

use super::{Annotation, DatasetError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourQaParams {
    /// Allowed frequency band, kHz.
    pub band_khz: (f64, f64),
    /// Largest accepted population variance of the intensity trace, dB².
    pub max_intensity_var_db2: f64,
}

impl Default for ContourQaParams {
    fn default() -> Self {
        Self { band_khz: (3.0, 20.0), max_intensity_var_db2: 25.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourQa {
    pub bandwidth_ok: bool,
    pub intensity_ok: bool,
    /// Highest minus lowest contour frequency.
    pub bandwidth_khz: f64,
    pub intensity_var_db2: f64,
}

impl ContourQa {
    pub fn passed(&self) -> bool {
        self.bandwidth_ok && self.intensity_ok
    }
}

pub fn population_variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub fn contour_qa(annotation: &Annotation, params: &ContourQaParams) -> Result<ContourQa, DatasetError> {
    let contour = match annotation.contour.as_deref() {
        Some(c) if c.len() >= 2 => c,
        _ => {
            return Err(DatasetError::InvalidAnnotation {
                file_id: annotation.file_id.clone(),
                detail: format!("no contour with ≥ 2 points at {}–{} s", annotation.start_s, annotation.end_s),
            })
        }
    };
    let (f_min, f_max) = contour
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.f_khz), hi.max(p.f_khz)));
    let (lo, hi) = params.band_khz;
    let intensities: Vec<f64> = contour.iter().map(|p| p.intensity_db).collect();
    let intensity_var_db2 = population_variance(&intensities);
    Ok(ContourQa {
        bandwidth_ok: f_min >= lo && f_max <= hi,
        intensity_ok: intensity_var_db2 <= params.max_intensity_var_db2,
        bandwidth_khz: f_max - f_min,
        intensity_var_db2,
    })
}
