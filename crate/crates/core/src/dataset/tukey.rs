//! Outlier removal on whistle durations with Tukey's fences.

use super::{Annotation, DatasetError};

/// Quantile by linear interpolation between order statistics of a sorted
/// sample: position `h = (n − 1)·p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TukeyResult {
    pub kept: Vec<Annotation>,
    pub discarded: Vec<Annotation>,
    pub q1: f64,
    pub q3: f64,
    /// `[Q1 − 1.5·IQR, Q3 + 1.5·IQR]`, seconds.
    pub fences: (f64, f64),
}

/// Discards whistle annotations whose duration falls outside the fences
/// computed from all whistle durations. Noise annotations pass through.
pub fn tukey_duration_filter(annotations: &[Annotation]) -> Result<TukeyResult, DatasetError> {
    let mut durations: Vec<f64> = annotations
        .iter()
        .filter(|a| a.label.is_whistle())
        .map(Annotation::duration_s)
        .collect();
    if durations.len() < 4 {
        return Err(DatasetError::TooFewWhistles(durations.len()));
    }
    durations.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&durations, 0.25);
    let q3 = quantile_sorted(&durations, 0.75);
    let iqr = q3 - q1;
    let fences = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let (kept, discarded) = annotations.iter().cloned().partition(|a| {
        let d = a.duration_s();
        !a.label.is_whistle() || (d >= fences.0 && d <= fences.1)
    });
    Ok(TukeyResult { kept, discarded, q1, q3, fences })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    fn whistles(durations: &[f64]) -> Vec<Annotation> {
        durations.iter().map(|&d| Annotation::new("f", 0.0, d, Label::Whistle)).collect()
    }

    #[test]
    fn worked_example_keeps_everything() {
        let r = tukey_duration_filter(&whistles(&[0.2, 0.3, 0.4, 0.5, 0.6])).unwrap();
        assert!((r.q1 - 0.3).abs() < 1e-12 && (r.q3 - 0.5).abs() < 1e-12);
        assert!(r.fences.0.abs() < 1e-12 && (r.fences.1 - 0.8).abs() < 1e-12);
        assert!(r.discarded.is_empty());
        assert_eq!(r.kept.len(), 5);
    }

    #[test]
    fn long_outlier_discarded() {
        let mut d = vec![0.3; 9];
        d.push(5.0);
        let r = tukey_duration_filter(&whistles(&d)).unwrap();
        assert_eq!(r.discarded.len(), 1);
        assert_eq!(r.discarded[0].end_s, 5.0);
    }

    #[test]
    fn noise_is_untouched() {
        let mut anns = whistles(&[0.2, 0.3, 0.4, 0.5, 0.6]);
        anns.push(Annotation::new("f", 0.0, 30.0, Label::Noise));
        let r = tukey_duration_filter(&anns).unwrap();
        assert_eq!(r.kept.len(), 6);
    }

    #[test]
    fn needs_four_whistles() {
        assert!(matches!(
            tukey_duration_filter(&whistles(&[0.2, 0.3, 0.4])),
            Err(DatasetError::TooFewWhistles(3))
        ));
    }
}
