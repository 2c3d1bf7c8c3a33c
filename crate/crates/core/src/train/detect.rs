use super::{predict, LabeledSet, TrainError};
use crate::baseline::DetectionEvent;
use crate::dataset::Label;
use crate::nn::Model;
use crate::spectrogram::SpectroImage;

/// Whistle probability of each rendered window.
pub fn score_windows(model: &Model<f32>, images: &[SpectroImage]) -> Result<Vec<f64>, TrainError> {
    let Some(first) = images.first() else { return Ok(Vec::new()) };
    let shape = [first.size, first.size, 3];
    let set = LabeledSet::new(shape, images.iter().map(|i| i.pixels.clone()).collect(), vec![Label::Noise; images.len()])?;
    if set.shape != model.config().input {
        return Err(TrainError::InputShape { expected: model.config().input, found: shape.to_vec() });
    }
    predict(model, &set)
}

/// Joins overlapping or touching windows scoring at least `threshold` into
/// events spanning `band_khz`. An event's score is its best window score and
/// `n_cells` counts its windows.
pub fn windows_to_events(windows: &[(f64, f64)], scores: &[f64], threshold: f64, band_khz: (f64, f64)) -> Vec<DetectionEvent> {
    let mut hits: Vec<((f64, f64), f64)> =
        windows.iter().zip(scores).filter(|(_, &s)| s >= threshold).map(|(&w, &s)| (w, s)).collect();
    hits.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0));
    let mut events: Vec<DetectionEvent> = Vec::new();
    for ((start_s, end_s), score) in hits {
        match events.last_mut() {
            Some(e) if start_s <= e.end_s => {
                e.end_s = e.end_s.max(end_s);
                e.score = e.score.max(score);
                e.n_cells += 1;
            }
            _ => events.push(DetectionEvent { start_s, end_s, f_lo_khz: band_khz.0, f_hi_khz: band_khz.1, score, n_cells: 1 }),
        }
    }
    events
}
