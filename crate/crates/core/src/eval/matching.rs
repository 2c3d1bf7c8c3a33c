use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::DetectionEvent;
use crate::dataset::Annotation;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(event index, truth index)` of every true positive.
    pub pairs: Vec<(usize, usize)>,
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// An event matches a truth when their overlap is positive and at least
/// `min_overlap_fraction` of the truth's duration. Candidate pairs are taken
/// greedily by decreasing overlap, each event and truth at most once.
pub fn match_detections(events: &[DetectionEvent], truths: &[Annotation], min_overlap_fraction: f64) -> MatchResult {
    let mut candidates = Vec::new();
    for (ti, t) in truths.iter().enumerate() {
        for (ei, e) in events.iter().enumerate() {
            let ov = overlap((e.start_s, e.end_s), (t.start_s, t.end_s));
            if ov > 0.0 && ov >= min_overlap_fraction * t.duration_s() {
                candidates.push((ov, ti, ei));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut event_used = vec![false; events.len()];
    let mut truth_used = vec![false; truths.len()];
    let mut pairs = Vec::new();
    for (_, ti, ei) in candidates {
        if !event_used[ei] && !truth_used[ti] {
            event_used[ei] = true;
            truth_used[ti] = true;
            pairs.push((ei, ti));
        }
    }
    pairs.sort_unstable();
    MatchResult { tp: pairs.len(), fp: events.len() - pairs.len(), fn_: truths.len() - pairs.len(), pairs }
}

/// Matches per recording and sums the counts. Only whistle annotations count
/// as truths; pair indices refer to positions in the input slices.
pub fn match_by_file(events: &[(String, DetectionEvent)], truths: &[Annotation], min_overlap_fraction: f64) -> MatchResult {
    let mut groups: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, (file_id, _)) in events.iter().enumerate() {
        groups.entry(file_id.as_str()).or_default().0.push(i);
    }
    for (i, t) in truths.iter().enumerate().filter(|(_, t)| t.label.is_whistle()) {
        groups.entry(t.file_id.as_str()).or_default().1.push(i);
    }
    let mut total = MatchResult::default();
    for (ev_idx, tr_idx) in groups.values() {
        let ev: Vec<DetectionEvent> = ev_idx.iter().map(|&i| events[i].1.clone()).collect();
        let tr: Vec<Annotation> = tr_idx.iter().map(|&i| truths[i].clone()).collect();
        let r = match_detections(&ev, &tr, min_overlap_fraction);
        total.tp += r.tp;
        total.fp += r.fp;
        total.fn_ += r.fn_;
        total.pairs.extend(r.pairs.iter().map(|&(e, t)| (ev_idx[e], tr_idx[t])));
    }
    total.pairs.sort_unstable();
    total
}
