use crate::error::{Error, Result};
use crate::protocol::Key;
use crate::scores::ScoreRecord;

/// One operating point of the detection-error trade-off.
///
/// At threshold `t` a trial is accepted as bonafide iff `score >= t`:
/// `p_miss` is the fraction of bonafide trials scored below `t`, `p_fa` the
/// fraction of spoof trials scored at or above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
    pub n_miss: usize,
    pub n_fa: usize,
}

/// Split records into (bonafide, spoof) score lists.
pub fn split_by_key(records: &[ScoreRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut bona = Vec::new();
    let mut spoof = Vec::new();
    for r in records {
        match r.key {
            Key::Bonafide => bona.push(r.score),
            Key::Spoof => spoof.push(r.score),
        }
    }
    (bona, spoof)
}

/// Sweep over every distinct score (ascending), followed by a reject-all
/// point at `+inf`.
pub fn det_curve(positives: &[f64], negatives: &[f64]) -> Result<Vec<DetPoint>> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Degenerate(format!(
            "need both classes, got {} positive and {} negative trials",
            positives.len(),
            negatives.len()
        )));
    }
    if positives.iter().chain(negatives).any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("detection score".into()));
    }
    let mut pos = positives.to_vec();
    let mut neg = negatives.to_vec();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);

    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let mut points = Vec::with_capacity(thresholds.len() + 1);
    let (mut i, mut j) = (0, 0);
    for &t in &thresholds {
        while i < pos.len() && pos[i] < t {
            i += 1;
        }
        while j < neg.len() && neg[j] < t {
            j += 1;
        }
        let n_fa = neg.len() - j;
        points.push(DetPoint {
            threshold: t,
            p_miss: i as f64 / np,
            p_fa: n_fa as f64 / nn,
            n_miss: i,
            n_fa,
        });
    }
    points.push(DetPoint {
        threshold: f64::INFINITY,
        p_miss: 1.0,
        p_fa: 0.0,
        n_miss: pos.len(),
        n_fa: 0,
    });
    Ok(points)
}

pub fn det_points(records: &[ScoreRecord]) -> Result<Vec<DetPoint>> {
    let (bona, spoof) = split_by_key(records);
    det_curve(&bona, &spoof)
}

/// EER and its threshold for raw score lists.
///
/// The operating point minimizing `|p_miss - p_fa|` is chosen, ties going to
/// the smaller threshold, and the EER is `(p_miss + p_fa) / 2` there.
pub fn eer_from_scores(positives: &[f64], negatives: &[f64]) -> Result<(f64, f64)> {
    let points = det_curve(positives, negatives)?;
    let mut best = points[0];
    for p in &points[1..] {
        if (p.p_miss - p.p_fa).abs() < (best.p_miss - best.p_fa).abs() {
            best = *p;
        }
    }
    Ok(((best.p_miss + best.p_fa) / 2.0, best.threshold))
}

/// Equal error rate (as a fraction) and the threshold where it is attained.
pub fn eer(records: &[ScoreRecord]) -> Result<(f64, f64)> {
    let (bona, spoof) = split_by_key(records);
    eer_from_scores(&bona, &spoof)
}
