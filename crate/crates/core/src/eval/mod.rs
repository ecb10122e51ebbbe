//! Detection metrics, score fusion and reports.

mod breakdown;
mod det;
mod fusion;
mod report;
mod tdcf;

pub use breakdown::{per_attack_breakdown, Breakdown};
pub use det::{det_curve, det_points, eer, eer_from_scores, split_by_key, DetPoint};
pub use fusion::{default_ratios, fuse, ratio_sweep, FusionMode};
pub use report::{format_csv, format_table, ReportRow};
pub use tdcf::{
    asv_operating_point, min_tdcf, min_tdcf_from_scores, AsvOperatingPoint, CostModel,
};

use crate::error::Result;
use crate::scores::ScoreRecord;

/// EER (fraction) and normalized min t-DCF of one score set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub eer: f64,
    pub eer_threshold: f64,
    pub tdcf: f64,
    pub tdcf_threshold: f64,
}

pub fn evaluate(
    cm_scores: &[ScoreRecord],
    op: &AsvOperatingPoint,
    cost: &CostModel,
) -> Result<Metrics> {
    let (eer, eer_threshold) = eer(cm_scores)?;
    let (tdcf, tdcf_threshold) = min_tdcf(cm_scores, op, cost)?;
    Ok(Metrics {
        eer,
        eer_threshold,
        tdcf,
        tdcf_threshold,
    })
}

/// Mean of per-run metrics (thresholds are not averaged and come back NaN).
pub fn average_metrics(runs: &[Metrics]) -> Option<Metrics> {
    if runs.is_empty() {
        return None;
    }
    let n = runs.len() as f64;
    Some(Metrics {
        eer: runs.iter().map(|m| m.eer).sum::<f64>() / n,
        eer_threshold: f64::NAN,
        tdcf: runs.iter().map(|m| m.tdcf).sum::<f64>() / n,
        tdcf_threshold: f64::NAN,
    })
}
