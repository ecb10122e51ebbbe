//! Tandem detection cost function (ASVspoof 2019 constrained formulation).
//!
//! With a fixed ASV system at its EER threshold,
//!
//! ```text
//! C1 = p_target (c_miss_cm - c_miss_asv p_miss_asv) - p_nontarget c_fa_asv p_fa_asv
//! C2 = c_fa_cm p_spoof (1 - p_miss_spoof_asv)
//! t-DCF(t) = C1 p_miss_cm(t) + C2 p_fa_cm(t)
//! ```
//!
//! and the reported value is `min_t t-DCF(t) / min(C1, C2)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::det::{det_curve, eer_from_scores, split_by_key};
use crate::error::{Error, Result};
use crate::scores::{AsvKey, ScoreRecord};

/// Priors and costs of the tandem metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub p_spoof: f64,
    pub p_target: f64,
    pub p_nontarget: f64,
    pub c_miss_asv: f64,
    pub c_fa_asv: f64,
    pub c_miss_cm: f64,
    pub c_fa_cm: f64,
}

impl Default for CostModel {
    /// ASVspoof 2019 evaluation-plan constants.
    fn default() -> Self {
        let p_spoof = 0.05;
        Self {
            p_spoof,
            p_target: (1.0 - p_spoof) * 0.99,
            p_nontarget: (1.0 - p_spoof) * 0.01,
            c_miss_asv: 1.0,
            c_fa_asv: 10.0,
            c_miss_cm: 1.0,
            c_fa_cm: 10.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_spoof", self.p_spoof),
            ("p_target", self.p_target),
            ("p_nontarget", self.p_nontarget),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::CostModel(format!("{name} = {p} is outside (0, 1)")));
            }
        }
        let total = self.p_spoof + self.p_target + self.p_nontarget;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::CostModel(format!("priors sum to {total}, not 1")));
        }
        for (name, c) in [
            ("c_miss_asv", self.c_miss_asv),
            ("c_fa_asv", self.c_fa_asv),
            ("c_miss_cm", self.c_miss_cm),
            ("c_fa_cm", self.c_fa_cm),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::CostModel(format!("{name} = {c} must be positive")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: CostModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// `(C1, C2)` for a given ASV operating point.
    pub fn weights(&self, op: &AsvOperatingPoint) -> (f64, f64) {
        let c1 = self.p_target * (self.c_miss_cm - self.c_miss_asv * op.p_miss_asv)
            - self.p_nontarget * self.c_fa_asv * op.p_fa_asv;
        let c2 = self.c_fa_cm * self.p_spoof * (1.0 - op.p_miss_spoof_asv);
        (c1, c2)
    }
}

/// Error rates of the fixed ASV system at its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsvOperatingPoint {
    pub p_miss_asv: f64,
    pub p_fa_asv: f64,
    pub p_miss_spoof_asv: f64,
}

impl AsvOperatingPoint {
    pub fn new(p_miss_asv: f64, p_fa_asv: f64, p_miss_spoof_asv: f64) -> Result<Self> {
        for (name, v) in [
            ("p_miss_asv", p_miss_asv),
            ("p_fa_asv", p_fa_asv),
            ("p_miss_spoof_asv", p_miss_spoof_asv),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(Self {
            p_miss_asv,
            p_fa_asv,
            p_miss_spoof_asv,
        })
    }
}

/// ASV rates at the ASV EER threshold (target vs nontarget trials).
pub fn asv_operating_point(asv_scores: &[(AsvKey, f64)]) -> Result<AsvOperatingPoint> {
    let pick = |k: AsvKey| -> Vec<f64> {
        asv_scores
            .iter()
            .filter(|(key, _)| *key == k)
            .map(|&(_, s)| s)
            .collect()
    };
    let (tar, non, spoof) = (pick(AsvKey::Target), pick(AsvKey::Nontarget), pick(AsvKey::Spoof));
    if tar.is_empty() || non.is_empty() {
        return Err(Error::Degenerate(
            "ASV scores need both target and nontarget trials".into(),
        ));
    }
    if spoof.is_empty() {
        return Err(Error::Degenerate(
            "ASV scores need spoof trials to rate spoof acceptance".into(),
        ));
    }
    let (_, threshold) = eer_from_scores(&tar, &non)?;
    let frac = |v: &[f64], pred: &dyn Fn(f64) -> bool| {
        v.iter().filter(|&&s| pred(s)).count() as f64 / v.len() as f64
    };
    AsvOperatingPoint::new(
        frac(&tar, &|s| s < threshold),
        frac(&non, &|s| s >= threshold),
        frac(&spoof, &|s| s < threshold),
    )
}

/// Normalized minimum t-DCF and the CM threshold attaining it.
pub fn min_tdcf_from_scores(
    bonafide: &[f64],
    spoof: &[f64],
    op: &AsvOperatingPoint,
    cost: &CostModel,
) -> Result<(f64, f64)> {
    cost.validate()?;
    let (c1, c2) = cost.weights(op);
    if c1 <= 0.0 || c2 <= 0.0 {
        return Err(Error::CostModel(format!(
            "t-DCF weights must be positive (C1 = {c1}, C2 = {c2}); \
             the ASV operating point is worse than chance"
        )));
    }
    let norm = c1.min(c2);
    let points = det_curve(bonafide, spoof)?;
    let mut best = (f64::INFINITY, f64::NAN);
    for p in &points {
        let value = (c1 * p.p_miss + c2 * p.p_fa) / norm;
        if value < best.0 {
            best = (value, p.threshold);
        }
    }
    Ok(best)
}

pub fn min_tdcf(
    cm_scores: &[ScoreRecord],
    op: &AsvOperatingPoint,
    cost: &CostModel,
) -> Result<(f64, f64)> {
    let (bona, spoof) = split_by_key(cm_scores);
    min_tdcf_from_scores(&bona, &spoof, op, cost)
}
