use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::report::ReportRow;
use super::{evaluate, AsvOperatingPoint, CostModel};
use crate::error::{Error, Result};
use crate::scores::ScoreRecord;

/// How two genuine-class probabilities are combined.
///
/// `a` is the baseline system and `b` the modulation system, so
/// `Weighted(1.0)` reproduces `a` and `Weighted(0.0)` reproduces `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionMode {
    Weighted(f64),
    Min,
    Max,
    /// Keep the score of the less confident system (`max(p, 1 - p)` smaller).
    MinConfidence,
    /// Keep the score of the more confident system.
    MaxConfidence,
}

impl FusionMode {
    pub fn validate(&self) -> Result<()> {
        if let FusionMode::Weighted(r) = *self {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("fusion ratio {r} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Swap `Min`/`Max` for their confidence-selection variants.
    pub fn confidence(self) -> Self {
        match self {
            FusionMode::Min => FusionMode::MinConfidence,
            FusionMode::Max => FusionMode::MaxConfidence,
            m => m,
        }
    }

    pub fn combine(&self, a: f64, b: f64) -> f64 {
        let conf = |p: f64| p.max(1.0 - p);
        match *self {
            FusionMode::Weighted(r) if r == 1.0 => a,
            FusionMode::Weighted(r) if r == 0.0 => b,
            FusionMode::Weighted(r) => r * a + (1.0 - r) * b,
            FusionMode::Min => a.min(b),
            FusionMode::Max => a.max(b),
            FusionMode::MinConfidence => {
                if conf(b) < conf(a) {
                    b
                } else {
                    a
                }
            }
            FusionMode::MaxConfidence => {
                if conf(b) > conf(a) {
                    b
                } else {
                    a
                }
            }
        }
    }

    /// Row label used in sweep reports.
    pub fn label(&self) -> String {
        match *self {
            FusionMode::Weighted(r) => format!("{r:.1}"),
            FusionMode::Min | FusionMode::MinConfidence => "min".into(),
            FusionMode::Max | FusionMode::MaxConfidence => "max".into(),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionMode::Weighted(r) => write!(f, "weighted:{r}"),
            FusionMode::Min => f.write_str("min"),
            FusionMode::Max => f.write_str("max"),
            FusionMode::MinConfidence => f.write_str("min-confidence"),
            FusionMode::MaxConfidence => f.write_str("max-confidence"),
        }
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mode = match s {
            "min" => FusionMode::Min,
            "max" => FusionMode::Max,
            "min-confidence" => FusionMode::MinConfidence,
            "max-confidence" => FusionMode::MaxConfidence,
            _ => {
                let r = s
                    .strip_prefix("weighted:")
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "unknown fusion mode {s:?} (expected weighted:R, min or max)"
                        ))
                    })?;
                FusionMode::Weighted(r)
            }
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Fuse two score lists over the same utterances; output follows the order of `a`.
pub fn fuse(a: &[ScoreRecord], b: &[ScoreRecord], mode: FusionMode) -> Result<Vec<ScoreRecord>> {
    mode.validate()?;
    if a.len() != b.len() {
        return Err(Error::UtteranceMismatch(format!(
            "{} scores in the first system, {} in the second",
            a.len(),
            b.len()
        )));
    }
    let by_id: HashMap<&str, &ScoreRecord> =
        b.iter().map(|r| (r.utterance_id.as_str(), r)).collect();
    if by_id.len() != b.len() {
        return Err(Error::UtteranceMismatch("duplicate utterance in second system".into()));
    }
    a.iter()
        .map(|ra| {
            let rb = by_id.get(ra.utterance_id.as_str()).ok_or_else(|| {
                Error::UtteranceMismatch(format!("{} missing from second system", ra.utterance_id))
            })?;
            if rb.key != ra.key {
                return Err(Error::UtteranceMismatch(format!(
                    "{} is {} in one system and {} in the other",
                    ra.utterance_id, ra.key, rb.key
                )));
            }
            let mut out = ra.clone();
            out.score = mode.combine(ra.score, rb.score);
            Ok(out)
        })
        .collect()
}

/// `0.0, 0.1, ..., 1.0`.
pub fn default_ratios() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Metrics for `min`, each weighted ratio, then `max`.
pub fn ratio_sweep(
    a: &[ScoreRecord],
    b: &[ScoreRecord],
    ratios: &[f64],
    confidence: bool,
    op: &AsvOperatingPoint,
    cost: &CostModel,
) -> Result<Vec<ReportRow>> {
    let (lo, hi) = if confidence {
        (FusionMode::MinConfidence, FusionMode::MaxConfidence)
    } else {
        (FusionMode::Min, FusionMode::Max)
    };
    let modes = std::iter::once(lo)
        .chain(ratios.iter().map(|&r| FusionMode::Weighted(r)))
        .chain(std::iter::once(hi));
    modes
        .map(|mode| {
            let m = evaluate(&fuse(a, b, mode)?, op, cost)?;
            Ok(ReportRow::new(mode.label(), m.tdcf, m.eer))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eer;
    use crate::protocol::{AttackId, Key};
    use proptest::prelude::*;

    fn recs(scores: &[(f64, Key)]) -> Vec<ScoreRecord> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &(s, k))| {
                let attack = match k {
                    Key::Bonafide => AttackId::Bonafide,
                    Key::Spoof => AttackId::Known(17),
                };
                ScoreRecord::new(format!("u{i}"), attack, k, s)
            })
            .collect()
    }

    #[test]
    fn modes_on_one_pair() {
        assert!((FusionMode::Weighted(0.5).combine(0.4, 0.8) - 0.6).abs() < 1e-15);
        assert_eq!(FusionMode::Max.combine(0.4, 0.8), 0.8);
        assert_eq!(FusionMode::Min.combine(0.4, 0.8), 0.4);
        // 0.05 is more confident than 0.7.
        assert_eq!(FusionMode::MaxConfidence.combine(0.05, 0.7), 0.05);
        assert_eq!(FusionMode::MinConfidence.combine(0.05, 0.7), 0.7);
    }

    #[test]
    fn endpoints_are_exact() {
        let a = recs(&[(0.1, Key::Bonafide), (0.3, Key::Spoof), (0.7, Key::Spoof)]);
        let mut b = a.clone();
        for (i, r) in b.iter_mut().enumerate() {
            r.score = 0.123 * (i + 1) as f64;
        }
        assert_eq!(fuse(&a, &b, FusionMode::Weighted(1.0)).unwrap(), a);
        assert_eq!(fuse(&a, &b, FusionMode::Weighted(0.0)).unwrap(), b);
    }

    #[test]
    fn parse_modes() {
        assert_eq!("weighted:0.3".parse::<FusionMode>().unwrap(), FusionMode::Weighted(0.3));
        assert_eq!("max".parse::<FusionMode>().unwrap(), FusionMode::Max);
        assert!("weighted:1.5".parse::<FusionMode>().is_err());
        assert!("avg".parse::<FusionMode>().is_err());
        assert_eq!(FusionMode::Max.confidence(), FusionMode::MaxConfidence);
    }

    #[test]
    fn mismatched_utterances() {
        let a = recs(&[(0.1, Key::Bonafide), (0.3, Key::Spoof)]);
        let mut b = a.clone();
        b[1].utterance_id = "other".into();
        assert!(matches!(fuse(&a, &b, FusionMode::Max), Err(Error::UtteranceMismatch(_))));
        assert!(matches!(fuse(&a, &a[..1], FusionMode::Max), Err(Error::UtteranceMismatch(_))));
        let mut c = a.clone();
        c[0].key = Key::Spoof;
        assert!(fuse(&a, &c, FusionMode::Max).is_err());
    }

    #[test]
    fn second_system_order_does_not_matter() {
        let a = recs(&[(0.1, Key::Bonafide), (0.3, Key::Spoof), (0.9, Key::Bonafide)]);
        let mut b: Vec<_> = a.iter().rev().cloned().collect();
        b[0].score = 0.5;
        let fused = fuse(&a, &b, FusionMode::Max).unwrap();
        let ids: Vec<_> = fused.iter().map(|r| r.utterance_id.as_str()).collect();
        assert_eq!(ids, ["u0", "u1", "u2"]);
        assert_eq!(fused[2].score, 0.9);
    }

    #[test]
    fn sweep_shape_and_endpoints() {
        let a = recs(&[
            (0.9, Key::Bonafide),
            (0.6, Key::Bonafide),
            (0.2, Key::Bonafide),
            (0.5, Key::Spoof),
            (0.3, Key::Spoof),
            (0.1, Key::Spoof),
        ]);
        let mut b = a.clone();
        for (r, s) in b.iter_mut().zip([0.4, 0.8, 0.7, 0.35, 0.6, 0.05]) {
            r.score = s;
        }
        let op = AsvOperatingPoint::new(0.05, 0.05, 0.9).unwrap();
        let cost = CostModel::default();
        let rows = ratio_sweep(&a, &b, &default_ratios(), false, &op, &cost).unwrap();
        assert_eq!(rows.len(), 13);
        let labels: Vec<_> = rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(labels[0], "min");
        assert_eq!(labels[1], "0.0");
        assert_eq!(labels[11], "1.0");
        assert_eq!(labels[12], "max");
        let ma = evaluate(&a, &op, &cost).unwrap();
        let mb = evaluate(&b, &op, &cost).unwrap();
        assert_eq!((rows[11].tdcf, rows[11].eer), (ma.tdcf, ma.eer));
        assert_eq!((rows[1].tdcf, rows[1].eer), (mb.tdcf, mb.eer));

        let same = ratio_sweep(&a, &a, &default_ratios(), false, &op, &cost).unwrap();
        assert!(same.windows(2).all(|w| w[0].tdcf == w[1].tdcf && w[0].eer == w[1].eer));
    }

    proptest! {
        #[test]
        fn fused_scores_stay_between_inputs(pairs in prop::collection::vec((0.001f64..0.999, 0.001f64..0.999), 1..40),
                                            r in 0.0f64..=1.0) {
            let a: Vec<_> = pairs.iter().map(|p| (p.0, Key::Spoof)).collect();
            let b: Vec<_> = pairs.iter().map(|p| (p.1, Key::Spoof)).collect();
            let (a, b) = (recs(&a), recs(&b));
            let w = fuse(&a, &b, FusionMode::Weighted(r)).unwrap();
            let mx = fuse(&a, &b, FusionMode::Max).unwrap();
            let mc = fuse(&a, &b, FusionMode::MaxConfidence).unwrap();
            for i in 0..a.len() {
                let (x, y) = (a[i].score, b[i].score);
                prop_assert!(w[i].score >= x.min(y) - 1e-15 && w[i].score <= x.max(y) + 1e-15);
                prop_assert!(mx[i].score == x || mx[i].score == y);
                prop_assert!(mc[i].score == x || mc[i].score == y);
            }
        }

        #[test]
        fn adjacent_ratios_change_eer_by_discordant_pairs(
            a_scores in prop::collection::vec(0.01f64..0.99, 4..24),
            b_seed in prop::collection::vec(0.01f64..0.99, 24)) {
            let keys = [Key::Bonafide, Key::Spoof];
            let a: Vec<_> = a_scores.iter().enumerate().map(|(i, &s)| (s, keys[i % 2])).collect();
            let b: Vec<_> = a.iter().zip(&b_seed).map(|(&(_, k), &s)| (s, k)).collect();
            let (a, b) = (recs(&a), recs(&b));
            let nb = a.iter().filter(|r| r.key == Key::Bonafide).count();
            let ns = a.len() - nb;
            let step = 1.0 / nb.min(ns) as f64;
            let ratios = default_ratios();
            for w in ratios.windows(2) {
                let f0 = fuse(&a, &b, FusionMode::Weighted(w[0])).unwrap();
                let f1 = fuse(&a, &b, FusionMode::Weighted(w[1])).unwrap();
                // Bonafide/spoof pairs whose relative order differs between the two lists.
                let mut k = 0usize;
                for i in 0..f0.len() {
                    for j in 0..f0.len() {
                        if f0[i].key == Key::Bonafide && f0[j].key == Key::Spoof {
                            let before = f0[i].score.total_cmp(&f0[j].score);
                            let after = f1[i].score.total_cmp(&f1[j].score);
                            k += usize::from(before != after);
                        }
                    }
                }
                let e0 = eer(&f0).unwrap().0;
                let e1 = eer(&f1).unwrap().0;
                prop_assert!((e0 - e1).abs() <= k as f64 * step + 1e-12,
                    "r {:?}: eer {} -> {}, {} discordant pairs", w, e0, e1, k);
            }
        }
    }
}
