use std::collections::BTreeSet;

use rayon::prelude::*;

use super::report::ReportRow;
use super::{evaluate, AsvOperatingPoint, CostModel};
use crate::error::{Error, Result};
use crate::protocol::{AttackId, Key};
use crate::scores::ScoreRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    /// One row per attack in id order, then the pooled `ALL` row.
    pub rows: Vec<ReportRow>,
    /// Attacks that could not be scored, with the reason.
    pub skipped: Vec<(AttackId, String)>,
}

/// Metrics of every attack against all bonafide trials, plus the pooled set.
pub fn per_attack_breakdown(
    cm_scores: &[ScoreRecord],
    op: &AsvOperatingPoint,
    cost: &CostModel,
) -> Result<Breakdown> {
    let bonafide: Vec<ScoreRecord> = cm_scores
        .iter()
        .filter(|r| r.key == Key::Bonafide)
        .cloned()
        .collect();
    if bonafide.is_empty() {
        return Err(Error::Degenerate("no bonafide trials to compare against".into()));
    }
    let attacks: BTreeSet<&AttackId> = cm_scores
        .iter()
        .filter(|r| r.key == Key::Spoof)
        .map(|r| &r.attack_id)
        .collect();

    let results: Vec<(AttackId, Result<ReportRow>)> = attacks
        .into_par_iter()
        .map(|attack| {
            let mut subset = bonafide.clone();
            subset.extend(
                cm_scores
                    .iter()
                    .filter(|r| r.key == Key::Spoof && &r.attack_id == attack)
                    .cloned(),
            );
            let row = evaluate(&subset, op, cost).map(|m| ReportRow::new(attack.token(), m.tdcf, m.eer));
            (attack.clone(), row)
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len() + 1);
    let mut skipped = Vec::new();
    for (attack, row) in results {
        match row {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push((attack, e.to_string())),
        }
    }
    let pooled = evaluate(cm_scores, op, cost)?;
    rows.push(ReportRow::new("ALL", pooled.tdcf, pooled.eer));
    Ok(Breakdown { rows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op() -> AsvOperatingPoint {
        AsvOperatingPoint::new(0.05, 0.05, 0.9).unwrap()
    }

    fn rec(id: &str, attack: AttackId, score: f64) -> ScoreRecord {
        let key = if attack.is_bonafide() { Key::Bonafide } else { Key::Spoof };
        ScoreRecord::new(id, attack, key, score)
    }

    #[test]
    fn single_attack_matches_pooled() {
        let s = vec![
            rec("b1", AttackId::Bonafide, 0.9),
            rec("b2", AttackId::Bonafide, 0.4),
            rec("s1", AttackId::Known(17), 0.5),
            rec("s2", AttackId::Known(17), 0.1),
        ];
        let b = per_attack_breakdown(&s, &op(), &CostModel::default()).unwrap();
        assert_eq!(b.rows.len(), 2);
        assert_eq!(b.rows[0].id, "A17");
        assert_eq!((b.rows[0].tdcf, b.rows[0].eer), (b.rows[1].tdcf, b.rows[1].eer));
        assert!(b.skipped.is_empty());
    }

    #[test]
    fn hard_attack_stands_out() {
        let mut s = Vec::new();
        for i in 0..50 {
            let x = i as f64 / 50.0;
            s.push(rec(&format!("b{i}"), AttackId::Bonafide, 0.5 + 0.5 * x));
            s.push(rec(&format!("e{i}"), AttackId::Known(8), 0.4 * x));
            // Interleaved with the bonafide scores.
            s.push(rec(&format!("h{i}"), AttackId::Known(17), 0.5 + 0.5 * x + 0.005));
        }
        let b = per_attack_breakdown(&s, &op(), &CostModel::default()).unwrap();
        let ids: Vec<_> = b.rows.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["A08", "A17", "ALL"]);
        assert_eq!(b.rows[0].eer, 0.0);
        assert!((b.rows[1].eer - 0.5).abs() <= 0.02, "{}", b.rows[1].eer);
        let pooled = evaluate(&s, &op(), &CostModel::default()).unwrap();
        assert_eq!(b.rows[2].eer, pooled.eer);
        assert_eq!(b.rows[2].tdcf, pooled.tdcf);
    }

    #[test]
    fn needs_bonafide() {
        let s = vec![rec("s1", AttackId::Known(7), 0.5)];
        assert!(per_attack_breakdown(&s, &op(), &CostModel::default()).is_err());
    }
}
