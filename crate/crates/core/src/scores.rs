//! Countermeasure and ASV score files.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::protocol::{AttackId, Key};

/// One countermeasure decision score. Higher means more likely genuine.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub utterance_id: String,
    pub attack_id: AttackId,
    pub key: Key,
    pub score: f64,
}

impl ScoreRecord {
    pub fn new(utterance_id: impl Into<String>, attack_id: AttackId, key: Key, score: f64) -> Self {
        Self {
            utterance_id: utterance_id.into(),
            attack_id,
            key,
            score,
        }
    }
}

/// Render records as `utterance_id attack_id key score` lines, scores to 6 decimals.
pub fn format_scores(records: &[ScoreRecord]) -> Result<String> {
    let mut out = String::with_capacity(records.len() * 32);
    for r in records {
        if !r.score.is_finite() {
            return Err(Error::NonFinite(format!(
                "score for utterance {}",
                r.utterance_id
            )));
        }
        out.push_str(&format!(
            "{} {} {} {:.6}\n",
            r.utterance_id, r.attack_id, r.key, r.score
        ));
    }
    Ok(out)
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let key = Key::from_str(fields[2]).map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        let score = parse_finite(fields[3], line_no)?;
        records.push(ScoreRecord {
            utterance_id: fields[0].to_string(),
            attack_id: AttackId::parse(fields[1]),
            key,
            score,
        });
    }
    Ok(records)
}

fn parse_finite(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid score {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite score {token:?}"),
        });
    }
    Ok(v)
}

pub fn write_scores(records: &[ScoreRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_scores(records)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text)
}

/// Trial class in an ASV score file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsvKey {
    Target,
    Nontarget,
    Spoof,
}

impl FromStr for AsvKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "target" => Ok(AsvKey::Target),
            "nontarget" => Ok(AsvKey::Nontarget),
            "spoof" => Ok(AsvKey::Spoof),
            other => Err(format!(
                "unknown ASV key {other:?}, expected target, nontarget or spoof"
            )),
        }
    }
}

/// Parse the two-column `key score` ASV score file.
pub fn parse_asv_scores(text: &str) -> Result<Vec<(AsvKey, f64)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let key = AsvKey::from_str(fields[0]).map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        out.push((key, parse_finite(fields[1], line_no)?));
    }
    Ok(out)
}

pub fn read_asv_scores(path: impl AsRef<Path>) -> Result<Vec<(AsvKey, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_asv_scores(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_format() {
        let text = format_scores(&[ScoreRecord::new(
            "u1",
            AttackId::Known(7),
            Key::Spoof,
            0.25,
        )])
        .unwrap();
        assert_eq!(text, "u1 A07 spoof 0.250000\n");
    }

    #[test]
    fn nan_refused_on_write() {
        let r = ScoreRecord::new("u1", AttackId::Bonafide, Key::Bonafide, f64::NAN);
        assert!(matches!(format_scores(&[r]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn nan_token_rejected_on_read() {
        assert!(matches!(
            parse_scores("u1 - bonafide NaN\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_scores("u1 - bonafide inf\n").is_err());
    }

    #[test]
    fn asv_file() {
        let parsed = parse_asv_scores("target 1.5\nnontarget -0.5\n\nspoof 0.1\n").unwrap();
        assert_eq!(
            parsed,
            vec![
                (AsvKey::Target, 1.5),
                (AsvKey::Nontarget, -0.5),
                (AsvKey::Spoof, 0.1)
            ]
        );
        assert!(parse_asv_scores("impostor 1.0").is_err());
    }

    proptest! {
        #[test]
        fn write_read_within_1e6(scores in prop::collection::vec((-1e3f64..1e3, any::<bool>(), 7u8..20), 1..1000)) {
            let records: Vec<ScoreRecord> = scores
                .iter()
                .enumerate()
                .map(|(i, &(s, bona, a))| {
                    if bona {
                        ScoreRecord::new(format!("u{i}"), AttackId::Bonafide, Key::Bonafide, s)
                    } else {
                        ScoreRecord::new(format!("u{i}"), AttackId::Known(a), Key::Spoof, s)
                    }
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("scores.txt");
            write_scores(&records, &path).unwrap();
            let back = read_scores(&path).unwrap();
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in records.iter().zip(&back) {
                prop_assert_eq!(&a.utterance_id, &b.utterance_id);
                prop_assert_eq!(&a.attack_id, &b.attack_id);
                prop_assert_eq!(a.key, b.key);
                prop_assert!((a.score - b.score).abs() <= 1e-6);
            }
        }
    }
}
