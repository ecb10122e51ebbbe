//! ASVspoof 2019 LA countermeasure protocol files and the attack taxonomy.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ground-truth label of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Key {
    Bonafide,
    Spoof,
}

impl Key {
    pub fn as_str(self) -> &'static str {
        match self {
            Key::Bonafide => "bonafide",
            Key::Spoof => "spoof",
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Key {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(Key::Bonafide),
            "spoof" => Ok(Key::Spoof),
            other => Err(format!("unknown key {other:?}, expected bonafide or spoof")),
        }
    }
}

/// Generation family of a spoofing attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackFamily {
    Tts,
    Vc,
    TtsVc,
    None,
}

impl fmt::Display for AttackFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackFamily::Tts => "TTS",
            AttackFamily::Vc => "VC",
            AttackFamily::TtsVc => "TTS-VC",
            AttackFamily::None => "none",
        })
    }
}

/// Spoofing attack identifier. The LA evaluation attacks A07..A19 carry
/// their family and waveform-generation method; any other token is kept
/// verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackId {
    Bonafide,
    Known(u8),
    Other(String),
}

const KNOWN_ATTACKS: [(u8, AttackFamily, &str); 13] = [
    (7, AttackFamily::Tts, "Vocoder+GAN"),
    (8, AttackFamily::Tts, "Neural waveform"),
    (9, AttackFamily::Tts, "Vocoder"),
    (10, AttackFamily::Tts, "Neural waveform"),
    (11, AttackFamily::Tts, "Griffin lim"),
    (12, AttackFamily::Tts, "Neural waveform"),
    (13, AttackFamily::TtsVc, "WC + waveform filtering"),
    (14, AttackFamily::TtsVc, "Vocoder"),
    (15, AttackFamily::TtsVc, "Neural waveform"),
    (16, AttackFamily::Tts, "Waveform concatenation (WC)"),
    (17, AttackFamily::Vc, "Waveform filtering"),
    (18, AttackFamily::Vc, "Vocoder"),
    (19, AttackFamily::Vc, "Spectral filtering"),
];

impl AttackId {
    pub fn parse(token: &str) -> Self {
        if token == "-" {
            return AttackId::Bonafide;
        }
        if let Some(n) = token.strip_prefix('A').and_then(|d| d.parse::<u8>().ok()) {
            if token.len() == 3 && KNOWN_ATTACKS.iter().any(|(k, _, _)| *k == n) {
                return AttackId::Known(n);
            }
        }
        AttackId::Other(token.to_string())
    }

    pub fn token(&self) -> String {
        match self {
            AttackId::Bonafide => "-".to_string(),
            AttackId::Known(n) => format!("A{n:02}"),
            AttackId::Other(s) => s.clone(),
        }
    }

    pub fn is_bonafide(&self) -> bool {
        matches!(self, AttackId::Bonafide)
    }

    fn entry(&self) -> Option<&'static (u8, AttackFamily, &'static str)> {
        match self {
            AttackId::Known(n) => KNOWN_ATTACKS.iter().find(|(k, _, _)| k == n),
            _ => None,
        }
    }

    pub fn family(&self) -> AttackFamily {
        self.entry().map_or(AttackFamily::None, |e| e.1)
    }

    pub fn method(&self) -> &'static str {
        self.entry().map_or("", |e| e.2)
    }
}

impl fmt::Display for AttackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolEntry {
    pub speaker_id: String,
    pub utterance_id: String,
    pub attack_id: AttackId,
    pub key: Key,
}

/// Parse the five-column CM protocol: `speaker utterance - attack key`.
pub fn parse_cm_protocol(text: &str) -> Result<Vec<ProtocolEntry>> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let key: Key = fields[4].parse().map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        let attack_id = AttackId::parse(fields[3]);
        if attack_id.is_bonafide() != (key == Key::Bonafide) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("attack {:?} inconsistent with key {key}", fields[3]),
            });
        }
        if !seen.insert(fields[1].to_string()) {
            return Err(Error::DuplicateUtterance(fields[1].to_string()));
        }
        entries.push(ProtocolEntry {
            speaker_id: fields[0].to_string(),
            utterance_id: fields[1].to_string(),
            attack_id,
            key,
        });
    }
    Ok(entries)
}

pub fn render_cm_protocol(entries: &[ProtocolEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{} {} - {} {}\n",
            e.speaker_id, e.utterance_id, e.attack_id, e.key
        ));
    }
    out
}
