//! Line-delimited JSON records in and out, and atomic file writes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SegmentKey, SegmentRecord};
use crate::scoring::{BatchEntry, ConfigUsed, WeightsUsed};

fn default_true() -> bool {
    true
}

/// One line of a dataset file. Unknown fields are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordLine {
    pub lang_pair: String,
    pub system_id: String,
    pub segment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default = "default_true")]
    pub has_reference: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_score: Option<f64>,
    #[serde(default)]
    pub scores: BTreeMap<String, Option<f64>>,
}

impl From<RecordLine> for SegmentRecord {
    fn from(line: RecordLine) -> Self {
        SegmentRecord {
            lang_pair: line.lang_pair,
            system_id: line.system_id,
            segment_id: line.segment_id,
            domain: line.domain,
            has_reference: line.has_reference,
            human_score: line.human_score,
            raw_scores: line.scores,
        }
    }
}

impl From<&SegmentRecord> for RecordLine {
    fn from(r: &SegmentRecord) -> Self {
        RecordLine {
            lang_pair: r.lang_pair.clone(),
            system_id: r.system_id.clone(),
            segment_id: r.segment_id.clone(),
            domain: r.domain.clone(),
            has_reference: r.has_reference,
            human_score: r.human_score,
            scores: r.raw_scores.clone(),
        }
    }
}

/// Parses a dataset stream. Blank lines are ignored; any other line that
/// fails to parse is an error carrying its 1-based line number. With
/// `flip_gold` every human score is negated (lower-is-better gold).
pub fn read_records(reader: impl Read, flip_gold: bool) -> Result<Vec<SegmentRecord>> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let mut record = SegmentRecord::from(parsed);
        if flip_gold {
            record.human_score = record.human_score.map(|h| -h);
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_records(path: &Path, flip_gold: bool) -> Result<Vec<SegmentRecord>> {
    let file = File::open(path).map_err(|e| file_error(path, e))?;
    read_records(file, flip_gold).map_err(|e| match e {
        Error::Parse { line, message } => Error::File {
            path: path.display().to_string(),
            message: format!("line {line}: {message}"),
        },
        other => other,
    })
}

pub fn write_records(records: &[SegmentRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(&RecordLine::from(r)).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| Error::File {
            path: "<output>".into(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

/// One line of a scored output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLine {
    pub lang_pair: String,
    pub system_id: String,
    pub segment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite_score: Option<f64>,
    /// Composite divided by the weight total; not used for correlations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_used: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_used: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl ScoredLine {
    pub fn key(&self) -> SegmentKey {
        SegmentKey {
            lang_pair: self.lang_pair.clone(),
            system_id: self.system_id.clone(),
            segment_id: self.segment_id.clone(),
        }
    }
}

impl From<&BatchEntry> for ScoredLine {
    fn from(entry: &BatchEntry) -> Self {
        match entry {
            BatchEntry::Scored(s) => ScoredLine {
                lang_pair: s.key.lang_pair.clone(),
                system_id: s.key.system_id.clone(),
                segment_id: s.key.segment_id.clone(),
                composite_score: Some(s.composite_score),
                display_score: Some(s.display_score()),
                config_used: Some(
                    match s.config_used {
                        ConfigUsed::Primary => "primary",
                        ConfigUsed::QeFallback => "qe_fallback",
                    }
                    .to_string(),
                ),
                weights_used: Some(match &s.weights_used {
                    WeightsUsed::Global => "global".to_string(),
                    WeightsUsed::PerLang(l) => format!("per_lang:{l}"),
                }),
                skipped: None,
            },
            BatchEntry::Skipped { key, reason, .. } => ScoredLine {
                lang_pair: key.lang_pair.clone(),
                system_id: key.system_id.clone(),
                segment_id: key.segment_id.clone(),
                composite_score: None,
                display_score: None,
                config_used: None,
                weights_used: None,
                skipped: Some(reason.clone()),
            },
        }
    }
}

pub fn render_scored(entries: &[BatchEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(&ScoredLine::from(e)).expect("scored line serializes"));
        out.push('\n');
    }
    out
}

pub fn load_scored(path: &Path) -> Result<Vec<ScoredLine>> {
    let file = File::open(path).map_err(|e| file_error(path, e))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| file_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push(serde_json::from_str(&line).map_err(|e| Error::File {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(lines)
}

pub(crate) fn file_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::File {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| file_error(path, e))?;
    tmp.write_all(contents).map_err(|e| file_error(path, e))?;
    tmp.flush().map_err(|e| file_error(path, e))?;
    tmp.persist(path).map_err(|e| file_error(path, e.error))?;
    Ok(())
}
