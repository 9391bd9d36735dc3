//! Shared data types: metric specs, segment records, score matrices and
//! composite configurations.
//!
//! Everything here is immutable once constructed. Constructors enforce the
//! invariants; nothing in this module computes scores.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Preprocessing rule for one base metric: the valid range it is clipped
/// to, whether higher raw values mean worse translations, and whether the
/// metric needs a reference translation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    name: String,
    clip_min: f64,
    clip_max: f64,
    invert: bool,
    needs_reference: bool,
}

impl MetricSpec {
    pub fn new(
        name: impl Into<String>,
        clip_min: f64,
        clip_max: f64,
        invert: bool,
        needs_reference: bool,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidSpec {
                name,
                reason: "empty name".into(),
            });
        }
        if !clip_min.is_finite() || !clip_max.is_finite() {
            return Err(Error::InvalidSpec {
                name,
                reason: "clip bounds must be finite".into(),
            });
        }
        if clip_min >= clip_max {
            return Err(Error::InvalidSpec {
                name,
                reason: format!("clip_min {clip_min} must be below clip_max {clip_max}"),
            });
        }
        Ok(Self {
            name,
            clip_min,
            clip_max,
            invert,
            needs_reference,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn clip_min(&self) -> f64 {
        self.clip_min
    }

    pub fn clip_max(&self) -> f64 {
        self.clip_max
    }

    pub fn invert(&self) -> bool {
        self.invert
    }

    pub fn needs_reference(&self) -> bool {
        self.needs_reference
    }
}

/// Rejects collections where two specs share a name.
pub fn ensure_unique_names(specs: &[MetricSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for spec in specs {
        if !seen.insert(spec.name()) {
            return Err(Error::DuplicateMetric(spec.name().to_string()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentKey {
    pub lang_pair: String,
    pub system_id: String,
    pub segment_id: String,
}

impl fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.lang_pair, self.system_id, self.segment_id)
    }
}

/// One translated segment with its human judgment and raw metric scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub lang_pair: String,
    pub system_id: String,
    pub segment_id: String,
    pub domain: Option<String>,
    pub has_reference: bool,
    pub human_score: Option<f64>,
    /// Absent scores are `None`, never a sentinel value.
    pub raw_scores: BTreeMap<String, Option<f64>>,
}

impl SegmentRecord {
    pub fn new(
        lang_pair: impl Into<String>,
        system_id: impl Into<String>,
        segment_id: impl Into<String>,
    ) -> Self {
        Self {
            lang_pair: lang_pair.into(),
            system_id: system_id.into(),
            segment_id: segment_id.into(),
            domain: None,
            has_reference: true,
            human_score: None,
            raw_scores: BTreeMap::new(),
        }
    }

    pub fn with_human_score(mut self, score: f64) -> Self {
        self.human_score = Some(score);
        self
    }

    pub fn with_score(mut self, metric: impl Into<String>, score: f64) -> Self {
        self.raw_scores.insert(metric.into(), Some(score));
        self
    }

    pub fn with_reference(mut self, has_reference: bool) -> Self {
        self.has_reference = has_reference;
        self
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn key(&self) -> SegmentKey {
        SegmentKey {
            lang_pair: self.lang_pair.clone(),
            system_id: self.system_id.clone(),
            segment_id: self.segment_id.clone(),
        }
    }

    pub fn score(&self, metric: &str) -> Option<f64> {
        self.raw_scores.get(metric).copied().flatten()
    }
}

/// Column-aligned preprocessed scores, one row per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    metric_order: Vec<String>,
    rows: Vec<Vec<f64>>,
    row_keys: Vec<SegmentKey>,
}

impl ScoreMatrix {
    pub fn new(
        metric_order: Vec<String>,
        rows: Vec<Vec<f64>>,
        row_keys: Vec<SegmentKey>,
    ) -> Result<Self> {
        if rows.len() != row_keys.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: row_keys.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != metric_order.len()) {
            return Err(Error::LengthMismatch {
                expected: metric_order.len(),
                got: bad.len(),
            });
        }
        Ok(Self {
            metric_order,
            rows,
            row_keys,
        })
    }

    pub fn metric_order(&self) -> &[String] {
        &self.metric_order
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row_keys(&self) -> &[SegmentKey] {
        &self.row_keys
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.metric_order.len()
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ScoreMatrix {
        ScoreMatrix {
            metric_order: self.metric_order.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            row_keys: indices.iter().map(|&i| self.row_keys[i].clone()).collect(),
        }
    }
}

fn check_weights(weights: &[f64], expected: usize) -> Result<()> {
    if weights.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: weights.len(),
        });
    }
    if let Some(w) = weights
        .iter()
        .find(|w| !w.is_finite() || **w < 0.0 || **w > 1.0)
    {
        return Err(Error::InvalidConfig(format!("weight {w} outside [0, 1]")));
    }
    Ok(())
}

/// A weighted-sum composite over an ordered list of metric specs.
///
/// `per_lang` overrides the global weights for known language pairs.
/// `qe_fallback` is the reference-free composite used in hybrid scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeConfig {
    specs: Vec<MetricSpec>,
    weights: Vec<f64>,
    per_lang: BTreeMap<String, Vec<f64>>,
    qe_fallback: Option<Box<CompositeConfig>>,
}

impl CompositeConfig {
    pub fn new(specs: Vec<MetricSpec>, weights: Vec<f64>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidConfig("no metrics".into()));
        }
        ensure_unique_names(&specs)?;
        check_weights(&weights, specs.len())?;
        Ok(Self {
            specs,
            weights,
            per_lang: BTreeMap::new(),
            qe_fallback: None,
        })
    }

    pub fn with_per_lang(mut self, per_lang: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for weights in per_lang.values() {
            check_weights(weights, self.specs.len())?;
        }
        self.per_lang = per_lang;
        Ok(self)
    }

    pub fn with_qe_fallback(mut self, fallback: CompositeConfig) -> Result<Self> {
        if let Some(spec) = fallback.specs.iter().find(|s| s.needs_reference()) {
            return Err(Error::InvalidConfig(format!(
                "fallback metric `{}` needs a reference",
                spec.name()
            )));
        }
        if fallback.qe_fallback.is_some() {
            return Err(Error::InvalidConfig("fallback configs cannot nest".into()));
        }
        self.qe_fallback = Some(Box::new(fallback));
        Ok(self)
    }

    pub fn specs(&self) -> &[MetricSpec] {
        &self.specs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn per_lang(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.per_lang
    }

    pub fn qe_fallback(&self) -> Option<&CompositeConfig> {
        self.qe_fallback.as_deref()
    }

    /// Per-language weights when the pair is known, else the global vector.
    pub fn weights_for(&self, lang_pair: &str) -> (&[f64], Option<&str>) {
        match self.per_lang.get_key_value(lang_pair) {
            Some((key, w)) => (w, Some(key.as_str())),
            None => (&self.weights, None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    Calibration,
    Scoring,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IssueKind {
    MissingHumanScore,
    NonFiniteHumanScore(f64),
    MissingScore(String),
    NonFiniteScore { metric: String, value: f64 },
    /// Scoring mode: neither the full metric set nor the reference-free
    /// subset is fully present.
    NotScorable,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueKind::MissingHumanScore => write!(f, "missing human_score"),
            IssueKind::NonFiniteHumanScore(v) => write!(f, "non-finite human_score {v}"),
            IssueKind::MissingScore(m) => write!(f, "missing score for metric `{m}`"),
            IssueKind::NonFiniteScore { metric, value } => {
                write!(f, "non-finite score {value} for metric `{metric}`")
            }
            IssueKind::NotScorable => write!(f, "no applicable metric set is fully scored"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    /// Zero-based; displayed one-based.
    pub record_index: usize,
    pub key: SegmentKey,
    pub kind: IssueKind,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record #{} ({}): {}", self.record_index + 1, self.key, self.kind)
    }
}

/// Checks every record against the requirements of `mode`. Issues are
/// reported in record order; an empty report means the data is usable.
pub fn validate_dataset(
    records: &[SegmentRecord],
    specs: &[MetricSpec],
    mode: ValidationMode,
) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let mut push = |kind| {
            issues.push(ValidationIssue {
                record_index: index,
                key: record.key(),
                kind,
            })
        };

        for spec in specs {
            if let Some(v) = record.score(spec.name()) {
                if !v.is_finite() {
                    push(IssueKind::NonFiniteScore {
                        metric: spec.name().to_string(),
                        value: v,
                    });
                }
            }
        }

        match mode {
            ValidationMode::Calibration => {
                match record.human_score {
                    None => push(IssueKind::MissingHumanScore),
                    Some(h) if !h.is_finite() => push(IssueKind::NonFiniteHumanScore(h)),
                    Some(_) => {}
                }
                for spec in specs {
                    if record.score(spec.name()).is_none() {
                        push(IssueKind::MissingScore(spec.name().to_string()));
                    }
                }
            }
            ValidationMode::Scoring => {
                let present = |s: &&MetricSpec| record.score(s.name()).is_some();
                let full = specs.iter().all(|s| present(&s));
                let qe: Vec<_> = specs.iter().filter(|s| !s.needs_reference()).collect();
                let qe_only = !qe.is_empty() && qe.iter().all(present);
                if !full && !qe_only {
                    push(IssueKind::NotScorable);
                }
            }
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comet() -> MetricSpec {
        MetricSpec::new("COMET", 0.0, 1.0, false, true).unwrap()
    }

    fn kiwi() -> MetricSpec {
        MetricSpec::new("CometKiwi", 0.0, 1.0, false, false).unwrap()
    }

    #[test]
    fn spec_rejects_degenerate_range() {
        assert!(MetricSpec::new("m", 1.0, 1.0, false, false).is_err());
        assert!(MetricSpec::new("m", 2.0, 1.0, false, false).is_err());
        assert!(MetricSpec::new("m", f64::NAN, 1.0, false, false).is_err());
        assert!(MetricSpec::new("", 0.0, 1.0, false, false).is_err());
    }

    #[test]
    fn config_rejects_bad_weights() {
        assert!(matches!(
            CompositeConfig::new(vec![comet()], vec![0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(CompositeConfig::new(vec![comet()], vec![1.5]).is_err());
        assert!(CompositeConfig::new(vec![comet()], vec![-0.1]).is_err());
        assert!(CompositeConfig::new(vec![comet(), comet()], vec![0.1, 0.2]).is_err());
        assert!(CompositeConfig::new(vec![comet()], vec![1.0]).is_ok());
    }

    #[test]
    fn fallback_must_be_reference_free() {
        let primary = CompositeConfig::new(vec![comet()], vec![1.0]).unwrap();
        let bad = CompositeConfig::new(vec![comet()], vec![1.0]).unwrap();
        assert!(primary.clone().with_qe_fallback(bad).is_err());
        let good = CompositeConfig::new(vec![kiwi()], vec![1.0]).unwrap();
        assert!(primary.with_qe_fallback(good).is_ok());
    }

    #[test]
    fn weights_for_prefers_language_pair() {
        let cfg = CompositeConfig::new(vec![comet()], vec![1.0])
            .unwrap()
            .with_per_lang(BTreeMap::from([("en-de".to_string(), vec![0.5])]))
            .unwrap();
        assert_eq!(cfg.weights_for("en-de"), (&[0.5][..], Some("en-de")));
        assert_eq!(cfg.weights_for("ja-zh"), (&[1.0][..], None));
    }

    #[test]
    fn missing_human_score_is_one_issue() {
        let rec = SegmentRecord::new("en-de", "sys", "1").with_score("COMET", 0.5);
        let issues = validate_dataset(&[rec], &[comet()], ValidationMode::Calibration);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::MissingHumanScore);
        assert_eq!(issues[0].kind.to_string(), "missing human_score");
    }

    #[test]
    fn complete_record_has_no_issues() {
        let rec = SegmentRecord::new("en-de", "sys", "1")
            .with_score("COMET", 0.5)
            .with_human_score(-1.0);
        assert!(validate_dataset(&[rec], &[comet()], ValidationMode::Calibration).is_empty());
    }

    #[test]
    fn missing_metric_is_named() {
        let rec = SegmentRecord::new("en-de", "sys", "1").with_human_score(0.0);
        let issues = validate_dataset(&[rec], &[comet()], ValidationMode::Calibration);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::MissingScore("COMET".into()));
        assert!(issues[0].to_string().contains("COMET"));
    }

    #[test]
    fn scoring_accepts_reference_free_subset() {
        let specs = [comet(), kiwi()];
        let qe_only = SegmentRecord::new("en-de", "sys", "1")
            .with_reference(false)
            .with_score("CometKiwi", 0.3);
        let nothing = SegmentRecord::new("en-de", "sys", "2");
        let issues = validate_dataset(&[qe_only, nothing], &specs, ValidationMode::Scoring);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].record_index, 1);
        assert_eq!(issues[0].kind, IssueKind::NotScorable);
    }

    #[test]
    fn validation_preserves_record_order() {
        let recs: Vec<_> = (0..5)
            .map(|i| SegmentRecord::new("en-de", "sys", i.to_string()))
            .collect();
        let issues = validate_dataset(&recs, &[comet()], ValidationMode::Calibration);
        let order: Vec<_> = issues.iter().map(|i| i.record_index).collect();
        assert_eq!(order, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        assert_eq!(
            issues,
            validate_dataset(&recs, &[comet()], ValidationMode::Calibration)
        );
    }
}
