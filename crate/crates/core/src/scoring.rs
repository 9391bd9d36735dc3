//! Applying a calibrated composite to new records.

use rayon::prelude::*;

use crate::calibration::composite;
use crate::error::{Error, Result};
use crate::model::{CompositeConfig, SegmentKey, SegmentRecord};
use crate::preprocess::preprocess_row;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigUsed {
    Primary,
    QeFallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightsUsed {
    Global,
    PerLang(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegment {
    pub key: SegmentKey,
    /// Unnormalized, in `[0, weight_sum]`.
    pub composite_score: f64,
    pub weight_sum: f64,
    pub config_used: ConfigUsed,
    pub weights_used: WeightsUsed,
}

impl ScoredSegment {
    /// Score divided by the weight total. For display only.
    pub fn display_score(&self) -> f64 {
        if self.weight_sum > 0.0 {
            self.composite_score / self.weight_sum
        } else {
            0.0
        }
    }
}

pub fn score_segment(
    record: &SegmentRecord,
    config: &CompositeConfig,
    hybrid: bool,
) -> Result<ScoredSegment> {
    let (sub, config_used) = if hybrid && !record.has_reference {
        let fallback = config
            .qe_fallback()
            .ok_or_else(|| Error::NoFallback(record.key().to_string()))?;
        (fallback, ConfigUsed::QeFallback)
    } else {
        (config, ConfigUsed::Primary)
    };
    let (weights, lang) = sub.weights_for(&record.lang_pair);
    let row = preprocess_row(record, sub.specs())?;
    Ok(ScoredSegment {
        key: record.key(),
        composite_score: composite(weights, &row)?,
        weight_sum: weights.iter().sum(),
        config_used,
        weights_used: match lang {
            Some(l) => WeightsUsed::PerLang(l.to_string()),
            None => WeightsUsed::Global,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchEntry {
    Scored(ScoredSegment),
    Skipped {
        index: usize,
        key: SegmentKey,
        reason: String,
    },
}

/// Order-preserving [`score_segment`] over `records`. In strict mode the
/// first failing record (by input position) aborts the whole batch.
pub fn score_batch(
    records: &[SegmentRecord],
    config: &CompositeConfig,
    hybrid: bool,
    mode: BatchMode,
) -> Result<Vec<BatchEntry>> {
    let results: Vec<Result<ScoredSegment>> = records
        .par_iter()
        .map(|r| score_segment(r, config, hybrid))
        .collect();
    results
        .into_iter()
        .zip(records)
        .enumerate()
        .map(|(index, (res, record))| match (res, mode) {
            (Ok(s), _) => Ok(BatchEntry::Scored(s)),
            (Err(e), BatchMode::Lenient) => Ok(BatchEntry::Skipped {
                index,
                key: record.key(),
                reason: e.to_string(),
            }),
            (Err(e), BatchMode::Strict) => Err(Error::Record {
                position: index + 1,
                key: record.key().to_string(),
                message: e.to_string(),
            }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::MetricSpec;

    fn config() -> CompositeConfig {
        let mx = MetricSpec::new("mx", 0.0, 25.0, true, true).unwrap();
        let comet = MetricSpec::new("comet", 0.0, 1.0, false, true).unwrap();
        let kiwi = MetricSpec::new("kiwi", 0.0, 1.0, false, false).unwrap();
        let qe = CompositeConfig::new(vec![kiwi], vec![0.9]).unwrap();
        CompositeConfig::new(vec![mx, comet], vec![1.0, 0.5])
            .unwrap()
            .with_per_lang(BTreeMap::from([("en-de".to_string(), vec![0.5, 1.0])]))
            .unwrap()
            .with_qe_fallback(qe)
            .unwrap()
    }

    fn record(lang: &str, id: &str, has_ref: bool) -> SegmentRecord {
        SegmentRecord::new(lang, "sys", id)
            .with_reference(has_ref)
            .with_score("mx", 5.0)
            .with_score("comet", 0.6)
            .with_score("kiwi", 0.5)
    }

    #[test]
    fn routing_rules() {
        let cfg = config();
        let s = score_segment(&record("ja-zh", "1", true), &cfg, true).unwrap();
        assert_eq!(s.config_used, ConfigUsed::Primary);
        assert_eq!(s.weights_used, WeightsUsed::Global);
        assert!((s.composite_score - (0.8 + 0.3)).abs() < 1e-15);

        let s = score_segment(&record("ja-zh", "1", false), &cfg, true).unwrap();
        assert_eq!(s.config_used, ConfigUsed::QeFallback);
        assert_eq!(s.composite_score, 0.45);

        let s = score_segment(&record("en-de", "1", true), &cfg, true).unwrap();
        assert_eq!(s.weights_used, WeightsUsed::PerLang("en-de".into()));
        assert!((s.composite_score - (0.4 + 0.6)).abs() < 1e-15);
        assert!((s.display_score() - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn non_hybrid_ignores_reference_flag() {
        let cfg = config();
        let a = score_segment(&record("ja-zh", "1", false), &cfg, false).unwrap();
        assert_eq!(a.config_used, ConfigUsed::Primary);
        let with_ref = record("ja-zh", "1", true);
        assert_eq!(
            score_segment(&with_ref, &cfg, false).unwrap(),
            score_segment(&with_ref, &cfg, true).unwrap()
        );
    }

    #[test]
    fn missing_fallback_is_an_error() {
        let mx = MetricSpec::new("mx", 0.0, 25.0, true, true).unwrap();
        let cfg = CompositeConfig::new(vec![mx], vec![1.0]).unwrap();
        assert!(matches!(
            score_segment(&record("en-de", "1", false), &cfg, true),
            Err(Error::NoFallback(_))
        ));
    }

    #[test]
    fn batch_modes() {
        let cfg = config();
        assert!(score_batch(&[], &cfg, true, BatchMode::Strict).unwrap().is_empty());

        let mut bad = record("en-de", "2", true);
        bad.raw_scores.remove("comet");
        let batch = vec![record("en-de", "1", true), bad, record("en-de", "3", false)];
        let err = score_batch(&batch, &cfg, true, BatchMode::Strict).unwrap_err();
        assert!(err.to_string().contains("record #2 (en-de/sys/2)"), "{err}");
        assert!(err.to_string().contains("comet"), "{err}");

        let out = score_batch(&batch, &cfg, true, BatchMode::Lenient).unwrap();
        assert_eq!(out.len(), 3);
        assert!(matches!(out[1], BatchEntry::Skipped { index: 1, .. }));
        match &out[2] {
            BatchEntry::Scored(s) => assert_eq!(s.config_used, ConfigUsed::QeFallback),
            other => panic!("{other:?}"),
        }
    }
}
