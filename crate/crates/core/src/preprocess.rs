//! Raw metric score → `[0, 1]` where 1 is the best translation.
//!
//! The pipeline is clip to the spec's range, min-max normalize, then
//! optionally invert for metrics where higher raw values are worse.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MetricSpec, ScoreMatrix, SegmentRecord};

pub fn clip(y: f64, spec: &MetricSpec) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::NonFinite {
            metric: spec.name().to_string(),
            value: y,
        });
    }
    Ok(y.max(spec.clip_min()).min(spec.clip_max()))
}

pub fn normalize(y_clipped: f64, spec: &MetricSpec) -> Result<f64> {
    if !(spec.clip_min()..=spec.clip_max()).contains(&y_clipped) {
        return Err(Error::OutOfRange {
            metric: spec.name().to_string(),
            value: y_clipped,
            min: spec.clip_min(),
            max: spec.clip_max(),
        });
    }
    Ok((y_clipped - spec.clip_min()) / (spec.clip_max() - spec.clip_min()))
}

pub fn invert(y_norm: f64, spec: &MetricSpec) -> Result<f64> {
    if !(0.0..=1.0).contains(&y_norm) {
        return Err(Error::OutOfRange {
            metric: spec.name().to_string(),
            value: y_norm,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(if spec.invert() { 1.0 - y_norm } else { y_norm })
}

/// The full clip → normalize → invert pipeline for a single value.
pub fn preprocess_value(y: f64, spec: &MetricSpec) -> Result<f64> {
    let clipped = clip(y, spec)?;
    let normalized = normalize(clipped, spec)?;
    invert(normalized, spec)
}

/// Preprocessed score vector of one record, in `specs` order.
pub fn preprocess_row(record: &SegmentRecord, specs: &[MetricSpec]) -> Result<Vec<f64>> {
    specs
        .iter()
        .map(|spec| {
            let raw = record
                .score(spec.name())
                .ok_or_else(|| Error::MissingScore {
                    record: record.key().to_string(),
                    metric: spec.name().to_string(),
                })?;
            preprocess_value(raw, spec)
        })
        .collect()
}

/// Builds the score matrix for `records`. Rows are processed in parallel;
/// on failure the error of the first bad record (in input order) is returned.
pub fn preprocess_matrix(records: &[SegmentRecord], specs: &[MetricSpec]) -> Result<ScoreMatrix> {
    let rows: Vec<Result<Vec<f64>>> = records
        .par_iter()
        .map(|r| preprocess_row(r, specs))
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    ScoreMatrix::new(
        specs.iter().map(|s| s.name().to_string()).collect(),
        rows,
        records.iter().map(SegmentRecord::key).collect(),
    )
}
