//! Weight calibration: preprocess once, then search the weight cube for
//! the composite with the highest segment-level Kendall τ-b against the
//! human scores, and zero out negligible weights afterwards.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bayes_opt::{optimize, BoConfig, TraceEntry};
use crate::correlation::kendall_tau_b;
use crate::error::{Error, Result};
use crate::model::{
    ensure_unique_names, validate_dataset, CompositeConfig, MetricSpec, ScoreMatrix,
    SegmentRecord, ValidationMode,
};
use crate::preprocess::preprocess_matrix;

pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    ReferenceBased,
    ReferenceFree,
}

impl CalibrationMode {
    pub fn label(self) -> &'static str {
        match self {
            CalibrationMode::ReferenceBased => "reference_based",
            CalibrationMode::ReferenceFree => "reference_free",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationJob {
    pub records: Vec<SegmentRecord>,
    pub specs: Vec<MetricSpec>,
    pub mode: CalibrationMode,
    pub bo: BoConfig,
    pub per_language: bool,
    pub zero_threshold: f64,
}

impl CalibrationJob {
    pub fn new(
        records: Vec<SegmentRecord>,
        specs: Vec<MetricSpec>,
        mode: CalibrationMode,
        seed: u64,
    ) -> Self {
        let bo = BoConfig::new(specs.len(), seed);
        Self {
            records,
            specs,
            mode,
            bo,
            per_language: false,
            zero_threshold: DEFAULT_ZERO_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::InvalidConfig("no training records".into()));
        }
        if self.specs.is_empty() {
            return Err(Error::InvalidConfig("no metrics".into()));
        }
        ensure_unique_names(&self.specs)?;
        match self.mode {
            CalibrationMode::ReferenceBased => {
                if !self.specs.iter().any(MetricSpec::needs_reference) {
                    return Err(Error::InvalidConfig(
                        "reference-based mode needs at least one reference-based metric".into(),
                    ));
                }
            }
            CalibrationMode::ReferenceFree => {
                if let Some(s) = self.specs.iter().find(|s| s.needs_reference()) {
                    return Err(Error::InvalidConfig(format!(
                        "reference-free mode cannot use reference-based metric `{}`",
                        s.name()
                    )));
                }
            }
        }
        if self.bo.dimension != self.specs.len() {
            return Err(Error::InvalidOptimizer(format!(
                "optimizer dimension {} does not match {} metrics",
                self.bo.dimension,
                self.specs.len()
            )));
        }
        self.bo.validate()?;
        if !(self.zero_threshold.is_finite() && self.zero_threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "zero threshold {}",
                self.zero_threshold
            )));
        }
        if let Some(issue) =
            validate_dataset(&self.records, &self.specs, ValidationMode::Calibration).first()
        {
            return Err(Error::InvalidConfig(issue.to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Sparsified weights.
    pub config: CompositeConfig,
    /// Highest τ in the trace (the unsparsified incumbent).
    pub best_objective: f64,
    /// τ of `config` on the training data.
    pub final_objective: f64,
    pub incumbent: Vec<f64>,
    pub best_iteration: usize,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
}

/// `Σ αᵢ·ỹᵢ`.
pub fn composite(weights: &[f64], row: &[f64]) -> Result<f64> {
    if weights.len() != row.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            got: row.len(),
        });
    }
    Ok(weights.iter().zip(row).map(|(w, y)| w * y).sum())
}

/// Kendall τ-b between the composite column and the gold scores.
pub fn objective_tau(weights: &[f64], matrix: &ScoreMatrix, gold: &[f64]) -> Result<f64> {
    if matrix.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: matrix.len(),
            got: gold.len(),
        });
    }
    let scores = matrix
        .rows()
        .iter()
        .map(|row| composite(weights, row))
        .collect::<Result<Vec<_>>>()?;
    kendall_tau_b(&scores, gold)
}

/// Entries below `threshold` become exactly 0. The largest entry is kept
/// even when below the threshold so the result is never all zero.
pub fn sparsify(weights: &[f64], threshold: f64) -> Vec<f64> {
    let keep = weights
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((i, w)),
        })
        .map(|(i, _)| i);
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            if w < threshold && Some(i) != keep {
                0.0
            } else {
                w
            }
        })
        .collect()
}

fn gold_scores(records: &[SegmentRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            r.human_score
                .ok_or_else(|| Error::MissingHumanScore(r.key().to_string()))
        })
        .collect()
}

fn all_tied(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn calibrate_slice(
    matrix: &ScoreMatrix,
    gold: &[f64],
    specs: &[MetricSpec],
    bo: &BoConfig,
    zero_threshold: f64,
) -> Result<CalibrationResult> {
    if gold.len() < 2 || all_tied(gold) {
        return Err(Error::UndefinedObjective(
            "human scores are all tied".into(),
        ));
    }
    let optimum = optimize(|w| objective_tau(w, matrix, gold), bo)?;
    let weights = sparsify(&optimum.best_point, zero_threshold);
    let final_objective = objective_tau(&weights, matrix, gold)?;
    if final_objective != optimum.best_value {
        log::info!(
            "sparsification moved tau from {} to {}",
            optimum.best_value,
            final_objective
        );
    }
    Ok(CalibrationResult {
        config: CompositeConfig::new(specs.to_vec(), weights)?,
        best_objective: optimum.best_value,
        final_objective,
        incumbent: optimum.best_point,
        best_iteration: optimum.best_iteration,
        trace: optimum.trace,
        seed: bo.seed,
    })
}

/// Calibrates one weight vector on all rows of the job.
pub fn calibrate_global(job: &CalibrationJob) -> Result<CalibrationResult> {
    job.validate()?;
    let gold = gold_scores(&job.records)?;
    let matrix = preprocess_matrix(&job.records, &job.specs)?;
    calibrate_slice(&matrix, &gold, &job.specs, &job.bo, job.zero_threshold)
}

/// Seed for a language pair's own optimizer stream (FNV-1a over the base
/// seed and the pair name), independent of scheduling order.
pub fn lang_seed(seed: u64, lang_pair: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    seed.to_le_bytes()
        .iter()
        .chain(lang_pair.as_bytes())
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Calibrated(CalibrationResult),
    /// The slice could not be calibrated; the pair maps to the global weights.
    Fallback { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerLanguageCalibration {
    /// Global weights plus one `per_lang` entry for every pair in the data.
    pub config: CompositeConfig,
    pub global: CalibrationResult,
    pub pairs: BTreeMap<String, PairOutcome>,
    pub warnings: Vec<String>,
}

/// One calibration per language pair, each on that pair's rows, plus the
/// global calibration used for unseen pairs and failed slices.
pub fn calibrate_per_language(job: &CalibrationJob) -> Result<PerLanguageCalibration> {
    if !job.per_language {
        return Err(Error::InvalidConfig(
            "per-language calibration requested on a global job".into(),
        ));
    }
    job.validate()?;
    let gold = gold_scores(&job.records)?;
    let matrix = preprocess_matrix(&job.records, &job.specs)?;
    let global = calibrate_slice(&matrix, &gold, &job.specs, &job.bo, job.zero_threshold)?;

    let mut slices: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in job.records.iter().enumerate() {
        slices.entry(r.lang_pair.as_str()).or_default().push(i);
    }
    let slices: Vec<(&str, Vec<usize>)> = slices.into_iter().collect();

    let outcomes: Vec<(String, PairOutcome)> = slices
        .par_iter()
        .map(|(pair, idx)| {
            let sub = matrix.select(idx);
            let sub_gold: Vec<f64> = idx.iter().map(|&i| gold[i]).collect();
            let bo = BoConfig {
                seed: lang_seed(job.bo.seed, pair),
                ..job.bo.clone()
            };
            let outcome =
                match calibrate_slice(&sub, &sub_gold, &job.specs, &bo, job.zero_threshold) {
                    Ok(r) => PairOutcome::Calibrated(r),
                    Err(e) => PairOutcome::Fallback {
                        reason: e.to_string(),
                    },
                };
            (pair.to_string(), outcome)
        })
        .collect();

    let mut per_lang = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut pairs = BTreeMap::new();
    for (pair, outcome) in outcomes {
        let weights = match &outcome {
            PairOutcome::Calibrated(r) => r.config.weights().to_vec(),
            PairOutcome::Fallback { reason } => {
                let msg = format!("{pair}: using global weights ({reason})");
                log::warn!("{msg}");
                warnings.push(msg);
                global.config.weights().to_vec()
            }
        };
        per_lang.insert(pair.clone(), weights);
        pairs.insert(pair, outcome);
    }

    let config = global.config.clone().with_per_lang(per_lang)?;
    Ok(PerLanguageCalibration {
        config,
        global,
        pairs,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_examples() {
        let v = composite(&[1.0, 0.2055, 0.2733], &[0.8, 0.6, 0.9]).unwrap();
        assert!((v - 1.16927).abs() < 1e-9);
        assert_eq!(composite(&[0.0, 0.0], &[0.4, 0.9]).unwrap(), 0.0);
        assert_eq!(composite(&[1.0], &[0.37]).unwrap(), 0.37);
        assert!(composite(&[1.0], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn sparsify_examples() {
        assert_eq!(
            sparsify(&[1.0, 0.0005, 0.2733], 1e-3),
            vec![1.0, 0.0, 0.2733]
        );
        assert_eq!(sparsify(&[0.5, 0.2], 1e-3), vec![0.5, 0.2]);
        assert_eq!(sparsify(&[0.0002, 0.0001], 1e-3), vec![0.0002, 0.0]);
        assert_eq!(sparsify(&[0.0, 0.0], 1e-3), vec![0.0, 0.0]);
    }

    fn matrix(rows: Vec<Vec<f64>>) -> ScoreMatrix {
        let n = rows[0].len();
        let keys = (0..rows.len())
            .map(|i| SegmentRecord::new("xx", "s", i.to_string()).key())
            .collect();
        ScoreMatrix::new((0..n).map(|i| format!("m{i}")).collect(), rows, keys).unwrap()
    }

    #[test]
    fn objective_self_and_reversal() {
        let col = [0.1, 0.5, 0.3, 0.9, 0.7];
        let m = matrix(col.iter().map(|v| vec![*v, 1.0 - v * v]).collect());
        assert_eq!(objective_tau(&[1.0, 0.0], &m, &col).unwrap(), 1.0);
        let rev: Vec<f64> = col.iter().map(|v| -v).collect();
        assert_eq!(objective_tau(&[1.0, 0.0], &m, &rev).unwrap(), -1.0);
        assert!(objective_tau(&[1.0, 0.0], &m, &[1.0; 5]).is_err());
    }

    #[test]
    fn lang_seed_is_stable_and_distinct() {
        assert_eq!(lang_seed(42, "en-de"), lang_seed(42, "en-de"));
        assert_ne!(lang_seed(42, "en-de"), lang_seed(42, "ja-zh"));
        assert_ne!(lang_seed(42, "en-de"), lang_seed(43, "en-de"));
    }

    #[test]
    fn job_validation() {
        let qe = MetricSpec::new("kiwi", 0.0, 1.0, false, false).unwrap();
        let rec = SegmentRecord::new("en-de", "s", "1")
            .with_score("kiwi", 0.3)
            .with_human_score(1.0);
        let job = CalibrationJob::new(vec![rec.clone()], vec![qe.clone()], CalibrationMode::ReferenceBased, 1);
        assert!(job.validate().is_err());
        let job = CalibrationJob::new(vec![rec], vec![qe.clone()], CalibrationMode::ReferenceFree, 1);
        assert!(job.validate().is_ok());
        let unlabeled = SegmentRecord::new("en-de", "s", "1").with_score("kiwi", 0.3);
        let job = CalibrationJob::new(vec![unlabeled], vec![qe], CalibrationMode::ReferenceFree, 1);
        assert!(job.validate().is_err());
    }
}
