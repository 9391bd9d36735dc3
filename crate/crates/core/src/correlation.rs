//! Kendall τ-b and Pearson r, plus per-group aggregation.
//!
//! τ-b uses Knight's O(n log n) algorithm: sort by (x, y), count the
//! discordant pairs as merge-sort swaps on y, and correct for ties with
//! exact integer counts. The final ratio is computed from those integers,
//! so any exact pair-counting implementation yields the same bits.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrelationMeasure {
    KendallTauB,
    Pearson,
}

impl CorrelationMeasure {
    pub fn compute(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            CorrelationMeasure::KendallTauB => kendall_tau_b(x, y),
            CorrelationMeasure::Pearson => pearson(x, y),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CorrelationMeasure::KendallTauB => "kendall_tau_b",
            CorrelationMeasure::Pearson => "pearson",
        }
    }
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::UndefinedCorrelation("NaN in input".into()));
    }
    Ok(())
}

/// Number of pairs within runs of equal adjacent values.
fn tied_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` ascending and returns the number of inversions removed.
fn merge_sort_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_sort_swaps(left, bl) + merge_sort_swaps(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Pair counts that determine τ-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub total: u64,
    pub tied_x: u64,
    pub tied_y: u64,
    pub tied_both: u64,
    pub discordant: u64,
}

impl PairCounts {
    pub fn concordant(&self) -> u64 {
        self.total + self.tied_both - self.tied_x - self.tied_y - self.discordant
    }

    /// τ-b from the counts; `None` when either variable is constant.
    pub fn tau_b(&self) -> Option<f64> {
        let untied_x = self.total - self.tied_x;
        let untied_y = self.total - self.tied_y;
        if untied_x == 0 || untied_y == 0 {
            return None;
        }
        let numerator = self.concordant() as f64 - self.discordant as f64;
        let tau = numerator / ((untied_x as f64) * (untied_y as f64)).sqrt();
        Some(tau.clamp(-1.0, 1.0))
    }
}

pub fn kendall_pair_counts(x: &[f64], y: &[f64]) -> Result<PairCounts> {
    check_inputs(x, y)?;
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
    });
    let tied_x = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let tied_both = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    // Within an x-tie run y is already ascending, so swaps only count
    // pairs with strictly ordered x and reversed y.
    let discordant = merge_sort_swaps(&mut ys, &mut buf);
    let tied_y = tied_pairs(&ys, |a, b| a == b);

    Ok(PairCounts {
        total: n * (n - 1) / 2,
        tied_x,
        tied_y,
        tied_both,
        discordant,
    })
}

/// Kendall's τ-b: `(C − D) / sqrt((C + D + Tx)(C + D + Ty))`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    kendall_pair_counts(x, y)?
        .tau_b()
        .ok_or_else(|| Error::UndefinedCorrelation("all values tied".into()))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inputs(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCorrelation {
    /// Sorted by group key; `None` marks a group where the measure is undefined.
    pub per_group: BTreeMap<String, Option<f64>>,
    /// Unweighted mean over defined groups.
    pub mean: Option<f64>,
    pub undefined: Vec<String>,
}

pub fn grouped_correlation(
    scores: &[f64],
    gold: &[f64],
    group_keys: &[String],
    measure: CorrelationMeasure,
) -> Result<GroupedCorrelation> {
    if scores.len() != gold.len() || scores.len() != group_keys.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            got: if scores.len() != gold.len() {
                gold.len()
            } else {
                group_keys.len()
            },
        });
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((s, g), k) in scores.iter().zip(gold).zip(group_keys) {
        let entry = groups.entry(k.as_str()).or_default();
        entry.0.push(*s);
        entry.1.push(*g);
    }

    let mut per_group = BTreeMap::new();
    let mut undefined = Vec::new();
    let mut defined = Vec::new();
    for (key, (s, g)) in groups {
        match measure.compute(&s, &g) {
            Ok(v) => {
                defined.push(v);
                per_group.insert(key.to_string(), Some(v));
            }
            Err(_) => {
                undefined.push(key.to_string());
                per_group.insert(key.to_string(), None);
            }
        }
    }
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(GroupedCorrelation {
        per_group,
        mean,
        undefined,
    })
}
