//! TOML configuration files: metric declarations, calibrated composites and
//! their provenance, plus the human-readable rendering used by `inspect`.
//!
//! A calibrated config is also a valid metric declaration file; weights are
//! simply ignored when declaring metrics for a new calibration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationMode;
use crate::error::{Error, Result};
use crate::io::{file_error, write_atomic};
use crate::model::{ensure_unique_names, CompositeConfig, MetricSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigMode {
    ReferenceBased,
    ReferenceFree,
}

impl From<CalibrationMode> for ConfigMode {
    fn from(m: CalibrationMode) -> Self {
        match m {
            CalibrationMode::ReferenceBased => ConfigMode::ReferenceBased,
            CalibrationMode::ReferenceFree => ConfigMode::ReferenceFree,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricEntry {
    pub name: String,
    pub clip: [f64; 2],
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub invert: bool,
    pub needs_reference: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl MetricEntry {
    pub fn to_spec(&self) -> Result<MetricSpec> {
        if !self.normalize {
            return Err(Error::InvalidSpec {
                name: self.name.clone(),
                reason: "normalization cannot be disabled".into(),
            });
        }
        MetricSpec::new(
            self.name.clone(),
            self.clip[0],
            self.clip[1],
            self.invert,
            self.needs_reference,
        )
    }

    fn from_spec(spec: &MetricSpec, weight: Option<f64>) -> Self {
        MetricEntry {
            name: spec.name().to_string(),
            clip: [spec.clip_min(), spec.clip_max()],
            normalize: true,
            invert: spec.invert(),
            needs_reference: spec.needs_reference(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoSettings {
    pub init_points: usize,
    pub steps: usize,
    pub acquisition: String,
    pub kappa: f64,
    pub candidate_count: usize,
    pub refine_iterations: usize,
    pub refine_radius: f64,
    pub stopping: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSettings {
    pub family: String,
    pub nu: f64,
    pub length_scale: f64,
    pub signal_variance: String,
    pub noise_variance: f64,
    pub jitter: f64,
    pub max_jitter: f64,
    pub prior_mean: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub objective: String,
    pub best_objective: f64,
    pub final_objective: f64,
    pub best_iteration: usize,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub zero_threshold: f64,
    pub sparsification: String,
    pub flip_gold: bool,
    pub training_records: usize,
    pub bo: BoSettings,
    pub kernel: KernelSettings,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_lang_objective: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ConfigMode>,
    pub metrics: Vec<MetricEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_lang: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qe_fallback: Option<Box<ConfigFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message } => Error::File {
                path: path.display().to_string(),
                message: format!("line {line}: {message}"),
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_toml().as_bytes())
    }

    /// Metric specs in declaration order; weights are not required.
    pub fn specs(&self) -> Result<Vec<MetricSpec>> {
        let specs = self
            .metrics
            .iter()
            .map(MetricEntry::to_spec)
            .collect::<Result<Vec<_>>>()?;
        ensure_unique_names(&specs)?;
        Ok(specs)
    }

    /// The composite described by this file. Every metric needs a weight.
    pub fn to_composite(&self) -> Result<CompositeConfig> {
        let specs = self.specs()?;
        let weights = self
            .metrics
            .iter()
            .map(|m| {
                m.weight.ok_or_else(|| {
                    Error::InvalidConfig(format!("metric `{}` has no weight", m.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut config = CompositeConfig::new(specs, weights)?.with_per_lang(self.per_lang.clone())?;
        if let Some(fallback) = &self.qe_fallback {
            config = config.with_qe_fallback(fallback.to_composite()?)?;
        }
        Ok(config)
    }

    pub fn from_composite(
        config: &CompositeConfig,
        mode: Option<ConfigMode>,
        provenance: Option<Provenance>,
    ) -> Self {
        ConfigFile {
            mode,
            metrics: config
                .specs()
                .iter()
                .zip(config.weights())
                .map(|(s, w)| MetricEntry::from_spec(s, Some(*w)))
                .collect(),
            per_lang: config.per_lang().clone(),
            qe_fallback: config.qe_fallback().map(|f| {
                Box::new(ConfigFile::from_composite(
                    f,
                    Some(ConfigMode::ReferenceFree),
                    None,
                ))
            }),
            provenance,
        }
    }

    /// Table rendering: clip range, normalization, inversion and weight per
    /// metric, followed by language overrides, the fallback and provenance.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, "");
        out
    }

    fn render_into(&self, out: &mut String, indent: &str) {
        let mode = match self.mode {
            Some(ConfigMode::ReferenceBased) => "reference-based",
            Some(ConfigMode::ReferenceFree) => "reference-free",
            None => "unspecified",
        };
        let _ = writeln!(out, "{indent}mode: {mode}");
        let width = self
            .metrics
            .iter()
            .map(|m| m.name.chars().count())
            .max()
            .unwrap_or(0)
            .max("metric".len());
        let _ = writeln!(
            out,
            "{indent}{:<width$}  {:<12}  {:<13}  {:<9}  weight",
            "metric", "clipping", "normalization", "inversion"
        );
        for m in &self.metrics {
            let clip = format!("[{},{}]", m.clip[0], m.clip[1]);
            let weight = match m.weight {
                Some(w) if w == 0.0 => format!("{w:.4}  (inactive)"),
                Some(w) => format!("{w:.4}"),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{indent}{:<width$}  {:<12}  {:<13}  {:<9}  {weight}",
                m.name,
                clip,
                mark(m.normalize),
                mark(m.invert),
            );
        }
        if !self.per_lang.is_empty() {
            let _ = writeln!(out, "{indent}per-language weights:");
            for (lang, weights) in &self.per_lang {
                let ws: Vec<String> = weights.iter().map(|w| format!("{w:.4}")).collect();
                let _ = writeln!(out, "{indent}  {lang}: {}", ws.join(" / "));
            }
        }
        if let Some(fallback) = &self.qe_fallback {
            let _ = writeln!(out, "{indent}reference-free fallback:");
            fallback.render_into(out, &format!("{indent}  "));
        }
        if let Some(p) = &self.provenance {
            let _ = writeln!(out, "{indent}provenance:");
            let i = format!("{indent}  ");
            let _ = writeln!(out, "{i}tool version: {}", p.tool_version);
            let _ = writeln!(out, "{i}seed: {}", p.seed);
            let _ = writeln!(out, "{i}objective: {}", p.objective);
            let _ = writeln!(out, "{i}best objective: {}", p.best_objective);
            let _ = writeln!(out, "{i}final objective (sparsified): {}", p.final_objective);
            let _ = writeln!(
                out,
                "{i}evaluations: {} ({} failed), best at iteration {}",
                p.evaluations, p.failed_evaluations, p.best_iteration
            );
            let _ = writeln!(
                out,
                "{i}optimizer: {} init + {} steps, {} kappa={}, {} candidates, stop on {}",
                p.bo.init_points,
                p.bo.steps,
                p.bo.acquisition,
                p.bo.kappa,
                p.bo.candidate_count,
                p.bo.stopping
            );
            let _ = writeln!(
                out,
                "{i}kernel: {} nu={} length_scale={} signal_variance={} noise={} jitter={}",
                p.kernel.family,
                p.kernel.nu,
                p.kernel.length_scale,
                p.kernel.signal_variance,
                p.kernel.noise_variance,
                p.kernel.jitter
            );
            let _ = writeln!(
                out,
                "{i}zero threshold: {} ({})",
                p.zero_threshold, p.sparsification
            );
            let _ = writeln!(out, "{i}gold flipped: {}", p.flip_gold);
            for w in &p.warnings {
                let _ = writeln!(out, "{i}warning: {w}");
            }
        }
    }
}

fn mark(flag: bool) -> &'static str {
    if flag {
        "✓"
    } else {
        "×"
    }
}
