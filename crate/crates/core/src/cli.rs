//! Command-line surface: `calibrate`, `score`, `evaluate` and `inspect`.
//!
//! Each command is a plain function over its argument struct so tests can
//! drive it without spawning the binary. Human-readable output goes to the
//! supplied writer; files are written atomically.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bayes_opt::{Acquisition, BoConfig, REFINE_RADIUS};
use crate::calibration::{
    calibrate_global, calibrate_per_language, CalibrationJob, CalibrationMode, CalibrationResult,
    PairOutcome, DEFAULT_ZERO_THRESHOLD,
};
use crate::config::{BoSettings, ConfigFile, ConfigMode, KernelSettings, Provenance};
use crate::correlation::{grouped_correlation, CorrelationMeasure, GroupedCorrelation};
use crate::error::{Error, Result};
use crate::gp::{DEFAULT_JITTER, DEFAULT_NOISE_VARIANCE, MAX_JITTER, MIN_SIGNAL_VARIANCE, NU};
use crate::io::{load_records, load_scored, render_scored, write_atomic};
use crate::model::{validate_dataset, CompositeConfig, MetricSpec, ValidationIssue, ValidationMode};
use crate::scoring::{score_batch, BatchMode};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const MAX_LISTED: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "metricfuse", version, about = "Fuse MT metric scores into a calibrated composite")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find composite weights that maximize Kendall tau against human scores.
    Calibrate(CalibrateArgs),
    /// Apply a calibrated config to a dataset.
    Score(ScoreArgs),
    /// Correlate scored output with gold human scores.
    Evaluate(EvaluateArgs),
    /// Print a config as a table.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ref,
    Qe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupBy {
    Lang,
    Domain,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Metric declarations (TOML, `[[metrics]]` entries).
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Ref)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = crate::bayes_opt::DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long = "init", default_value_t = crate::bayes_opt::DEFAULT_INIT_POINTS)]
    pub init: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Calibrate one weight vector per language pair.
    #[arg(long)]
    pub per_lang: bool,
    /// Also calibrate a reference-free fallback from the declared QE metrics.
    #[arg(long)]
    pub hybrid: bool,
    #[arg(long, default_value_t = DEFAULT_ZERO_THRESHOLD)]
    pub zero_threshold: f64,
    /// Negate human scores on ingestion (for lower-is-better gold such as MQM penalties).
    #[arg(long)]
    pub flip_gold: bool,
    #[arg(long, default_value_t = crate::bayes_opt::DEFAULT_KAPPA)]
    pub kappa: f64,
    /// Acquisition candidates per step (default 1000 per metric, capped at 20000).
    #[arg(long)]
    pub candidates: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Route records without a reference to the reference-free fallback.
    #[arg(long)]
    pub hybrid: bool,
    /// Emit a skip line for unscorable records instead of failing.
    #[arg(long)]
    pub lenient: bool,
    /// Accepted for interface uniformity; scoring is deterministic.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Scored output from `score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Dataset carrying gold human scores.
    #[arg(long)]
    pub data: PathBuf,
    /// Grouping for the per-group report; defaults to language pair, plus
    /// domain when the data has domains.
    #[arg(long, value_enum)]
    pub group_by: Option<GroupBy>,
    #[arg(long)]
    pub flip_gold: bool,
    /// Machine-readable JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for interface uniformity; evaluation is deterministic.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Failure of a command, with the process exit code it maps to.
#[derive(Debug)]
pub enum CommandError {
    Validation(Vec<ValidationIssue>),
    Failed(Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Validation(_) => 1,
            CommandError::Failed(e) if e.is_numeric() => 2,
            CommandError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Validation(issues) => {
                writeln!(f, "{} validation issue(s):", issues.len())?;
                for issue in issues.iter().take(MAX_LISTED) {
                    writeln!(f, "  {issue}")?;
                }
                if issues.len() > MAX_LISTED {
                    writeln!(f, "  ... and {} more", issues.len() - MAX_LISTED)?;
                }
                Ok(())
            }
            CommandError::Failed(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CommandError {}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        CommandError::Failed(e)
    }
}

pub type CommandResult<T> = std::result::Result<T, CommandError>;

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::File {
        path: "<stdout>".into(),
        message: e.to_string(),
    })
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CommandResult<()> {
    match &cli.command {
        Command::Calibrate(a) => cmd_calibrate(a, out).map(|_| ()),
        Command::Score(a) => cmd_score(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out).map(|_| ()),
        Command::Inspect(a) => cmd_inspect(a, out),
    }
}

struct Calibrated {
    config: CompositeConfig,
    global: CalibrationResult,
    per_lang_objective: BTreeMap<String, f64>,
    warnings: Vec<String>,
}

fn run_job(job: &CalibrationJob) -> Result<Calibrated> {
    if job.per_language {
        let res = calibrate_per_language(job)?;
        let per_lang_objective = res
            .pairs
            .iter()
            .filter_map(|(k, v)| match v {
                PairOutcome::Calibrated(r) => Some((k.clone(), r.final_objective)),
                PairOutcome::Fallback { .. } => None,
            })
            .collect();
        Ok(Calibrated {
            config: res.config,
            global: res.global,
            per_lang_objective,
            warnings: res.warnings,
        })
    } else {
        let global = calibrate_global(job)?;
        Ok(Calibrated {
            config: global.config.clone(),
            global,
            per_lang_objective: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }
}

fn provenance(args: &CalibrateArgs, job: &CalibrationJob, cal: &Calibrated) -> Provenance {
    let Acquisition::Ucb { kappa } = job.bo.acquisition;
    let r = &cal.global;
    Provenance {
        tool_version: TOOL_VERSION.to_string(),
        seed: job.bo.seed,
        objective: "kendall_tau_b, segment level, pooled over the slice".into(),
        best_objective: r.best_objective,
        final_objective: r.final_objective,
        best_iteration: r.best_iteration,
        evaluations: r.trace.len(),
        failed_evaluations: r.trace.iter().filter(|e| !e.value.is_finite()).count(),
        zero_threshold: job.zero_threshold,
        sparsification: "post-hoc threshold on the incumbent".into(),
        flip_gold: args.flip_gold,
        training_records: job.records.len(),
        bo: BoSettings {
            init_points: job.bo.init_points,
            steps: job.bo.steps,
            acquisition: "ucb".into(),
            kappa,
            candidate_count: job.bo.candidate_count,
            refine_iterations: job.bo.refine_iterations,
            refine_radius: REFINE_RADIUS,
            stopping: "budget".into(),
        },
        kernel: KernelSettings {
            family: "matern".into(),
            nu: NU,
            length_scale: 0.25 * (job.specs.len() as f64).sqrt(),
            signal_variance: format!("observed variance, floor {MIN_SIGNAL_VARIANCE:e}"),
            noise_variance: DEFAULT_NOISE_VARIANCE,
            jitter: DEFAULT_JITTER,
            max_jitter: MAX_JITTER,
            prior_mean: "sample mean of observations".into(),
        },
        per_lang_objective: cal.per_lang_objective.clone(),
        warnings: cal.warnings.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateSummary {
    pub config: ConfigFile,
}

pub fn cmd_calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> CommandResult<CalibrateSummary> {
    let declared = ConfigFile::load(&args.metrics)?.specs()?;
    let qe_specs: Vec<MetricSpec> = declared
        .iter()
        .filter(|s| !s.needs_reference())
        .cloned()
        .collect();
    let (mode, specs) = match args.mode {
        ModeArg::Ref => (CalibrationMode::ReferenceBased, declared.clone()),
        ModeArg::Qe => (CalibrationMode::ReferenceFree, qe_specs.clone()),
    };
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no metrics apply to this mode".into()).into());
    }
    let records = load_records(&args.train, args.flip_gold)?;
    let issues = validate_dataset(&records, &specs, ValidationMode::Calibration);
    if !issues.is_empty() {
        return Err(CommandError::Validation(issues));
    }

    let make_job = |specs: Vec<MetricSpec>, mode| {
        let mut bo = BoConfig::new(specs.len(), args.seed).with_budget(args.init, args.steps);
        bo.acquisition = Acquisition::Ucb { kappa: args.kappa };
        if let Some(c) = args.candidates {
            bo.candidate_count = c;
        }
        CalibrationJob {
            records: records.clone(),
            specs,
            mode,
            bo,
            per_language: args.per_lang,
            zero_threshold: args.zero_threshold,
        }
    };

    let job = make_job(specs, mode);
    let cal = run_job(&job)?;
    let mut file = ConfigFile::from_composite(
        &cal.config,
        Some(mode.into()),
        Some(provenance(args, &job, &cal)),
    );

    if args.hybrid && mode == CalibrationMode::ReferenceBased {
        if qe_specs.is_empty() {
            return Err(Error::InvalidConfig(
                "--hybrid needs at least one reference-free metric".into(),
            )
            .into());
        }
        let qe_issues = validate_dataset(&records, &qe_specs, ValidationMode::Calibration);
        if !qe_issues.is_empty() {
            return Err(CommandError::Validation(qe_issues));
        }
        let qe_job = make_job(qe_specs, CalibrationMode::ReferenceFree);
        let qe = run_job(&qe_job)?;
        file.qe_fallback = Some(Box::new(ConfigFile::from_composite(
            &qe.config,
            Some(ConfigMode::ReferenceFree),
            Some(provenance(args, &qe_job, &qe)),
        )));
        // Validates the combined config.
        file.to_composite()?;
    }

    file.save(&args.out)?;

    let mut summary = format!(
        "calibrated {} metrics on {} records: tau {:.6} (best {:.6} at iteration {} of {})\n",
        job.specs.len(),
        job.records.len(),
        cal.global.final_objective,
        cal.global.best_objective,
        cal.global.best_iteration,
        cal.global.trace.len(),
    );
    summary.push_str(&file.render());
    summary.push_str(&format!("wrote {}\n", args.out.display()));
    write_out(out, &summary)?;
    Ok(CalibrateSummary { config: file })
}

pub fn cmd_score(args: &ScoreArgs, out: &mut dyn Write) -> CommandResult<()> {
    let config = ConfigFile::load(&args.config)?.to_composite()?;
    let records = load_records(&args.data, false)?;
    let mode = if args.lenient {
        BatchMode::Lenient
    } else {
        BatchMode::Strict
    };
    let entries = score_batch(&records, &config, args.hybrid, mode)?;
    let text = render_scored(&entries);
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => write_out(out, &text)?,
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub grouping: String,
    pub kendall_tau_b: BTreeMap<String, Option<f64>>,
    pub pearson: BTreeMap<String, Option<f64>>,
    /// Unweighted mean over defined groups.
    pub kendall_tau_b_group_mean: Option<f64>,
    pub pearson_group_mean: Option<f64>,
    pub undefined_groups: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub segments: usize,
    pub kendall_tau_b: Option<f64>,
    pub pearson: Option<f64>,
    pub groups: Vec<GroupReport>,
}

impl EvaluationReport {
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.6}"));
        let mut s = format!(
            "segments: {}\noverall: kendall_tau_b {}  pearson {}\n",
            self.segments,
            fmt(self.kendall_tau_b),
            fmt(self.pearson)
        );
        for g in &self.groups {
            s.push_str(&format!("by {}:\n", g.grouping));
            for (key, tau) in &g.kendall_tau_b {
                let flag = if tau.is_none() { "  (excluded from mean)" } else { "" };
                s.push_str(&format!(
                    "  {key}: kendall_tau_b {}  pearson {}{flag}\n",
                    fmt(*tau),
                    fmt(g.pearson[key])
                ));
            }
            s.push_str(&format!(
                "  unweighted group mean: kendall_tau_b {}  pearson {}\n",
                fmt(g.kendall_tau_b_group_mean),
                fmt(g.pearson_group_mean)
            ));
        }
        s
    }
}

fn group_report(
    grouping: &str,
    scores: &[f64],
    gold: &[f64],
    keys: &[String],
) -> Result<GroupReport> {
    let tau: GroupedCorrelation =
        grouped_correlation(scores, gold, keys, CorrelationMeasure::KendallTauB)?;
    let r = grouped_correlation(scores, gold, keys, CorrelationMeasure::Pearson)?;
    let mut undefined = tau.undefined.clone();
    for u in r.undefined {
        if !undefined.contains(&u) {
            undefined.push(u);
        }
    }
    undefined.sort();
    Ok(GroupReport {
        grouping: grouping.to_string(),
        kendall_tau_b: tau.per_group,
        pearson: r.per_group,
        kendall_tau_b_group_mean: tau.mean,
        pearson_group_mean: r.mean,
        undefined_groups: undefined,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> CommandResult<EvaluationReport> {
    let scored = load_scored(&args.scores)?;
    let records = load_records(&args.data, args.flip_gold)?;

    let mut by_key = HashMap::new();
    for r in &records {
        if by_key.insert(r.key(), r).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate key {} in data", r.key())).into());
        }
    }

    let mut unmatched = Vec::new();
    let mut seen = HashSet::new();
    let mut scores = Vec::new();
    let mut gold = Vec::new();
    let mut langs = Vec::new();
    let mut domains = Vec::new();
    for line in &scored {
        let key = line.key();
        match (by_key.get(&key), line.composite_score) {
            (Some(rec), Some(score)) => {
                let h = rec
                    .human_score
                    .ok_or_else(|| Error::MissingHumanScore(key.to_string()))?;
                scores.push(score);
                gold.push(h);
                langs.push(rec.lang_pair.clone());
                domains.push(rec.domain.clone());
                seen.insert(key);
            }
            (Some(_), None) => unmatched.push(format!("{key} (skipped in scores)")),
            (None, _) => unmatched.push(format!("{key} (not in data)")),
        }
    }
    let scored_keys: HashSet<_> = scored.iter().map(|l| l.key()).collect();
    for r in &records {
        if !seen.contains(&r.key()) && !scored_keys.contains(&r.key()) {
            unmatched.push(format!("{} (not in scores)", r.key()));
        }
    }
    if !unmatched.is_empty() {
        let shown: Vec<_> = unmatched.iter().take(MAX_LISTED).cloned().collect();
        return Err(Error::InvalidConfig(format!(
            "{} unmatched key(s): {}",
            unmatched.len(),
            shown.join(", ")
        ))
        .into());
    }

    let mut groups = Vec::new();
    let has_domain = domains.iter().any(Option::is_some);
    let want_lang = matches!(args.group_by, None | Some(GroupBy::Lang));
    let want_domain = match args.group_by {
        Some(GroupBy::Domain) => true,
        Some(GroupBy::Lang) => false,
        None => has_domain,
    };
    if want_lang {
        groups.push(group_report("lang_pair", &scores, &gold, &langs)?);
    }
    if want_domain {
        let keys: Vec<String> = domains
            .iter()
            .map(|d| d.clone().unwrap_or_else(|| "(none)".into()))
            .collect();
        groups.push(group_report("domain", &scores, &gold, &keys)?);
    }

    let report = EvaluationReport {
        segments: scores.len(),
        kendall_tau_b: CorrelationMeasure::KendallTauB.compute(&scores, &gold).ok(),
        pearson: CorrelationMeasure::Pearson.compute(&scores, &gold).ok(),
        groups,
    };
    write_out(out, &report.render())?;
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_atomic(path, json.as_bytes())?;
    }
    Ok(report)
}

pub fn cmd_inspect(args: &InspectArgs, out: &mut dyn Write) -> CommandResult<()> {
    let file = ConfigFile::load(&args.config)?;
    file.to_composite()?;
    write_out(out, &file.render())?;
    Ok(())
}
