//! Sequential Bayesian optimization over the unit cube `[0, 1]^N`.
//!
//! `init_points` seeded-uniform evaluations, then `steps` rounds of
//! fit GP → maximize UCB → evaluate. The budget is fixed; there is no early
//! stopping. A single ChaCha stream seeded from the config drives both the
//! initial design and candidate sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::{FittedGp, GpPosterior, GpState};

pub const DEFAULT_KAPPA: f64 = 2.576;
pub const DEFAULT_INIT_POINTS: usize = 5;
pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_REFINE_ITERATIONS: usize = 20;
/// Half-width of the per-coordinate window searched around the best candidate.
pub const REFINE_RADIUS: f64 = 0.1;
const MAX_CANDIDATES: usize = 20_000;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acquisition {
    Ucb { kappa: f64 },
}

impl Default for Acquisition {
    fn default() -> Self {
        Acquisition::Ucb {
            kappa: DEFAULT_KAPPA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    pub dimension: usize,
    pub init_points: usize,
    pub steps: usize,
    pub seed: u64,
    pub acquisition: Acquisition,
    pub candidate_count: usize,
    pub refine_iterations: usize,
}

impl BoConfig {
    pub fn new(dimension: usize, seed: u64) -> Self {
        Self {
            dimension,
            init_points: DEFAULT_INIT_POINTS,
            steps: DEFAULT_STEPS,
            seed,
            acquisition: Acquisition::default(),
            candidate_count: default_candidate_count(dimension),
            refine_iterations: DEFAULT_REFINE_ITERATIONS,
        }
    }

    pub fn with_budget(mut self, init_points: usize, steps: usize) -> Self {
        self.init_points = init_points;
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidOptimizer("dimension must be at least 1".into()));
        }
        if self.init_points == 0 {
            return Err(Error::InvalidOptimizer("init_points must be at least 1".into()));
        }
        if self.candidate_count == 0 {
            return Err(Error::InvalidOptimizer("candidate_count must be at least 1".into()));
        }
        let Acquisition::Ucb { kappa } = self.acquisition;
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidOptimizer(format!("kappa {kappa}")));
        }
        Ok(())
    }

    pub fn total_evaluations(&self) -> usize {
        self.init_points + self.steps
    }
}

pub fn default_candidate_count(dimension: usize) -> usize {
    (1000 * dimension.max(1)).min(MAX_CANDIDATES)
}

pub fn ucb(posterior: GpPosterior, kappa: f64) -> f64 {
    posterior.mean + kappa * posterior.variance.max(0.0).sqrt()
}

fn acquisition_value(gp: &FittedGp<'_>, acquisition: Acquisition, x: &[f64]) -> Result<f64> {
    let Acquisition::Ucb { kappa } = acquisition;
    Ok(ucb(gp.posterior(x)?, kappa))
}

fn uniform_point(rng: &mut ChaCha8Rng, dimension: usize) -> Vec<f64> {
    (0..dimension).map(|_| rng.random::<f64>()).collect()
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`. The window
/// endpoints are evaluated too, so monotone acquisitions land exactly on
/// the bounds.
fn golden_max(
    lo: f64,
    hi: f64,
    iterations: usize,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut best = (lo, f(lo)?);
    let at_hi = f(hi)?;
    if at_hi > best.1 {
        best = (hi, at_hi);
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..iterations {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(best)
}

/// Next point to evaluate: argmax of the acquisition over `candidate_count`
/// uniform samples (lowest index wins ties), then one coordinate-wise
/// golden-section sweep around it. Only improvements are accepted.
pub fn suggest(state: &GpState, config: &BoConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let dim = config.dimension;
    if state.is_empty() {
        return Ok(uniform_point(rng, dim));
    }
    if state.dimension() != Some(dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: state.dimension().unwrap_or(0),
        });
    }
    let gp = state.fit()?;
    let candidates: Vec<Vec<f64>> = (0..config.candidate_count)
        .map(|_| uniform_point(rng, dim))
        .collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|c| acquisition_value(&gp, config.acquisition, c))
        .collect::<Result<_>>()?;

    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best_index] {
            best_index = i;
        }
    }
    let mut best = candidates[best_index].clone();
    let mut best_value = scores[best_index];

    if config.refine_iterations > 0 {
        for d in 0..dim {
            let lo = (best[d] - REFINE_RADIUS).max(0.0);
            let hi = (best[d] + REFINE_RADIUS).min(1.0);
            let mut probe = best.clone();
            let (t, v) = golden_max(lo, hi, config.refine_iterations, |t| {
                probe[d] = t;
                acquisition_value(&gp, config.acquisition, &probe)
            })?;
            if v > best_value {
                best[d] = t;
                best_value = v;
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub point: Vec<f64>,
    /// `-inf` when the objective failed at this point.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub best_iteration: usize,
    pub trace: Vec<TraceEntry>,
}

impl Optimum {
    pub fn failed_evaluations(&self) -> usize {
        self.trace.iter().filter(|e| !e.value.is_finite()).count()
    }
}

/// Maximizes `objective` over `[0, 1]^N` with exactly
/// `init_points + steps` evaluations.
///
/// Failed evaluations (errors or non-finite values) are recorded as `-inf`,
/// never become the incumbent and are left out of the surrogate.
pub fn optimize<F>(mut objective: F, config: &BoConfig) -> Result<Optimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::with_capacity(config.total_evaluations());
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut incumbent: Option<usize> = None;

    for iteration in 0..config.total_evaluations() {
        let point = if iteration < config.init_points {
            uniform_point(&mut rng, config.dimension)
        } else {
            let state = GpState::with_default_params(xs.clone(), ys.clone())?;
            suggest(&state, config, &mut rng)?
        };
        let value = match objective(&point) {
            Ok(v) if v.is_finite() => v,
            Ok(v) => {
                log::warn!("objective returned {v} at iteration {iteration}");
                f64::NEG_INFINITY
            }
            Err(e) => {
                log::warn!("objective failed at iteration {iteration}: {e}");
                f64::NEG_INFINITY
            }
        };
        if value.is_finite() {
            xs.push(point.clone());
            ys.push(value);
            if incumbent.is_none_or(|i| value > trace_value(&trace, i)) {
                incumbent = Some(iteration);
            }
        }
        log::trace!("iteration {iteration}: {point:?} -> {value}");
        trace.push(TraceEntry {
            iteration,
            point,
            value,
        });
    }

    let best_iteration = incumbent.ok_or(Error::NoFeasibleEvaluation)?;
    Ok(Optimum {
        best_point: trace[best_iteration].point.clone(),
        best_value: trace[best_iteration].value,
        best_iteration,
        trace,
    })
}

fn trace_value(trace: &[TraceEntry], i: usize) -> f64 {
    trace[i].value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelParams;

    #[test]
    fn ucb_examples() {
        let p = GpPosterior {
            mean: 0.5,
            variance: 0.01,
        };
        assert!((ucb(p, 2.576) - 0.7576).abs() < 1e-12);
        assert_eq!(ucb(GpPosterior { mean: 0.3, variance: 0.0 }, 2.576), 0.3);
        assert_eq!(ucb(GpPosterior { mean: 0.3, variance: 4.0 }, 0.0), 0.3);
    }

    #[test]
    fn defaults() {
        let c = BoConfig::new(3, 7);
        assert_eq!(c.init_points, 5);
        assert_eq!(c.steps, 100);
        assert_eq!(c.candidate_count, 3000);
        assert_eq!(BoConfig::new(40, 7).candidate_count, 20_000);
        assert_eq!(c.acquisition, Acquisition::Ucb { kappa: 2.576 });
        assert!(BoConfig::new(0, 1).validate().is_err());
        assert!(BoConfig::new(1, 1).with_budget(0, 3).validate().is_err());
    }

    #[test]
    fn singleton_candidate_is_returned() {
        let state = GpState::with_default_params(vec![vec![0.2, 0.7]], vec![0.4]).unwrap();
        let mut config = BoConfig::new(2, 1);
        config.candidate_count = 1;
        config.refine_iterations = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut replay = ChaCha8Rng::seed_from_u64(99);
        let expected = uniform_point(&mut replay, 2);
        assert_eq!(suggest(&state, &config, &mut rng).unwrap(), expected);
    }

    #[test]
    fn degenerate_surrogate_still_in_bounds() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, 1.0 - i as f64 / 5.0]).collect();
        let params = KernelParams::new(0.35, 1e-4, 0.0, 1e-10).unwrap();
        let state = GpState::new(xs, vec![1.0; 6], params).unwrap();
        let config = BoConfig::new(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = suggest(&state, &config, &mut rng).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn suggestion_avoids_observed_endpoints() {
        let params = KernelParams::new(0.25, 1.0, 1e-6, 1e-10).unwrap();
        let state = GpState::new(vec![vec![0.0], vec![1.0]], vec![0.0, 0.0], params).unwrap();
        let config = BoConfig::new(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = suggest(&state, &config, &mut rng).unwrap()[0];

        // Dense grid oracle: UCB peaks at the midpoint by symmetry.
        let gp = state.fit().unwrap();
        let grid_best = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .max_by(|a, b| {
                let ua = ucb(gp.posterior(&[*a]).unwrap(), DEFAULT_KAPPA);
                let ub = ucb(gp.posterior(&[*b]).unwrap(), DEFAULT_KAPPA);
                ua.partial_cmp(&ub).unwrap()
            })
            .unwrap();
        assert!((grid_best - 0.5).abs() < 1e-9);
        assert!(p > 0.0 && p < 1.0);
        assert!((p - grid_best).abs() < 0.05, "suggested {p}");
    }

    #[test]
    fn golden_section_finds_interior_and_boundary_maxima() {
        let (t, _) = golden_max(0.0, 1.0, 40, |t| Ok(-(t - 0.3) * (t - 0.3))).unwrap();
        assert!((t - 0.3).abs() < 1e-6);
        let (t, _) = golden_max(0.0, 0.2, 20, |t| Ok(-t)).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn constant_objective() {
        let config = BoConfig::new(2, 11);
        let out = optimize(|_| Ok(0.7), &config).unwrap();
        assert_eq!(out.best_value, 0.7);
        assert_eq!(out.trace.len(), 105);
    }

    #[test]
    fn degenerate_budget() {
        let config = BoConfig::new(2, 11).with_budget(1, 0);
        let out = optimize(|w| Ok(w[0] + w[1]), &config).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.best_point, out.trace[0].point);
        assert_eq!(out.best_value, out.trace[0].value);
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let config = BoConfig::new(1, 2).with_budget(4, 6);
        let mut calls = 0;
        let out = optimize(
            |w| {
                calls += 1;
                if calls % 2 == 0 {
                    Err(Error::UndefinedObjective("test".into()))
                } else {
                    Ok(w[0])
                }
            },
            &config,
        )
        .unwrap();
        assert_eq!(calls, 10);
        assert_eq!(out.failed_evaluations(), 5);
        assert!(out.best_value.is_finite());
        assert!(optimize(|_| Ok(f64::NAN), &config).is_err());
    }

    #[test]
    fn abs_peak_is_found() {
        let config = BoConfig::new(1, 42);
        let out = optimize(|w| Ok(1.0 - (w[0] - 0.5).abs()), &config).unwrap();
        assert!(out.best_value >= 0.95);
        assert!((out.best_point[0] - 0.5).abs() <= 0.05);
    }
}
