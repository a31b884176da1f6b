//! Bayesian optimisation with a GP surrogate and the lower-confidence-bound
//! acquisition `mean - kappa * std`.
//!
//! The optimiser works in the unit hypercube. Each [`Dimension`] maps its
//! unit coordinate linearly or logarithmically onto its bounds; integer
//! dimensions are rounded only when the objective is evaluated, so the GP
//! always sees the unrounded coordinate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cv::{CvEvaluator, Task};
use crate::error::{invalid, Error, Result};
use crate::gp::{gp_fit_with, GpFitOptions, GpHyper, GpModel};
use crate::scr::ScrParams;
use crate::CvConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimKind {
    Integer,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub kind: DimKind,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

impl Dimension {
    pub fn continuous(name: &str, lower: f64, upper: f64, scale: Scale) -> Self {
        Self {
            name: name.to_string(),
            kind: DimKind::Continuous,
            lower,
            upper,
            scale,
        }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: DimKind::Integer,
            lower,
            upper,
            scale: Scale::Linear,
        }
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let x = match self.scale {
            Scale::Linear => self.lower + u * (self.upper - self.lower),
            Scale::Log => {
                let (a, b) = (self.lower.ln(), self.upper.ln());
                (a + u * (b - a)).exp()
            }
        };
        x.clamp(self.lower, self.upper)
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Linear => (x - self.lower) / (self.upper - self.lower),
            Scale::Log => {
                let (a, b) = (self.lower.ln(), self.upper.ln());
                (x.ln() - a) / (b - a)
            }
        }
    }

    /// Value handed to the objective: mapped, and rounded for integers.
    pub fn evaluation_value(&self, u: f64) -> f64 {
        let x = self.from_unit(u);
        match self.kind {
            DimKind::Continuous => x,
            DimKind::Integer => x.round().clamp(self.lower.ceil(), self.upper.floor()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("search space needs at least one dimension"));
        }
        for d in &dims {
            if !(d.lower < d.upper) || !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(invalid(format!("dimension {} needs lower < upper", d.name)));
            }
            if d.scale == Scale::Log && !(d.lower > 0.0) {
                return Err(invalid(format!("log-scaled dimension {} needs positive bounds", d.name)));
            }
            if d.kind == DimKind::Integer && d.upper.floor() < d.lower.ceil() {
                return Err(invalid(format!("integer dimension {} contains no integer", d.name)));
            }
        }
        Ok(Self { dims })
    }

    /// `N` in {50..200}, `w_in` and `w` in (0.01, 0.95), `lambda` in
    /// (1e-12, 1e-2) on a log scale.
    pub fn scr() -> Self {
        Self {
            dims: vec![
                Dimension::integer("n_nodes", 50.0, 200.0),
                Dimension::continuous("w_in", 0.01, 0.95, Scale::Linear),
                Dimension::continuous("w", 0.01, 0.95, Scale::Linear),
                Dimension::continuous("lambda", 1e-12, 1e-2, Scale::Log),
            ],
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(d, u)| d.from_unit(*u)).collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(x).map(|(d, x)| d.to_unit(*x)).collect()
    }

    pub fn evaluation_point(&self, u: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(u).map(|(d, u)| d.evaluation_value(*u)).collect()
    }
}

/// Latin hypercube design in the unit cube: each of the `n` equal strata of
/// every dimension holds exactly one point.
pub fn lhs_unit(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(&mut rng);
        for (i, p) in pts.iter_mut().enumerate() {
            p[d] = (perm[i] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

/// Latin hypercube design mapped onto `space` (integers rounded).
pub fn lhs_sample(space: &SearchSpace, n: usize, seed: u64) -> Vec<Vec<f64>> {
    lhs_unit(space.len(), n, seed)
        .iter()
        .map(|u| space.evaluation_point(u))
        .collect()
}

pub fn lcb(gp: &GpModel, x: &[f64], kappa: f64) -> f64 {
    let (m, s) = gp.posterior(x);
    m - kappa * s
}

const CANDIDATES: usize = 2048;
const REFINED: usize = 8;
const STEP_START: f64 = 0.05;
const STEP_MIN: f64 = 1e-4;

/// Approximate minimiser of the LCB over the unit cube.
///
/// 2048 shifted-Halton candidates are scored; the best eight are refined by
/// coordinate-wise pattern search with the step halved from 0.05 down to
/// 1e-4. Deterministic for a given GP and seed.
pub fn acquire_next(gp: &GpModel, kappa: f64, seed: u64) -> Vec<f64> {
    let dim = gp.dim();
    let score = |x: &[f64]| lcb(gp, x, kappa);
    let mut scored: Vec<(f64, Vec<f64>)> = halton_candidates(dim, CANDIDATES, seed)
        .into_iter()
        .map(|x| (score(&x), x))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.truncate(REFINED);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (mut val, mut x) in scored {
        let mut step = STEP_START;
        while step >= STEP_MIN {
            let mut improved = false;
            for d in 0..dim {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[d] = (y[d] + dir * step).clamp(0.0, 1.0);
                    if y[d] == x[d] {
                        continue;
                    }
                    let v = score(&y);
                    if v < val {
                        val = v;
                        x = y;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, x));
        }
    }
    best.map(|(_, x)| x).expect("at least one candidate")
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Halton points with a seeded Cranley-Patterson rotation.
fn halton_candidates(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=n as u64)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let v = if d < PRIMES.len() {
                        radical_inverse(i, PRIMES[d])
                    } else {
                        rng.random::<f64>()
                    };
                    (v + shift[d]).fract()
                })
                .collect()
        })
        .collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    pub n_init: usize,
    pub kappa: f64,
    /// Convergence radius on the L1 distance between consecutive acquisitions
    /// in unit coordinates.
    pub epsilon: f64,
    pub max_evals: usize,
    pub target_value: Option<f64>,
    pub seed: u64,
    pub gp_restarts: usize,
    /// Hyperparameters are re-estimated once the history has grown by
    /// `max(refit_every, 10%)` since the last estimate, and held fixed in
    /// between.
    pub refit_every: usize,
    /// Fit the surrogate to `ln f` while every observation is positive.
    pub log_values: bool,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: 50,
            kappa: 2.0,
            epsilon: 1e-3,
            max_evals: 1500,
            target_value: None,
            seed: 0,
            gp_restarts: 5,
            refit_every: 10,
            log_values: true,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(invalid("n_init must be at least 2"));
        }
        if self.max_evals < self.n_init {
            return Err(invalid("max_evals must be at least n_init"));
        }
        if !(self.kappa >= 0.0) {
            return Err(invalid("kappa must be >= 0"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be > 0"));
        }
        if self.refit_every == 0 {
            return Err(invalid("refit_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Budget,
    TargetReached,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Budget => "budget",
            StopReason::TargetReached => "target_reached",
        }
    }
}

impl std::str::FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Self::Converged),
            "budget" => Ok(Self::Budget),
            "target_reached" => Ok(Self::TargetReached),
            other => Err(Error::Parse(format!("unknown stop reason {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub eval_index: usize,
    /// Coordinates handed to the objective (integers rounded).
    pub point: Vec<f64>,
    /// Unit-cube coordinates seen by the GP.
    pub unit: Vec<f64>,
    /// Objective value, or the failure penalty.
    pub value: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<Evaluation>,
    pub stop_reason: StopReason,
}

impl BoResult {
    pub fn evals(&self) -> usize {
        self.history.len()
    }

    /// Running minimum of the successful evaluations.
    pub fn best_trace(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.history
            .iter()
            .map(|e| {
                if !e.failed {
                    best = best.min(e.value);
                }
                best
            })
            .collect()
    }

    pub fn best_scr_params(&self) -> Result<ScrParams> {
        ScrParams::from_point(&self.best_point)
    }
}

/// Mixes a base seed with a stream tag and an index (SplitMix64 finaliser).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_LHS: u64 = 1;
const STREAM_GP: u64 = 2;
const STREAM_ACQ: u64 = 3;
const STREAM_DUP: u64 = 4;
const DUPLICATE_RADIUS: f64 = 1e-9;
const DUPLICATE_OFFSET: f64 = 1e-3;

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn worst_value(history: &[Evaluation]) -> Option<f64> {
    history
        .iter()
        .filter(|e| !e.failed)
        .map(|e| e.value)
        .reduce(f64::max)
}

/// Value recorded for a failed evaluation.
fn failure_penalty(worst_finite: Option<f64>) -> f64 {
    worst_finite.map_or(f64::INFINITY, |w| 1e3 * w.abs().max(1.0))
}

pub fn optimize<F>(objective: F, space: &SearchSpace, config: &BoConfig) -> Result<BoResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    optimize_with_initial(objective, space, config, &[])
}

/// Like [`optimize`], evaluating the given unit-cube points before the Latin
/// hypercube design.
pub fn optimize_with_initial<F>(
    mut objective: F,
    space: &SearchSpace,
    config: &BoConfig,
    initial: &[Vec<f64>],
) -> Result<BoResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    config.validate()?;
    if initial.iter().any(|u| u.len() != space.len()) {
        return Err(invalid("initial points must match the search space dimension"));
    }
    let mut history: Vec<Evaluation> = Vec::with_capacity(config.max_evals);

    let mut evaluate = |unit: Vec<f64>, history: &mut Vec<Evaluation>| {
        let point = space.evaluation_point(&unit);
        let (value, failed) = match objective(&point) {
            Ok(v) if v.is_finite() => (v, false),
            _ => (failure_penalty(worst_value(history)), true),
        };
        history.push(Evaluation {
            eval_index: history.len(),
            point,
            unit,
            value,
            failed,
        });
    };

    let design = lhs_unit(space.len(), config.n_init, derive_seed(config.seed, STREAM_LHS, 0));
    for u in initial.iter().cloned().chain(design).take(config.max_evals) {
        evaluate(u, &mut history);
    }

    let target_hit = |h: &[Evaluation]| {
        config
            .target_value
            .is_some_and(|t| h.iter().any(|e| !e.failed && e.value <= t))
    };

    let mut stop = StopReason::Budget;
    let mut hyper: Option<GpHyper> = None;
    let mut previous: Option<Vec<f64>> = None;
    let mut iteration = 0u64;
    let mut fitted_at = 0usize;
    if target_hit(&history) {
        stop = StopReason::TargetReached;
    } else {
        while history.len() < config.max_evals {
            iteration += 1;
            let refit = hyper.is_none() || history.len() >= fitted_at + config.refit_every.max(fitted_at / 10);
            if refit {
                fitted_at = history.len();
            }
            let next = match fit_surrogate(&history, hyper.clone(), refit, config, iteration) {
                Some(gp) => {
                    hyper = Some(gp.hyper().clone());
                    acquire_next(&gp, config.kappa, derive_seed(config.seed, STREAM_ACQ, iteration))
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_ACQ, iteration));
                    (0..space.len()).map(|_| rng.random::<f64>()).collect()
                }
            };
            if let Some(prev) = &previous {
                if l1(prev, &next) < config.epsilon {
                    stop = StopReason::Converged;
                    break;
                }
            }
            previous = Some(next.clone());
            let next = dedupe(next, &history, derive_seed(config.seed, STREAM_DUP, iteration));
            evaluate(next, &mut history);
            if target_hit(&history) {
                stop = StopReason::TargetReached;
                break;
            }
        }
    }

    let best = history
        .iter()
        .filter(|e| !e.failed)
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::OptimizationFailed("every objective evaluation failed".into()))?;
    Ok(BoResult {
        best_point: best.point.clone(),
        best_value: best.value,
        stop_reason: stop,
        history,
    })
}

fn fit_surrogate(
    history: &[Evaluation],
    warm_start: Option<GpHyper>,
    refit: bool,
    config: &BoConfig,
    iteration: u64,
) -> Option<GpModel> {
    let penalty = failure_penalty(worst_value(history));
    let xs: Vec<Vec<f64>> = history.iter().map(|e| e.unit.clone()).collect();
    let mut ys: Vec<f64> = history
        .iter()
        .map(|e| if e.failed { penalty } else { e.value })
        .collect();
    if config.log_values && ys.iter().all(|y| *y > 0.0) {
        ys.iter_mut().for_each(|y| *y = y.ln());
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return None;
    }
    if let Some(h) = &warm_start {
        if !refit {
            if let Ok(gp) = GpModel::with_hyperparameters(&xs, &ys, h.clone()) {
                return Some(gp);
            }
        }
    }
    let opts = GpFitOptions {
        restarts: config.gp_restarts,
        seed: derive_seed(config.seed, STREAM_GP, iteration),
        warm_start,
    };
    gp_fit_with(&xs, &ys, &opts).ok()
}

fn dedupe(mut unit: Vec<f64>, history: &[Evaluation], seed: u64) -> Vec<f64> {
    if history.iter().any(|e| l1(&e.unit, &unit) < DUPLICATE_RADIUS) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for u in unit.iter_mut() {
            *u = (*u + DUPLICATE_OFFSET * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0);
        }
    }
    unit
}

/// Bayesian optimisation of SCR hyperparameters on one task.
pub fn optimize_scr(task: &Task, cv: &CvConfig, config: &BoConfig) -> Result<(ScrParams, BoResult)> {
    let mut evaluator = CvEvaluator::new(task.clone(), *cv)?;
    let result = optimize(
        |p| evaluator.evaluate(&ScrParams::from_point(p)?),
        &SearchSpace::scr(),
        config,
    )?;
    Ok((result.best_scr_params()?, result))
}
