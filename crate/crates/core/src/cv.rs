//! K-fold cross-validated objective for SCR hyperparameters.
//!
//! Reservoir states are computed once over the whole series from a zero
//! initial state. The post-washout time indices are split into `K`
//! contiguous blocks; for each block a ridge readout is fit on all other
//! post-washout rows and its squared error on the block is recorded. The
//! objective is the average of the per-block squared-error sums. The ridge
//! penalty enters the fits but not the scores.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::readout::{dot, fit_readout, normal_equations, nmse, predict_states, residual_gradient, solve_ridge_refined, Readout};
use crate::scr::{build_scr, run_reservoir, ScrModel, ScrParams, StateMatrix};
use crate::series::TimeSeries;

/// An input series and the aligned targets to predict from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Task {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if inputs.is_empty() {
            return Err(invalid("task must be non-empty"));
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(invalid("task values must be finite"));
        }
        Ok(Self { inputs, targets })
    }

    /// Univariate next-step prediction: input `v[t]`, target `v[t+1]`.
    pub fn one_step_ahead(series: &[f64]) -> Result<Self> {
        if series.len() < 2 {
            return Err(invalid("one-step-ahead task needs at least 2 points"));
        }
        Self::new(series[..series.len() - 1].to_vec(), series[1..].to_vec())
    }

    pub fn from_series(series: &TimeSeries) -> Result<Self> {
        Self::one_step_ahead(series.values())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// The first `len` steps.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::Bounds(format!("prefix {len} of task with {} steps", self.len())));
        }
        Self::new(self.inputs[..len].to_vec(), self.targets[..len].to_vec())
    }

    /// Inputs and targets standardized independently.
    pub fn standardized(&self) -> Result<Self> {
        let (inputs, _, _) = crate::series::standardize_values(&self.inputs)?;
        let (targets, _, _) = crate::series::standardize_values(&self.targets)?;
        Self::new(inputs, targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k_folds: usize,
    pub washout: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k_folds: 5,
            washout: 100,
        }
    }
}

impl CvConfig {
    pub fn new(k_folds: usize, washout: usize) -> Result<Self> {
        let c = Self { k_folds, washout };
        if k_folds < 2 {
            return Err(invalid("k_folds must be at least 2"));
        }
        Ok(c)
    }

    pub fn validate_for(&self, len: usize) -> Result<()> {
        if self.k_folds < 2 {
            return Err(invalid("k_folds must be at least 2"));
        }
        if self.washout + self.k_folds > len {
            return Err(invalid(format!(
                "series of {len} steps is too short for washout {} and {} folds",
                self.washout, self.k_folds
            )));
        }
        Ok(())
    }

    /// Contiguous fold blocks over `washout..len`; block sizes differ by at
    /// most one, larger blocks first.
    pub fn folds(&self, len: usize) -> Result<Vec<Range<usize>>> {
        self.validate_for(len)?;
        let usable = len - self.washout;
        let base = usable / self.k_folds;
        let extra = usable % self.k_folds;
        let mut start = self.washout;
        Ok((0..self.k_folds)
            .map(|k| {
                let size = base + usize::from(k < extra);
                let r = start..start + size;
                start += size;
                r
            })
            .collect())
    }
}

/// Per-fold sufficient statistics of one series under one reservoir.
#[derive(Debug, Clone)]
pub(crate) struct FoldStats {
    pub states: StateMatrix,
    pub targets: Vec<f64>,
    pub folds: Vec<Range<usize>>,
    grams: Vec<DMatrix<f64>>,
    rhs: Vec<DVector<f64>>,
}

impl FoldStats {
    pub fn compute(model: &ScrModel, task: &Task, cv: &CvConfig) -> Result<Self> {
        let folds = cv.folds(task.len())?;
        let states = run_reservoir(model, &task.inputs, None)?;
        let (grams, rhs) = folds
            .iter()
            .map(|r| normal_equations(states.design(), &task.targets, r.clone(), None))
            .unzip();
        Ok(Self {
            states,
            targets: task.targets.clone(),
            folds,
            grams,
            rhs,
        })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Adds `scale` times the statistics of every fold except `held_out`.
    pub fn accumulate_training(&self, held_out: usize, scale: f64, gram: &mut DMatrix<f64>, rhs: &mut DVector<f64>) {
        for (j, (g, b)) in self.grams.iter().zip(&self.rhs).enumerate() {
            if j != held_out {
                gram.zip_apply(g, |a, b| *a += scale * b);
                rhs.axpy(scale, b, 1.0);
            }
        }
    }

    /// Adds `scale * sum_t x_t (y_t - x_t . beta)` over every fold except
    /// `held_out`.
    pub fn accumulate_gradient(&self, held_out: usize, scale: f64, beta: &DVector<f64>, acc: &mut DVector<f64>) {
        for (j, r) in self.folds.iter().enumerate() {
            if j != held_out {
                residual_gradient(self.states.design(), &self.targets, r.clone(), None, scale, beta, acc);
            }
        }
    }

    /// Squared error of `beta` on fold `k`.
    pub fn held_out_sse(&self, k: usize, beta: &DVector<f64>) -> f64 {
        let beta = beta.as_slice();
        self.folds[k]
            .clone()
            .map(|t| {
                let e = self.targets[t] - dot(beta, self.states.features(t));
                e * e
            })
            .sum()
    }

    pub fn dim(&self) -> usize {
        self.states.n_nodes() + 1
    }
}

/// Held-out squared-error sums per fold, each with the readout trained on the
/// remaining folds.
pub(crate) fn fold_scores(stats: &FoldStats, lambda: f64) -> Result<Vec<f64>> {
    let d = stats.dim();
    (0..stats.k())
        .map(|k| {
            let mut gram = DMatrix::zeros(d, d);
            let mut rhs = DVector::zeros(d);
            stats.accumulate_training(k, 1.0, &mut gram, &mut rhs);
            let beta = solve_ridge_refined(gram, &rhs, lambda, |b| {
                let mut g = DVector::zeros(d);
                stats.accumulate_gradient(k, 1.0, b, &mut g);
                g
            })?;
            Ok(stats.held_out_sse(k, &beta))
        })
        .collect()
}

/// The cross-validated objective `f(theta)`.
pub fn cv_objective(params: &ScrParams, task: &Task, cv: &CvConfig) -> Result<f64> {
    let model = build_scr(*params)?;
    let stats = FoldStats::compute(&model, task, cv)?;
    let scores = fold_scores(&stats, params.lambda)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

type ReservoirKey = (usize, u64, u64);

fn reservoir_key(p: &ScrParams) -> ReservoirKey {
    (p.n_nodes, p.w_in.to_bits(), p.w.to_bits())
}

/// [`cv_objective`] bound to one task, reusing the reservoir statistics of
/// the previous call when only `lambda` changed.
#[derive(Debug)]
pub struct CvEvaluator {
    task: Task,
    cv: CvConfig,
    cache: Option<(ReservoirKey, FoldStats)>,
}

impl CvEvaluator {
    pub fn new(task: Task, cv: CvConfig) -> Result<Self> {
        cv.validate_for(task.len())?;
        Ok(Self {
            task,
            cv,
            cache: None,
        })
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn cv(&self) -> &CvConfig {
        &self.cv
    }

    pub fn evaluate(&mut self, params: &ScrParams) -> Result<f64> {
        params.validate()?;
        let key = reservoir_key(params);
        if self.cache.as_ref().map(|(k, _)| *k) != Some(key) {
            let model = build_scr(*params)?;
            let stats = FoldStats::compute(&model, &self.task, &self.cv)?;
            self.cache = Some((key, stats));
        }
        let (_, stats) = self.cache.as_ref().expect("cache filled above");
        let scores = fold_scores(stats, params.lambda)?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    }
}

/// Outcome of fitting on a training prefix and predicting the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutScore {
    pub readout: Readout,
    pub predictions: Vec<f64>,
    pub nmse: f64,
}

/// Fits a readout on steps `washout..train_len` and scores one-step-ahead
/// predictions on `train_len..`, with the reservoir state carried across the
/// boundary.
pub fn holdout_score(params: &ScrParams, task: &Task, train_len: usize, washout: usize) -> Result<HoldoutScore> {
    if washout >= train_len || train_len + 2 > task.len() {
        return Err(Error::Bounds(format!(
            "train length {train_len} with washout {washout} on a task of {} steps",
            task.len()
        )));
    }
    let model = build_scr(*params)?;
    let states = run_reservoir(&model, &task.inputs, None)?;
    let design = states.design();
    let train = StateMatrix::from_design(design.columns(washout, train_len - washout).into_owned());
    let readout = fit_readout(&train, &task.targets[washout..train_len], params.lambda, None)?;
    let test = StateMatrix::from_design(design.columns(train_len, task.len() - train_len).into_owned());
    let predictions = predict_states(&test, &readout)?;
    let nmse = nmse(&task.targets[train_len..], &predictions)?;
    Ok(HoldoutScore {
        readout,
        predictions,
        nmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_blocks() {
        let cv = CvConfig::new(2, 3).unwrap();
        assert_eq!(cv.folds(7).unwrap(), vec![3..5, 5..7]);
        let cv = CvConfig::new(3, 0).unwrap();
        assert_eq!(cv.folds(8).unwrap(), vec![0..3, 3..6, 6..8]);
        assert!(CvConfig::new(5, 10).unwrap().folds(14).is_err());
        assert!(CvConfig::new(1, 0).is_err());
    }

    #[test]
    fn constant_target_is_fit_by_bias() {
        let inputs: Vec<f64> = (0..400).map(|t| (0.1 * t as f64).sin()).collect();
        let task = Task::new(inputs, vec![0.7; 400]).unwrap();
        let p = ScrParams::new(30, 0.5, 0.8, 1e-10).unwrap();
        let f = cv_objective(&p, &task, &CvConfig::default()).unwrap();
        assert!(f < 1e-6, "{f}");
    }

    #[test]
    fn evaluator_matches_free_function() {
        let series: Vec<f64> = (0..300).map(|t| (0.2 * t as f64).sin() + 0.1 * (0.05 * t as f64).cos()).collect();
        let task = Task::one_step_ahead(&series).unwrap();
        let cv = CvConfig::new(4, 50).unwrap();
        let mut ev = CvEvaluator::new(task.clone(), cv).unwrap();
        for lambda in [1e-8, 1e-4, 1e-1] {
            let p = ScrParams::new(25, 0.3, 0.7, lambda).unwrap();
            assert_eq!(ev.evaluate(&p).unwrap(), cv_objective(&p, &task, &cv).unwrap());
        }
    }

    #[test]
    fn holdout_rejects_bad_split() {
        let task = Task::one_step_ahead(&(0..50).map(|t| t as f64).collect::<Vec<_>>()).unwrap();
        let p = ScrParams::new(5, 0.3, 0.7, 1e-6).unwrap();
        assert!(holdout_score(&p, &task, 10, 10).is_err());
        assert!(holdout_score(&p, &task, 49, 5).is_err());
    }
}
