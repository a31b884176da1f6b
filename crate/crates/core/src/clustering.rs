//! Fuzzy clustering of a set of series with one SCR per cluster.
//!
//! Memberships are a softmax over negative per-series losses. Each cluster's
//! hyperparameters are refined by Bayesian optimisation of the
//! membership-weighted loss, alternating with membership updates until the
//! summed best-cluster loss stops improving.

use nalgebra::{DMatrix, DVector};

use crate::bayesopt::{derive_seed, lhs_unit, optimize_with_initial, BoConfig, SearchSpace};
use crate::cv::{CvConfig, FoldStats, Task};
use crate::error::{invalid, Error, Result};
use crate::readout::solve_ridge_refined;
use crate::scr::{build_scr, ScrParams};

/// Row-wise softmax of `-loss`, with the row minimum subtracted first.
pub fn memberships(loss_matrix: &[Vec<f64>]) -> Vec<Vec<f64>> {
    loss_matrix
        .iter()
        .map(|row| {
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let e: Vec<f64> = row.iter().map(|l| (-(l - min)).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

/// Sum over series of the best cluster loss.
pub fn stopping_metric(loss_matrix: &[Vec<f64>]) -> f64 {
    loss_matrix
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .sum()
}

type ReservoirKey = (usize, u64, u64);

/// Cross-validated losses of a set of series under one shared reservoir and,
/// per fold, one readout fitted on the weighted union of all series.
///
/// Sample weights are divided by their sum before the ridge fit, so a single
/// series with any positive weight gives the unweighted readout.
#[derive(Debug)]
pub struct ClusterEvaluator {
    tasks: Vec<Task>,
    cv: CvConfig,
    cache: Option<(ReservoirKey, Vec<FoldStats>)>,
}

impl ClusterEvaluator {
    pub fn new(tasks: Vec<Task>, cv: CvConfig) -> Result<Self> {
        let first = tasks.first().ok_or_else(|| invalid("dataset is empty"))?.len();
        if let Some(t) = tasks.iter().find(|t| t.len() != first) {
            return Err(Error::Shape {
                expected: first,
                got: t.len(),
            });
        }
        cv.validate_for(first)?;
        Ok(Self {
            tasks,
            cv,
            cache: None,
        })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Per-series losses `f_i(params)` under the readouts fitted with `weights`.
    pub fn losses(&mut self, params: &ScrParams, weights: &[f64]) -> Result<Vec<f64>> {
        params.validate()?;
        if weights.len() != self.tasks.len() {
            return Err(Error::Shape {
                expected: self.tasks.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("weights must not all be zero"));
        }
        let key = (params.n_nodes, params.w_in.to_bits(), params.w.to_bits());
        if self.cache.as_ref().map(|(k, _)| *k) != Some(key) {
            let model = build_scr(*params)?;
            let stats = self
                .tasks
                .iter()
                .map(|t| FoldStats::compute(&model, t, &self.cv))
                .collect::<Result<Vec<_>>>()?;
            self.cache = Some((key, stats));
        }
        let stats = &self.cache.as_ref().expect("cache filled above").1;
        let d = params.n_nodes + 1;
        let k_folds = self.cv.k_folds;
        let mut sse = vec![0.0; stats.len()];
        for k in 0..k_folds {
            let mut gram = DMatrix::zeros(d, d);
            let mut rhs = DVector::zeros(d);
            for (s, w) in stats.iter().zip(weights) {
                if *w > 0.0 {
                    s.accumulate_training(k, w / total, &mut gram, &mut rhs);
                }
            }
            let beta = solve_ridge_refined(gram, &rhs, params.lambda, |b| {
                let mut g = DVector::zeros(d);
                for (s, w) in stats.iter().zip(weights) {
                    if *w > 0.0 {
                        s.accumulate_gradient(k, w / total, b, &mut g);
                    }
                }
                g
            })?;
            for (acc, s) in sse.iter_mut().zip(stats) {
                *acc += s.held_out_sse(k, &beta);
            }
        }
        Ok(sse.into_iter().map(|v| v / k_folds as f64).collect())
    }

    /// `sum_i weights[i] * f_i(params)`.
    pub fn weighted_objective(&mut self, params: &ScrParams, weights: &[f64]) -> Result<f64> {
        let losses = self.losses(params, weights)?;
        Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum())
    }
}

pub fn weighted_cluster_objective(
    params: &ScrParams,
    dataset: &[Task],
    weights: &[f64],
    cv: &CvConfig,
) -> Result<f64> {
    ClusterEvaluator::new(dataset.to_vec(), *cv)?.weighted_objective(params, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub clusters: usize,
    /// Objective evaluations per cluster per alternation.
    pub round_budget: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Acquisition settings; `n_init` is capped at half the round budget and
    /// `max_evals` and `target_value` are overridden.
    pub bo: BoConfig,
}

impl ClusterConfig {
    pub fn new(clusters: usize, seed: u64) -> Self {
        Self {
            clusters,
            round_budget: 25,
            max_iterations: 20,
            seed,
            bo: BoConfig::default(),
        }
    }

    fn round_bo(&self, iteration: usize, cluster: usize) -> BoConfig {
        BoConfig {
            n_init: (self.round_budget / 2).min(self.bo.n_init).max(2),
            max_evals: self.round_budget,
            target_value: None,
            seed: derive_seed(self.seed, 100 + iteration as u64, cluster as u64),
            ..self.bo.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub cluster_params: Vec<ScrParams>,
    /// `loss_matrix[i][c]`: loss of series `i` under cluster `c`.
    pub loss_matrix: Vec<Vec<f64>>,
    pub memberships: Vec<Vec<f64>>,
    /// Alternation that produced this state (0 = initialisation).
    pub iteration: usize,
    /// Stopping metric of every alternation executed, including a final
    /// rejected one.
    pub e_history: Vec<f64>,
    pub loss_history: Vec<Vec<Vec<f64>>>,
}

impl ClusterState {
    pub fn e_l(&self) -> f64 {
        self.e_history[self.iteration]
    }

    /// Index of the largest membership per series.
    pub fn assignments(&self) -> Vec<usize> {
        self.memberships
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &m)| if m > b.1 { (i, m) } else { b })
                    .0
            })
            .collect()
    }
}

fn transpose_column(matrix: &mut [Vec<f64>], c: usize, column: &[f64]) {
    for (row, v) in matrix.iter_mut().zip(column) {
        row[c] = *v;
    }
}

/// Alternates membership updates and per-cluster BO rounds. Stops when the
/// stopping metric fails to decrease or after `max_iterations` rounds and
/// returns the state with the lowest metric.
pub fn fit_clusters(dataset: &[Task], config: &ClusterConfig, cv: &CvConfig) -> Result<ClusterState> {
    let n = dataset.len();
    let c_count = config.clusters;
    if c_count == 0 || c_count > n {
        return Err(Error::Config(format!(
            "cluster count {c_count} must be in 1..={n}"
        )));
    }
    if config.round_budget < 3 {
        return Err(Error::Config("round_budget must be at least 3".into()));
    }
    let tasks = dataset
        .iter()
        .map(Task::standardized)
        .collect::<Result<Vec<_>>>()?;
    let mut eval = ClusterEvaluator::new(tasks, *cv)?;
    let space = SearchSpace::scr();

    let mut params: Vec<ScrParams> = lhs_unit(space.len(), c_count, derive_seed(config.seed, 99, 0))
        .iter()
        .map(|u| ScrParams::from_point(&space.evaluation_point(u)))
        .collect::<Result<_>>()?;
    let uniform = vec![1.0 / c_count as f64; n];
    let mut loss = vec![vec![0.0; c_count]; n];
    for (c, p) in params.iter().enumerate() {
        transpose_column(&mut loss, c, &eval.losses(p, &uniform)?);
    }
    let mut best = ClusterState {
        cluster_params: params.clone(),
        memberships: memberships(&loss),
        e_history: vec![stopping_metric(&loss)],
        loss_history: vec![loss.clone()],
        loss_matrix: loss,
        iteration: 0,
    };

    for l in 1..=config.max_iterations {
        let m = best.memberships.clone();
        let mut loss = vec![vec![0.0; c_count]; n];
        for c in 0..c_count {
            let weights: Vec<f64> = m.iter().map(|row| row[c]).collect();
            let incumbent = space.to_unit(&params[c].to_point());
            let result = optimize_with_initial(
                |x| eval.weighted_objective(&ScrParams::from_point(x)?, &weights),
                &space,
                &config.round_bo(l, c),
                &[incumbent],
            )?;
            params[c] = result.best_scr_params()?;
            transpose_column(&mut loss, c, &eval.losses(&params[c], &weights)?);
        }
        let e = stopping_metric(&loss);
        best.e_history.push(e);
        best.loss_history.push(loss.clone());
        if e >= best.e_l() {
            break;
        }
        best.cluster_params = params.clone();
        best.memberships = memberships(&loss);
        best.loss_matrix = loss;
        best.iteration = l;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let m = memberships(&[vec![0.0, 3f64.ln()], vec![2.0, 2.0, 2.0]]);
        assert!((m[0][0] - 0.75).abs() < 1e-15 && (m[0][1] - 0.25).abs() < 1e-15);
        assert!(m[1].iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let big = memberships(&[vec![1000.0, 1001.0]]);
        assert!(big[0].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn stopping_metric_row_minima() {
        assert_eq!(stopping_metric(&[vec![1.0, 2.0], vec![3.0, 0.0]]), 1.0);
        assert_eq!(stopping_metric(&[vec![4.0], vec![5.0]]), 9.0);
    }

    #[test]
    fn too_many_clusters() {
        let t = Task::one_step_ahead(&(0..300).map(|i| (i as f64 * 0.1).sin()).collect::<Vec<_>>()).unwrap();
        let err = fit_clusters(&[t], &ClusterConfig::new(2, 0), &CvConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
