//! Ridge readouts, prediction and the normalised mean square error.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::scr::{run_reservoir, ScrModel, StateMatrix};

/// Linear readout `y = [1; x] . weights`, bias first.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    weights: Vec<f64>,
}

impl Readout {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("readout needs at least the bias weight"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("readout weights must be finite"));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.weights[0]
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn apply(&self, features: &[f64]) -> f64 {
        dot(&self.weights, features)
    }
}

/// Minimises `sum_t w_t (y_t - [1; x_t] . beta)^2 + lambda |beta|^2` over all
/// `N+1` coefficients (the bias is penalised too).
pub fn fit_readout(
    states: &StateMatrix,
    targets: &[f64],
    lambda: f64,
    sample_weights: Option<&[f64]>,
) -> Result<Readout> {
    let t = states.steps();
    if targets.len() != t {
        return Err(Error::Shape {
            expected: t,
            got: targets.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if let Some(w) = sample_weights {
        if w.len() != t {
            return Err(Error::Shape {
                expected: t,
                got: w.len(),
            });
        }
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("sample weights must be finite and nonnegative"));
        }
    }
    let (gram, rhs) = normal_equations(states.design(), targets, 0..t, sample_weights);
    let beta = solve_ridge_refined(gram, &rhs, lambda, |b| {
        let mut g = DVector::zeros(b.len());
        residual_gradient(states.design(), targets, 0..t, sample_weights, 1.0, b, &mut g);
        g
    })?;
    Readout::new(beta.as_slice().to_vec())
}

/// `(D D^T, D y)` over the time columns in `range`, with optional per-sample
/// weights.
pub(crate) fn normal_equations(
    design: &DMatrix<f64>,
    targets: &[f64],
    range: std::ops::Range<usize>,
    weights: Option<&[f64]>,
) -> (DMatrix<f64>, DVector<f64>) {
    let cols = design.columns(range.start, range.len());
    let y = DVector::from_column_slice(&targets[range.clone()]);
    match weights {
        None => {
            let gram = &cols * cols.transpose();
            let rhs = &cols * y;
            (gram, rhs)
        }
        Some(w) => {
            let w = &w[range];
            let mut scaled = cols.into_owned();
            for (j, mut c) in scaled.column_iter_mut().enumerate() {
                c *= w[j];
            }
            let gram = &scaled * cols.transpose();
            let rhs = &scaled * y;
            (gram, rhs)
        }
    }
}

/// Factorisation of `gram + lambda I`.
///
/// Cholesky first. When that fails for `lambda > 0` (round-off on a nearly
/// rank-deficient Gram matrix) the system is solved through a symmetric
/// eigendecomposition, discarding directions below machine precision. With
/// `lambda == 0` a rank-deficient Gram matrix is an error.
pub(crate) enum RidgeSystem {
    Cholesky(Cholesky<f64, nalgebra::Dyn>),
    Eigen(SymmetricEigen<f64, nalgebra::Dyn>, f64),
}

impl RidgeSystem {
    pub fn factor(mut gram: DMatrix<f64>, lambda: f64) -> Result<Self> {
        let n = gram.nrows();
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        let max_diag = (0..n).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        if let Some(chol) = Cholesky::new(gram.clone()) {
            let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(*v));
            let rank_deficient = min_pivot * min_pivot <= 1e-13 * max_diag;
            let usable = chol.l_dirty().iter().all(|v| v.is_finite());
            if usable && !(lambda == 0.0 && rank_deficient) {
                return Ok(Self::Cholesky(chol));
            }
        }
        if lambda == 0.0 {
            return Err(Error::SingularSystem(
                "state Gram matrix is rank deficient; use lambda > 0".into(),
            ));
        }
        let eig = SymmetricEigen::new(gram);
        let cutoff = f64::EPSILON * n as f64 * eig.eigenvalues.amax();
        Ok(Self::Eigen(eig, cutoff))
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let beta = match self {
            Self::Cholesky(chol) => chol.solve(rhs),
            Self::Eigen(eig, cutoff) => {
                let proj = eig.eigenvectors.transpose() * rhs;
                let scaled = DVector::from_iterator(
                    proj.len(),
                    proj.iter()
                        .zip(eig.eigenvalues.iter())
                        .map(|(p, l)| if *l > *cutoff { p / l } else { 0.0 }),
                );
                &eig.eigenvectors * scaled
            }
        };
        if beta.iter().all(|v| v.is_finite()) {
            Ok(beta)
        } else {
            Err(Error::SingularSystem("non-finite ridge solution".into()))
        }
    }
}

/// Solves `(gram + lambda I) beta = rhs`, followed by one refinement step that recomputes the
/// data term from the samples. `data_gradient(beta)` must return
/// `sum_t w_t x_t (y_t - x_t . beta)`; forming the Gram matrix squares the
/// condition number, the residual does not.
pub(crate) fn solve_ridge_refined(
    gram: DMatrix<f64>,
    rhs: &DVector<f64>,
    lambda: f64,
    data_gradient: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<DVector<f64>> {
    let system = RidgeSystem::factor(gram, lambda)?;
    let beta = system.solve(rhs)?;
    let mut g = data_gradient(&beta);
    g.axpy(-lambda, &beta, 1.0);
    let step = system.solve(&g)?;
    Ok(beta + step)
}

/// `sum_t w_t d_t (y_t - d_t . beta)` over the design columns in `range`.
pub(crate) fn residual_gradient(
    design: &DMatrix<f64>,
    targets: &[f64],
    range: std::ops::Range<usize>,
    weights: Option<&[f64]>,
    scale: f64,
    beta: &DVector<f64>,
    acc: &mut DVector<f64>,
) {
    for t in range {
        let col = design.column(t);
        let w = scale * weights.map_or(1.0, |w| w[t]);
        if w == 0.0 {
            continue;
        }
        let r = targets[t] - col.dot(beta);
        acc.axpy(w * r, &col, 1.0);
    }
}

/// Applies a readout to the state at every time step.
pub fn predict_states(states: &StateMatrix, readout: &Readout) -> Result<Vec<f64>> {
    if readout.weights.len() != states.n_nodes() + 1 {
        return Err(Error::Shape {
            expected: states.n_nodes() + 1,
            got: readout.weights.len(),
        });
    }
    Ok((0..states.steps())
        .map(|t| readout.apply(states.features(t)))
        .collect())
}

/// Runs the reservoir over `inputs` from `x0` and applies the readout.
pub fn predict(model: &ScrModel, readout: &Readout, inputs: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>> {
    if readout.weights.len() != model.n_nodes() + 1 {
        return Err(Error::Shape {
            expected: model.n_nodes() + 1,
            got: readout.weights.len(),
        });
    }
    let states = run_reservoir(model, inputs, x0)?;
    predict_states(&states, readout)
}

/// `sum (y - yhat)^2 / sum (y - mean(y))^2`.
pub fn nmse(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    if targets.len() != predictions.len() {
        return Err(Error::Shape {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if targets.len() < 2 {
        return Err(invalid("nmse needs at least 2 points"));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let den: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if !(den > 0.0) {
        return Err(Error::DegenerateSeries("targets have zero variance".into()));
    }
    let num: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(num / den)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
