//! Gaussian-process regression with an ARD Matérn-5/2 kernel.
//!
//! Observations are centred (their mean is stored as `y_offset` and the GP
//! has a zero prior mean). Kernel hyperparameters are chosen by maximising
//! the log marginal likelihood with multistart L-BFGS in log space; box
//! bounds are enforced through a logistic reparameterisation.

use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;
const JITTER_START: f64 = 1e-10;
const JITTER_CAP_REL: f64 = 1e-4;
pub const NOISE_FLOOR: f64 = 1e-8;
const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e2);
const SIGNAL_BOUNDS_REL: (f64, f64) = (1e-4, 1e4);
const LBFGS_MAX_ITERS: u64 = 60;

/// `sigma^2 (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r)` with
/// `r = |(x1 - x2) / lengthscales|`.
pub fn matern52(x1: &[f64], x2: &[f64], lengthscales: &[f64], signal_var: f64) -> f64 {
    let r = scaled_distance(x1, x2, lengthscales);
    signal_var * matern_shape(r)
}

fn matern_shape(r: f64) -> f64 {
    let a = SQRT5 * r;
    (1.0 + a + a * a / 3.0) * (-a).exp()
}

fn scaled_distance(x1: &[f64], x2: &[f64], lengthscales: &[f64]) -> f64 {
    x1.iter()
        .zip(x2)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyper {
    pub lengthscales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyper {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                got: self.lengthscales.len(),
            });
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite())
            || !(self.signal_var > 0.0)
            || !(self.noise_var >= 0.0)
        {
            return Err(invalid("GP hyperparameters must be positive"));
        }
        Ok(())
    }
}

/// Fitted GP posterior.
#[derive(Debug, Clone)]
pub struct GpModel {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    y_offset: f64,
    hyper: GpHyper,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct GpFitOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Used as the first restart when present.
    pub warm_start: Option<GpHyper>,
}

impl Default for GpFitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            warm_start: None,
        }
    }
}

fn check_inputs(xs: &[Vec<f64>], ys: &[f64]) -> Result<usize> {
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(invalid("GP needs at least one observation"));
    }
    let dim = xs[0].len();
    if dim == 0 || xs.iter().any(|x| x.len() != dim) {
        return Err(invalid("GP inputs must share a positive dimension"));
    }
    if xs.iter().flatten().chain(ys).any(|v| !v.is_finite()) {
        return Err(invalid("GP data must be finite"));
    }
    Ok(dim)
}

fn centre(ys: &[f64]) -> (Vec<f64>, f64) {
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    (ys.iter().map(|y| y - m).collect(), m)
}

fn gram(xs: &[Vec<f64>], hyper: &GpHyper) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.signal_var;
        for j in 0..i {
            let v = matern52(&xs[i], &xs[j], &hyper.lengthscales, hyper.signal_var);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `k + noise I`, escalating a diagonal jitter from 1e-10 by
/// factors of ten up to `1e-4 * signal_var`.
fn factorize(k: &DMatrix<f64>, noise: f64, signal_var: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let cap = JITTER_CAP_REL * signal_var;
    let mut jitter = 0.0;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += noise + jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Some((c, jitter));
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > cap.max(JITTER_START) {
            return None;
        }
    }
}

impl GpModel {
    /// Posterior for fixed hyperparameters.
    pub fn with_hyperparameters(xs: &[Vec<f64>], ys: &[f64], hyper: GpHyper) -> Result<Self> {
        let dim = check_inputs(xs, ys)?;
        hyper.validate(dim)?;
        let (yc, offset) = centre(ys);
        Self::assemble(xs.to_vec(), yc, offset, hyper)
    }

    fn assemble(train_x: Vec<Vec<f64>>, train_y: Vec<f64>, y_offset: f64, hyper: GpHyper) -> Result<Self> {
        let k = gram(&train_x, &hyper);
        let (chol, jitter) = factorize(&k, hyper.noise_var, hyper.signal_var).ok_or_else(|| {
            Error::IllConditioned(format!("Cholesky failed with jitter up to {:e}", JITTER_CAP_REL * hyper.signal_var))
        })?;
        let alpha = chol.solve(&DVector::from_column_slice(&train_y));
        Ok(Self {
            train_x,
            train_y,
            y_offset,
            hyper,
            jitter,
            chol,
            alpha,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn y_offset(&self) -> f64 {
        self.y_offset
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.train_x[0].len()
    }

    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.train_x
    }

    pub fn train_y_centered(&self) -> &[f64] {
        &self.train_y
    }

    pub fn prior_std(&self) -> f64 {
        self.hyper.signal_var.sqrt()
    }

    /// Posterior mean (offset restored) and standard deviation of the latent
    /// function at `x`.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let kstar = DVector::from_iterator(
            self.len(),
            self.train_x
                .iter()
                .map(|xi| matern52(x, xi, &self.hyper.lengthscales, self.hyper.signal_var)),
        );
        let mean = kstar.dot(&self.alpha) + self.y_offset;
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a positive diagonal");
        let var = self.hyper.signal_var - v.norm_squared();
        (mean, var.max(0.0).sqrt())
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let y = DVector::from_column_slice(&self.train_y);
        let n = self.len() as f64;
        let logdet: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * y.dot(&self.alpha) - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

pub fn gp_posterior(model: &GpModel, x: &[f64]) -> (f64, f64) {
    model.posterior(x)
}

/// Log marginal likelihood of already-centred observations.
pub fn log_marginal_likelihood(xs: &[Vec<f64>], ys_centered: &[f64], hyper: &GpHyper) -> Result<f64> {
    let dim = check_inputs(xs, ys_centered)?;
    hyper.validate(dim)?;
    let model = GpModel::assemble(xs.to_vec(), ys_centered.to_vec(), 0.0, hyper.clone())?;
    Ok(model.log_marginal_likelihood())
}

pub fn gp_fit(xs: &[Vec<f64>], ys: &[f64], restarts: usize, seed: u64) -> Result<GpModel> {
    gp_fit_with(
        xs,
        ys,
        &GpFitOptions {
            restarts,
            seed,
            warm_start: None,
        },
    )
}

/// Maximum-likelihood fit of lengthscales, signal and noise variance.
pub fn gp_fit_with(xs: &[Vec<f64>], ys: &[f64], opts: &GpFitOptions) -> Result<GpModel> {
    let dim = check_inputs(xs, ys)?;
    if xs.len() < 2 {
        return Err(invalid("GP fit needs at least 2 observations"));
    }
    let (yc, offset) = centre(ys);
    let var = (yc.iter().map(|y| y * y).sum::<f64>() / yc.len() as f64).max(1e-12);
    let bounds = LogBounds::new(dim, var);
    let problem = Likelihood {
        xs,
        ys: &yc,
        bounds: &bounds,
        cache: RefCell::new(None),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts.max(1));
    if let Some(h) = &opts.warm_start {
        if h.lengthscales.len() == dim {
            starts.push(bounds.to_unconstrained(&bounds.log_from_hyper(h)));
        }
    }
    while starts.len() < opts.restarts.max(1) {
        let z: Vec<f64> = bounds
            .lo
            .iter()
            .zip(&bounds.hi)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        starts.push(bounds.to_unconstrained(&z));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let candidate = run_lbfgs(&problem, start.clone()).or_else(|| {
            problem.eval(&start).map(|(c, _)| (c, start))
        });
        if let Some((cost, u)) = candidate {
            if cost.is_finite() && best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, u));
            }
        }
    }
    let (_, u) = best.ok_or_else(|| Error::IllConditioned("no restart produced a valid fit".into()))?;
    let hyper = bounds.hyper_from_log(&bounds.from_unconstrained(&u));
    GpModel::assemble(xs.to_vec(), yc, offset, hyper)
}

fn run_lbfgs(problem: &Likelihood<'_>, start: Vec<f64>) -> Option<(f64, Vec<f64>)> {
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
        .with_tolerance_grad(1e-6)
        .ok()?
        .with_tolerance_cost(1e-10)
        .ok()?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.param(start).max_iters(LBFGS_MAX_ITERS))
        .run()
        .ok()?;
    let state = res.state();
    let p = state.get_best_param()?.clone();
    Some((state.get_best_cost(), p))
}

/// Log-space box for `[log l_1..log l_d, log signal, log noise]`.
struct LogBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl LogBounds {
    fn new(dim: usize, var: f64) -> Self {
        let mut lo = vec![LENGTHSCALE_BOUNDS.0.ln(); dim];
        let mut hi = vec![LENGTHSCALE_BOUNDS.1.ln(); dim];
        lo.push((SIGNAL_BOUNDS_REL.0 * var).ln());
        hi.push((SIGNAL_BOUNDS_REL.1 * var).ln());
        lo.push(NOISE_FLOOR.ln());
        hi.push(var.max(1e-6).ln());
        Self { lo, hi }
    }

    fn to_unconstrained(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(z, (lo, hi))| {
                let f = ((z - lo) / (hi - lo)).clamp(1e-6, 1.0 - 1e-6);
                (f / (1.0 - f)).ln()
            })
            .collect()
    }

    fn from_unconstrained(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(u, (lo, hi))| lo + (hi - lo) * sigmoid(*u))
            .collect()
    }

    /// d z / d u for each coordinate.
    fn jacobian(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(u, (lo, hi))| {
                let s = sigmoid(*u);
                (hi - lo) * s * (1.0 - s)
            })
            .collect()
    }

    fn hyper_from_log(&self, z: &[f64]) -> GpHyper {
        let d = z.len() - 2;
        GpHyper {
            lengthscales: z[..d].iter().map(|v| v.exp()).collect(),
            signal_var: z[d].exp(),
            noise_var: z[d + 1].exp(),
        }
    }

    fn log_from_hyper(&self, h: &GpHyper) -> Vec<f64> {
        let mut z: Vec<f64> = h.lengthscales.iter().map(|l| l.ln()).collect();
        z.push(h.signal_var.ln());
        z.push(h.noise_var.max(NOISE_FLOOR).ln());
        z
    }
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

struct Likelihood<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    bounds: &'a LogBounds,
    cache: RefCell<Option<(Vec<f64>, f64, Vec<f64>)>>,
}

impl Likelihood<'_> {
    /// Negative log marginal likelihood and its gradient in unconstrained
    /// coordinates.
    fn eval(&self, u: &[f64]) -> Option<(f64, Vec<f64>)> {
        if let Some((cu, c, g)) = self.cache.borrow().as_ref() {
            if cu.as_slice() == u {
                return Some((*c, g.clone()));
            }
        }
        let z = self.bounds.from_unconstrained(u);
        let hyper = self.bounds.hyper_from_log(&z);
        let (nll, grad_z) = nll_and_grad(self.xs, self.ys, &hyper)?;
        let jac = self.bounds.jacobian(u);
        let grad: Vec<f64> = grad_z.iter().zip(&jac).map(|(g, j)| g * j).collect();
        *self.cache.borrow_mut() = Some((u.to_vec(), nll, grad.clone()));
        Some((nll, grad))
    }
}

impl CostFunction for &Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        self.eval(u)
            .map(|(c, _)| c)
            .ok_or_else(|| argmin::core::Error::msg("kernel factorisation failed"))
    }
}

impl Gradient for &Likelihood<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, u: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        self.eval(u)
            .map(|(_, g)| g)
            .ok_or_else(|| argmin::core::Error::msg("kernel factorisation failed"))
    }
}

/// Negative log marginal likelihood and gradient with respect to
/// `[log l_1..log l_d, log signal_var, log noise_var]`.
fn nll_and_grad(xs: &[Vec<f64>], ys: &[f64], hyper: &GpHyper) -> Option<(f64, Vec<f64>)> {
    let n = xs.len();
    let d = hyper.lengthscales.len();
    let k = gram(xs, hyper);
    let (chol, jitter) = factorize(&k, hyper.noise_var, hyper.signal_var)?;
    let y = DVector::from_column_slice(ys);
    let alpha = chol.solve(&y);
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let nll = 0.5 * y.dot(&alpha) + logdet + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !nll.is_finite() {
        return None;
    }
    // W = alpha alpha^T - K^{-1};  dLML/dtheta = 0.5 tr(W dK/dtheta)
    let kinv = chol.inverse();
    let mut grad = vec![0.0; d + 2];
    let inv_l2: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    for i in 0..n {
        for j in 0..i {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            let mut r2 = 0.0;
            for (q, il2) in inv_l2.iter().enumerate() {
                let diff = xs[i][q] - xs[j][q];
                r2 += diff * diff * il2;
            }
            let r = r2.sqrt();
            let a = SQRT5 * r;
            let e = (-a).exp();
            // signal derivative: K itself (off-diagonal)
            grad[d] += w * hyper.signal_var * (1.0 + a + a * a / 3.0) * e;
            let common = hyper.signal_var * (5.0 / 3.0) * (1.0 + a) * e;
            for (q, il2) in inv_l2.iter().enumerate() {
                let diff = xs[i][q] - xs[j][q];
                grad[q] += w * common * diff * diff * il2;
            }
        }
    }
    // off-diagonal pairs were visited once; the trace counts them twice
    for g in grad.iter_mut().take(d + 1) {
        *g *= 2.0;
    }
    for i in 0..n {
        let w = alpha[i] * alpha[i] - kinv[(i, i)];
        grad[d] += w * hyper.signal_var;
        grad[d + 1] += w * hyper.noise_var;
    }
    let _ = jitter;
    // gradient of the negative LML
    Some((nll, grad.iter().map(|g| -0.5 * g).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_closed_form() {
        let l = [1.0];
        assert_eq!(matern52(&[0.3], &[0.3], &l, 2.5), 2.5);
        let k = matern52(&[0.0], &[1.0], &l, 1.0);
        let expected = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert!((k - expected).abs() < 1e-15);
        assert!((k - 0.52399).abs() < 1e-5);
        let a = [0.1, 0.7, 0.3];
        let b = [0.9, 0.2, 0.4];
        let ls = [0.3, 1.2, 0.5];
        assert_eq!(matern52(&a, &b, &ls, 1.3), matern52(&b, &a, &ls, 1.3));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let xs: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x[0]).sin() + x[1] * x[1]).collect();
        let (yc, _) = centre(&ys);
        let h = GpHyper {
            lengthscales: vec![0.4, 0.9],
            signal_var: 0.8,
            noise_var: 1e-3,
        };
        let (_, g) = nll_and_grad(&xs, &yc, &h).unwrap();
        let base = [h.lengthscales[0].ln(), h.lengthscales[1].ln(), h.signal_var.ln(), h.noise_var.ln()];
        let to_h = |z: &[f64]| GpHyper {
            lengthscales: vec![z[0].exp(), z[1].exp()],
            signal_var: z[2].exp(),
            noise_var: z[3].exp(),
        };
        for q in 0..4 {
            let eps = 1e-6;
            let mut zp = base;
            let mut zm = base;
            zp[q] += eps;
            zm[q] -= eps;
            let fp = nll_and_grad(&xs, &yc, &to_h(&zp)).unwrap().0;
            let fm = nll_and_grad(&xs, &yc, &to_h(&zm)).unwrap().0;
            let fd = (fp - fm) / (2.0 * eps);
            assert!((fd - g[q]).abs() < 1e-5 * (1.0 + fd.abs()), "param {q}: fd {fd} vs {}", g[q]);
        }
    }

    #[test]
    fn fit_requires_two_points() {
        assert!(gp_fit(&[vec![0.5]], &[1.0], 2, 0).is_err());
        assert!(gp_fit(&[vec![0.5], vec![0.1, 0.2]], &[1.0, 2.0], 2, 0).is_err());
    }
}
