//! Independent reference implementations used as test oracles. They favour
//! directness over speed: dense matrices, explicit inverses, plain loops.

#![allow(dead_code)]

use cyclic_esn::gp::{matern52, GpModel};
use cyclic_esn::{build_scr, ScrParams, Task};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Posterior mean and std from an explicit inverse of `K + (noise + jitter) I`.
pub fn dense_gp_posterior(model: &GpModel, x: &[f64]) -> (f64, f64) {
    let h = model.hyper();
    let xs = model.train_x();
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = matern52(&xs[i], &xs[j], &h.lengthscales, h.signal_var);
        }
        k[(i, i)] += h.noise_var + model.jitter();
    }
    let kinv = k.try_inverse().expect("invertible Gram matrix");
    let ks = DVector::from_iterator(n, xs.iter().map(|xi| matern52(x, xi, &h.lengthscales, h.signal_var)));
    let y = DVector::from_column_slice(model.train_y_centered());
    let mean = (ks.transpose() * &kinv * y)[(0, 0)] + model.y_offset();
    let var = h.signal_var - (ks.transpose() * &kinv * &ks)[(0, 0)];
    (mean, var.max(0.0).sqrt())
}

/// Reservoir states from the dense update `x(t) = tanh(V (1 + s(t)) + W x(t-1))`,
/// returned as rows `[1, x(t)]`.
pub fn dense_states(params: &ScrParams, inputs: &[f64]) -> Vec<Vec<f64>> {
    let model = build_scr(*params).unwrap();
    let w = model.recurrent_matrix();
    let v = DVector::from_iterator(params.n_nodes, model.input_signs().iter().map(|s| s * params.w_in));
    let mut x = DVector::zeros(params.n_nodes);
    inputs
        .iter()
        .map(|&s| {
            x = (&v * (1.0 + s) + &w * &x).map(f64::tanh);
            std::iter::once(1.0).chain(x.iter().copied()).collect()
        })
        .collect()
}

/// Ridge solution as the least-squares solution of the stacked system
/// `[X; sqrt(lambda) I] b = [y; 0]`, solved by QR.
pub fn ridge_qr(rows: &[&Vec<f64>], y: &[f64], lambda: f64) -> DVector<f64> {
    let (n, d) = (rows.len(), rows[0].len());
    let root = lambda.sqrt();
    let a = DMatrix::from_fn(n + d, d, |r, c| {
        if r < n {
            rows[r][c]
        } else if r - n == c {
            root
        } else {
            0.0
        }
    });
    let b = DVector::from_fn(n + d, |r, _| if r < n { y[r] } else { 0.0 });
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    qr.r().solve_upper_triangular(&qtb).expect("full rank stacked system")
}

/// K-fold objective written out directly: contiguous blocks after the
/// washout, readout trained on the rest, mean held-out squared error.
pub fn straight_line_cv(params: &ScrParams, task: &Task, k: usize, washout: usize) -> f64 {
    let states = dense_states(params, &task.inputs);
    let usable = task.len() - washout;
    let mut bounds = vec![washout];
    for f in 0..k {
        let size = usable / k + usize::from(f < usable % k);
        bounds.push(bounds[f] + size);
    }
    let mut total = 0.0;
    for f in 0..k {
        let (lo, hi) = (bounds[f], bounds[f + 1]);
        let train: Vec<usize> = (washout..task.len()).filter(|t| *t < lo || *t >= hi).collect();
        let rows: Vec<&Vec<f64>> = train.iter().map(|&t| &states[t]).collect();
        let y: Vec<f64> = train.iter().map(|&t| task.targets[t]).collect();
        let beta = ridge_qr(&rows, &y, params.lambda);
        for t in lo..hi {
            let pred: f64 = states[t].iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            total += (task.targets[t] - pred).powi(2);
        }
    }
    total / k as f64
}

/// Ridge objective `|y - X b|^2 + lambda |b|^2`.
pub fn ridge_objective(rows: &[Vec<f64>], y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let fit: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, t)| {
            let p: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
            (t - p).powi(2)
        })
        .sum();
    fit + lambda * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Central-difference gradient (exact for quadratics up to rounding).
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|i| {
            let mut p = at.to_vec();
            let mut m = at.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Least-squares polynomial through `window` evaluated at `offset` (relative
/// to the first sample), via explicit normal equations.
pub fn poly_fit_value(window: &[f64], order: usize, offset: f64) -> f64 {
    let n = window.len();
    let order = order.min(n - 1);
    let a = DMatrix::from_fn(n, order + 1, |r, c| (r as f64 - offset).powi(c as i32));
    let b = DVector::from_column_slice(window);
    let coef = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).expect("full rank");
    coef[0]
}

/// NARMA recurrence written with explicit time indices: `y[k]` is y(k),
/// `y(k) = 0` for `k <= 0`; returns y(1..=n).
pub fn narma_oracle(order: usize, s: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut y = vec![0.0; n + 1];
    for k in 0..n {
        let mut sum = 0.0;
        for i in 0..order {
            if k >= i {
                sum += y[k - i];
            }
        }
        let lag = if k + 1 >= order { s[k + 1 - order] } else { 0.0 };
        y[k + 1] = 0.3 * y[k] + 0.05 * y[k] * sum + 1.5 * lag * s[k] + 0.1;
    }
    y[1..].to_vec()
}

pub fn random_task(seed: u64, len: usize) -> Task {
    let mut r = rng(seed);
    let phase: f64 = r.random_range(0.0..6.0);
    let freq: f64 = r.random_range(0.05..0.4);
    let series: Vec<f64> = (0..=len)
        .map(|t| (freq * t as f64 + phase).sin() + 0.1 * r.random_range(-1.0..1.0))
        .collect();
    Task::one_step_ahead(&series).unwrap()
}

pub fn random_params(seed: u64) -> ScrParams {
    let mut r = rng(seed);
    ScrParams::new(
        r.random_range(5..40),
        r.random_range(0.01..0.95),
        r.random_range(0.01..0.95),
        10f64.powf(r.random_range(-8.0..-2.0)),
    )
    .unwrap()
}
