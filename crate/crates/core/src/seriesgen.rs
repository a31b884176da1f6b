//! Synthetic benchmark series: Mackey-Glass and NARMA.
//!
//! All generators are pure functions of their arguments and an explicit
//! seed. Randomness comes from [`ChaCha8Rng`] seeded with
//! `seed_from_u64(seed)`, so a given seed produces identical output on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::series::TimeSeries;

/// Magnitude beyond which a NARMA realization is declared divergent.
pub const NARMA_DIVERGENCE_LIMIT: f64 = 1e6;

/// Mackey-Glass delay differential equation
/// `dx/dt = 0.2 x(t-tau) / (1 + x(t-tau)^10) - 0.1 x(t)`,
/// integrated with classical RK4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MackeyGlass {
    pub tau: f64,
    /// Constant value of the history function on `[-tau, 0]`.
    pub history: f64,
    /// Internal integration step.
    pub dt: f64,
    /// Time units integrated and discarded before the first sample.
    pub burn_in: f64,
}

impl MackeyGlass {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            history: 0.5,
            dt: 0.1,
            burn_in: 1000.0,
        }
    }

    pub fn with_history(mut self, history: f64) -> Self {
        self.history = history;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Noise-free trajectory sampled at unit time intervals.
    pub fn integrate(&self, n_samples: usize) -> Result<Vec<f64>> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.dt > 0.0) || !(self.burn_in >= 0.0) || !self.history.is_finite() {
            return Err(invalid("integrator settings must be positive and finite"));
        }
        let per_unit = (1.0 / self.dt).round() as usize;
        if per_unit == 0 || ((per_unit as f64) * self.dt - 1.0).abs() > 1e-9 {
            return Err(invalid("integration step must divide the unit sampling interval"));
        }
        let burn_steps = (self.burn_in * per_unit as f64).round() as usize;
        let total = burn_steps + n_samples.saturating_sub(1) * per_unit;

        let h = self.dt;
        let mut grid = Vec::with_capacity(total + 1);
        grid.push(self.history);
        let mut out = Vec::with_capacity(n_samples);
        if burn_steps == 0 && n_samples > 0 {
            out.push(self.history);
        }
        for step in 0..total {
            let t = step as f64 * h;
            let x = grid[step];
            let k1 = self.rhs(x, self.delayed(&grid, t));
            let k2 = self.rhs(x + 0.5 * h * k1, self.delayed(&grid, t + 0.5 * h));
            let k3 = self.rhs(x + 0.5 * h * k2, self.delayed(&grid, t + 0.5 * h));
            let k4 = self.rhs(x + h * k3, self.delayed(&grid, t + h));
            let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !next.is_finite() {
                return Err(Error::IntegrationDiverged { time: t + h });
            }
            grid.push(next);
            let idx = step + 1;
            if idx >= burn_steps && (idx - burn_steps) % per_unit == 0 {
                out.push(next);
            }
        }
        Ok(out)
    }

    fn rhs(&self, x: f64, lagged: f64) -> f64 {
        0.2 * lagged / (1.0 + lagged.powi(10)) - 0.1 * x
    }

    /// `x(t - tau)` by four-point Lagrange interpolation on the step grid.
    /// Grid points before time zero take the history value.
    fn delayed(&self, grid: &[f64], t: f64) -> f64 {
        let s = t - self.tau;
        if s <= 0.0 {
            return self.history;
        }
        let p = s / self.dt;
        let last = grid.len() as i64 - 1;
        let base = p.floor() as i64;
        // stencil base-1 ..= base+2, shifted left if it would reach past the
        // newest computed point (only possible for tau below two steps)
        let start = (base - 1).min(last - 3);
        let value_at = |i: i64| {
            if i < 0 {
                self.history
            } else {
                grid[i as usize]
            }
        };
        let mut acc = 0.0;
        for j in 0..4 {
            let xj = (start + j) as f64;
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    let xm = (start + m) as f64;
                    w *= (p - xm) / (xj - xm);
                }
            }
            acc += w * value_at(start + j);
        }
        acc
    }
}

/// `n_samples` unit-interval samples of the Mackey-Glass attractor with
/// additive Gaussian observation noise of standard deviation `noise_std`.
pub fn gen_mackey_glass(tau: f64, n_samples: usize, noise_std: f64, seed: u64) -> Result<TimeSeries> {
    gen_mackey_glass_with(&MackeyGlass::new(tau), n_samples, noise_std, seed)
}

pub fn gen_mackey_glass_with(
    system: &MackeyGlass,
    n_samples: usize,
    noise_std: f64,
    seed: u64,
) -> Result<TimeSeries> {
    if n_samples < 2 {
        return Err(invalid("n_samples must be at least 2"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(invalid(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let mut values = system.integrate(n_samples)?;
    add_gaussian_noise(&mut values, noise_std, seed)?;
    TimeSeries::with_meta(values, 1.0, format!("mackey-glass tau={}", system.tau))
}

fn add_gaussian_noise(values: &mut [f64], std: f64, seed: u64) -> Result<()> {
    if std == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, std).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in values.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(())
}

/// NARMA driving input: i.i.d. uniform on the open interval (0, 0.5).
pub fn narma_inputs(n_samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| loop {
            let s: f64 = rng.random_range(0.0..0.5);
            if s > 0.0 {
                break s;
            }
        })
        .collect()
}

/// NARMA recurrence of the given order driven by `inputs`.
///
/// Element `k` of the result is the target aligned with input `k`, i.e.
/// `y(k+1) = 0.3 y(k) + 0.05 y(k) sum_{i<order} y(k-i)
///          + 1.5 s(k-order+1) s(k) + 0.1`, with `y(j) = 0` for `j <= 0` and
/// `s(j) = 0` for `j < 0`.
pub fn narma_targets(order: usize, inputs: &[f64]) -> Result<Vec<f64>> {
    narma_recurrence(order, inputs, false)
}

/// [`narma_targets`] with every update passed through `tanh`. The plain
/// recurrence has no stable fixed point from order 20 up; the saturated one
/// stays bounded.
pub fn narma_targets_saturated(order: usize, inputs: &[f64]) -> Result<Vec<f64>> {
    narma_recurrence(order, inputs, true)
}

fn narma_recurrence(order: usize, inputs: &[f64], saturate: bool) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(invalid("NARMA order must be at least 1"));
    }
    // y[j] holds y(j); y(0) = 0 is the initial condition
    let mut y = vec![0.0; inputs.len() + 1];
    for k in 0..inputs.len() {
        let yk = y[k];
        let window: f64 = (0..order).filter(|&i| i <= k).map(|i| y[k - i]).sum();
        let lagged = if k + 1 >= order { inputs[k + 1 - order] } else { 0.0 };
        let next = 0.3 * yk + 0.05 * yk * window + 1.5 * lagged * inputs[k] + 0.1;
        let next = if saturate { next.tanh() } else { next };
        if !next.is_finite() || next.abs() > NARMA_DIVERGENCE_LIMIT {
            return Err(Error::DivergedRealization {
                step: k,
                limit: NARMA_DIVERGENCE_LIMIT,
            });
        }
        y[k + 1] = next;
    }
    y.remove(0);
    Ok(y)
}

/// Input and target series of a NARMA system; `targets[k]` is the value to
/// predict after seeing `inputs[..=k]`.
pub fn gen_narma(order: usize, n_samples: usize, seed: u64) -> Result<(TimeSeries, TimeSeries)> {
    narma_series(order, n_samples, seed, false)
}

/// [`gen_narma`] using [`narma_targets_saturated`].
pub fn gen_narma_saturated(order: usize, n_samples: usize, seed: u64) -> Result<(TimeSeries, TimeSeries)> {
    narma_series(order, n_samples, seed, true)
}

fn narma_series(order: usize, n_samples: usize, seed: u64, saturate: bool) -> Result<(TimeSeries, TimeSeries)> {
    if n_samples < 2 {
        return Err(invalid("n_samples must be at least 2"));
    }
    let inputs = narma_inputs(n_samples, seed);
    let targets = narma_recurrence(order, &inputs, saturate)?;
    let tag = if saturate { "tanh-narma" } else { "narma" };
    Ok((
        TimeSeries::with_meta(inputs, 1.0, format!("{tag}{order} input"))?,
        TimeSeries::with_meta(targets, 1.0, format!("{tag}{order} target"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narma_zero_input_recurrence() {
        let y = narma_targets(10, &[0.0; 3]).unwrap();
        assert_eq!(y[0], 0.1);
        assert!((y[1] - 0.1305).abs() < 1e-15);
        // y(3) = 0.3*0.1305 + 0.05*0.1305*(0.1305+0.1) + 0.1
        let expected = 0.3 * 0.1305 + 0.05 * 0.1305 * (0.1305 + 0.1) + 0.1;
        assert!((y[2] - expected).abs() < 1e-15);
    }

    #[test]
    fn narma_lengths_and_range() {
        let (s, y) = gen_narma(10, 1500, 7).unwrap();
        assert_eq!(s.len(), 1500);
        assert_eq!(y.len(), 1500);
        assert!(s.values().iter().all(|&v| v > 0.0 && v < 0.5));
    }

    #[test]
    fn narma_first_target_is_constant_term() {
        let (_, y) = gen_narma(10, 20, 3).unwrap();
        assert_eq!(y.values()[0], 0.1);
    }

    #[test]
    fn order_twenty_needs_saturation() {
        let inputs = narma_inputs(500, 1);
        assert!(narma_targets(20, &inputs).is_err());
        let y = narma_targets_saturated(20, &inputs).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn narma_divergence_detected() {
        // inputs far outside the intended range blow the recurrence up
        let err = narma_targets(10, &[50.0; 200]).unwrap_err();
        assert!(matches!(err, Error::DivergedRealization { .. }));
    }

    #[test]
    fn mackey_glass_fixed_points() {
        for h in [0.0, 1.0] {
            let x = MackeyGlass::new(17.0).with_history(h).with_burn_in(50.0);
            let s = gen_mackey_glass_with(&x, 200, 0.0, 1).unwrap();
            assert!(s.values().iter().all(|v| (v - h).abs() < 1e-6));
        }
    }

    #[test]
    fn mackey_glass_deterministic() {
        let a = gen_mackey_glass(30.0, 300, 0.05, 9).unwrap();
        let b = gen_mackey_glass(30.0, 300, 0.05, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_mackey_glass(30.0, 300, 0.05, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mackey_glass_chaotic_separation_grows() {
        let a = MackeyGlass::new(30.0).integrate(800).unwrap();
        let b = MackeyGlass::new(30.0).with_history(0.5 + 1e-9).integrate(800).unwrap();
        let early = (a[0] - b[0]).abs();
        let late = a[600..]
            .iter()
            .zip(&b[600..])
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(late > 1e3 * early.max(1e-12), "early {early}, late {late}");
        assert!(late > 1e-2);
    }

    #[test]
    fn mackey_glass_rejects_bad_args() {
        assert!(gen_mackey_glass(0.0, 10, 0.0, 1).is_err());
        assert!(gen_mackey_glass(17.0, 10, -1.0, 1).is_err());
    }
}
