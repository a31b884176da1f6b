//! Light-curve preprocessing: phase folding, binning onto a regular grid,
//! quadratic gap filling and Savitzky-Golay smoothing.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::series::TimeSeries;

/// Irregularly sampled observations. Raw series have strictly increasing
/// times; a folded series holds phases in `[0, period)` in non-decreasing
/// order and remembers its period.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    period: Option<f64>,
}

impl IrregularSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Shape {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.len() < 4 {
            return Err(invalid("an irregular series needs at least 4 samples"));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("times and values must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times must be strictly increasing"));
        }
        Ok(Self {
            times,
            values,
            period: None,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Folding period, if this series is phase-folded.
    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Maps times to phases modulo `period` and sorts by phase. The sort is
/// stable, so equal phases keep their original time order.
pub fn fold(series: &IrregularSeries, period: f64) -> Result<IrregularSeries> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::Domain(format!("period must be positive, got {period}")));
    }
    let mut pairs: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, &v)| {
            let p = t.rem_euclid(period);
            (if p >= period { 0.0 } else { p }, v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (times, values) = pairs.into_iter().unzip();
    Ok(IrregularSeries {
        times,
        values,
        period: Some(period),
    })
}

/// Bins a folded series into `n_bins / n_periods` phase bins, fills empty
/// bins quadratically and tiles the profile `n_periods` times.
pub fn bin_series(series: &IrregularSeries, n_bins: usize, n_periods: usize) -> Result<TimeSeries> {
    let period = series
        .period
        .ok_or_else(|| invalid("bin_series needs a phase-folded series"))?;
    if n_bins < 4 {
        return Err(invalid("n_bins must be at least 4"));
    }
    if n_periods == 0 || n_bins % n_periods != 0 {
        return Err(invalid(format!(
            "n_periods ({n_periods}) must be positive and divide n_bins ({n_bins})"
        )));
    }
    let per = n_bins / n_periods;
    let mut sums = vec![0.0; per];
    let mut counts = vec![0usize; per];
    for (&t, &v) in series.times.iter().zip(&series.values) {
        let b = ((t / period * per as f64).floor() as usize).min(per - 1);
        sums[b] += v;
        counts[b] += 1;
    }
    let filled: Vec<usize> = (0..per).filter(|&b| counts[b] > 0).collect();
    if filled.len() < 3 {
        return Err(Error::InsufficientCoverage {
            non_empty: filled.len(),
        });
    }
    let means: Vec<f64> = (0..per)
        .map(|b| if counts[b] > 0 { sums[b] / counts[b] as f64 } else { f64::NAN })
        .collect();
    let profile: Vec<f64> = (0..per)
        .map(|b| {
            if counts[b] > 0 {
                means[b]
            } else {
                fill_gap(b, per, &filled, &means)
            }
        })
        .collect();
    let values = profile.iter().copied().cycle().take(n_bins).collect();
    TimeSeries::new(values, period / per as f64)
}

/// Quadratic through the three circularly nearest non-empty bins.
fn fill_gap(bin: usize, per: usize, filled: &[usize], means: &[f64]) -> f64 {
    let signed = |b: usize| -> f64 {
        let d = (b + per - bin) % per;
        if 2 * d > per {
            d as f64 - per as f64
        } else {
            d as f64
        }
    };
    let mut near: Vec<(f64, usize)> = filled.iter().map(|&b| (signed(b), b)).collect();
    near.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()).then(a.1.cmp(&b.1)));
    let pts: Vec<(f64, f64)> = near[..3].iter().map(|&(x, b)| (x, means[b])).collect();
    (0..3)
        .map(|i| {
            let basis: f64 = (0..3)
                .filter(|&j| j != i)
                .map(|j| (0.0 - pts[j].0) / (pts[i].0 - pts[j].0))
                .product();
            basis * pts[i].1
        })
        .sum()
}

/// Savitzky-Golay smoothing. Near the edges the window is truncated to the
/// available samples and the polynomial order is capped at `len - 1`.
pub fn savgol_filter(series: &TimeSeries, window: usize, polyorder: usize) -> Result<TimeSeries> {
    if window % 2 == 0 {
        return Err(invalid(format!("window must be odd, got {window}")));
    }
    if window <= polyorder {
        return Err(invalid("window must exceed polyorder"));
    }
    let x = series.values();
    if window > x.len() {
        return Err(invalid(format!(
            "window {window} longer than series ({})",
            x.len()
        )));
    }
    let half = window / 2;
    let interior = center_weights(half, half, polyorder);
    let out = (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            let w = if i - lo == half && hi - i == half {
                std::borrow::Cow::Borrowed(&interior)
            } else {
                std::borrow::Cow::Owned(center_weights(i - lo, hi - i, polyorder))
            };
            w.iter().zip(&x[lo..=hi]).map(|(a, b)| a * b).sum()
        })
        .collect();
    let mut result = TimeSeries::new(out, series.dt())?;
    result.set_meta(series.meta());
    Ok(result)
}

/// Weights giving the fitted value at offset 0 for a window spanning
/// `-left..=right`.
fn center_weights(left: usize, right: usize, polyorder: usize) -> Vec<f64> {
    let len = left + right + 1;
    let order = polyorder.min(len - 1);
    let scale = left.max(right).max(1) as f64;
    let a = DMatrix::from_fn(len, order + 1, |r, c| {
        ((r as f64 - left as f64) / scale).powi(c as i32)
    });
    let pinv = a
        .svd(true, true)
        .pseudo_inverse(1e-13)
        .expect("svd with both factors");
    pinv.row(0).iter().copied().collect()
}
