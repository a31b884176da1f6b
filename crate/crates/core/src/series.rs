//! Uniformly sampled scalar series and the train/test split.

use crate::error::{invalid, Error, Result};

/// A uniformly sampled scalar sequence.
///
/// Always holds at least two finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
    meta: String,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        Self::with_meta(values, dt, String::new())
    }

    pub fn with_meta(values: Vec<f64>, dt: f64, meta: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!(
                "time series needs at least 2 points, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at index {i}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("sampling interval must be positive, got {dt}")));
        }
        Ok(Self {
            values,
            dt,
            meta: meta.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn meta(&self) -> &str {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: impl Into<String>) {
        self.meta = meta.into();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Never true; present for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        population_std(&self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_len: usize,
    pub test_len: usize,
}

impl SplitSpec {
    pub fn new(train_len: usize, test_len: usize) -> Result<Self> {
        if train_len == 0 || test_len == 0 {
            return Err(invalid("split lengths must both be positive"));
        }
        Ok(Self {
            train_len,
            test_len,
        })
    }

    pub fn total(&self) -> usize {
        self.train_len + self.test_len
    }
}

/// Affine normalisation to zero mean and unit population standard deviation.
///
/// Returns the standardized series together with the mean and standard
/// deviation of the input, so that `x = mean + std * z`.
pub fn standardize(series: &TimeSeries) -> Result<(TimeSeries, f64, f64)> {
    let (values, m, s) = standardize_values(series.values())?;
    let out = TimeSeries {
        values,
        dt: series.dt,
        meta: series.meta.clone(),
    };
    Ok((out, m, s))
}

pub(crate) fn standardize_values(values: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if values.len() < 2 {
        return Err(Error::DegenerateSeries("fewer than 2 points".into()));
    }
    let m = mean(values);
    let s = population_std(values);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    Ok((values.iter().map(|v| (v - m) / s).collect(), m, s))
}

/// Contiguous, order-preserving split into a train prefix and the test block
/// that follows it.
pub fn split(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    if spec.train_len == 0 || spec.test_len == 0 {
        return Err(invalid("split lengths must both be positive"));
    }
    if spec.total() > series.len() {
        return Err(Error::Bounds(format!(
            "split {}+{} exceeds series length {}",
            spec.train_len,
            spec.test_len,
            series.len()
        )));
    }
    let piece = |range: std::ops::Range<usize>, tag: &str| TimeSeries {
        values: series.values[range].to_vec(),
        dt: series.dt,
        meta: format!("{}{}", series.meta, tag),
    };
    Ok((
        piece(0..spec.train_len, ":train"),
        piece(spec.train_len..spec.total(), ":test"),
    ))
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}
