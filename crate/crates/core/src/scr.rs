//! Simple cyclic reservoirs.
//!
//! Nodes form a single ring: node `i` receives `w * x[i-1]` and node 0
//! receives `w * x[N-1]`. Every input weight has magnitude `w_in`; node `i`
//! takes sign `+` when the `(i+1)`-th decimal digit of pi is at least 5 and
//! `-` otherwise. The same sign multiplies both the bias input and the series
//! input of a node, so a node's pre-activation is
//! `sign_i * w_in * (1 + s(t)) + w * x_prev(t-1)`.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::pi::pi_decimals;

/// The four tunable reservoir hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrParams {
    pub n_nodes: usize,
    pub w_in: f64,
    pub w: f64,
    pub lambda: f64,
}

impl ScrParams {
    pub fn new(n_nodes: usize, w_in: f64, w: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            n_nodes,
            w_in,
            w,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(invalid("n_nodes must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.w_in) {
            return Err(invalid(format!("w_in must lie in [0, 1], got {}", self.w_in)));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(invalid(format!("w must lie in [0, 1], got {}", self.w)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// `[N, w_in, w, lambda]`, the coordinate order used by the search space.
    pub fn to_point(&self) -> [f64; 4] {
        [self.n_nodes as f64, self.w_in, self.w, self.lambda]
    }

    /// Inverse of [`ScrParams::to_point`]; `N` is rounded to the nearest integer.
    pub fn from_point(p: &[f64]) -> Result<Self> {
        if p.len() != 4 {
            return Err(Error::Shape {
                expected: 4,
                got: p.len(),
            });
        }
        let n = p[0].round();
        if !(n >= 1.0) {
            return Err(invalid(format!("n_nodes must be at least 1, got {}", p[0])));
        }
        Self::new(n as usize, p[1], p[2], p[3])
    }
}

/// Input weight signs for a reservoir of `n` nodes.
pub fn input_signs(n: usize) -> Vec<f64> {
    pi_decimals(n)
        .into_iter()
        .map(|d| if d >= 5 { 1.0 } else { -1.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScrModel {
    params: ScrParams,
    input_signs: Vec<f64>,
}

/// Builds the reservoir for `params`. Construction is a pure function of the
/// parameters.
pub fn build_scr(params: ScrParams) -> Result<ScrModel> {
    params.validate()?;
    Ok(ScrModel {
        input_signs: input_signs(params.n_nodes),
        params,
    })
}

impl ScrModel {
    /// Reservoir with an explicit sign pattern instead of the pi sequence.
    pub fn with_signs(params: ScrParams, signs: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if signs.len() != params.n_nodes {
            return Err(Error::Shape {
                expected: params.n_nodes,
                got: signs.len(),
            });
        }
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(invalid("signs must be +1 or -1"));
        }
        Ok(Self {
            params,
            input_signs: signs,
        })
    }

    pub fn params(&self) -> &ScrParams {
        &self.params
    }

    pub fn n_nodes(&self) -> usize {
        self.params.n_nodes
    }

    pub fn input_signs(&self) -> &[f64] {
        &self.input_signs
    }

    /// Dense `N x N` recurrent matrix. Only used for inspection; the state
    /// update never materialises it.
    pub fn recurrent_matrix(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        let mut m = DMatrix::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = self.params.w;
        }
        m[(0, n - 1)] += self.params.w;
        m
    }

    /// Input weight matrix `N x 2`, columns for the bias and the series input.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        DMatrix::from_fn(n, 2, |i, _| self.input_signs[i] * self.params.w_in)
    }

    /// One update `x <- tanh(W_in [1; s] + W x)`, in place.
    pub fn step(&self, state: &mut [f64], input: f64, scratch: &mut Vec<f64>) {
        let n = state.len();
        scratch.clear();
        scratch.extend_from_slice(state);
        let drive = self.params.w_in * (1.0 + input);
        let w = self.params.w;
        for i in 0..n {
            let prev = if i == 0 { scratch[n - 1] } else { scratch[i - 1] };
            state[i] = (self.input_signs[i] * drive + w * prev).tanh();
        }
    }
}

/// Reservoir states over time, stored together with the constant bias
/// feature: column `t` of the backing matrix is `[1; x(t)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    design: DMatrix<f64>,
}

impl StateMatrix {
    pub(crate) fn from_design(design: DMatrix<f64>) -> Self {
        Self { design }
    }

    /// Number of time steps (rows of the conceptual `T x N` matrix).
    pub fn steps(&self) -> usize {
        self.design.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.design.nrows() - 1
    }

    /// Reservoir state `x(t)`.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.features(t)[1..]
    }

    /// Readout features `[1; x(t)]`.
    pub fn features(&self, t: usize) -> &[f64] {
        let d = self.design.nrows();
        &self.design.as_slice()[t * d..(t + 1) * d]
    }

    /// `(N+1) x T` feature matrix, bias row first.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Steps `range` as a new matrix.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.steps() {
            return Err(Error::Bounds(format!(
                "step range {range:?} outside 0..{}",
                self.steps()
            )));
        }
        Ok(Self::from_design(self.design.columns(range.start, range.len()).into_owned()))
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.steps() - 1)
    }

    /// Conventional `T x N` layout.
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.design.rows(1, self.n_nodes()).transpose()
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.steps())
            .flat_map(|t| self.state(t).iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Drives the reservoir with `inputs` starting from `x0` (zeros when `None`)
/// and records every state.
pub fn run_reservoir(model: &ScrModel, inputs: &[f64], x0: Option<&[f64]>) -> Result<StateMatrix> {
    if inputs.is_empty() {
        return Err(invalid("inputs must be non-empty"));
    }
    let n = model.n_nodes();
    let mut state = match x0 {
        Some(x) if x.len() != n => {
            return Err(Error::Shape {
                expected: n,
                got: x.len(),
            })
        }
        Some(x) => x.to_vec(),
        None => vec![0.0; n],
    };
    let mut design = DMatrix::zeros(n + 1, inputs.len());
    let mut scratch = Vec::with_capacity(n);
    for (t, &s) in inputs.iter().enumerate() {
        model.step(&mut state, s, &mut scratch);
        let mut col = design.column_mut(t);
        col[0] = 1.0;
        col.rows_mut(1, n).copy_from_slice(&state);
    }
    Ok(StateMatrix { design })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, w_in: f64, w: f64) -> ScrParams {
        ScrParams::new(n, w_in, w, 1e-6).unwrap()
    }

    #[test]
    fn zero_input_scaling_keeps_zero_state() {
        let m = build_scr(params(20, 0.0, 0.9)).unwrap();
        let s = run_reservoir(&m, &[0.3, -2.0, 5.0, 1.0], None).unwrap();
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn hand_evaluated_first_step() {
        let m = ScrModel::with_signs(params(2, 1.0, 0.0), vec![1.0, 1.0]).unwrap();
        let s = run_reservoir(&m, &[1.0], None).unwrap();
        assert_eq!(s.state(0), &[2f64.tanh(), 2f64.tanh()]);
    }

    #[test]
    fn signs_follow_pi_digits() {
        // 1 4 1 5 9 2 6
        assert_eq!(input_signs(7), vec![-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0]);
        let a = build_scr(params(50, 0.4, 0.5)).unwrap();
        let b = build_scr(params(50, 0.4, 0.5)).unwrap();
        assert_eq!(a, b);
        assert!(a.input_matrix().iter().all(|v| v.abs() == 0.4));
    }

    #[test]
    fn ring_matrix_matches_rotation() {
        let m = build_scr(params(5, 0.0, 0.7)).unwrap();
        let w = m.recurrent_matrix();
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        let dense = &w * nalgebra::DVector::from_column_slice(&x);
        let mut state = x.to_vec();
        m.step(&mut state, 0.0, &mut Vec::new());
        for i in 0..5 {
            assert!((state[i] - dense[i].tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_node_self_loop() {
        let m = build_scr(params(1, 0.0, 0.5)).unwrap();
        assert_eq!(m.recurrent_matrix()[(0, 0)], 0.5);
        let s = run_reservoir(&m, &[0.0, 0.0], Some(&[0.8])).unwrap();
        assert!((s.state(0)[0] - (0.4f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn point_round_trip() {
        let p = ScrParams::new(120, 0.3, 0.8, 1e-7).unwrap();
        assert_eq!(ScrParams::from_point(&p.to_point()).unwrap(), p);
        assert_eq!(ScrParams::from_point(&[99.6, 0.3, 0.8, 1e-7]).unwrap().n_nodes, 100);
        assert!(ScrParams::new(10, 1.5, 0.5, 0.0).is_err());
        assert!(ScrParams::new(0, 0.5, 0.5, 0.0).is_err());
    }
}
