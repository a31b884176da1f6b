//! Exhaustive search over a Cartesian hyperparameter grid.

use crate::cv::{CvEvaluator, Task};
use crate::error::{invalid, Result};
use crate::scr::ScrParams;
use crate::CvConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_nodes: Vec<usize>,
    pub w_in: Vec<f64>,
    pub w: Vec<f64>,
    pub lambda: Vec<f64>,
}

pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    end
                } else {
                    start + (end - start) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

impl GridSpec {
    /// The 1500-cell reference grid: `N` in {50, 100, 200}, ten evenly spaced
    /// values of `w_in` and `w` on [0.01, 0.95], five log-spaced `lambda`
    /// values on [1e-12, 1e-2].
    pub fn standard() -> Self {
        Self {
            n_nodes: vec![50, 100, 200],
            w_in: linspace(0.01, 0.95, 10),
            w: linspace(0.01, 0.95, 10),
            lambda: linspace(-12.0, -2.0, 5).into_iter().map(|e| 10f64.powf(e)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_nodes.len() * self.w_in.len() * self.w.len() * self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in `N`-major order, then `w_in`, `w`, `lambda`.
    pub fn cells(&self) -> impl Iterator<Item = ScrParams> + '_ {
        self.n_nodes.iter().flat_map(move |&n| {
            self.w_in.iter().flat_map(move |&wi| {
                self.w.iter().flat_map(move |&w| {
                    self.lambda.iter().map(move |&l| ScrParams {
                        n_nodes: n,
                        w_in: wi,
                        w,
                        lambda: l,
                    })
                })
            })
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(invalid("grid has no cells"));
        }
        self.cells().try_for_each(|p| p.validate())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: ScrParams,
    pub best_value: f64,
    /// Every cell in grid order; failed cells hold `+inf`.
    pub table: Vec<(ScrParams, f64)>,
}

/// Evaluates `objective` on every cell. Ties keep the earliest cell.
pub fn grid_search<F>(mut objective: F, grid: &GridSpec) -> Result<GridResult>
where
    F: FnMut(&ScrParams) -> Result<f64>,
{
    grid.validate()?;
    let table: Vec<(ScrParams, f64)> = grid
        .cells()
        .map(|p| {
            let v = objective(&p).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);
            (p, v)
        })
        .collect();
    let (best, best_value) = table
        .iter()
        .fold(None::<&(ScrParams, f64)>, |acc, cell| match acc {
            Some(b) if b.1 <= cell.1 => Some(b),
            _ => Some(cell),
        })
        .cloned()
        .expect("non-empty grid");
    Ok(GridResult {
        best,
        best_value,
        table,
    })
}

/// Grid search of the cross-validated SCR objective on one task.
pub fn grid_search_scr(task: &Task, cv: &CvConfig, grid: &GridSpec) -> Result<GridResult> {
    let mut evaluator = CvEvaluator::new(task.clone(), *cv)?;
    grid_search(|p| evaluator.evaluate(p), grid)
}
