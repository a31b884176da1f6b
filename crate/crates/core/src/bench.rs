//! Experiment harness: paired BO-versus-grid comparisons, cluster-count
//! sweeps and their CSV reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayesopt::{derive_seed, optimize_scr, BoConfig, BoResult, StopReason};
use crate::clustering::{fit_clusters, ClusterConfig, ClusterState};
use crate::cv::{holdout_score, CvConfig, Task};
use crate::error::{Error, Result};
use crate::gridsearch::{grid_search_scr, GridResult, GridSpec};
use crate::io::{read_series_file, write_csv, SeriesFile};
use crate::scr::ScrParams;
use crate::series::standardize_values;
use crate::seriesgen::{gen_mackey_glass, gen_narma, gen_narma_saturated};

const NARMA_ATTEMPTS: u64 = 20;

fn default_samples() -> usize {
    1500
}

fn default_noise() -> f64 {
    0.05
}

/// One source of series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesSpec {
    MackeyGlass {
        tau: f64,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default = "default_samples")]
        n_samples: usize,
    },
    Narma {
        order: usize,
        #[serde(default = "default_samples")]
        n_samples: usize,
        /// Use the tanh-saturated recurrence.
        #[serde(default)]
        saturated: bool,
    },
    Csv {
        path: PathBuf,
    },
}

/// A standardized task plus the number of leading rows used for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub task: Task,
    pub train_rows: usize,
}

impl SeriesSpec {
    pub fn label(&self) -> String {
        match self {
            SeriesSpec::MackeyGlass { tau, .. } => format!("mackey_glass_tau{tau}"),
            SeriesSpec::Narma { order, saturated: false, .. } => format!("narma{order}"),
            SeriesSpec::Narma { order, saturated: true, .. } => format!("tanh_narma{order}"),
            SeriesSpec::Csv { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    fn narma(order: usize, saturated: bool, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let generate = if saturated { gen_narma_saturated } else { gen_narma };
        let mut last = None;
        for attempt in 0..NARMA_ATTEMPTS {
            let s = if attempt == 0 { seed } else { derive_seed(seed, 7, attempt) };
            match generate(order, n, s) {
                Ok((u, y)) => return Ok((u.into_values(), y.into_values())),
                Err(e @ Error::DivergedRealization { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn read(path: &Path) -> Result<SeriesFile> {
        read_series_file(path)
    }

    /// Standardized task for the comparison protocol. Univariate series
    /// become one-step-ahead tasks; NARMA keeps its exogenous input.
    pub fn realize(&self, seed: u64, train_len: usize, test_len: usize) -> Result<Realization> {
        let total = train_len + test_len;
        let univariate = |values: &[f64]| -> Result<Realization> {
            let (z, _, _) = standardize_values(values)?;
            Ok(Realization {
                task: Task::one_step_ahead(&z)?,
                train_rows: train_len - 1,
            })
        };
        let exogenous = |u: &[f64], y: &[f64]| -> Result<Realization> {
            let (u, _, _) = standardize_values(u)?;
            let (y, _, _) = standardize_values(y)?;
            Ok(Realization {
                task: Task::new(u, y)?,
                train_rows: train_len,
            })
        };
        let r = match self {
            SeriesSpec::MackeyGlass { tau, noise, .. } => {
                univariate(gen_mackey_glass(*tau, total, *noise, seed)?.values())?
            }
            SeriesSpec::Narma { order, saturated, .. } => {
                let (u, y) = Self::narma(*order, *saturated, total, seed)?;
                exogenous(&u, &y)?
            }
            SeriesSpec::Csv { path } => match Self::read(path)? {
                SeriesFile::Univariate(s) => univariate(&s.values()[..total.min(s.len())])?,
                SeriesFile::Exogenous { inputs, targets } => {
                    let n = total.min(targets.len());
                    exogenous(&inputs.values()[..n], &targets.values()[..n])?
                }
            },
        };
        if r.train_rows + 2 > r.task.len() {
            return Err(Error::Config(format!(
                "{}: {} rows cannot hold {} training rows and a test split",
                self.label(),
                r.task.len(),
                r.train_rows
            )));
        }
        Ok(r)
    }

    /// Standardized univariate series (NARMA contributes its output only).
    pub fn realize_series(&self, seed: u64) -> Result<Vec<f64>> {
        let raw = match self {
            SeriesSpec::MackeyGlass { tau, noise, n_samples } => {
                gen_mackey_glass(*tau, *n_samples, *noise, seed)?.into_values()
            }
            SeriesSpec::Narma {
                order,
                n_samples,
                saturated,
            } => Self::narma(*order, *saturated, *n_samples, seed)?.1,
            SeriesSpec::Csv { path } => match Self::read(path)? {
                SeriesFile::Univariate(s) => s.into_values(),
                SeriesFile::Exogenous { targets, .. } => targets.into_values(),
            },
        };
        Ok(standardize_values(&raw)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bo,
    Grid,
    ClusterSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<SeriesSpec>,
    pub method: Method,
    pub repetitions: usize,
    pub seeds: Vec<u64>,
    pub train_len: usize,
    pub test_len: usize,
    pub cv: CvConfig,
    pub bo: BoConfig,
    /// Series drawn per source in a cluster sweep.
    pub copies: usize,
    pub clusters: Vec<usize>,
    pub round_budget: usize,
    pub max_iterations: usize,
    /// Evaluation budget of each per-series reference optimisation.
    pub individual_budget: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            method: Method::Bo,
            repetitions: 1,
            seeds: vec![0],
            train_len: 1000,
            test_len: 500,
            cv: CvConfig::default(),
            bo: BoConfig::default(),
            copies: 3,
            clusters: vec![1, 2, 3, 4, 6],
            round_budget: 25,
            max_iterations: 20,
            individual_budget: 100,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Seeds `0..n` for `n` repetitions.
    pub fn with_repetitions(mut self, n: usize, first_seed: u64) -> Self {
        self.repetitions = n;
        self.seeds = (first_seed..first_seed + n as u64).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no dataset configured".into()));
        }
        if self.repetitions != self.seeds.len() {
            return Err(Error::Config(format!(
                "repetitions ({}) must equal the number of seeds ({})",
                self.repetitions,
                self.seeds.len()
            )));
        }
        for d in &self.datasets {
            if let SeriesSpec::Csv { path } = d {
                if !path.is_file() {
                    return Err(Error::Config(format!("dataset file {} does not exist", path.display())));
                }
            }
        }
        if self.train_len <= self.cv.washout + self.cv.k_folds || self.test_len < 2 {
            return Err(Error::Config("train/test lengths too short for the CV settings".into()));
        }
        self.bo.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub dataset: String,
    pub method: String,
    pub evals: usize,
    pub test_nmse: f64,
    pub seed: u64,
}

/// Per-repetition diagnostics of a paired comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonDetail {
    pub dataset: String,
    pub seed: u64,
    pub grid_cv: f64,
    pub bo_cv: f64,
    pub bo_evals: usize,
    pub stop_reason: StopReason,
    /// BO reached the grid's cross-validation error.
    pub matched: bool,
    pub grid_params: ScrParams,
    pub bo_params: ScrParams,
    pub grid_test_nmse: f64,
    pub bo_test_nmse: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub details: Vec<ComparisonDetail>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub repetitions: usize,
    pub evals_mean: f64,
    pub evals_sd: f64,
    pub test_nmse_mean: f64,
    pub test_nmse_sd: f64,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

impl ComparisonReport {
    /// Means and sample standard deviations per (dataset, method), in order
    /// of first appearance.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let k = (r.dataset.clone(), r.method.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(dataset, method)| {
                let sel: Vec<&ComparisonRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.dataset == dataset && r.method == method)
                    .collect();
                let evals: Vec<f64> = sel.iter().map(|r| r.evals as f64).collect();
                let nmse: Vec<f64> = sel.iter().map(|r| r.test_nmse).collect();
                let (evals_mean, evals_sd) = mean_sd(&evals);
                let (test_nmse_mean, test_nmse_sd) = mean_sd(&nmse);
                SummaryRow {
                    dataset,
                    method,
                    repetitions: sel.len(),
                    evals_mean,
                    evals_sd,
                    test_nmse_mean,
                    test_nmse_sd,
                }
            })
            .collect()
    }
}

/// Result of one paired repetition on one realization.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub grid: GridResult,
    pub bo: BoResult,
    pub detail: ComparisonDetail,
}

pub fn run_paired(spec: &SeriesSpec, seed: u64, config: &ExperimentConfig) -> Result<PairedRun> {
    let r = spec.realize(seed, config.train_len, config.test_len)?;
    let train = r.task.prefix(r.train_rows)?;
    let grid = grid_search_scr(&train, &config.cv, &GridSpec::standard())?;
    let bo_cfg = BoConfig {
        target_value: Some(grid.best_value),
        seed,
        ..config.bo.clone()
    };
    let (bo_params, bo) = optimize_scr(&train, &config.cv, &bo_cfg)?;
    let washout = config.cv.washout;
    let grid_test = holdout_score(&grid.best, &r.task, r.train_rows, washout)?.nmse;
    let bo_test = holdout_score(&bo_params, &r.task, r.train_rows, washout)?.nmse;
    let detail = ComparisonDetail {
        dataset: spec.label(),
        seed,
        grid_cv: grid.best_value,
        bo_cv: bo.best_value,
        bo_evals: bo.evals(),
        stop_reason: bo.stop_reason,
        matched: bo.best_value <= grid.best_value,
        grid_params: grid.best,
        bo_params,
        grid_test_nmse: grid_test,
        bo_test_nmse: bo_test,
    };
    Ok(PairedRun { grid, bo, detail })
}

/// Paired BO-versus-grid comparison over every dataset and seed.
pub fn run_bo_vs_grid(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    if config.method != Method::Bo {
        return Err(Error::Config("comparison needs method = \"bo\"".into()));
    }
    let grid_evals = GridSpec::standard().len();
    let mut report = ComparisonReport::default();
    for spec in &config.datasets {
        for &seed in &config.seeds {
            let d = run_paired(spec, seed, config)?.detail;
            report.rows.push(ComparisonRow {
                dataset: d.dataset.clone(),
                method: "bo".into(),
                evals: d.bo_evals,
                test_nmse: d.bo_test_nmse,
                seed,
            });
            report.rows.push(ComparisonRow {
                dataset: d.dataset.clone(),
                method: "grid".into(),
                evals: grid_evals,
                test_nmse: d.grid_test_nmse,
                seed,
            });
            report.details.push(d);
        }
    }
    Ok(report)
}

pub const COMPARISON_HEADER: [&str; 5] = ["dataset", "method", "evals", "test_nmse", "seed"];

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    write_csv(
        path,
        &COMPARISON_HEADER,
        rows.iter().map(|r| {
            [
                r.dataset.clone(),
                r.method.clone(),
                r.evals.to_string(),
                r.test_nmse.to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse(format!("missing field {name}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad value for {name}")))
}

pub fn parse_comparison_csv(text: &str) -> Result<Vec<ComparisonRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != COMPARISON_HEADER {
        return Err(Error::Parse(format!("unexpected header {}", header.join(","))));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(ComparisonRow {
                dataset: parse_field(rec.get(0), "dataset")?,
                method: parse_field(rec.get(1), "method")?,
                evals: parse_field(rec.get(2), "evals")?,
                test_nmse: parse_field(rec.get(3), "test_nmse")?,
                seed: parse_field(rec.get(4), "seed")?,
            })
        })
        .collect()
}

pub fn write_details_csv(path: &Path, details: &[ComparisonDetail]) -> Result<()> {
    write_csv(
        path,
        &[
            "dataset",
            "seed",
            "grid_cv",
            "bo_cv",
            "bo_evals",
            "stop_reason",
            "matched",
            "grid_n_nodes",
            "grid_w_in",
            "grid_w",
            "grid_lambda",
            "bo_n_nodes",
            "bo_w_in",
            "bo_w",
            "bo_lambda",
            "grid_test_nmse",
            "bo_test_nmse",
        ],
        details.iter().map(|d| {
            let g = d.grid_params;
            let b = d.bo_params;
            vec![
                d.dataset.clone(),
                d.seed.to_string(),
                d.grid_cv.to_string(),
                d.bo_cv.to_string(),
                d.bo_evals.to_string(),
                d.stop_reason.as_str().to_string(),
                d.matched.to_string(),
                g.n_nodes.to_string(),
                g.w_in.to_string(),
                g.w.to_string(),
                g.lambda.to_string(),
                b.n_nodes.to_string(),
                b.w_in.to_string(),
                b.w.to_string(),
                b.lambda.to_string(),
                d.grid_test_nmse.to_string(),
                d.bo_test_nmse.to_string(),
            ]
        }),
    )
}

pub fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    write_csv(
        path,
        &[
            "dataset",
            "method",
            "repetitions",
            "evals_mean",
            "evals_sd",
            "test_nmse_mean",
            "test_nmse_sd",
        ],
        summary.iter().map(|s| {
            [
                s.dataset.clone(),
                s.method.clone(),
                s.repetitions.to_string(),
                s.evals_mean.to_string(),
                s.evals_sd.to_string(),
                s.test_nmse_mean.to_string(),
                s.test_nmse_sd.to_string(),
            ]
        }),
    )
}

/// Writes `comparison.csv`, `comparison_details.csv` and
/// `comparison_summary.csv` into `dir`.
pub fn report_csv(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let paths = [
        dir.join("comparison.csv"),
        dir.join("comparison_details.csv"),
        dir.join("comparison_summary.csv"),
    ];
    write_comparison_csv(&paths[0], &report.rows)?;
    write_details_csv(&paths[1], &report.details)?;
    write_summary_csv(&paths[2], &report.summary())?;
    Ok(paths.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Clustered,
    Global,
    Individual,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::Clustered => "clustered",
            SweepKind::Global => "global",
            SweepKind::Individual => "individual",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clustered" => Ok(Self::Clustered),
            "global" => Ok(Self::Global),
            "individual" => Ok(Self::Individual),
            other => Err(Error::Parse(format!("unknown sweep kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Number of models: `C` for clustered and global rows, the series count
    /// for the per-series reference.
    pub clusters: usize,
    pub kind: SweepKind,
    pub mean_validation_error: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn curve(&self, seed: u64) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.seed == seed && r.kind == SweepKind::Clustered)
            .map(|r| (r.clusters, r.mean_validation_error))
            .collect()
    }

    pub fn reference(&self, seed: u64, kind: SweepKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.seed == seed && r.kind == kind)
            .map(|r| r.mean_validation_error)
    }
}

/// Standardized one-step-ahead tasks: `copies` realizations of each source.
pub fn sweep_dataset(config: &ExperimentConfig, seed: u64) -> Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for (s, spec) in config.datasets.iter().enumerate() {
        for c in 0..config.copies {
            let values = spec.realize_series(derive_seed(seed, 1000 + s as u64, c as u64))?;
            tasks.push(Task::one_step_ahead(&values)?);
        }
    }
    Ok(tasks)
}

pub fn cluster_config(config: &ExperimentConfig, clusters: usize, seed: u64) -> ClusterConfig {
    ClusterConfig {
        clusters,
        round_budget: config.round_budget,
        max_iterations: config.max_iterations,
        seed: derive_seed(seed, 2000, clusters as u64),
        bo: config.bo.clone(),
    }
}

/// Mean per-series CV error of one BO-tuned SCR per series.
pub fn individual_reference(tasks: &[Task], config: &ExperimentConfig, seed: u64) -> Result<f64> {
    let budget = config.individual_budget.max(3);
    let mut total = 0.0;
    for (i, t) in tasks.iter().enumerate() {
        let bo = BoConfig {
            n_init: (budget / 2).min(config.bo.n_init).max(2),
            max_evals: budget,
            target_value: None,
            seed: derive_seed(seed, 3000, i as u64),
            ..config.bo.clone()
        };
        total += optimize_scr(&t.standardized()?, &config.cv, &bo)?.1.best_value;
    }
    Ok(total / tasks.len() as f64)
}

/// Mean validation error per series against the number of clusters, with
/// the single-model and one-model-per-series references.
pub fn run_cluster_sweep(config: &ExperimentConfig, c_values: &[usize]) -> Result<SweepReport> {
    config.validate()?;
    let mut report = SweepReport::default();
    for &seed in &config.seeds {
        let tasks = sweep_dataset(config, seed)?;
        let n = tasks.len();
        if let Some(&c) = c_values.iter().find(|&&c| c == 0 || c > n) {
            return Err(Error::Config(format!("cluster count {c} must be in 1..={n}")));
        }
        let mut global = None;
        for &c in c_values {
            let state = fit_clusters(&tasks, &cluster_config(config, c, seed), &config.cv)?;
            let e = state.e_l() / n as f64;
            if c == 1 {
                global = Some(e);
            }
            report.rows.push(SweepRow {
                clusters: c,
                kind: SweepKind::Clustered,
                mean_validation_error: e,
                seed,
            });
        }
        let global = match global {
            Some(g) => g,
            None => fit_clusters(&tasks, &cluster_config(config, 1, seed), &config.cv)?.e_l() / n as f64,
        };
        report.rows.push(SweepRow {
            clusters: 1,
            kind: SweepKind::Global,
            mean_validation_error: global,
            seed,
        });
        report.rows.push(SweepRow {
            clusters: n,
            kind: SweepKind::Individual,
            mean_validation_error: individual_reference(&tasks, config, seed)?,
            seed,
        });
    }
    Ok(report)
}

pub const SWEEP_HEADER: [&str; 4] = ["clusters", "kind", "mean_validation_error", "seed"];

pub fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<()> {
    write_csv(
        path,
        &SWEEP_HEADER,
        report.rows.iter().map(|r| {
            [
                r.clusters.to_string(),
                r.kind.as_str().to_string(),
                r.mean_validation_error.to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn parse_sweep_csv(text: &str) -> Result<SweepReport> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(Error::Parse(format!("unexpected header {}", header.join(","))));
    }
    let rows = reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(SweepRow {
                clusters: parse_field(rec.get(0), "clusters")?,
                kind: parse_field(rec.get(1), "kind")?,
                mean_validation_error: parse_field(rec.get(2), "mean_validation_error")?,
                seed: parse_field(rec.get(3), "seed")?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport { rows })
}

/// Writes memberships, the stopping-metric history and the per-cluster
/// parameters of a clustering run into `dir`.
pub fn write_cluster_outputs(state: &ClusterState, names: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    let c = state.cluster_params.len();
    let mut header = vec!["series".to_string()];
    header.extend((0..c).map(|k| format!("cluster_{k}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let paths = [
        dir.join("memberships.csv"),
        dir.join("e_history.csv"),
        dir.join("cluster_params.txt"),
    ];
    write_csv(
        &paths[0],
        &header_refs,
        state.memberships.iter().zip(names).map(|(row, name)| {
            std::iter::once(name.clone())
                .chain(row.iter().map(|m| m.to_string()))
                .collect::<Vec<_>>()
        }),
    )?;
    write_csv(
        &paths[1],
        &["iteration", "e_l", "selected"],
        state.e_history.iter().enumerate().map(|(i, e)| {
            [i.to_string(), e.to_string(), (i == state.iteration).to_string()]
        }),
    )?;
    let text: String = state
        .cluster_params
        .iter()
        .enumerate()
        .map(|(k, p)| crate::io::params_to_kv(p, Some(&format!("cluster.{k}"))))
        .collect();
    crate::io::write_text(&paths[2], &text)?;
    Ok(paths.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_sample() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_sd(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn comparison_round_trip() {
        let rows = vec![
            ComparisonRow {
                dataset: "narma10".into(),
                method: "bo".into(),
                evals: 143,
                test_nmse: 0.006_512_345_678_901_234,
                seed: 3,
            },
            ComparisonRow {
                dataset: "narma10".into(),
                method: "grid".into(),
                evals: 1500,
                test_nmse: 1.0 / 3.0,
                seed: 3,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_comparison_csv(&p, &rows).unwrap();
        assert_eq!(parse_comparison_csv(&std::fs::read_to_string(&p).unwrap()).unwrap(), rows);
        write_comparison_csv(&p, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "dataset,method,evals,test_nmse,seed\n");
    }

    #[test]
    fn config_toml() {
        let text = r#"
            repetitions = 2
            seeds = [4, 5]
            [[datasets]]
            kind = "narma"
            order = 10
            [bo]
            max_evals = 200
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.datasets, vec![SeriesSpec::Narma {
                order: 10,
                n_samples: 1500,
                saturated: false
            }]);
        assert_eq!(c.bo.max_evals, 200);
        assert_eq!(c.bo.n_init, 50);
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let bad = ExperimentConfig { repetitions: 3, ..c };
        assert!(bad.validate().is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }
}
