use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cyclic_esn::bayesopt::{optimize_scr, BoConfig};
use cyclic_esn::bench::{
    report_csv, run_bo_vs_grid, run_cluster_sweep, write_cluster_outputs, write_sweep_csv, ExperimentConfig, Method,
    SeriesSpec,
};
use cyclic_esn::clustering::{fit_clusters, ClusterConfig};
use cyclic_esn::gridsearch::{grid_search_scr, GridSpec};
use cyclic_esn::io::{
    params_to_kv, read_manifest, read_series_file, read_time_value_csv, write_csv, write_exogenous_csv,
    write_series_csv, write_text,
};
use cyclic_esn::lightcurve::{bin_series, fold, savgol_filter, IrregularSeries};
use cyclic_esn::seriesgen::{gen_mackey_glass, gen_narma, gen_narma_saturated};
use cyclic_esn::{CvConfig, Error, Result, Task};

const OUTPUT_ENV: &str = "CYCLIC_ESN_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "cyclic-esn", version, about = "Simple cyclic reservoirs tuned by Bayesian optimisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark series as CSV.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Fold, bin and smooth an irregular light curve (`time,value` CSV).
    Prep {
        #[arg(long)]
        period: f64,
        #[arg(long, default_value_t = 500)]
        bins: usize,
        #[arg(long, default_value_t = 10)]
        periods: usize,
        #[arg(long, default_value_t = 11)]
        sg_window: usize,
        #[arg(long, default_value_t = 3)]
        sg_order: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Bayesian optimisation of SCR hyperparameters on one series.
    Optimize {
        #[command(flatten)]
        fit: FitArgs,
        /// TOML file with acquisition settings (keys of the `[bo]` table).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_evals: Option<usize>,
        #[arg(long)]
        n_init: Option<usize>,
        #[arg(long)]
        target: Option<f64>,
    },
    /// Exhaustive search over the 1500-cell reference grid on one series.
    Grid {
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Paired BO-versus-grid comparison over repetitions.
    Compare {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Fuzzy clustering of the series listed in a manifest.
    Cluster {
        #[arg(short = 'C', long = "C", alias = "clusters")]
        clusters: usize,
        #[arg(long, default_value_t = 25)]
        round_budget: usize,
        #[arg(long, default_value_t = 20)]
        max_iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        washout: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        manifest: PathBuf,
        outdir: Option<PathBuf>,
    },
    /// Validation error against the number of clusters.
    ClusterSweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated cluster counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,6")]
        clusters: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum GenKind {
    MackeyGlass {
        #[arg(long, default_value_t = 30.0)]
        tau: f64,
        #[arg(long, default_value_t = 1500)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        output: PathBuf,
    },
    Narma {
        #[arg(long, default_value_t = 10)]
        order: usize,
        /// Pass each update through tanh (bounded for high orders).
        #[arg(long)]
        saturated: bool,
        #[arg(long, default_value_t = 1500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        output: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Series CSV with header `t,value` or `t,input,target`.
    series: PathBuf,
    /// Rows used for fitting (default: all).
    #[arg(long)]
    train_len: Option<usize>,
    #[arg(long, default_value_t = 100)]
    washout: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Output directory (default: $CYCLIC_ESN_OUTPUT_DIR or ./cyclic-esn-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset: `mackey-glass[:tau]`, `narmaN`, `tanh-narmaN` or a CSV path.
    /// Repeatable.
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output_dir(explicit: Option<PathBuf>, config: Option<&ExperimentConfig>) -> PathBuf {
    explicit
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cyclic-esn-out"))
}

fn parse_dataset(s: &str, samples: Option<usize>) -> Result<SeriesSpec> {
    let n_samples = samples.unwrap_or(1500);
    if let Some(tau) = s.strip_prefix("mackey-glass") {
        let tau = if tau.is_empty() {
            30.0
        } else {
            tau.trim_start_matches([':', '-'])
                .parse()
                .map_err(|_| Error::Config(format!("bad Mackey-Glass delay in {s:?}")))?
        };
        return Ok(SeriesSpec::MackeyGlass {
            tau,
            noise: 0.05,
            n_samples,
        });
    }
    let (saturated, rest) = match s.strip_prefix("tanh-") {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if let Some(order) = rest.strip_prefix("narma") {
        let order = order
            .parse()
            .map_err(|_| Error::Config(format!("bad NARMA order in {s:?}")))?;
        return Ok(SeriesSpec::Narma {
            order,
            n_samples,
            saturated,
        });
    }
    Ok(SeriesSpec::Csv { path: PathBuf::from(s) })
}

fn experiment(args: &ExperimentArgs, method: Method) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.method = method;
    if !args.datasets.is_empty() {
        cfg.datasets = args
            .datasets
            .iter()
            .map(|d| parse_dataset(d, args.samples))
            .collect::<Result<_>>()?;
    }
    if let Some(r) = args.reps {
        cfg = cfg.with_repetitions(r, args.first_seed);
    }
    if let Some(c) = args.copies {
        cfg.copies = c;
    }
    if let Some(m) = args.max_evals {
        cfg.bo.max_evals = m;
    }
    Ok(cfg)
}

fn load_task(fit: &FitArgs) -> Result<(Task, CvConfig)> {
    let task = read_series_file(&fit.series)?.to_task()?.standardized()?;
    let task = match fit.train_len {
        Some(n) => task.prefix(n)?,
        None => task,
    };
    Ok((task, CvConfig::new(fit.folds, fit.washout)?))
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { kind } => match kind {
            GenKind::MackeyGlass {
                tau,
                samples,
                noise,
                seed,
                output,
            } => {
                write_series_csv(&output, &gen_mackey_glass(tau, samples, noise, seed)?)?;
                announce(&[output]);
            }
            GenKind::Narma {
                order,
                saturated,
                samples,
                seed,
                output,
            } => {
                let (s, y) = if saturated {
                    gen_narma_saturated(order, samples, seed)?
                } else {
                    gen_narma(order, samples, seed)?
                };
                write_exogenous_csv(&output, &s, &y)?;
                announce(&[output]);
            }
        },
        Command::Prep {
            period,
            bins,
            periods,
            sg_window,
            sg_order,
            input,
            output,
        } => {
            let (t, v) = read_time_value_csv(&input)?;
            let folded = fold(&IrregularSeries::new(t, v)?, period)?;
            let binned = bin_series(&folded, bins, periods)?;
            write_series_csv(&output, &savgol_filter(&binned, sg_window, sg_order)?)?;
            announce(&[output]);
        }
        Command::Optimize {
            fit,
            config,
            seed,
            max_evals,
            n_init,
            target,
        } => {
            let (task, cv) = load_task(&fit)?;
            let mut bo = match config {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Config(e.to_string()))?,
                None => BoConfig::default(),
            };
            bo.seed = seed.unwrap_or(bo.seed);
            bo.max_evals = max_evals.unwrap_or(bo.max_evals);
            bo.n_init = n_init.unwrap_or(bo.n_init);
            bo.target_value = target.or(bo.target_value);
            let (best, result) = optimize_scr(&task, &cv, &bo)?;
            let dir = output_dir(fit.out, None);
            let history = dir.join("bo_history.csv");
            write_csv(
                &history,
                &["eval_index", "n_nodes", "w_in", "w", "lambda", "value", "failed"],
                result.history.iter().map(|e| {
                    std::iter::once(e.eval_index.to_string())
                        .chain(e.point.iter().map(|x| x.to_string()))
                        .chain([e.value.to_string(), e.failed.to_string()])
                        .collect::<Vec<_>>()
                }),
            )?;
            let params = dir.join("best_params.txt");
            write_text(&params, &params_to_kv(&best, None))?;
            eprintln!(
                "{}",
                json!({"evals": result.evals(), "best_value": result.best_value, "stop_reason": result.stop_reason.as_str()})
            );
            announce(&[history, params]);
        }
        Command::Grid { fit } => {
            let (task, cv) = load_task(&fit)?;
            let result = grid_search_scr(&task, &cv, &GridSpec::standard())?;
            let dir = output_dir(fit.out, None);
            let table = dir.join("grid_table.csv");
            write_csv(
                &table,
                &["n_nodes", "w_in", "w", "lambda", "value"],
                result.table.iter().map(|(p, v)| {
                    [
                        p.n_nodes.to_string(),
                        p.w_in.to_string(),
                        p.w.to_string(),
                        p.lambda.to_string(),
                        v.to_string(),
                    ]
                }),
            )?;
            let params = dir.join("best_params.txt");
            write_text(&params, &params_to_kv(&result.best, None))?;
            eprintln!("{}", json!({"cells": result.table.len(), "best_value": result.best_value}));
            announce(&[table, params]);
        }
        Command::Compare { exp } => {
            let cfg = experiment(&exp, Method::Bo)?;
            let report = run_bo_vs_grid(&cfg)?;
            announce(&report_csv(&report, &output_dir(exp.out.clone(), Some(&cfg)))?);
        }
        Command::Cluster {
            clusters,
            round_budget,
            max_iterations,
            seed,
            washout,
            folds,
            manifest,
            outdir,
        } => {
            let paths = read_manifest(&manifest)?;
            let tasks = paths
                .iter()
                .map(|p| read_series_file(p)?.to_task())
                .collect::<Result<Vec<_>>>()?;
            let config = ClusterConfig {
                clusters,
                round_budget,
                max_iterations,
                seed,
                bo: BoConfig::default(),
            };
            let state = fit_clusters(&tasks, &config, &CvConfig::new(folds, washout)?)?;
            let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
            announce(&write_cluster_outputs(&state, &names, &output_dir(outdir, None))?);
        }
        Command::ClusterSweep { exp, clusters } => {
            let cfg = experiment(&exp, Method::ClusterSweep)?;
            let report = run_cluster_sweep(&cfg, &clusters)?;
            let path = output_dir(exp.out.clone(), Some(&cfg)).join("cluster_sweep.csv");
            write_sweep_csv(&path, &report)?;
            announce(&[path]);
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({"error": kind, "message": message}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}

