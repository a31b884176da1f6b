//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-4 are stochastic benchmark bands and are reported without
//! failing the process; criteria 5-10 gate the exit status.
//! `ACCEPTANCE_REPS` overrides the repetition count of criteria 1-3.

mod common;

use std::time::Instant;

use common::*;
use cyclic_esn::bayesopt::lhs_unit;
use cyclic_esn::bench::{
    report_csv, run_bo_vs_grid, run_cluster_sweep, run_paired, write_sweep_csv, ComparisonDetail, ExperimentConfig,
    Method, SeriesSpec, SweepKind,
};
use cyclic_esn::clustering::{memberships, stopping_metric};
use cyclic_esn::gp::{gp_fit, GpHyper, GpModel};
use cyclic_esn::gridsearch::GridSpec;
use cyclic_esn::*;
use rand::Rng;

struct Outcome {
    id: u32,
    pass: bool,
    gating: bool,
    summary: String,
}

fn report(id: u32, gating: bool, pass: bool, summary: String, started: Instant) -> Outcome {
    println!(
        "criterion {id}: {} {summary} ({:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    Outcome {
        id,
        pass,
        gating,
        summary,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn benchmark_runs(spec: &SeriesSpec, reps: u64) -> Vec<ComparisonDetail> {
    let config = ExperimentConfig::default();
    (0..reps)
        .map(|seed| {
            let started = Instant::now();
            let run = run_paired(spec, seed, &config).expect("paired run");
            let d = run.detail;
            eprintln!(
                "  {} seed {seed}: bo {} evals ({}), test nmse bo {:.5} grid {:.5} [{:.1}s]",
                d.dataset,
                d.bo_evals,
                d.stop_reason.as_str(),
                d.bo_test_nmse,
                d.grid_test_nmse,
                started.elapsed().as_secs_f64()
            );
            d
        })
        .collect()
}

fn criteria_1_to_3(reps: u64) -> Vec<Outcome> {
    let t = Instant::now();
    let narma = benchmark_runs(
        &SeriesSpec::Narma {
            order: 10,
            n_samples: 1500,
            saturated: false,
        },
        reps,
    );
    let narma_nmse = mean(&narma.iter().map(|d| d.bo_test_nmse).collect::<Vec<_>>());
    let c1 = report(
        1,
        false,
        (0.004..=0.012).contains(&narma_nmse),
        format!(
            "NARMA-10 BO test NMSE mean {narma_nmse:.5} over {reps} reps (band [0.004, 0.012]; grid mean {:.5})",
            mean(&narma.iter().map(|d| d.grid_test_nmse).collect::<Vec<_>>())
        ),
        t,
    );

    let t = Instant::now();
    let mg = benchmark_runs(
        &SeriesSpec::MackeyGlass {
            tau: 30.0,
            noise: 0.05,
            n_samples: 1500,
        },
        reps,
    );
    let mg_nmse = mean(&mg.iter().map(|d| d.bo_test_nmse).collect::<Vec<_>>());
    let c2 = report(
        2,
        false,
        (0.02..=0.06).contains(&mg_nmse),
        format!(
            "Mackey-Glass tau=30 BO test NMSE mean {mg_nmse:.5} over {reps} reps (band [0.02, 0.06]; grid mean {:.5})",
            mean(&mg.iter().map(|d| d.grid_test_nmse).collect::<Vec<_>>())
        ),
        t,
    );

    let t = Instant::now();
    let evals = |runs: &[ComparisonDetail]| mean(&runs.iter().map(|d| d.bo_evals as f64).collect::<Vec<_>>());
    let matched = |runs: &[ComparisonDetail]| runs.iter().filter(|d| d.matched).count();
    let (en, em) = (evals(&narma), evals(&mg));
    let c3 = report(
        3,
        false,
        en <= 400.0 && em <= 400.0,
        format!(
            "mean BO evals to match grid: NARMA-10 {en:.1} ({}/{reps} matched, {:.1}x), Mackey-Glass {em:.1} ({}/{reps} matched, {:.1}x); limit 400",
            matched(&narma),
            1500.0 / en,
            matched(&mg),
            1500.0 / em
        ),
        t,
    );
    vec![c1, c2, c3]
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mg = |tau| SeriesSpec::MackeyGlass {
        tau,
        noise: 0.0,
        n_samples: 1000,
    };
    let narma = |order, saturated| SeriesSpec::Narma {
        order,
        n_samples: 1000,
        saturated,
    };
    let config = ExperimentConfig {
        datasets: vec![narma(10, false), narma(20, true), mg(17.0), mg(30.0)],
        method: Method::ClusterSweep,
        ..ExperimentConfig::default()
    };
    let clusters = [1, 2, 3, 4, 6];
    let sweep = run_cluster_sweep(&config, &clusters).expect("cluster sweep");
    let curve = sweep.curve(0);
    let at = |c: usize| curve.iter().find(|(k, _)| *k == c).map(|(_, e)| *e).unwrap();
    let reference = sweep.reference(0, SweepKind::Individual).unwrap();
    let decreasing = (1..4).all(|c| at(c + 1) < at(c));
    let close = (at(4) - reference).abs() <= 0.15 * reference;
    let plateau = (at(4) - at(6)) / at(4) < 0.05;
    let points: Vec<String> = curve.iter().map(|(c, e)| format!("C={c}:{e:.3}")).collect();
    report(
        4,
        false,
        decreasing && close && plateau,
        format!(
            "sweep {} | per-series reference {reference:.3}; decreasing to C=4 {decreasing}, within 15% {close}, C>4 gain < 5% {plateau}",
            points.join(" ")
        ),
        t,
    )
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for (i, &w) in [0.3, 0.6, 0.9].iter().enumerate() {
        for seed in 0..5u64 {
            let mut r = rng(500 + 10 * i as u64 + seed);
            let n = r.random_range(5..60);
            let model = build_scr(ScrParams::new(n, r.random_range(0.05..1.0), w, 0.0).unwrap()).unwrap();
            let inputs: Vec<f64> = (0..200).map(|_| r.random_range(-2.0..2.0)).collect();
            let x0: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let a = run_reservoir(&model, &inputs, None).unwrap();
            let b = run_reservoir(&model, &inputs, Some(&x0)).unwrap();
            let dist = |t: usize| {
                a.state(t)
                    .iter()
                    .zip(b.state(t))
                    .map(|(p, q)| (p - q).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            for step in 1..inputs.len() {
                let (prev, next) = (dist(step - 1), dist(step));
                // Below ~1e-9 the gap is dominated by round-off in tanh.
                if prev > 1e-9 {
                    let excess = next / prev - w;
                    worst = worst.max(excess);
                    pass &= excess <= 1e-6;
                }
            }
        }
    }
    report(
        5,
        true,
        pass,
        format!("max per-step contraction rate minus w: {worst:.3e} (limit 1e-6)"),
        t,
    )
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut r = rng(600 + seed);
        let n = r.random_range(3..15);
        let len = r.random_range(30..80);
        let lambda = 10f64.powf(r.random_range(-4.0..0.0));
        let inputs: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
        let p = ScrParams::new(n, r.random_range(0.1..1.0), r.random_range(0.1..0.95), lambda).unwrap();
        let states = run_reservoir(&build_scr(p).unwrap(), &inputs, None).unwrap();
        let readout = fit_readout(&states, &targets, lambda, None).unwrap();
        let rows: Vec<Vec<f64>> = (0..len).map(|t| states.features(t).to_vec()).collect();
        let f = |b: &[f64]| ridge_objective(&rows, &targets, b, lambda);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let g = fd_gradient(f, readout.weights(), 1e-5);
        let g0 = fd_gradient(f, &vec![0.0; n + 1], 1e-5);
        worst = worst.max(norm(&g) / norm(&g0));
    }
    report(
        6,
        true,
        worst <= 1e-6,
        format!("max relative gradient norm at the ridge solution over 20 instances: {worst:.3e} (limit 1e-6)"),
        t,
    )
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut r = rng(700 + seed);
        let dim = r.random_range(1..5);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..dim).map(|_| r.random::<f64>()).collect()).collect();
        let ys: Vec<f64> = (0..5).map(|_| r.random_range(-3.0..3.0)).collect();
        let gp = gp_fit(&xs, &ys, 3, seed).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..dim).map(|_| r.random_range(-0.5..1.5)).collect();
            let (m, s) = gp.posterior(&q);
            let (mo, so) = dense_gp_posterior(&gp, &q);
            worst = worst.max((m - mo).abs()).max((s - so).abs());
        }
    }
    let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
    let ys = vec![0.3, -1.0, 2.0, 0.5, 1.1];
    let signal = 2.0;
    let gp = GpModel::with_hyperparameters(
        &xs,
        &ys,
        GpHyper {
            lengthscales: vec![0.3],
            signal_var: signal,
            noise_var: 0.0,
        },
    )
    .unwrap();
    let interpolates = xs.iter().zip(&ys).all(|(x, y)| {
        let (m, s) = gp.posterior(x);
        (m - y).abs() <= 1e-4 * 2.0 && s <= 1e-2 * gp.prior_std()
    });
    let (m, s) = gp.posterior(&[50.0]);
    let reverts = (m - gp.y_offset()).abs() <= 1e-6 && (s / signal.sqrt() - 1.0).abs() < 0.01;
    report(
        7,
        true,
        worst <= 1e-8 && interpolates && reverts,
        format!("max |posterior - dense inverse| {worst:.3e} (limit 1e-8); interpolation {interpolates}; prior reversion {reverts}"),
        t,
    )
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let params = random_params(800 + seed);
        let task = random_task(800 + seed, 300);
        let cv = CvConfig::new(5, 40).unwrap();
        let fast = cv_objective(&params, &task, &cv).unwrap();
        worst = worst.max((fast - straight_line_cv(&params, &task, 5, 40)).abs());
    }
    report(
        8,
        true,
        worst <= 1e-10,
        format!("max |cv_objective - straight-line oracle| over 10 pairs: {worst:.3e} (limit 1e-10)"),
        t,
    )
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let mut r = rng(900);
    let (mut row_err, mut shift_err, mut const_err, mut min_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let (n, c) = (r.random_range(1..12), r.random_range(1..7));
        let losses: Vec<Vec<f64>> = (0..n).map(|_| (0..c).map(|_| r.random_range(0.0..25.0)).collect()).collect();
        let m = memberships(&losses);
        for row in &m {
            row_err = row_err.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        let delta = r.random_range(-100.0..100.0);
        let shifted: Vec<Vec<f64>> = losses.iter().map(|row| row.iter().map(|v| v + delta).collect()).collect();
        for (a, b) in m.iter().zip(memberships(&shifted)) {
            for (x, y) in a.iter().zip(b) {
                shift_err = shift_err.max((x - y).abs());
            }
        }
        let v = r.random_range(0.0..50.0);
        for row in memberships(&vec![vec![v; c]; n]) {
            for x in row {
                const_err = const_err.max((x - 1.0 / c as f64).abs());
            }
        }
        let direct: f64 = losses.iter().map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).sum();
        min_err = min_err.max((stopping_metric(&losses) - direct).abs());
    }
    let pass = row_err <= 1e-10 && shift_err <= 1e-12 && const_err <= 1e-12 && min_err == 0.0;
    report(
        9,
        true,
        pass,
        format!(
            "row sums {row_err:.1e}, shift invariance {shift_err:.1e}, equal losses {const_err:.1e}, row minima {min_err:.1e} over 200 random matrices"
        ),
        t,
    )
}

fn small_pipeline(dir: &std::path::Path) -> Vec<Vec<u8>> {
    let config: ExperimentConfig = ExperimentConfig::from_toml(
        r#"
        repetitions = 2
        seeds = [3, 4]
        train_len = 250
        test_len = 80
        copies = 2
        round_budget = 5
        max_iterations = 2
        individual_budget = 5
        [[datasets]]
        kind = "narma"
        order = 10
        n_samples = 330
        [[datasets]]
        kind = "mackey_glass"
        tau = 17.0
        n_samples = 330
        [cv]
        k_folds = 3
        washout = 30
        [bo]
        n_init = 5
        max_evals = 15
        "#,
    )
    .unwrap();
    let mut paths = report_csv(&run_bo_vs_grid(&config).unwrap(), dir).unwrap();
    let sweep_cfg = ExperimentConfig {
        method: Method::ClusterSweep,
        seeds: vec![3],
        repetitions: 1,
        ..config
    };
    let sweep = dir.join("sweep.csv");
    write_sweep_csv(&sweep, &run_cluster_sweep(&sweep_cfg, &[1, 2]).unwrap()).unwrap();
    paths.push(sweep);
    paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn criterion_10() -> Outcome {
    let t = Instant::now();
    let stratified = [2usize, 10, 50].iter().all(|&n| {
        (0..20u64).all(|seed| {
            let pts = lhs_unit(4, n, seed);
            (0..4).all(|d| {
                let mut s: Vec<usize> = pts.iter().map(|p| (p[d] * n as f64).floor() as usize).collect();
                s.sort_unstable();
                s == (0..n).collect::<Vec<_>>()
            })
        })
    });
    let grid = GridSpec::standard();
    let grid_size = grid.cells().count();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = small_pipeline(a.path());
    let second = small_pipeline(b.path());
    let identical = first == second && first.iter().all(|f| !f.is_empty());
    report(
        10,
        true,
        stratified && grid_size == 1500 && grid.len() == 1500 && identical,
        format!(
            "LHS stratified for n in {{2,10,50}}: {stratified}; grid cells {grid_size}; {} pipeline CSVs byte-identical across runs: {identical}",
            first.len()
        ),
        t,
    )
}

fn main() {
    let reps: u64 = std::env::var("ACCEPTANCE_REPS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(30);
    let mut outcomes = vec![
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    outcomes.extend(criteria_1_to_3(reps));
    outcomes.push(criterion_4());
    outcomes.sort_by_key(|o| o.id);

    println!("\nacceptance summary");
    for o in &outcomes {
        println!(
            "criterion {:>2}: {} [{}] {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            if o.gating { "gating" } else { "benchmark band" },
            o.summary
        );
    }
    let gating_failures = outcomes.iter().filter(|o| o.gating && !o.pass).count();
    let band_failures = outcomes.iter().filter(|o| !o.gating && !o.pass).count();
    println!("{gating_failures} gating failure(s), {band_failures} benchmark band failure(s)");
    if gating_failures > 0 {
        std::process::exit(1);
    }
}
