//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rise_cli::artifacts::{
    self, BaseRecord, BenchmarkRecord, CoefficientRecord, CurveRecord, IntervalMetricRecord, IntervalRecord,
    KeywordRecord, MetricRecord, PointRecord, ReferenceRecord, ScreeningRecord, ValidationRecord, WeightRecord,
};
use rise_cli::config::CoefficientMode;
use rise_cli::generate::{generate, SyntheticSpec, DESTINATION_TREE};
use rise_cli::{run, run_stages, PipelineConfig, RunManifest, Stage};
use rise_core::combine::{stack, stacking_objective, Penalty};
use rise_core::eval::{mase, winkler};
use rise_core::hierarchy::{mint_g, reconcile, top_down_g, wls_g, GMatrix, Hierarchy};
use rise_core::models::{fit_forecast, ModelSpec};
use rise_core::recovery::{
    coefficient_from_scores, fit_anchor_regression, fit_logistic, fit_quadratic, trend_linear, trend_quadratic,
    DestinationScores, SCORE_ANCHORS,
};
use rise_core::{MonthKey, MonthlySeries};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn destination_hierarchy() -> Hierarchy {
    let regions: Vec<(String, Vec<String>)> = DESTINATION_TREE
        .iter()
        .map(|(r, d)| (r.to_string(), d.iter().map(|x| x.0.to_string()).collect()))
        .collect();
    Hierarchy::new("Total", &regions).expect("destination tree")
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + DMatrix::identity(n, n) * n as f64
}

fn coherence() -> Outcome {
    let started = Instant::now();
    let h = destination_hierarchy();
    let (n, m) = (h.n(), h.m());
    let s = h.summing_matrix().clone();
    let leaf_rows: Vec<usize> = h.leaves().iter().map(|l| h.index_of(l).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_resid, mut worst_gs) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let base = DMatrix::from_fn(n, 12, |_, _| rng.random_range(100.0..10_000.0));
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut props: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let drift = 1.0 - props.iter().sum::<f64>();
        props[0] += drift;
        let w_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random_range(0.1..10.0)));
        let w_full = random_spd(&mut rng, n);
        let gs: [(GMatrix, bool); 3] = [
            (top_down_g(&h, &props).map_err(|e| e.to_string())?, false),
            (wls_g(&h, &w_diag).map_err(|e| e.to_string())?, true),
            (mint_g(&h, &w_full).map_err(|e| e.to_string())?, true),
        ];
        for (g, unbiased) in &gs {
            let rec = reconcile(&h, g, &base).map_err(|e| e.to_string())?;
            let bottom = DMatrix::from_fn(m, rec.ncols(), |i, j| rec[(leaf_rows[i], j)]);
            let resid = (&rec - &s * bottom).norm() / rec.norm();
            worst_resid = worst_resid.max(resid);
            if *unbiased {
                let dev = (&g.0 * &s - DMatrix::<f64>::identity(m, m)).abs().max();
                worst_gs = worst_gs.max(dev);
            }
        }
    }
    let elapsed = started.elapsed();
    check(
        worst_resid < 1e-9 && worst_gs < 1e-8 && within(elapsed, 5.0),
        format!("{n} nodes/{m} leaves, 1000 trials: max relative residual {worst_resid:.2e}, max |GS - I| {worst_gs:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn mint_oracle() -> Outcome {
    let started = Instant::now();
    let h = Hierarchy::new("T", &[("R".into(), vec!["a".into(), "b".into()])]).map_err(|e| e.to_string())?;
    if h.n() != 3 {
        return Err(format!("expected 3 nodes, got {}", h.n()));
    }
    // Error covariance of (total, a, b): noisy total, correlated leaves.
    let sigma = DMatrix::from_row_slice(3, 3, &[9.0, 1.0, 1.5, 1.0, 1.0, 0.6, 1.5, 0.6, 2.0]);
    let chol = sigma.clone().cholesky().ok_or("covariance is not positive definite")?.l();
    let s = h.summing_matrix().clone();
    let sg_mint = &s * mint_g(&h, &sigma).map_err(|e| e.to_string())?.0;
    let sg_ols = &s * mint_g(&h, &DMatrix::identity(3, 3)).map_err(|e| e.to_string())?.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let (mut acc_mint, mut acc_ols) = (DMatrix::<f64>::zeros(3, 3), DMatrix::<f64>::zeros(3, 3));
    for _ in 0..draws {
        let z = nalgebra::DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let e = &chol * z;
        let em = &sg_mint * &e;
        let eo = &sg_ols * &e;
        acc_mint += &em * em.transpose();
        acc_ols += &eo * eo.transpose();
    }
    let (tr_mint, tr_ols) = (acc_mint.trace() / draws as f64, acc_ols.trace() / draws as f64);
    let elapsed = started.elapsed();
    check(
        tr_mint < tr_ols && within(elapsed, 10.0),
        format!("trace MinT {tr_mint:.4} vs identity-W {tr_ols:.4} (margin {:.4}), {:.2}s", tr_ols - tr_mint, elapsed.as_secs_f64()),
    )
}

fn coefficient_arithmetic() -> Outcome {
    let canada = DestinationScores::new("Canada", 3, 1, 2).map_err(|e| e.to_string())?;
    let r = coefficient_from_scores(&canada).r;
    let (slope, intercept) = fit_anchor_regression(&SCORE_ANCHORS).map_err(|e| e.to_string())?;
    check(
        (r - 0.65).abs() <= 1e-12 && (0.10..=0.13).contains(&slope) && (0.44..=0.47).contains(&intercept),
        format!("Canada r = {r}; anchor fit slope {slope:.4}, intercept {intercept:.4}"),
    )
}

fn brute_winkler(lower: &[f64], upper: &[f64], actual: &[f64], alpha: f64) -> f64 {
    let mut total = 0.0;
    for t in 0..actual.len() {
        let mut score = upper[t] - lower[t];
        if actual[t] < lower[t] {
            score += 2.0 / alpha * (lower[t] - actual[t]);
        }
        if actual[t] > upper[t] {
            score += 2.0 / alpha * (actual[t] - upper[t]);
        }
        total += score;
    }
    total / actual.len() as f64
}

fn winkler_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=30);
        let alpha = rng.random_range(0.01..0.5);
        let mut lower = Vec::with_capacity(len);
        let mut upper = Vec::with_capacity(len);
        let mut actual = Vec::with_capacity(len);
        for _ in 0..len {
            let centre: f64 = rng.random_range(-1000.0..1000.0);
            let half: f64 = rng.random_range(0.0..200.0);
            lower.push(centre - half);
            upper.push(centre + half);
            actual.push(centre + rng.random_range(-400.0..400.0));
        }
        let got = winkler(&lower, &upper, &actual, alpha).map_err(|e| e.to_string())?;
        let want = brute_winkler(&lower, &upper, &actual, alpha);
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    let inside = winkler(&[10.0], &[20.0], &[15.0], 0.2).map_err(|e| e.to_string())?;
    let miss = winkler(&[10.0], &[20.0], &[25.0], 0.2).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-12 && inside == 10.0 && miss == 60.0,
        format!("10^4 fuzzed cases, max relative deviation {worst:.2e}; inside -> {inside}, miss by 5 -> {miss}"),
    )
}

fn curve_properties() -> Outcome {
    let q = |s: f64| 0.4 * s * s - 3.0 * s + 120.0;
    let pts: Vec<(f64, f64, f64)> = (1..=18).map(|s| (s as f64, q(s as f64), 1.0)).collect();
    let fit = fit_quadratic(&pts).map_err(|e| e.to_string())?;
    let interp = pts.iter().map(|p| (fit.eval(p.0) - p.1).abs()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let history: Vec<(f64, f64)> = (1..=18).map(|s| (s as f64, 40.0 + 2.0 * s as f64 + rng.random_range(-5.0..5.0))).collect();
    let t13 = 310.0;
    let (qt, _) = trend_quadratic(&history, (31.0, t13), 1e8, 18.0, 14).map_err(|e| e.to_string())?;
    let terminal_gap = (qt.eval(31.0) - t13).abs();

    let truth = (100.0, 0.5, 20.0);
    let samples: Vec<(f64, f64)> =
        (1..=40).map(|s| (s as f64, truth.0 / (1.0 + (-truth.1 * (s as f64 - truth.2)).exp()))).collect();
    let lg = fit_logistic(&samples).map_err(|e| e.to_string())?;
    let rel = [(lg.l - truth.0) / truth.0, (lg.k - truth.1) / truth.1, (lg.t0 - truth.2) / truth.2]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);

    let (t0, t_end) = (1234.5, 9876.25);
    let lin = trend_linear(t0, t_end, 14);
    let lin_ok = lin[13] == t0 + (13.0 / 14.0) * (t_end - t0);

    check(
        interp <= 1e-8 && terminal_gap < 1e-4 * t13 && rel <= 1e-3 && lin_ok,
        format!(
            "quadratic interpolation {interp:.2e}; |q(31) - T13| = {terminal_gap:.2e}; logistic max rel error {rel:.2e}; linear t=13 exact: {lin_ok}"
        ),
    )
}

fn grid_oracle(forecasts: &[Vec<f64>], actuals: &[f64]) -> Vec<f64> {
    let steps: Vec<f64> = (0..=120).map(|i| i as f64 * 0.01).collect();
    let mut best = (f64::INFINITY, vec![0.0; 3]);
    for &a in &steps {
        for &b in &steps {
            for &c in &steps {
                let w = [a, b, c];
                let obj = stacking_objective(forecasts, actuals, &w, 0.0, Penalty::Lasso);
                if obj < best.0 {
                    best = (obj, w.to_vec());
                }
            }
        }
    }
    best.1
}

fn stacking() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let actuals: Vec<f64> = (0..36).map(|t| 50.0 + 10.0 * (t as f64 * 0.5).sin() + rng.random_range(-3.0..3.0)).collect();
    let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> { actuals.iter().map(|y| y + rng.random_range(-15.0..15.0)).collect() };
    let forecasts = vec![actuals.clone(), noise(&mut rng), noise(&mut rng)];
    let fit = stack(&forecasts, &actuals, 0.0, Penalty::Lasso).map_err(|e| e.to_string())?;
    let oracle = grid_oracle(&forecasts, &actuals);
    let gap = fit.weights.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut negative = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=6);
        let t = rng.random_range(k..=40);
        let cols: Vec<Vec<f64>> = (0..k).map(|_| (0..t).map(|_| rng.random_range(-50.0..100.0)).collect()).collect();
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(-50.0..100.0)).collect();
        let lambda = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1000.0) };
        let penalty = if rng.random_bool(0.5) { Penalty::Lasso } else { Penalty::Ridge };
        match stack(&cols, &y, lambda, penalty) {
            Ok(f) => negative += f.weights.iter().filter(|w| w.is_nan() || **w < 0.0).count(),
            Err(e) => return Err(format!("fuzzed fit failed: {e}")),
        }
    }

    let heavy = stack(&forecasts.iter().map(|f| f.iter().map(|v| v / 10.0).collect()).collect::<Vec<_>>(), &actuals.iter().map(|v| v / 10.0).collect::<Vec<_>>(), 1e6, Penalty::Lasso)
        .map_err(|e| e.to_string())?;
    let all_zero = heavy.weights.iter().all(|w| *w == 0.0);
    check(
        fit.weights[0] >= 0.99 && gap <= 0.01 && negative == 0 && all_zero,
        format!(
            "lambda=0 exact-model weight {:.6} (grid oracle {:?}, max gap {gap:.2e}); {negative} negative weights in 10^4 fuzzed fits; lambda=1e6 all zero: {all_zero}",
            fit.weights[0], oracle
        ),
    )
}

fn ses_calibration() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let dist = Normal::new(100.0, 10.0).unwrap();
    let start = MonthKey::new(2010, 1).unwrap();
    let reps = 500;
    let mut hits = 0;
    for _ in 0..reps {
        let y: Vec<f64> = (0..80).map(|_| dist.sample(&mut rng)).collect();
        let series = MonthlySeries::from_values("iid", start, &y).map_err(|e| e.to_string())?;
        let fc = fit_forecast(&series, &ModelSpec::Ses, 1, &mut rng).map_err(|e| e.to_string())?;
        let (lo, hi) = (fc.lower80.ok_or("no lower bound")?[0], fc.upper80.ok_or("no upper bound")?[0]);
        let next = dist.sample(&mut rng);
        if lo <= next && next <= hi {
            hits += 1;
        }
    }
    let coverage = hits as f64 / reps as f64;
    let elapsed = started.elapsed();
    check(
        (coverage - 0.80).abs() <= 0.05 && within(elapsed, 60.0),
        format!("coverage {coverage:.3} over {reps} replications, {:.2}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// Pipeline study shared by the end-to-end and ablation criteria.

const SEEDS: u64 = 20;

struct SeedRun {
    seed: u64,
    pipeline_mase: f64,
    snaive_mase: f64,
    ablation: (f64, f64),
    branch_mase: [f64; 3],
}

fn average_mase(rows: &[MetricRecord]) -> Result<f64, String> {
    rows.iter().find(|r| r.destination == "Average").map(|r| r.mase).ok_or_else(|| "no Average row".into())
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, String> {
    artifacts::read(path).map_err(|e| e.to_string())
}

fn rise_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rise"))
}

fn invoke(cmd: &mut Command) -> Result<(), String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{:?} exited with {}: {}", cmd, out.status, String::from_utf8_lossy(&out.stderr)))
    }
}

fn validate_schemas(out: &Path) -> Result<usize, String> {
    read::<ValidationRecord>(&out.join(artifacts::VALIDATION_METRICS))?;
    read::<ScreeningRecord>(&out.join(artifacts::MODEL_SCREENING))?;
    read::<WeightRecord>(&out.join(artifacts::WEIGHTS))?;
    read::<BaseRecord>(&out.join(artifacts::BASE_FORECASTS))?;
    read::<KeywordRecord>(&out.join(artifacts::KEYWORDS_SELECTED))?;
    read::<ReferenceRecord>(&out.join(artifacts::REFERENCE_FORECASTS))?;
    read::<CoefficientRecord>(&out.join(artifacts::COEFFICIENTS))?;
    read::<CurveRecord>(&out.join(artifacts::RECOVERY_CURVES))?;
    read::<PointRecord>(&out.join(artifacts::POINT_FORECASTS))?;
    read::<IntervalRecord>(&out.join(artifacts::INTERVAL_FORECASTS))?;
    read::<MetricRecord>(&out.join(artifacts::POINT_METRICS))?;
    read::<IntervalMetricRecord>(&out.join(artifacts::INTERVAL_METRICS))?;
    read::<BenchmarkRecord>(&out.join(artifacts::BENCHMARK_METRICS))?;
    let manifest = RunManifest::read(out).map_err(|e| e.to_string())?;
    for f in &manifest.outputs {
        let bytes = std::fs::read(out.join(&f.path)).map_err(|e| format!("{}: {e}", f.path))?;
        if bytes.len() as u64 != f.bytes {
            return Err(format!("{}: manifest size mismatch", f.path));
        }
    }
    Ok(manifest.outputs.len())
}

fn identical_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut compared = 0;
    for entry in std::fs::read_dir(a).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name == artifacts::MANIFEST {
            continue;
        }
        let other = b.join(&name);
        if std::fs::read(&path).map_err(|e| e.to_string())? != std::fs::read(&other).map_err(|e| format!("{name}: {e}"))? {
            return Err(format!("{name} differs between runs"));
        }
        compared += 1;
    }
    Ok(compared)
}

/// Mean MASE of each trend branch (times the seasonal factors) over the
/// evaluation window, against the generator's actuals.
fn branch_mase(cfg: &PipelineConfig, out: &Path, data: &rise_cli::generate::SyntheticData) -> Result<[f64; 3], String> {
    let curves: Vec<CurveRecord> = read(&out.join(artifacts::RECOVERY_CURVES))?;
    let spec = &data.spec;
    let (start, end) = (cfg.evaluate.start, cfg.evaluate.end);
    let mut totals = [0.0; 3];
    for d in &data.destinations {
        let rows: Vec<&CurveRecord> = curves
            .iter()
            .filter(|c| c.destination == d.name)
            .filter(|c| {
                let m = MonthKey::new(c.year, c.month).unwrap();
                m >= start && m <= end
            })
            .collect();
        let actual: Vec<f64> = rows
            .iter()
            .map(|c| d.arrivals[MonthKey::new(c.year, c.month).unwrap().months_since(spec.start) as usize])
            .collect();
        let insample = &d.arrivals[..=spec.data_end().months_since(spec.start) as usize];
        for (k, pick) in [|c: &CurveRecord| c.linear, |c: &CurveRecord| c.quadratic, |c: &CurveRecord| c.logistic]
            .iter()
            .enumerate()
        {
            let path: Vec<f64> = rows.iter().map(|c| pick(c) * c.seasonal).collect();
            totals[k] += mase(&path, &actual, insample, 12).map_err(|e| e.to_string())?;
        }
    }
    let n = data.destinations.len() as f64;
    Ok(totals.map(|t| t / n))
}

fn ablation_run(cfg: &PipelineConfig, base_out: &Path, dir: &Path, r: f64) -> Result<f64, String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    for f in [artifacts::BASE_FORECASTS, artifacts::REFERENCE_FORECASTS] {
        std::fs::copy(base_out.join(f), dir.join(f)).map_err(|e| e.to_string())?;
    }
    let mut cfg = cfg.clone();
    cfg.recovery.coefficient = CoefficientMode::Fixed(r);
    cfg.evaluate.benchmarks.clear();
    run_stages(&cfg, dir, &[Stage::Recovery, Stage::Evaluate]).map_err(|e| e.to_string())?;
    average_mase(&read(&dir.join(artifacts::POINT_METRICS))?)
}

fn study_seed(root: &Path, seed: u64, prepared: Option<PathBuf>) -> Result<SeedRun, String> {
    let spec = SyntheticSpec::default();
    let data = generate(&spec, seed).map_err(|e| e.to_string())?;
    let dir = root.join(format!("seed{seed}"));
    let out = match prepared {
        Some(out) => out,
        None => {
            data.write(&dir).map_err(|e| e.to_string())?;
            let mut cfg = PipelineConfig::load(dir.join("rise.toml")).map_err(|e| e.to_string())?;
            cfg.evaluate.benchmarks = vec![ModelSpec::SeasonalNaive];
            let out = dir.join("output");
            run(&cfg, &out).map_err(|e| e.to_string())?;
            out
        }
    };
    let cfg = PipelineConfig::load(out.parent().unwrap().join("rise.toml")).map_err(|e| e.to_string())?;
    let pipeline_mase = average_mase(&read(&out.join(artifacts::POINT_METRICS))?)?;
    let bench: Vec<BenchmarkRecord> = read(&out.join(artifacts::BENCHMARK_METRICS))?;
    let snaive_mase = bench
        .iter()
        .find(|b| b.model == "snaive" && b.destination == "Average")
        .map(|b| b.mase)
        .ok_or("no snaive Average row")?;
    let with_r = ablation_run(&cfg, &out, &dir.join("r070"), spec.suppression)?;
    let without_r = ablation_run(&cfg, &out, &dir.join("r100"), 1.0)?;
    Ok(SeedRun { seed, pipeline_mase, snaive_mase, ablation: (with_r, without_r), branch_mase: branch_mase(&cfg, &out, &data)? })
}

struct Study {
    e2e: Outcome,
    runs: Result<Vec<SeedRun>, String>,
}

fn study() -> Study {
    let tmp = tempfile::tempdir().expect("tempdir");
    let root = tmp.path();
    let demo = root.join("seed1");
    let started = Instant::now();
    let first = invoke(rise_bin().args(["generate", "--seed", "1", "--out"]).arg(&demo))
        .and_then(|_| invoke(rise_bin().arg("run").arg("--config").arg(demo.join("rise.toml"))));
    let elapsed = started.elapsed();
    let out = demo.join("output");
    let e2e_setup = first.and_then(|_| {
        let files = validate_schemas(&out)?;
        let rerun = root.join("rerun");
        invoke(rise_bin().arg("run").arg("--config").arg(demo.join("rise.toml")).arg("--out").arg(&rerun))?;
        let compared = identical_outputs(&out, &rerun)?;
        Ok((files, compared))
    });

    let mut runs = Vec::new();
    let mut failure = None;
    for seed in 1..=SEEDS {
        let prepared = (seed == 1 && e2e_setup.is_ok()).then(|| out.clone());
        match study_seed(root, seed, prepared) {
            Ok(r) => {
                eprintln!(
                    "  seed {:>2}: pipeline MASE {:.4}, snaive {:.4}; r=0.7 {:.4}, r=1.0 {:.4}",
                    r.seed, r.pipeline_mase, r.snaive_mase, r.ablation.0, r.ablation.1
                );
                runs.push(r);
            }
            Err(e) => {
                failure = Some(format!("seed {seed}: {e}"));
                break;
            }
        }
        // Keep the temporary tree small; the seed-1 outputs stay for inspection.
        if seed > 1 {
            let _ = std::fs::remove_dir_all(root.join(format!("seed{seed}")));
        }
    }
    let runs = match failure {
        Some(e) => Err(e),
        None => Ok(runs),
    };

    let e2e = match (&e2e_setup, &runs) {
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        (Ok((files, compared)), Ok(runs)) => {
            let wins = runs.iter().filter(|r| r.pipeline_mase < r.snaive_mase).count();
            let mean = |f: fn(&SeedRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
            check(
                within(elapsed, 120.0) && wins >= 16,
                format!(
                    "generate+run {:.1}s; {files} manifest outputs validated; {compared} files byte-identical on rerun; pipeline beats snaive in {wins}/{SEEDS} seeds (mean MASE {:.4} vs {:.4})",
                    elapsed.as_secs_f64(),
                    mean(|r| r.pipeline_mase),
                    mean(|r| r.snaive_mase)
                ),
            )
        }
    };
    Study { e2e, runs }
}

fn ablation(study: &Study) -> Outcome {
    let runs = study.runs.as_ref().map_err(Clone::clone)?;
    let wins = runs.iter().filter(|r| r.ablation.0 < r.ablation.1).count();
    let mean = |f: fn(&SeedRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    check(
        wins >= 16,
        format!(
            "r=0.7 beats r=1.0 in {wins}/{SEEDS} seeds (mean MASE {:.4} vs {:.4})",
            mean(|r| r.ablation.0),
            mean(|r| r.ablation.1)
        ),
    )
}

fn linear_branch(study: &Study) -> Outcome {
    let runs = study.runs.as_ref().map_err(Clone::clone)?;
    let mut mean = [0.0; 3];
    for r in runs {
        for (m, b) in mean.iter_mut().zip(r.branch_mase) {
            *m += b / runs.len() as f64;
        }
    }
    check(
        mean[0] < mean[1] && mean[0] < mean[2],
        format!("mean MASE on linear ground truth: linear {:.4}, quadratic {:.4}, logistic {:.4}", mean[0], mean[1], mean[2]),
    )
}

fn main() {
    let mut results: BTreeMap<usize, (&str, Outcome)> = BTreeMap::new();
    let cheap: [Criterion; 7] = [
        ("reconciliation coherence", coherence),
        ("MinT small-instance oracle", mint_oracle),
        ("recovery-coefficient arithmetic", coefficient_arithmetic),
        ("Winkler oracle", winkler_oracle),
        ("recovery-curve fit properties", curve_properties),
        ("stacking correctness", stacking),
        ("SES interval calibration", ses_calibration),
    ];
    for (i, (name, f)) in cheap.iter().enumerate() {
        results.insert(i, (name, f()));
    }
    let study = study();
    results.insert(7, ("end-to-end", study.e2e.clone()));
    results.insert(8, ("recovery-coefficient ablation", ablation(&study)));

    println!();
    let mut failed = 0;
    for (name, outcome) in results.values() {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    // Supplementary property of the generator, not counted above.
    match linear_branch(&study) {
        Ok(d) => println!("info  linear-branch self-test passed: {d}"),
        Err(d) => println!("info  linear-branch self-test did not hold: {d}"),
    }
    println!("\n{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
