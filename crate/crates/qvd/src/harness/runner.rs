//! Experiment execution: deterministic dispatch over the n-grid, stage
//! timing, and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::applications::{channel_geomean, qclt_covariance, romberg, InterpolationResult};
use crate::error::{QvdError, Result};
use crate::expansion::{order_fit, predicted_error, MomentSource};
use crate::harness::config::{
    sha256_hex, ExperimentConfig, MomentsConfig, RunManifest, ARTIFACT_VERSION,
};
use crate::harness::report::{
    error_curve_csv, moments_csv, romberg_csv, to_json_bytes, write_atomic, ExpansionReport,
    MomentRow, OrderFitReport,
};
use crate::kernel::{moment_exact, moment_paper, KernelSpec};
use crate::qcore::{MatrixJson, DEFAULT_TOL};
use crate::qnno::{approx_error, qnno_apply, qnno_weights, CurveRow};
use crate::statemaps::build_map;

/// Resolve the worker count: explicit flag, then QVD_THREADS, then 1.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("QVD_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

pub fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| QvdError::Config(format!("thread pool: {e}")))
}

/// Closed-form vs. exact moment table. λ and n are zipped when the lists have equal
/// length, otherwise crossed. Cost-guard failures become NaN rows so the run
/// continues.
pub fn report_moments(
    lambda_list: &[f64],
    alpha_list: &[Vec<usize>],
    delta_list: &[f64],
    n_list: &[usize],
) -> Result<String> {
    if lambda_list.is_empty() || alpha_list.is_empty() || delta_list.is_empty() || n_list.is_empty()
    {
        return Err(QvdError::Config("moment report lists must be nonempty".into()));
    }
    let pairs: Vec<(f64, usize)> = if lambda_list.len() == n_list.len() {
        lambda_list.iter().copied().zip(n_list.iter().copied()).collect()
    } else {
        lambda_list
            .iter()
            .flat_map(|&l| n_list.iter().map(move |&n| (l, n)))
            .collect()
    };
    let mut rows = Vec::new();
    for alpha in alpha_list {
        let d = alpha.len();
        for &delta in delta_list {
            for &(lambda, n) in &pairs {
                let spec = KernelSpec::new(1.0, lambda, d)?;
                let (exact, quad_err) = match moment_exact(&spec, alpha, delta) {
                    Ok(v) => (v.value, v.quadrature_error_estimate),
                    Err(QvdError::CostGuard { .. }) => (f64::NAN, f64::NAN),
                    Err(e) => return Err(e),
                };
                rows.push(MomentRow {
                    alpha: alpha.clone(),
                    delta,
                    lambda,
                    n,
                    exact,
                    paper: moment_paper(alpha, delta, n, d),
                    quad_err,
                });
            }
        }
    }
    Ok(moments_csv(&rows))
}

pub fn report_moments_from_config(cfg: &MomentsConfig) -> Result<String> {
    report_moments(&cfg.lambda_list, &cfg.alpha_list, &cfg.delta_list, &cfg.n_list)
}

struct StageWriter {
    dir: PathBuf,
    checksums: BTreeMap<String, String>,
    wall_clock: BTreeMap<String, f64>,
}

impl StageWriter {
    fn new(dir: PathBuf) -> Self {
        StageWriter {
            dir,
            checksums: BTreeMap::new(),
            wall_clock: BTreeMap::new(),
        }
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.checksums.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn record_stage(&mut self, stage: &str, started: Instant) {
        self.wall_clock
            .insert(stage.to_string(), started.elapsed().as_secs_f64());
    }
}

fn stage_error(stage: &str, e: QvdError) -> QvdError {
    match e {
        QvdError::Config(msg) => QvdError::Config(msg),
        other => QvdError::InvalidParameter(format!("stage {stage}: {other}")),
    }
}

/// Where a run's artifacts go: <out>/<12-hex config hash prefix>/.
pub fn run_directory(config: &ExperimentConfig, out_override: Option<&Path>) -> PathBuf {
    let base = out_override
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("qvd-out"));
    base.join(&config.hash()[..12])
}

/// Execute every stage the config enables and write the artifact directory.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_override: Option<&Path>,
    threads: usize,
) -> Result<PathBuf> {
    config.validate()?;
    let dir = run_directory(config, out_override);
    std::fs::create_dir_all(&dir)
        .map_err(|e| QvdError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let pool = build_pool(threads)?;
    let mut writer = StageWriter::new(dir.clone());

    let map = build_map(&config.map, config.dimension)?;
    let rho = config.state.build()?;

    // Stage: error curve, independent n-grid points dispatched in parallel
    // and collected in grid order.
    let t0 = Instant::now();
    let rows: Vec<CurveRow> = pool.install(|| {
        config
            .n_grid
            .par_iter()
            .map(|&n| -> Result<CurveRow> {
                let lambda = config.lambda_rule.lambda_for(n)?;
                let spec = KernelSpec::new(config.q, lambda, config.dimension)?;
                let error =
                    approx_error(map.as_ref(), &rho, n, &spec, config.renormalize)?;
                let weights = qnno_weights(n, rho.eigenvalues(), &spec, config.renormalize)?;
                Ok(CurveRow {
                    n,
                    lambda,
                    error_trace_norm: error,
                    raw_weight_sum: weights.raw_sum,
                })
            })
            .collect::<Result<Vec<_>>>()
    })
    .map_err(|e| stage_error("error_curve", e))?;
    writer.emit("error_curve.csv", error_curve_csv(&rows).as_bytes())?;
    writer.record_stage("error_curve", t0);

    // Stage: order fit on the curve, skipped when the errors are flat zero
    // (constant maps are exact at every n).
    let t0 = Instant::now();
    let fit_points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.n as f64, r.error_trace_norm))
        .collect();
    let fit_report = if rows.iter().all(|r| r.error_trace_norm < 1e-14) {
        OrderFitReport::skipped("error curve is identically zero; no rate to fit")
    } else {
        match order_fit(&fit_points) {
            Ok(fit) => OrderFitReport::fitted(&fit),
            Err(e) => OrderFitReport::skipped(&format!("fit failed: {e}")),
        }
    };
    writer.emit("order_fit.json", &to_json_bytes(&fit_report)?)?;
    writer.record_stage("order_fit", t0);

    // Stage: expansion prediction at the largest n.
    let t0 = Instant::now();
    let n_top = *config.n_grid.last().expect("validated nonempty");
    let lambda_top = config.lambda_rule.lambda_for(n_top)?;
    let spec_top = KernelSpec::new(config.q, lambda_top, config.dimension)?;
    let prediction = predicted_error(
        map.as_ref(),
        &rho,
        n_top,
        config.m,
        config.gamma,
        &spec_top,
        MomentSource::Exact,
    )
    .map_err(|e| stage_error("expansion", e))?;
    let measured = rows.last().map(|r| r.error_trace_norm).unwrap_or(f64::NAN);
    let expansion = ExpansionReport::from_prediction(n_top, lambda_top, &prediction, measured);
    writer.emit("expansion.json", &to_json_bytes(&expansion)?)?;
    writer.emit("expansion.csv", expansion.flat_csv().as_bytes())?;
    writer.record_stage("expansion", t0);

    if let Some(moments) = &config.moments {
        let t0 = Instant::now();
        let csv = report_moments_from_config(moments).map_err(|e| stage_error("moments", e))?;
        writer.emit("moments.csv", csv.as_bytes())?;
        writer.record_stage("moments", t0);
    }

    if let Some(rc) = &config.romberg {
        let t0 = Instant::now();
        let table = romberg(
            map.as_ref(),
            &rho,
            rc.n0,
            rc.k_levels,
            rc.m_columns,
            config.q,
            config.lambda_rule,
        )
        .map_err(|e| stage_error("romberg", e))?;
        writer.emit("romberg.csv", romberg_csv(rc.n0, &table.errors).as_bytes())?;
        writer.record_stage("romberg", t0);
    }

    if let Some(ic) = &config.interpolation {
        let t0 = Instant::now();
        let a = ic.channel_a.build(config.dimension)?;
        let b = ic.channel_b.build(config.dimension)?;
        let results: Vec<InterpolationResult> = ic
            .t_grid
            .iter()
            .map(|&t| channel_geomean(&a, &b, t, true))
            .collect::<Result<_>>()
            .map_err(|e| stage_error("interpolation", e))?;
        writer.emit("interpolation.json", &to_json_bytes(&results)?)?;
        writer.record_stage("interpolation", t0);
    }

    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION,
        config_hash: config.hash(),
        checksums: writer.checksums.clone(),
        wall_clock_seconds: writer.wall_clock.clone(),
    };
    write_atomic(&dir.join("manifest.json"), &to_json_bytes(&manifest)?)?;
    Ok(dir)
}

/// Apply the configured map's lattice approximation at the largest n and
/// persist the output matrix with its error.
pub fn run_approximate(config: &ExperimentConfig, out_override: Option<&Path>) -> Result<PathBuf> {
    config.validate()?;
    let dir = run_directory(config, out_override);
    std::fs::create_dir_all(&dir)
        .map_err(|e| QvdError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let map = build_map(&config.map, config.dimension)?;
    let rho = config.state.build()?;
    let n = *config.n_grid.last().expect("validated nonempty");
    let lambda = config.lambda_rule.lambda_for(n)?;
    let spec = KernelSpec::new(config.q, lambda, config.dimension)?;
    let approx = qnno_apply(map.as_ref(), &rho, n, &spec, config.renormalize)
        .map_err(|e| stage_error("approximate", e))?;
    let target = map.evaluate(&rho).map_err(|e| stage_error("approximate", e))?;
    let error = crate::qcore::trace_norm(&(&approx - &target));
    #[derive(serde::Serialize)]
    struct ApproxReport {
        n: usize,
        lambda: f64,
        error_trace_norm: f64,
        approximation: MatrixJson,
        target: MatrixJson,
    }
    let report = ApproxReport {
        n,
        lambda,
        error_trace_norm: error,
        approximation: MatrixJson::from(&approx),
        target: MatrixJson::from(&target),
    };
    write_atomic(&dir.join("approximate.json"), &to_json_bytes(&report)?)?;
    Ok(dir)
}

/// Covariance form at the largest configured n.
pub fn run_clt_cov(config: &ExperimentConfig, out_override: Option<&Path>) -> Result<PathBuf> {
    config.validate()?;
    let dir = run_directory(config, out_override);
    std::fs::create_dir_all(&dir)
        .map_err(|e| QvdError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let map = build_map(&config.map, config.dimension)?;
    let rho = config.state.build()?;
    let n = *config.n_grid.last().expect("validated nonempty");
    let lambda = config.lambda_rule.lambda_for(n)?;
    let spec = KernelSpec::new(config.q, lambda, config.dimension)?;
    let sigma =
        qclt_covariance(map.as_ref(), &rho, n, &spec).map_err(|e| stage_error("clt_cov", e))?;
    #[derive(serde::Serialize)]
    struct CovReport {
        n: usize,
        lambda: f64,
        hermiticity_deviation: f64,
        covariance: MatrixJson,
    }
    let report = CovReport {
        n,
        lambda,
        hermiticity_deviation: crate::qcore::matrix::hermiticity_deviation(&sigma),
        covariance: MatrixJson::from(&sigma),
    };
    write_atomic(&dir.join("clt_covariance.json"), &to_json_bytes(&report)?)?;
    Ok(dir)
}

/// Sanity check used by unit tests: states built from configs are valid.
pub fn check_state(config: &ExperimentConfig) -> Result<()> {
    let rho = config.state.build()?;
    if rho.dim() != config.dimension {
        return Err(QvdError::Config("state dimension mismatch".into()));
    }
    let _ = DEFAULT_TOL;
    Ok(())
}
