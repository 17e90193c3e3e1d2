//! End-to-end experiments: synthesize a truth, measure, denoise, build a
//! basis, invert, and write every intermediate artifact.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::DiscreteOperators;
use crate::config::{BasisSource, ExperimentConfig};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::inverse::{add_noise, denoise, denoise_auto, invert, uniform_detectors, MeasurementSet, ALPHA_FLOOR};
use crate::pod::{principal_angles, PodBasis, Provenance};
use crate::reduced::{basis_from_trajectory, build_adjoint_pod, solve_kind, ProblemKind, ReducedModel};
use crate::shapes::make_shape;
use crate::spectral::project_onto_modes;
use crate::timestep::BackwardEuler;

/// Modes used by the spectral `H^-1` error surrogate.
pub const H_MINUS1_MODES: usize = 100;

/// Fixed-point sweeps of the denoiser's smoothing-weight estimate.
const ALPHA_SWEEPS: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub full_solve_s: f64,
    pub reduced_solve_s: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub kind: ProblemKind,
    pub truth: String,
    pub basis_source: String,
    pub nx: usize,
    pub ny: usize,
    pub t_final: f64,
    pub steps: usize,
    pub noise_level: f64,
    pub sigma: f64,
    pub seed: u64,
    pub detectors: usize,
    pub quasi_uniformity: f64,
    /// Smoothing weight of the denoiser; `None` when readings were used as is.
    pub denoise_alpha: Option<f64>,
    /// Relative `L2` error of the measurement field against the exact final state.
    pub measurement_error: f64,
    pub n_pod: usize,
    pub retained_rank: usize,
    pub rho: f64,
    pub leading_eigenvalues: Vec<f64>,
    /// Against the traditional basis, rank-matched.
    pub principal_angles: Vec<f64>,
    pub max_principal_angle: f64,
    /// Relative error of the reduced forward solve of the truth.
    pub reduced_forward_error: f64,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub rel_l2_error: f64,
    /// Spectral surrogate: modal error coefficients weighted by `mu^-1/2`.
    pub h_minus1_error: f64,
    pub timing: Option<Timing>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    /// JSON without wall-time fields, stable across runs.
    pub fn deterministic_json(&self) -> String {
        Metrics {
            timing: None,
            ..self.clone()
        }
        .to_json()
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub metrics: Metrics,
    pub dir: PathBuf,
    pub truth: Field,
    pub recovered: Field,
    pub basis: PodBasis,
}

/// `sqrt(sum e_k^2 / mu_k) / sqrt(sum t_k^2 / mu_k)` over the leading modes.
pub fn h_minus1_surrogate(error: &Field, truth: &Field, ops: &DiscreteOperators, order: usize) -> Result<f64> {
    let weigh = |f: &Field| -> Result<f64> {
        Ok(project_onto_modes(f, ops, order)?
            .entries()
            .iter()
            .map(|(m, c)| c * c / m.eigenvalue())
            .sum::<f64>()
            .sqrt())
    };
    let den = weigh(truth)?;
    Ok(if den > 0.0 { weigh(error)? / den } else { f64::NAN })
}

fn relative_error(ops: &DiscreteOperators, a: &Field, b: &Field) -> f64 {
    let d = a.values() - b.values();
    ops.norm(&d) / ops.norm(b.values())
}

/// Measurement field: denoised readings, or the readings themselves when
/// noise-free detectors cover every interior node.
fn measurement_field(ms: &MeasurementSet, ops: &DiscreteOperators) -> Result<(Field, Option<f64>)> {
    let grid = ops.grid();
    if ms.sigma > 0.0 {
        let (f, alpha) = denoise_auto(ms, grid, ALPHA_SWEEPS)?;
        return Ok((f, Some(alpha)));
    }
    let mut values = nalgebra::DVector::zeros(grid.node_count());
    let mut covered = vec![false; grid.node_count()];
    for (&(x, y), &r) in ms.detectors.iter().zip(&ms.readings) {
        let idx = grid.node_at(x, y).ok_or(Error::DetectorOffGrid { x, y })?;
        values[idx] = r;
        covered[idx] = true;
    }
    if grid.interior().iter().all(|&i| covered[i]) {
        let f = Field::from_values(grid, values)?.masked(grid);
        Ok((f, None))
    } else {
        Ok((denoise(ms, grid, ALPHA_FLOOR)?, Some(ALPHA_FLOOR)))
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs the full pipeline of `cfg`, writing artifacts under `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    stage("config", cfg.validate())?;
    let dir = cfg.output.dir.clone();
    stage("output", fs::create_dir_all(&dir).map_err(Error::from))?;
    stage("output", fs::write(dir.join("config.toml"), cfg.to_toml_string()).map_err(Error::from))?;
    let kind = cfg.problem.kind;
    let grid = stage("grid", cfg.grid())?;
    let time = stage("grid", cfg.time_grid())?;
    let ops = stage("assemble", DiscreteOperators::assemble(&grid, &cfg.coefficient_set()))?;

    let truth = stage("truth", make_shape(&cfg.problem.truth, &grid))?;
    stage("truth", truth.write_csv(&grid, &dir.join("truth.csv")))?;

    let forward = stage("forward", solve_kind(kind, &truth, &ops, time))?;
    let final_state = forward.final_state().clone();
    stage("forward", final_state.write_csv(&grid, &dir.join("final_state.csv")))?;

    let detectors = stage("measure", uniform_detectors(&grid, cfg.measurement.detectors))?;
    let clean = stage("measure", final_state.evaluate_at_points(&grid, &detectors))?;
    let ms = stage(
        "measure",
        add_noise(&grid, &detectors, &clean, cfg.measurement.noise, cfg.measurement.seed),
    )?;
    stage("measure", ms.write_csv(&dir.join("measurement.csv")))?;

    let (m, alpha) = stage("denoise", measurement_field(&ms, &ops))?;
    stage("denoise", m.write_csv(&grid, &dir.join("measurement_field.csv")))?;

    let opts = cfg.basis_options();
    let traditional = stage(
        "basis",
        basis_from_trajectory(
            &forward,
            &ops,
            opts,
            Provenance {
                equation: format!("forward-{}", kind.name()),
                driver: format!("truth:{}", cfg.problem.truth),
                from_measurement: false,
            },
        ),
    )?;
    let basis = match &cfg.pod.basis {
        BasisSource::Traditional => traditional.clone(),
        BasisSource::Adjoint => stage("basis", build_adjoint_pod(kind, &m, &ops, time, opts))?,
        BasisSource::AdjointOf(other) => stage("basis", build_adjoint_pod(*other, &m, &ops, time, opts))?,
        BasisSource::Foreign(name) => {
            let driver = stage("basis", make_shape(name, &grid))?;
            let traj = stage("basis", solve_kind(kind, &driver, &ops, time))?;
            let prov = Provenance {
                equation: format!("forward-{}", kind.name()),
                driver: format!("foreign:{name}"),
                from_measurement: false,
            };
            stage("basis", basis_from_trajectory(&traj, &ops, opts, prov))?
        }
    };
    stage("basis", basis.write(&dir.join("basis"), &ops))?;
    let n_match = basis.n_pod().min(traditional.n_pod());
    let angles = stage(
        "basis",
        principal_angles(&basis.truncated(n_match), &traditional.truncated(n_match), &ops),
    )?;

    let model = stage("reduce", ReducedModel::build(&ops, &basis, time, kind))?;
    stage("reduce", model.write(&dir.join("reduced")))?;

    let t0 = Instant::now();
    let full = stage("timing", BackwardEuler::new(&ops, time).and_then(|be| match kind {
        ProblemKind::InverseSource => be.final_state(&truth, &Field::zeros(&grid)),
        ProblemKind::Backward => be.final_state(&Field::zeros(&grid), &truth),
    }))?;
    let full_solve_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (reduced_final, _) = stage("timing", model.solve(&truth, &ops))?;
    let reduced_solve_s = t1.elapsed().as_secs_f64();

    let result = stage("invert", invert(&model, &m, &ops, &cfg.inverse_config()))?;
    stage("invert", result.recovered.write_csv(&grid, &dir.join("recovered.csv")))?;

    let err_field = Field::from_values(&grid, result.recovered.values() - truth.values())?;
    let metrics = Metrics {
        kind,
        truth: cfg.problem.truth.clone(),
        basis_source: cfg.pod.basis.to_string(),
        nx: grid.nx(),
        ny: grid.ny(),
        t_final: time.t_final(),
        steps: time.steps(),
        noise_level: ms.level,
        sigma: ms.sigma,
        seed: ms.seed,
        detectors: ms.len(),
        quasi_uniformity: ms.quasi_uniformity,
        denoise_alpha: alpha,
        measurement_error: relative_error(&ops, &m, &final_state),
        n_pod: basis.n_pod(),
        retained_rank: basis.retained_rank(),
        rho: basis.tail_ratio(),
        leading_eigenvalues: basis.eigenvalues().iter().take(12).copied().collect(),
        max_principal_angle: angles.iter().copied().fold(0.0, f64::max),
        principal_angles: angles,
        reduced_forward_error: relative_error(&ops, &reduced_final, &full),
        lambda: result.lambda,
        beta: result.beta,
        iterations: result.iterations,
        converged: result.converged,
        final_objective: result.final_objective,
        rel_l2_error: relative_error(&ops, &result.recovered, &truth),
        h_minus1_error: stage("metrics", h_minus1_surrogate(&err_field, &truth, &ops, H_MINUS1_MODES))?,
        timing: Some(Timing {
            full_solve_s,
            reduced_solve_s,
            speedup: full_solve_s / reduced_solve_s.max(1e-12),
        }),
    };
    stage("metrics", fs::write(dir.join("metrics.json"), metrics.to_json()).map_err(Error::from))?;
    Ok(ExperimentOutcome {
        metrics,
        dir,
        truth,
        recovered: result.recovered,
        basis,
    })
}

/// Grid and time resolution of the example presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// `33 x 33`, `M = 100`.
    Desk,
    /// `51 x 51`, `M = 400`.
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `true` when `value <= threshold` is required, `false` for `>=`.
    pub at_most: bool,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            at_most: true,
            pass: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            at_most: false,
            pass: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub id: String,
    pub runs: Vec<RunSummary>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub const EXAMPLE_IDS: [&str; 7] = ["4.1", "4.2", "4.3", "4.4", "4.5", "4.6", "4.7"];

/// Recovery bound for noise-free runs with the adjoint basis.
pub const NOISE_FREE_BOUND: f64 = 0.05;
/// Minimum error ratio of a foreign basis over the adjoint basis.
pub const FOREIGN_RATIO: f64 = 5.0;
/// Largest admissible median error at the highest noise level.
pub const NOISY_BOUND: f64 = 1.0;
/// Borrowed-basis error relative to the native basis.
pub const BORROWED_FACTOR: f64 = 2.0;
pub const NOISE_LEVELS: [f64; 3] = [0.10, 0.25, 0.50];
/// Tikhonov weights of the noisy presets. Noise-free presets keep the
/// near-zero default.
pub const NOISY_LAMBDA_SOURCE: f64 = 1e-3;
pub const NOISY_LAMBDA_BACKWARD: f64 = 1e-2;

/// Tikhonov weight paired with noisy data of a problem kind.
pub fn noisy_lambda(kind: ProblemKind) -> f64 {
    match kind {
        ProblemKind::InverseSource => NOISY_LAMBDA_SOURCE,
        ProblemKind::Backward => NOISY_LAMBDA_BACKWARD,
    }
}

fn base(kind: ProblemKind, truth: &str, basis: BasisSource, scale: Scale) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_kind(kind);
    cfg.problem.truth = truth.into();
    cfg.pod.basis = basis;
    if scale == Scale::Full {
        cfg.grid.nx = 51;
        cfg.grid.ny = 51;
        cfg.problem.steps = 400;
    }
    cfg
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

/// Labelled configurations of a preset.
pub fn example_configs(id: &str, scale: Scale) -> Result<Vec<(String, ExperimentConfig)>> {
    use BasisSource::*;
    use ProblemKind::*;
    let paired = |kind: ProblemKind| {
        vec![
            ("adjoint".to_string(), base(kind, "sin2exp", Adjoint, scale)),
            ("foreign sin1".to_string(), base(kind, "sin2exp", Foreign("sin1".into()), scale)),
            ("foreign glyphA".to_string(), base(kind, "sin2exp", Foreign("glyphA".into()), scale)),
        ]
    };
    let similarity = |kind: ProblemKind, truths: [&str; 2]| {
        truths
            .iter()
            .flat_map(|&t| {
                [
                    (format!("{t} adjoint"), base(kind, t, Adjoint, scale)),
                    (format!("{t} traditional"), base(kind, t, Traditional, scale)),
                ]
            })
            .collect::<Vec<_>>()
    };
    let noisy = |kind: ProblemKind, truth: &str| {
        NOISE_LEVELS
            .iter()
            .map(|&p| {
                let mut cfg = base(kind, truth, Adjoint, scale);
                cfg.measurement.noise = p;
                cfg.inverse.lambda = noisy_lambda(kind);
                (format!("noise {p:.2}"), cfg)
            })
            .collect::<Vec<_>>()
    };
    Ok(match id {
        "4.1" => paired(InverseSource),
        "4.2" => similarity(InverseSource, ["sin2", "glyphZ"]),
        "4.3" => noisy(InverseSource, "sin2exp"),
        "4.4" => paired(Backward),
        "4.5" => similarity(Backward, ["sin2exp", "glyphA"]),
        "4.6" => noisy(Backward, "sin2"),
        "4.7" => vec![
            ("native".to_string(), base(Backward, "glyphA", Adjoint, scale)),
            ("source basis".to_string(), base(Backward, "glyphA", AdjointOf(InverseSource), scale)),
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown example `{other}` (available: {})",
                EXAMPLE_IDS.join(", ")
            )))
        }
    })
}

fn error_of(runs: &[RunSummary], label: &str) -> f64 {
    runs.iter()
        .find(|r| r.label == label)
        .map_or(f64::NAN, |r| r.metrics.rel_l2_error)
}

fn example_checks(id: &str, runs: &[RunSummary]) -> Vec<Check> {
    match id {
        "4.1" | "4.4" => vec![Check::at_least(
            "foreign sin1 / adjoint error",
            error_of(runs, "foreign sin1") / error_of(runs, "adjoint"),
            FOREIGN_RATIO,
        )],
        "4.2" => vec![
            Check::at_most("sin2 adjoint error", error_of(runs, "sin2 adjoint"), NOISE_FREE_BOUND),
            Check::at_most("sin2 traditional error", error_of(runs, "sin2 traditional"), NOISE_FREE_BOUND),
        ],
        "4.5" => vec![
            Check::at_most("sin2exp adjoint error", error_of(runs, "sin2exp adjoint"), NOISE_FREE_BOUND),
            Check::at_most("sin2exp traditional error", error_of(runs, "sin2exp traditional"), NOISE_FREE_BOUND),
        ],
        "4.3" | "4.6" => {
            let mut checks: Vec<Check> = runs
                .iter()
                .map(|r| Check::at_most(format!("{} error finite", r.label), r.metrics.rel_l2_error, f64::MAX))
                .collect();
            checks.push(Check::at_most("noise 0.50 error", error_of(runs, "noise 0.50"), NOISY_BOUND));
            checks
        }
        "4.7" => vec![Check::at_most(
            "source basis / native error",
            error_of(runs, "source basis") / error_of(runs, "native"),
            BORROWED_FACTOR,
        )],
        _ => Vec::new(),
    }
}

/// Runs a preset under `out_root/<id>/<label>` and evaluates its checks.
pub fn run_example(id: &str, scale: Scale, out_root: &Path, overrides: &[String]) -> Result<ExampleReport> {
    let configs = example_configs(id, scale)?;
    let root = out_root.join(slug(id));
    let mut runs = Vec::with_capacity(configs.len());
    for (label, mut cfg) in configs {
        for o in overrides {
            cfg.apply_override(o)?;
        }
        cfg.output.dir = root.join(slug(&label));
        log::info!("example {id}: {label}");
        let outcome = run_experiment(&cfg)?;
        runs.push(RunSummary {
            label,
            metrics: outcome.metrics,
        });
    }
    let checks = example_checks(id, &runs);
    let report = ExampleReport {
        id: id.to_string(),
        pass: checks.iter().all(|c| c.pass),
        runs,
        checks,
    };
    fs::write(root.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Parameter grid of a sweep; every combination is one run.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
}

/// Runs every combination of `spec` on top of `base` in parallel, each in
/// its own directory under `out_root`, and writes `sweep.csv`.
pub fn run_sweep(base: &ExperimentConfig, spec: &SweepSpec, out_root: &Path) -> Result<Vec<Metrics>> {
    let mut configs = Vec::new();
    for &p in &spec.noise_levels {
        for &seed in &spec.seeds {
            for &lambda in &spec.lambdas {
                let mut cfg = base.clone();
                cfg.measurement.noise = p;
                cfg.measurement.seed = seed;
                cfg.inverse.lambda = lambda;
                cfg.output.dir = out_root.join(format!("p{p}_s{seed}_l{lambda:e}"));
                configs.push(cfg);
            }
        }
    }
    let metrics = configs
        .par_iter()
        .map(|cfg| run_experiment(cfg).map(|o| o.metrics))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("noise,seed,lambda,rel_l2_error,h_minus1_error,n_pod,rho,denoise_alpha\n");
    for m in &metrics {
        csv.push_str(&format!(
            "{},{},{:e},{:.6e},{:.6e},{},{:.6e},{}\n",
            m.noise_level,
            m.seed,
            m.lambda,
            m.rel_l2_error,
            m.h_minus1_error,
            m.n_pod,
            m.rho,
            m.denoise_alpha.map_or_else(String::new, |a| format!("{a:.6e}"))
        ));
    }
    fs::create_dir_all(out_root)?;
    fs::write(out_root.join("sweep.csv"), csv)?;
    Ok(metrics)
}
