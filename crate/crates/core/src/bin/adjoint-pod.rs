use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adjoint_pod::assembly::DiscreteOperators;
use adjoint_pod::config::ExperimentConfig;
use adjoint_pod::experiment::{run_example, run_experiment, run_sweep, Scale, SweepSpec};
use adjoint_pod::field::Field;
use adjoint_pod::inverse::{denoise, denoise_auto, MeasurementSet};
use adjoint_pod::reduced::{build_adjoint_pod, solve_kind};
use adjoint_pod::shapes::make_shape;
use adjoint_pod::theory::{
    build_theory_matrices, default_coefficients, pod_bound_table, verify_span_equality, vandermonde_check, RANK_TOL,
};
use adjoint_pod::Result;

#[derive(Parser)]
#[command(name = "adjoint-pod", version, about = "Adjoint-POD inversion for parabolic source and backward problems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set grid.nx=51`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order forward solve of the configured truth.
    Forward {
        /// Also write every n-th state.
        #[arg(long)]
        every: Option<usize>,
    },
    /// Adjoint-POD basis from a measurement field CSV.
    AdjointPod {
        #[arg(long)]
        measurement: PathBuf,
    },
    /// Complete pipeline: measure, denoise, build the basis, invert.
    Invert,
    /// Smooth scattered readings (`x,y,reading` CSV) onto the grid.
    Denoise {
        #[arg(long)]
        readings: PathBuf,
        /// Absolute noise scale of the readings.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Fixed smoothing weight; estimated from `sigma` when absent.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Span-equality and projection-bound checks on the eigenexpansion.
    VerifyTheory {
        /// Comma-separated orders `L = M`.
        #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        t_source: f64,
        #[arg(long, default_value_t = 0.05)]
        t_backward: f64,
        #[arg(long, default_value_t = 51)]
        n: usize,
    },
    /// Preset reproducing one of the reference examples.
    RunExample {
        #[arg(value_parser = ["4.1", "4.2", "4.3", "4.4", "4.5", "4.6", "4.7"])]
        id: String,
        /// 51 x 51 grid with 400 steps instead of the desk-scale default.
        #[arg(long)]
        full: bool,
    },
    /// Parallel sweep over noise levels, seeds and Tikhonov weights.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5")]
        noise: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "1e-8")]
        lambda: Vec<f64>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    let dir = cfg.output.dir.clone();
    match cli.command {
        Command::Forward { every } => {
            fs::create_dir_all(&dir)?;
            let grid = cfg.grid()?;
            let ops = DiscreteOperators::assemble(&grid, &cfg.coefficient_set())?;
            let truth = make_shape(&cfg.problem.truth, &grid)?;
            let traj = solve_kind(cfg.problem.kind, &truth, &ops, cfg.time_grid()?)?;
            traj.final_state().write_csv(&grid, &dir.join("final_state.csv"))?;
            if let Some(n) = every.filter(|&n| n > 0) {
                for (k, s) in traj.states().iter().enumerate().step_by(n) {
                    s.write_csv(&grid, &dir.join(format!("state_{k:05}.csv")))?;
                }
            }
            println!("final state written to {}", dir.join("final_state.csv").display());
            Ok(true)
        }
        Command::AdjointPod { measurement } => {
            let (m, _) = Field::read_csv(&measurement)?;
            let grid = cfg.grid()?;
            let ops = DiscreteOperators::assemble(&grid, &cfg.coefficient_set())?;
            let basis = build_adjoint_pod(cfg.problem.kind, &m, &ops, cfg.time_grid()?, cfg.basis_options())?;
            basis.write(&dir, &ops)?;
            println!(
                "{} modes (retained rank {}, tail ratio {:.3e}) written to {}",
                basis.n_pod(),
                basis.retained_rank(),
                basis.tail_ratio(),
                dir.display()
            );
            Ok(true)
        }
        Command::Invert => {
            let out = run_experiment(&cfg)?;
            println!("{}", out.metrics.to_json());
            Ok(out.metrics.rel_l2_error.is_finite())
        }
        Command::Denoise { readings, sigma, alpha } => {
            fs::create_dir_all(&dir)?;
            let grid = cfg.grid()?;
            let ms = MeasurementSet::read_csv(&readings, &grid, sigma, 0.0, 0)?;
            let (field, alpha) = match alpha {
                Some(a) => (denoise(&ms, &grid, a)?, a),
                None => denoise_auto(&ms, &grid, 5)?,
            };
            field.write_csv(&grid, &dir.join("denoised.csv"))?;
            println!("alpha = {alpha:.6e}; field written to {}", dir.join("denoised.csv").display());
            Ok(true)
        }
        Command::VerifyTheory {
            orders,
            t_source,
            t_backward,
            n,
        } => {
            fs::create_dir_all(&dir)?;
            let grid = adjoint_pod::mesh::Grid2D::new(n, n)?;
            let mut all = true;
            let mut spans = Vec::new();
            let mut bounds = Vec::new();
            for &l in &orders {
                for (kind, t) in [
                    (adjoint_pod::reduced::ProblemKind::InverseSource, t_source),
                    (adjoint_pod::reduced::ProblemKind::Backward, t_backward),
                ] {
                    let tm = build_theory_matrices(kind, l, t, &default_coefficients(l), &grid)?;
                    let span = verify_span_equality(&tm, RANK_TOL);
                    let bound = pod_bound_table(&tm)?;
                    let ok = span.pass && span.transfer_residual <= 1e-8 && bound.pass;
                    println!(
                        "{:<8} L=M={l}: ranks {}/{}/{}, transfer residual {:.2e}, full-rank lhs {:.2e} -> {}",
                        kind.name(),
                        span.rank_a,
                        span.rank_a_tilde,
                        span.rank_stacked,
                        span.transfer_residual,
                        bound.full_rank_lhs,
                        if ok { "PASS" } else { "FAIL" }
                    );
                    fs::write(dir.join(format!("bound_{}_L{l}.csv", kind.name())), bound.to_csv())?;
                    all &= ok;
                    spans.push(span);
                    bounds.push(bound);
                }
            }
            let vdm: Vec<_> = orders.iter().map(|&l| vandermonde_check(l, t_source)).collect();
            all &= vdm.iter().all(|v| v.pass);
            write_json(&dir.join("span_reports.json"), &spans)?;
            write_json(&dir.join("bound_reports.json"), &bounds)?;
            write_json(&dir.join("vandermonde.json"), &vdm)?;
            Ok(all)
        }
        Command::RunExample { id, full } => {
            let scale = if full { Scale::Full } else { Scale::Desk };
            let report = run_example(&id, scale, &dir, &cli.common.overrides)?;
            for r in &report.runs {
                println!("{:<24} rel L2 error {:.4e}  n_pod {}", r.label, r.metrics.rel_l2_error, r.metrics.n_pod);
            }
            for c in &report.checks {
                let op = if c.at_most { "<=" } else { ">=" };
                println!(
                    "[{}] {} = {:.4e} {op} {:.4e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            Ok(report.pass)
        }
        Command::Sweep { noise, seeds, lambda } => {
            let spec = SweepSpec {
                noise_levels: noise,
                seeds,
                lambdas: lambda,
            };
            let metrics = run_sweep(&cfg, &spec, &dir)?;
            let finite = metrics.iter().all(|m| m.rel_l2_error.is_finite());
            println!("{} runs; summary in {}", metrics.len(), dir.join("sweep.csv").display());
            Ok(finite)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
