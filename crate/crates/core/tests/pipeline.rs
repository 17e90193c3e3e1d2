use adjoint_pod::config::ExperimentConfig;
use adjoint_pod::experiment::run_experiment;
use adjoint_pod::mesh::Grid2D;
use adjoint_pod::reduced::ProblemKind;
use adjoint_pod::shapes::make_shape;

fn small(kind: ProblemKind, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_kind(kind);
    cfg.grid.nx = 21;
    cfg.grid.ny = 21;
    cfg.problem.steps = 40;
    cfg.problem.truth = "sin2exp".into();
    cfg.measurement.noise = 0.1;
    cfg.measurement.detectors = 15;
    cfg.inverse.lambda = 1e-3;
    cfg.output.dir = dir.to_path_buf();
    cfg
}

#[test]
fn repeated_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for kind in [ProblemKind::InverseSource, ProblemKind::Backward] {
        let a = run_experiment(&small(kind, &tmp.path().join("a"))).unwrap();
        let b = run_experiment(&small(kind, &tmp.path().join("b"))).unwrap();
        assert_eq!(a.metrics.deterministic_json(), b.metrics.deterministic_json());
        assert_eq!(a.recovered.values(), b.recovered.values());
        let ra = std::fs::read_to_string(a.dir.join("recovered.csv")).unwrap();
        let rb = std::fs::read_to_string(b.dir.join("recovered.csv")).unwrap();
        assert_eq!(ra, rb);
    }
}

#[test]
fn different_seeds_change_the_measurement() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(ProblemKind::InverseSource, &tmp.path().join("a"));
    let a = run_experiment(&cfg).unwrap();
    cfg.measurement.seed = 2;
    cfg.output.dir = tmp.path().join("b");
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(a.metrics.measurement_error, b.metrics.measurement_error);
}

#[test]
fn glyph_node_counts_match_golden_file() {
    let text = include_str!("golden/glyph_counts.txt");
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let n: usize = parts[1].parse().unwrap();
        let expect: usize = parts[2].parse().unwrap();
        let grid = Grid2D::new(n, n).unwrap();
        let f = make_shape(parts[0], &grid).unwrap();
        let count = f.values().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(count, expect, "{} on {n}x{n}", parts[0]);
        rows += 1;
    }
    assert_eq!(rows, 4);
}
