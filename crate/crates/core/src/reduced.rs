//! Adjoint-driven snapshot generation and the Galerkin reduced model.
//!
//! The adjoint problem is driven only by the measurement `m`:
//!
//! * inverse source: `u_t + L u = m`, `u(0) = 0`;
//! * backward: `u_t + L u = 0`, `u(0) = m`.
//!
//! Its snapshots span (up to truncation) the same space as the unknown
//! forward trajectory, which is what makes the basis usable for inversion
//! without knowing the truth.

use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteOperators;
use crate::error::{Error, Result};
use crate::field::{Field, Trajectory};
use crate::pod::{compute_pod_basis, ModeSelector, PodBasis, Provenance, SnapshotLayout, SnapshotSet};
use crate::timestep::{solve_forward, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Recover the source `f` with zero initial data.
    #[serde(alias = "source")]
    InverseSource,
    /// Recover the initial state `g` with zero source.
    Backward,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::InverseSource => "source",
            ProblemKind::Backward => "backward",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "source" | "inverse_source" => Ok(ProblemKind::InverseSource),
            "backward" => Ok(ProblemKind::Backward),
            other => Err(Error::Config(format!("unknown problem kind `{other}` (source|backward)"))),
        }
    }
}

/// Full-order forward trajectory for the problem kind with `input` as the
/// unknown (source or initial state).
pub fn solve_kind(kind: ProblemKind, input: &Field, ops: &DiscreteOperators, time: TimeGrid) -> Result<Trajectory> {
    let zero = Field::zeros(ops.grid());
    match kind {
        ProblemKind::InverseSource => solve_forward(ops, time, input, &zero),
        ProblemKind::Backward => solve_forward(ops, time, &zero, input),
    }
}

/// Adjoint trajectory driven by the measurement; boundary values of `m`
/// are zeroed first.
pub fn solve_adjoint(kind: ProblemKind, m: &Field, ops: &DiscreteOperators, time: TimeGrid) -> Result<Trajectory> {
    m.check_grid(ops.grid())?;
    let driver = m.clone().masked(ops.grid());
    solve_kind(kind, &driver, ops, time)
}

/// Options for building an adjoint-POD basis.
#[derive(Debug, Clone, Copy)]
pub struct BasisOptions {
    pub selector: ModeSelector,
    pub max_snapshots: usize,
    pub layout: SnapshotLayout,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            selector: ModeSelector::Count(9),
            max_snapshots: 201,
            layout: SnapshotLayout::StatesAndQuotients,
        }
    }
}

/// Snapshots of a trajectory reduced to a POD basis, tagged with its origin.
pub fn basis_from_trajectory(traj: &Trajectory, ops: &DiscreteOperators, opts: BasisOptions, provenance: Provenance) -> Result<PodBasis> {
    let snap = SnapshotSet::collect(traj, opts.max_snapshots, opts.layout)?;
    let mut basis = compute_pod_basis(&snap, ops, opts.selector)?;
    basis.provenance = Some(provenance);
    Ok(basis)
}

/// Adjoint-POD basis from measured (denoised) data.
pub fn build_adjoint_pod(kind: ProblemKind, m: &Field, ops: &DiscreteOperators, time: TimeGrid, opts: BasisOptions) -> Result<PodBasis> {
    let driver = m.clone().masked(ops.grid());
    if driver.values().amax() == 0.0 {
        return Err(Error::ZeroSnapshots);
    }
    let traj = solve_adjoint(kind, &driver, ops, time)?;
    basis_from_trajectory(
        &traj,
        ops,
        opts,
        Provenance {
            equation: format!("adjoint-{}", kind.name()),
            driver: "measurement".into(),
            from_measurement: true,
        },
    )
}

/// Galerkin projection of the full-order scheme onto a POD space.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    basis: PodBasis,
    kind: ProblemKind,
    time: TimeGrid,
    mass_r: DMatrix<f64>,
    stiffness_r: DMatrix<f64>,
    step: Cholesky<f64, Dyn>,
    spod: DMatrix<f64>,
}

#[derive(Serialize)]
struct ReducedManifest<'a> {
    kind: ProblemKind,
    n_pod: usize,
    t_final: f64,
    steps: usize,
    dt: f64,
    mass_deviation: f64,
    provenance: &'a Option<Provenance>,
    files: [&'static str; 2],
}

impl ReducedModel {
    pub fn build(ops: &DiscreteOperators, basis: &PodBasis, time: TimeGrid, kind: ProblemKind) -> Result<Self> {
        if basis.dims() != (ops.grid().nx(), ops.grid().ny()) {
            return Err(Error::invalid("basis and operators live on different grids"));
        }
        let psi = basis.modes();
        let mass_r = psi.transpose() * ops.apply_mass_columns(psi);
        let ka = psi.transpose() * ops.apply_stiffness_columns(psi);
        let stiffness_r = (&ka + ka.transpose()) * 0.5;
        let n = basis.n_pod();
        let dev = (&mass_r - DMatrix::<f64>::identity(n, n)).amax();
        if n > 0 && dev > 1e-8 {
            return Err(Error::invalid(format!("basis is not mass-orthonormal (deviation {dev:e})")));
        }
        let system = DMatrix::identity(n, n) + &stiffness_r * time.dt();
        let step = Cholesky::new(system).ok_or_else(|| Error::LinearSolve("reduced (I + dt A_r) is not SPD".into()))?;
        let spod = propagate(kind, &step, time, n);
        Ok(Self {
            basis: basis.clone(),
            kind,
            time,
            mass_r,
            stiffness_r,
            step,
            spod,
        })
    }

    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn n_pod(&self) -> usize {
        self.basis.n_pod()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass_r
    }

    /// `A_r[a][b] = a(psi_b, psi_a)`.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness_r
    }

    /// Explicit matrix of `S_pod` in reduced coordinates.
    pub fn spod_matrix(&self) -> &DMatrix<f64> {
        &self.spod
    }

    /// Time-marches the reduced scheme. Returns the final field and the
    /// coefficient path `c_0 .. c_M`.
    pub fn solve(&self, input: &Field, ops: &DiscreteOperators) -> Result<(Field, Vec<DVector<f64>>)> {
        input.check_grid(ops.grid())?;
        let coords = self.basis.coordinates(input.values(), ops);
        let path = self.solve_coordinates(&coords);
        let last = path.last().expect("path holds c_0");
        let field = Field::from_values(ops.grid(), self.basis.expand(last))?;
        Ok((field, path))
    }

    /// Reduced time march on coordinates of the input.
    pub fn solve_coordinates(&self, input: &DVector<f64>) -> Vec<DVector<f64>> {
        let n = self.n_pod();
        let dt = self.time.dt();
        let mut path = Vec::with_capacity(self.time.steps() + 1);
        let mut c = match self.kind {
            ProblemKind::InverseSource => DVector::zeros(n),
            ProblemKind::Backward => input.clone(),
        };
        path.push(c.clone());
        for _ in 0..self.time.steps() {
            if self.kind == ProblemKind::InverseSource {
                c.axpy(dt, input, 1.0);
            }
            c = self.step.solve(&c);
            path.push(c.clone());
        }
        path
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let n = self.n_pod();
        let manifest = ReducedManifest {
            kind: self.kind,
            n_pod: n,
            t_final: self.time.t_final(),
            steps: self.time.steps(),
            dt: self.time.dt(),
            mass_deviation: (&self.mass_r - DMatrix::<f64>::identity(n, n)).amax(),
            provenance: &self.basis.provenance,
            files: ["stiffness_r.csv", "spod.csv"],
        };
        fs::write(dir.join("reduced_manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        fs::write(dir.join("stiffness_r.csv"), matrix_csv(&self.stiffness_r))?;
        fs::write(dir.join("spod.csv"), matrix_csv(&self.spod))?;
        Ok(())
    }
}

/// Backward kind: `R^M`; source kind: `dt * sum_{k=1..M} R^k`, where
/// `R = (I + dt A_r)^{-1}`.
fn propagate(kind: ProblemKind, step: &Cholesky<f64, Dyn>, time: TimeGrid, n: usize) -> DMatrix<f64> {
    let mut power = DMatrix::identity(n, n);
    let mut acc = DMatrix::zeros(n, n);
    for _ in 0..time.steps() {
        power = step.solve(&power);
        if kind == ProblemKind::InverseSource {
            acc += &power;
        }
    }
    match kind {
        ProblemKind::InverseSource => acc * time.dt(),
        ProblemKind::Backward => power,
    }
}

/// Dense matrix as CSV rows, 17 significant digits.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
