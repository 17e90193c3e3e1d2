//! Proper orthogonal decomposition by the method of snapshots.
//!
//! Snapshots are the states `u(t_0) .. u(t_M)` followed by the difference
//! quotients `(u(t_k) - u(t_{k-1})) / dt`. The basis comes from the
//! eigenpairs `(lambda_k, v_k)` of the temporal correlation matrix
//! `K_ij = (y_i, y_j)_{L2}`:
//!
//! ```text
//! psi_k = lambda_k^{-1/2} * sum_j (v_k)_j y_j
//! ```
//!
//! and the captured energy satisfies
//!
//! ```text
//! sum_i |y_i - P y_i|^2 / sum_i |y_i|^2 = sum_{k > N} lambda_k / sum_k lambda_k
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteOperators;
use crate::error::{Error, Result};
use crate::field::{Field, Trajectory};

/// Eigenvalues below this fraction of the largest are discarded.
pub const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnapshotLayout {
    /// States followed by difference quotients (`2M + 1` snapshots).
    StatesAndQuotients,
    /// States only, for ablations and externally supplied columns.
    StatesOnly,
}

#[derive(Debug, Clone)]
pub struct SnapshotSet {
    nx: usize,
    ny: usize,
    layout: SnapshotLayout,
    /// One snapshot per column.
    data: DMatrix<f64>,
    /// Number of states (`M + 1` for the quotient layout).
    states: usize,
}

impl SnapshotSet {
    /// Builds a snapshot set from a trajectory, subsampling the time grid
    /// uniformly when `2M + 1` would exceed `max_snapshots`.
    pub fn collect(traj: &Trajectory, max_snapshots: usize, layout: SnapshotLayout) -> Result<Self> {
        if max_snapshots < 3 || max_snapshots.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "max_snapshots must be odd and >= 3, got {max_snapshots}"
            )));
        }
        let m = traj.time().steps();
        let kept_steps = match layout {
            SnapshotLayout::StatesAndQuotients => m.min((max_snapshots - 1) / 2),
            SnapshotLayout::StatesOnly => m.min(max_snapshots - 1),
        };
        let indices: Vec<usize> = (0..=kept_steps)
            .map(|i| (i * m + kept_steps / 2) / kept_steps)
            .collect();

        let first = traj.state(0);
        let n = first.len();
        let count = match layout {
            SnapshotLayout::StatesAndQuotients => 2 * kept_steps + 1,
            SnapshotLayout::StatesOnly => kept_steps + 1,
        };
        let mut data = DMatrix::zeros(n, count);
        for (col, &k) in indices.iter().enumerate() {
            data.set_column(col, traj.state(k).values());
        }
        if layout == SnapshotLayout::StatesAndQuotients {
            for q in 1..=kept_steps {
                let (k0, k1) = (indices[q - 1], indices[q]);
                let dt = traj.time().t(k1) - traj.time().t(k0);
                let diff = (traj.state(k1).values() - traj.state(k0).values()) / dt;
                data.set_column(kept_steps + q, &diff);
            }
        }
        Ok(Self {
            nx: first.nx(),
            ny: first.ny(),
            layout,
            data,
            states: kept_steps + 1,
        })
    }

    /// A states-only set from arbitrary fields.
    pub fn from_fields(fields: &[Field]) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::invalid("empty snapshot list"))?;
        let mut data = DMatrix::zeros(first.len(), fields.len());
        for (c, f) in fields.iter().enumerate() {
            if f.nx() != first.nx() || f.ny() != first.ny() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: f.len(),
                });
            }
            data.set_column(c, f.values());
        }
        Ok(Self {
            nx: first.nx(),
            ny: first.ny(),
            layout: SnapshotLayout::StatesOnly,
            data,
            states: fields.len(),
        })
    }

    /// A states-only set from the columns of a node-by-snapshot matrix.
    pub fn from_columns(nx: usize, ny: usize, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                found: data.nrows(),
            });
        }
        let states = data.ncols();
        Ok(Self {
            nx,
            ny,
            layout: SnapshotLayout::StatesOnly,
            data,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn layout(&self) -> SnapshotLayout {
        self.layout
    }

    /// Number of time steps `M` represented (states minus one).
    pub fn steps(&self) -> usize {
        self.states - 1
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn snapshot(&self, i: usize) -> DVector<f64> {
        self.data.column(i).into_owned()
    }

    /// Same snapshots in a different order (`order[i]` is the old index).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut data = DMatrix::zeros(self.data.nrows(), order.len());
        for (c, &o) in order.iter().enumerate() {
            data.set_column(c, &self.data.column(o));
        }
        Self {
            data,
            layout: SnapshotLayout::StatesOnly,
            states: order.len(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            data: &self.data * s,
            ..self.clone()
        }
    }
}

/// `K_ij = (y_i, y_j)_{L2}`, symmetrized.
pub fn correlation_matrix(snap: &SnapshotSet, ops: &DiscreteOperators) -> DMatrix<f64> {
    let my = ops.apply_mass_columns(&snap.data);
    let k = snap.data.transpose() * my;
    (&k + k.transpose()) * 0.5
}

/// How many modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModeSelector {
    /// Fixed count, clipped to the retained rank.
    Count(usize),
    /// Smallest count whose tail energy ratio is at most the threshold.
    Energy(f64),
}

/// Where a basis came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Which evolution equation generated the snapshots.
    pub equation: String,
    /// The right-hand side (or initial state) that drove it.
    pub driver: String,
    /// True when the driver is measured data rather than the unknown truth.
    pub from_measurement: bool,
}

#[derive(Debug, Clone)]
pub struct PodBasis {
    nx: usize,
    ny: usize,
    /// Mass-orthonormal modes, one per column.
    modes: DMatrix<f64>,
    /// All correlation eigenvalues, non-increasing, clamped at zero.
    eigenvalues: Vec<f64>,
    retained_rank: usize,
    tail_ratio: f64,
    pub provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct BasisManifest {
    nx: usize,
    ny: usize,
    n_pod: usize,
    retained_rank: usize,
    tail_ratio: f64,
    eigenvalues: Vec<f64>,
    provenance: Option<Provenance>,
    mode_files: Vec<String>,
}

impl PodBasis {
    pub fn n_pod(&self) -> usize {
        self.modes.ncols()
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> DVector<f64> {
        self.modes.column(k).into_owned()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn retained_rank(&self) -> usize {
        self.retained_rank
    }

    /// `rho = sum_{k > N} lambda_k / sum_k lambda_k`.
    pub fn tail_ratio(&self) -> f64 {
        self.tail_ratio
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// The leading `n` modes with the tail ratio recomputed.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_pod());
        Self {
            modes: self.modes.columns(0, n).into_owned(),
            tail_ratio: tail_ratio(&self.eigenvalues, n),
            ..self.clone()
        }
    }

    /// Orthonormalizes arbitrary fields (modified Gram-Schmidt, mass
    /// product); directions with relative norm below `1e-10` are dropped.
    /// The result carries no correlation spectrum.
    pub fn from_fields(fields: &[Field], ops: &DiscreteOperators) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::invalid("empty field list"))?;
        let mut cols = DMatrix::zeros(first.len(), fields.len());
        for (c, f) in fields.iter().enumerate() {
            cols.set_column(c, f.values());
        }
        let modes = orthonormalize(&cols, ops, 1e-10);
        let n = modes.ncols();
        Ok(Self {
            nx: first.nx(),
            ny: first.ny(),
            modes,
            eigenvalues: Vec::new(),
            retained_rank: n,
            tail_ratio: 0.0,
            provenance: None,
        })
    }

    /// Reduced coordinates `(psi_k, v)_{L2}`.
    pub fn coordinates(&self, v: &DVector<f64>, ops: &DiscreteOperators) -> DVector<f64> {
        self.modes.transpose() * ops.apply_mass(v)
    }

    /// `sum_k c_k psi_k`.
    pub fn expand(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.modes * coeffs
    }

    /// L2 projection of `v` onto the span.
    pub fn project(&self, v: &DVector<f64>, ops: &DiscreteOperators) -> DVector<f64> {
        self.expand(&self.coordinates(v, ops))
    }

    /// Mass-weighted Gram matrix of the modes.
    pub fn gram(&self, ops: &DiscreteOperators) -> DMatrix<f64> {
        self.modes.transpose() * ops.apply_mass_columns(&self.modes)
    }

    /// Writes `psi_001.csv ..` plus `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, ops: &DiscreteOperators) -> Result<()> {
        fs::create_dir_all(dir)?;
        let grid = ops.grid();
        let mut mode_files = Vec::new();
        for k in 0..self.n_pod() {
            let name = format!("psi_{:03}.csv", k + 1);
            Field::from_values(grid, self.mode(k))?.write_csv(grid, &dir.join(&name))?;
            mode_files.push(name);
        }
        let manifest = BasisManifest {
            nx: self.nx,
            ny: self.ny,
            n_pod: self.n_pod(),
            retained_rank: self.retained_rank,
            tail_ratio: self.tail_ratio,
            eigenvalues: self.eigenvalues.clone(),
            provenance: self.provenance.clone(),
            mode_files,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest: BasisManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut modes = DMatrix::zeros(manifest.nx * manifest.ny, manifest.n_pod);
        for (k, name) in manifest.mode_files.iter().enumerate() {
            let (f, _) = Field::read_csv(&dir.join(name))?;
            if f.nx() != manifest.nx || f.ny() != manifest.ny {
                return Err(Error::Parse {
                    path: dir.join(name),
                    message: "mode grid does not match manifest".into(),
                });
            }
            modes.set_column(k, f.values());
        }
        Ok(Self {
            nx: manifest.nx,
            ny: manifest.ny,
            modes,
            eigenvalues: manifest.eigenvalues,
            retained_rank: manifest.retained_rank,
            tail_ratio: manifest.tail_ratio,
            provenance: manifest.provenance,
        })
    }
}

fn tail_ratio(eigenvalues: &[f64], n: usize) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let tail: f64 = eigenvalues.iter().skip(n).sum();
    (tail / total).clamp(0.0, 1.0)
}

/// One modified Gram-Schmidt pass in the mass inner product.
fn orthonormalize(cols: &DMatrix<f64>, ops: &DiscreteOperators, drop_tol: f64) -> DMatrix<f64> {
    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(cols.ncols());
    let scale = (0..cols.ncols())
        .map(|c| ops.norm(&cols.column(c).into_owned()))
        .fold(0.0, f64::max);
    for c in 0..cols.ncols() {
        let mut v = cols.column(c).into_owned();
        for q in &kept {
            let r = ops.inner(q, &v);
            v.axpy(-r, q, 1.0);
        }
        let nv = ops.norm(&v);
        if nv > drop_tol * scale && nv > 0.0 {
            kept.push(v / nv);
        }
    }
    let mut out = DMatrix::zeros(cols.nrows(), kept.len());
    for (c, q) in kept.iter().enumerate() {
        out.set_column(c, q);
    }
    out
}

/// Eigenpairs of `K` sorted by non-increasing eigenvalue.
fn sorted_eigen(k: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), order.len());
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// POD basis of `snap` by the method of snapshots.
pub fn compute_pod_basis(snap: &SnapshotSet, ops: &DiscreteOperators, selector: ModeSelector) -> Result<PodBasis> {
    if snap.data.nrows() != ops.grid().node_count() {
        return Err(Error::DimensionMismatch {
            expected: ops.grid().node_count(),
            found: snap.data.nrows(),
        });
    }
    let (eigenvalues, vectors) = sorted_eigen(correlation_matrix(snap, ops));
    let lead = eigenvalues.first().copied().unwrap_or(0.0);
    if !(lead > 0.0) {
        return Err(Error::ZeroSnapshots);
    }
    let retained = eigenvalues.iter().take_while(|&&l| l >= RANK_CUTOFF * lead).count();
    let n_pod = match selector {
        ModeSelector::Count(n) => n.min(retained),
        ModeSelector::Energy(eps) => (1..=retained)
            .find(|&n| tail_ratio(&eigenvalues, n) <= eps)
            .unwrap_or(retained),
    };
    let mut raw = DMatrix::zeros(snap.data.nrows(), n_pod);
    for k in 0..n_pod {
        let col = &snap.data * vectors.column(k) / eigenvalues[k].sqrt();
        raw.set_column(k, &col);
    }
    let modes = orthonormalize(&raw, ops, 0.0);
    Ok(PodBasis {
        nx: snap.nx,
        ny: snap.ny,
        tail_ratio: tail_ratio(&eigenvalues, modes.ncols()),
        modes,
        eigenvalues,
        retained_rank: retained,
        provenance: None,
    })
}

/// Both sides of the POD error identity: the relative projection error
/// of the snapshots onto `basis`, and the basis' own tail ratio. With a
/// basis built from another snapshot set only `lhs` is meaningful.
pub fn projection_error_ratio(snap: &SnapshotSet, basis: &PodBasis, ops: &DiscreteOperators) -> (f64, f64) {
    let y = &snap.data;
    let my = ops.apply_mass_columns(y);
    let coords = basis.modes.transpose() * &my;
    let residual = y - &basis.modes * coords;
    let mr = ops.apply_mass_columns(&residual);
    let num: f64 = residual.component_mul(&mr).sum();
    let den: f64 = y.component_mul(&my).sum();
    let lhs = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    (lhs, basis.tail_ratio)
}

/// Principal angles (radians, non-decreasing) between the two spans under
/// the mass inner product. Small angles are resolved from sines, large
/// ones from cosines.
pub fn principal_angles(a: &PodBasis, b: &PodBasis, ops: &DiscreteOperators) -> Result<Vec<f64>> {
    if a.dims() != b.dims() {
        return Err(Error::invalid("bases live on different grids"));
    }
    let (small, large) = if a.n_pod() <= b.n_pod() { (a, b) } else { (b, a) };
    let p = small.n_pod();
    if p == 0 {
        return Ok(Vec::new());
    }
    let ml = ops.apply_mass_columns(&large.modes);
    let cross = ml.transpose() * &small.modes; // large^T M small
    let mut cosines: Vec<f64> = cross
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    cosines.resize(p, 0.0);

    let residual = &small.modes - &large.modes * cross;
    let g = residual.transpose() * ops.apply_mass_columns(&residual);
    let g = (&g + g.transpose()) * 0.5;
    let mut sines_sq: Vec<f64> = SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    sines_sq.sort_by(f64::total_cmp);

    Ok((0..p)
        .map(|i| {
            if sines_sq[i] < 0.5 {
                sines_sq[i].sqrt().asin()
            } else {
                cosines[i].acos()
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CoefficientSet;
    use crate::mesh::Grid2D;
    use crate::spectral::{eigenfunction, Mode};
    use crate::timestep::TimeGrid;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn ops(n: usize) -> DiscreteOperators {
        DiscreteOperators::assemble(&Grid2D::new(n, n).unwrap(), &CoefficientSet::laplacian()).unwrap()
    }

    /// Two mass-orthonormal fields built by Gram-Schmidt on two modes.
    fn orthonormal_pair(o: &DiscreteOperators) -> (DVector<f64>, DVector<f64>) {
        let b = PodBasis::from_fields(
            &[eigenfunction(Mode::new(1, 1), o.grid()), eigenfunction(Mode::new(2, 1), o.grid())],
            o,
        )
        .unwrap();
        (b.mode(0), b.mode(1))
    }

    fn traj_from(fields: Vec<Field>, t: f64) -> Trajectory {
        let m = fields.len() - 1;
        Trajectory::new(TimeGrid::new(t, m).unwrap(), fields).unwrap()
    }

    #[test]
    fn single_step_trajectory_gives_three_snapshots() {
        let o = ops(6);
        let g = o.grid();
        let u0 = eigenfunction(Mode::new(1, 1), g);
        let u1 = u0.scaled(0.5);
        let snap = SnapshotSet::collect(&traj_from(vec![u0.clone(), u1.clone()], 0.25), 201, SnapshotLayout::StatesAndQuotients).unwrap();
        assert_eq!(snap.len(), 3);
        assert_eq!(snap.snapshot(0), *u0.values());
        assert_eq!(snap.snapshot(1), *u1.values());
        let q = (u1.values() - u0.values()) / 0.25;
        assert_eq!(snap.snapshot(2), q);
    }

    #[test]
    fn long_trajectories_are_subsampled() {
        let o = ops(4);
        let g = o.grid();
        let fields: Vec<Field> = (0..=400).map(|k| eigenfunction(Mode::new(1, 1), g).scaled(k as f64)).collect();
        let traj = traj_from(fields, 1.0);
        let snap = SnapshotSet::collect(&traj, 201, SnapshotLayout::StatesAndQuotients).unwrap();
        assert_eq!(snap.len(), 201);
        assert_eq!(snap.steps(), 100);
        // state i is U_{4i}; quotients are over 4 fine steps
        assert_eq!(snap.snapshot(3), *traj.state(12).values());
        let q = (traj.state(8).values() - traj.state(4).values()) / (traj.time().t(8) - traj.time().t(4));
        assert!((snap.snapshot(102) - q).amax() < 1e-12);
        assert!(SnapshotSet::collect(&traj, 200, SnapshotLayout::StatesAndQuotients).is_err());
        assert!(SnapshotSet::collect(&traj, 1, SnapshotLayout::StatesAndQuotients).is_err());
    }

    #[test]
    fn constant_trajectory_has_zero_quotients() {
        let o = ops(5);
        let u = eigenfunction(Mode::new(1, 2), o.grid());
        let snap = SnapshotSet::collect(&traj_from(vec![u.clone(); 6], 1.0), 201, SnapshotLayout::StatesAndQuotients).unwrap();
        for i in 6..11 {
            assert_eq!(snap.snapshot(i).amax(), 0.0);
        }
    }

    #[test]
    fn orthonormal_snapshots_have_identity_correlation() {
        let o = ops(12);
        let (a, b) = orthonormal_pair(&o);
        let snap = SnapshotSet::from_columns(12, 12, DMatrix::from_columns(&[a, b])).unwrap();
        let k = correlation_matrix(&snap, &o);
        assert!((k - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn duplicated_snapshot_has_rank_one_correlation() {
        let o = ops(9);
        let y = eigenfunction(Mode::new(2, 3), o.grid());
        let snap = SnapshotSet::from_fields(&[y.clone(), y.clone()]).unwrap();
        let k = correlation_matrix(&snap, &o);
        let n2 = o.inner(y.values(), y.values());
        assert!((k - DMatrix::from_element(2, 2, n2)).amax() < 1e-12);
    }

    #[test]
    fn single_snapshot_basis() {
        let o = ops(9);
        let y = Field::from_fn(o.grid(), |x, y| x * y * (x - 3.0)).masked(o.grid());
        let snap = SnapshotSet::from_fields(std::slice::from_ref(&y)).unwrap();
        let basis = compute_pod_basis(&snap, &o, ModeSelector::Count(4)).unwrap();
        assert_eq!(basis.n_pod(), 1);
        let ny = o.norm(y.values());
        assert_relative_eq!(basis.eigenvalues()[0], ny * ny, max_relative = 1e-12);
        assert_eq!(basis.tail_ratio(), 0.0);
        let psi = basis.mode(0);
        let expect = y.values() / ny;
        assert!((psi.clone() - &expect).amax().min((psi + expect).amax()) < 1e-10);
    }

    #[test]
    fn zero_snapshots_are_rejected() {
        let o = ops(5);
        let z = Field::zeros(o.grid());
        let snap = SnapshotSet::from_fields(&[z.clone(), z]).unwrap();
        assert!(matches!(compute_pod_basis(&snap, &o, ModeSelector::Count(1)), Err(Error::ZeroSnapshots)));
    }

    #[test]
    fn nine_to_one_energy_split() {
        let o = ops(15);
        let (a, b) = orthonormal_pair(&o);
        let snap = SnapshotSet::from_columns(15, 15, DMatrix::from_columns(&[a * 3.0, b])).unwrap();
        let basis = compute_pod_basis(&snap, &o, ModeSelector::Count(1)).unwrap();
        assert_relative_eq!(basis.eigenvalues()[0], 9.0, max_relative = 1e-10);
        assert_relative_eq!(basis.eigenvalues()[1], 1.0, max_relative = 1e-10);
        assert_relative_eq!(basis.tail_ratio(), 0.1, max_relative = 1e-10);
        let (lhs, rhs) = projection_error_ratio(&snap, &basis, &o);
        assert_relative_eq!(lhs, 0.1, max_relative = 1e-10);
        assert_relative_eq!(rhs, 0.1, max_relative = 1e-10);
        let full = compute_pod_basis(&snap, &o, ModeSelector::Energy(0.0)).unwrap();
        assert_eq!(full.n_pod(), 2);
        assert!(full.tail_ratio() <= 1e-12);
        let (lhs, rhs) = projection_error_ratio(&snap, &full, &o);
        assert!(lhs < 1e-10 && rhs < 1e-10);
        let gram = full.gram(&o);
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn foreign_orthogonal_basis_captures_nothing() {
        let o = ops(15);
        let (a, b) = orthonormal_pair(&o);
        let snap = SnapshotSet::from_columns(15, 15, DMatrix::from_columns(&[a * 2.0])).unwrap();
        let foreign = compute_pod_basis(&SnapshotSet::from_columns(15, 15, DMatrix::from_columns(&[b])).unwrap(), &o, ModeSelector::Count(1)).unwrap();
        let (lhs, _) = projection_error_ratio(&snap, &foreign, &o);
        assert_relative_eq!(lhs, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn principal_angle_basics() {
        let o = ops(15);
        let (a, b) = orthonormal_pair(&o);
        let sa = compute_pod_basis(&SnapshotSet::from_columns(15, 15, DMatrix::from_columns(std::slice::from_ref(&a))).unwrap(), &o, ModeSelector::Count(1)).unwrap();
        let sb = compute_pod_basis(&SnapshotSet::from_columns(15, 15, DMatrix::from_columns(std::slice::from_ref(&b))).unwrap(), &o, ModeSelector::Count(1)).unwrap();
        let both = compute_pod_basis(&SnapshotSet::from_columns(15, 15, DMatrix::from_columns(&[a * 2.0, b])).unwrap(), &o, ModeSelector::Count(2)).unwrap();
        let same = principal_angles(&both, &both, &o).unwrap();
        assert!(same.iter().all(|&t| t.abs() < 1e-8), "{same:?}");
        let orth = principal_angles(&sa, &sb, &o).unwrap();
        assert_relative_eq!(orth[0], FRAC_PI_2, epsilon = 1e-8);
        let contained = principal_angles(&sb, &both, &o).unwrap();
        assert_eq!(contained.len(), 1);
        assert!(contained[0] < 1e-8);
    }

    #[test]
    fn basis_round_trips_through_disk() {
        let o = ops(7);
        let (a, b) = orthonormal_pair(&o);
        let snap = SnapshotSet::from_columns(7, 7, DMatrix::from_columns(&[a * 3.0, b])).unwrap();
        let mut basis = compute_pod_basis(&snap, &o, ModeSelector::Count(2)).unwrap();
        basis.provenance = Some(Provenance {
            equation: "test".into(),
            driver: "pair".into(),
            from_measurement: false,
        });
        let dir = tempfile::tempdir().unwrap();
        basis.write(dir.path(), &o).unwrap();
        let back = PodBasis::read(dir.path()).unwrap();
        assert_eq!(back.modes(), basis.modes());
        assert_eq!(back.eigenvalues(), basis.eigenvalues());
        assert_eq!(back.provenance, basis.provenance);
    }
}
