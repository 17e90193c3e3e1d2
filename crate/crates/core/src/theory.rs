//! Span-equality and projection-error checks on the analytic
//! eigenexpansion (`q = 1`, `c = 0`).
//!
//! With eigenfunctions `Phi`, data `F = diag(f)`, final-time factors
//! `D = diag(alpha)` and time factors `J(i, j)`, the forward snapshots are
//! `A = Phi F J` and the adjoint snapshots `A~ = Phi D F J`. Because `D`
//! and `F` are diagonal and `J` has full row rank, `A~ P = A` with
//! `P = J^+ D^-1 J`, so both matrices share a column space.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assembly::{CoefficientSet, DiscreteOperators};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::Grid2D;
use crate::pod::{compute_pod_basis, projection_error_ratio, ModeSelector, PodBasis, SnapshotSet};
use crate::reduced::ProblemKind;
use crate::spectral::{amplification, distinct_modes, eigenfunction, ordered_modes, Mode, SpectralCoefficients};

/// Default relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Largest `L` for which exact-rank assertions are meaningful.
pub const MAX_ASSERTED_ORDER: usize = 8;

#[derive(Debug, Clone)]
pub struct TheoryMatrices {
    pub kind: ProblemKind,
    pub t_final: f64,
    pub modes: Vec<Mode>,
    pub mus: Vec<f64>,
    pub phi: DMatrix<f64>,
    pub f: DVector<f64>,
    pub d: DVector<f64>,
    pub j: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub a_tilde: DMatrix<f64>,
    ops: DiscreteOperators,
}

/// Unit-free nonzero coefficients `f_k = 1 / k` on the first `l`
/// modes with pairwise distinct eigenvalues.
pub fn default_coefficients(l: usize) -> SpectralCoefficients {
    let entries = distinct_modes(l)
        .into_iter()
        .enumerate()
        .map(|(k, m)| (m, 1.0 / (k + 1) as f64))
        .collect();
    SpectralCoefficients::new(entries).expect("distinct modes")
}

fn time_factor(kind: ProblemKind, mu: f64, t: f64) -> f64 {
    amplification(kind, mu, t)
}

/// Builds `Phi, F, D, J, A, A~` for `t_j = j T / M`, `j = 1..=M`.
pub fn build_theory_matrices(
    kind: ProblemKind,
    m: usize,
    t_final: f64,
    fcoeffs: &SpectralCoefficients,
    grid: &Grid2D,
) -> Result<TheoryMatrices> {
    let l = fcoeffs.order();
    if l == 0 {
        return Err(Error::invalid("at least one mode is required"));
    }
    if l > m {
        return Err(Error::invalid(format!("need L <= M, got L = {l}, M = {m}")));
    }
    if !(t_final > 0.0) {
        return Err(Error::invalid(format!("final time must be positive, got {t_final}")));
    }
    let mut entries = fcoeffs.entries().to_vec();
    entries.sort_by(|a, b| (a.0.eigenvalue(), a.0).partial_cmp(&(b.0.eigenvalue(), b.0)).expect("finite"));
    for w in entries.windows(2) {
        if w[0].0.eigenvalue() == w[1].0.eigenvalue() {
            return Err(Error::invalid(format!(
                "modes ({}, {}) and ({}, {}) share eigenvalue {}",
                w[0].0.j,
                w[0].0.k,
                w[1].0.j,
                w[1].0.k,
                w[0].0.eigenvalue()
            )));
        }
    }
    if entries.iter().any(|e| e.1 == 0.0) {
        return Err(Error::invalid("all data coefficients must be nonzero"));
    }
    let ops = DiscreteOperators::assemble(grid, &CoefficientSet::laplacian())?;
    let modes: Vec<Mode> = entries.iter().map(|e| e.0).collect();
    let mus: Vec<f64> = modes.iter().map(Mode::eigenvalue).collect();
    let cols: Vec<DVector<f64>> = modes.iter().map(|&md| eigenfunction(md, grid).into_values()).collect();
    let phi = DMatrix::from_columns(&cols);
    let f = DVector::from_iterator(l, entries.iter().map(|e| e.1));
    let d = DVector::from_iterator(l, mus.iter().map(|&mu| amplification(kind, mu, t_final)));
    let j = DMatrix::from_fn(l, m, |i, c| {
        let t = if c + 1 == m { t_final } else { (c + 1) as f64 * t_final / m as f64 };
        time_factor(kind, mus[i], t)
    });
    let fj = DMatrix::from_diagonal(&f) * &j;
    let a = &phi * &fj;
    let a_tilde = &phi * DMatrix::from_diagonal(&d) * &fj;
    Ok(TheoryMatrices {
        kind,
        t_final,
        modes,
        mus,
        phi,
        f,
        d,
        j,
        a,
        a_tilde,
        ops,
    })
}

impl TheoryMatrices {
    pub fn order(&self) -> usize {
        self.modes.len()
    }

    pub fn steps(&self) -> usize {
        self.j.ncols()
    }

    pub fn ops(&self) -> &DiscreteOperators {
        &self.ops
    }

    /// `max |Phi^T M Phi - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.phi.transpose() * self.ops.apply_mass_columns(&self.phi);
        (g - DMatrix::identity(self.order(), self.order())).amax()
    }

    /// Copy whose last adjoint column is replaced by an eigenfunction
    /// outside `span(A)`.
    pub fn with_foreign_last_column(&self) -> Self {
        let outside = distinct_modes(self.order() + 1)
            .into_iter()
            .find(|m| !self.modes.contains(m))
            .expect("a mode outside the selected set");
        let mut out = self.clone();
        let last = out.a_tilde.ncols() - 1;
        let col = eigenfunction(outside, self.ops.grid()).into_values() * self.a_tilde.column(last).norm();
        out.a_tilde.set_column(last, &col);
        out
    }
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn numerical_rank(s: &[f64], tol: f64) -> usize {
    let lead = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > tol * lead).count()
}

/// Solves `J X = rhs` by back-substitution; with `L < M` the minimum-norm
/// solution. Forming `J^+` explicitly loses several digits on the
/// clustered columns of `J`.
fn solve_j(j: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    if j.is_square() {
        if let Some(x) = j.clone().lu().solve(rhs) {
            return x;
        }
    }
    j.clone().svd(true, true).solve(rhs, 0.0).expect("svd factors are computed")
}

#[derive(Debug, Clone, Serialize)]
pub struct SpanReport {
    pub kind: ProblemKind,
    pub order: usize,
    pub steps: usize,
    pub t_final: f64,
    pub tol: f64,
    pub rank_a: usize,
    pub rank_a_tilde: usize,
    pub rank_stacked: usize,
    pub singular_values_a: Vec<f64>,
    pub singular_values_a_tilde: Vec<f64>,
    /// `sigma_min / sigma_max` of `A~`.
    pub conditioning_a_tilde: f64,
    /// `|J P~ - D J| / |D J|` for the least-squares `P~`.
    pub commutation_residual: f64,
    /// `|A~ P - A| / |A|` with `J P = D^-1 J`.
    pub transfer_residual: f64,
    pub pass: bool,
}

/// Compares the numerical ranks of `A`, `A~` and `[A | A~]`.
pub fn verify_span_equality(tm: &TheoryMatrices, tol: f64) -> SpanReport {
    let sa = singular_values(&tm.a);
    let st = singular_values(&tm.a_tilde);
    let (n, m) = (tm.a.nrows(), tm.steps());
    let mut stacked = DMatrix::zeros(n, 2 * m);
    stacked.columns_mut(0, m).copy_from(&tm.a);
    stacked.columns_mut(m, m).copy_from(&tm.a_tilde);
    let ss = singular_values(&stacked);
    let (rank_a, rank_a_tilde, rank_stacked) = (numerical_rank(&sa, tol), numerical_rank(&st, tol), numerical_rank(&ss, tol));

    let dmat = DMatrix::from_diagonal(&tm.d);
    let dj = &dmat * &tm.j;
    let p_tilde = solve_j(&tm.j, &dj);
    let commutation_residual = (&tm.j * p_tilde - &dj).norm() / dj.norm();
    let dinv = DMatrix::from_diagonal(&tm.d.map(|v| 1.0 / v));
    let p = solve_j(&tm.j, &(dinv * &tm.j));
    let transfer_residual = (&tm.a_tilde * p - &tm.a).norm() / tm.a.norm();

    SpanReport {
        kind: tm.kind,
        order: tm.order(),
        steps: m,
        t_final: tm.t_final,
        tol,
        rank_a,
        rank_a_tilde,
        rank_stacked,
        conditioning_a_tilde: st.last().copied().unwrap_or(0.0) / st[0],
        singular_values_a: sa,
        singular_values_a_tilde: st,
        commutation_residual,
        transfer_residual,
        pass: rank_a == rank_a_tilde && rank_a_tilde == rank_stacked,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub n_pod: usize,
    /// Relative mass-weighted projection error of the forward snapshots.
    pub lhs: f64,
    /// Tail energy ratio of the adjoint snapshots.
    pub rho: f64,
    /// `lhs / (weight * rho)`; `None` when `rho` vanishes.
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PodBoundReport {
    pub kind: ProblemKind,
    pub order: usize,
    pub steps: usize,
    pub t_final: f64,
    /// `L^2` (source) or `exp(2 mu_L T)` (backward).
    pub weight: f64,
    /// `rho` is summed over every correlation eigenvalue of the `M`
    /// adjoint snapshots in `A~`.
    pub rho_convention: &'static str,
    pub retained_rank: usize,
    pub rows: Vec<BoundRow>,
    pub full_rank_lhs: f64,
    pub monotone: bool,
    pub pass: bool,
}

impl PodBoundReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_pod,lhs,rho,constant\n");
        for r in &self.rows {
            let c = r.constant.map_or_else(String::new, |c| format!("{c:.6e}"));
            out.push_str(&format!("{},{:.6e},{:.6e},{}\n", r.n_pod, r.lhs, r.rho, c));
        }
        out
    }
}

fn columns_snapshot(tm: &TheoryMatrices, m: &DMatrix<f64>) -> Result<SnapshotSet> {
    let g = tm.ops.grid();
    SnapshotSet::from_columns(g.nx(), g.ny(), m.clone())
}

/// Adjoint-POD basis from the columns of `A~`.
pub fn adjoint_basis(tm: &TheoryMatrices, n_pod: usize) -> Result<PodBasis> {
    compute_pod_basis(&columns_snapshot(tm, &tm.a_tilde)?, &tm.ops, ModeSelector::Count(n_pod))
}

/// One row of the bound table at `n_pod` adjoint modes.
pub fn verify_pod_bound(tm: &TheoryMatrices, n_pod: usize) -> Result<BoundRow> {
    let basis = adjoint_basis(tm, n_pod)?;
    let (lhs, rho) = projection_error_ratio(&columns_snapshot(tm, &tm.a)?, &basis, &tm.ops);
    let w = bound_weight(tm);
    Ok(BoundRow {
        n_pod: basis.n_pod(),
        lhs,
        rho,
        constant: (rho > 0.0).then(|| lhs / (w * rho)),
    })
}

fn bound_weight(tm: &TheoryMatrices) -> f64 {
    match tm.kind {
        ProblemKind::InverseSource => (tm.order() as f64).powi(2),
        ProblemKind::Backward => (2.0 * tm.mus.last().expect("L >= 1") * tm.t_final).exp(),
    }
}

/// Bound table for `n_pod = 0..=retained rank`. Passes when the full-rank
/// projection error is at most `1e-6` and the table is non-increasing.
pub fn pod_bound_table(tm: &TheoryMatrices) -> Result<PodBoundReport> {
    let retained = adjoint_basis(tm, 0)?.retained_rank();
    let rows = (0..=retained).map(|n| verify_pod_bound(tm, n)).collect::<Result<Vec<_>>>()?;
    let monotone = rows.windows(2).all(|w| w[1].lhs <= w[0].lhs * (1.0 + 1e-9) + 1e-15);
    let full_rank_lhs = rows.last().expect("row for n_pod = 0").lhs;
    Ok(PodBoundReport {
        kind: tm.kind,
        order: tm.order(),
        steps: tm.steps(),
        t_final: tm.t_final,
        weight: bound_weight(tm),
        rho_convention: "all correlation eigenvalues of the M adjoint snapshots",
        retained_rank: retained,
        full_rank_lhs,
        monotone,
        pass: full_rank_lhs <= 1e-6 && monotone,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VandermondeReport {
    pub order: usize,
    pub sigma_min: f64,
    pub condition: f64,
    pub pass: bool,
}

/// `J'(i, j) = 1 - exp(-mu_i t_j)` on `t_j = j T / L` is invertible for
/// distinct eigenvalues.
pub fn vandermonde_check(l: usize, t_final: f64) -> VandermondeReport {
    let mus: Vec<f64> = distinct_modes(l).iter().map(Mode::eigenvalue).collect();
    let jp = DMatrix::from_fn(l, l, |i, c| -(-mus[i] * (c + 1) as f64 * t_final / l as f64).exp_m1());
    let s = singular_values(&jp);
    let (max, min) = (s[0], *s.last().expect("l >= 1"));
    VandermondeReport {
        order: l,
        sigma_min: min,
        condition: max / min,
        pass: min > 0.0 && (max / min).is_finite(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub orders: Vec<usize>,
    /// Relative `L2` error of the best approximation from the first `L`
    /// eigenfunctions.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log L`.
    pub fitted_rate: f64,
    pub monotone: bool,
}

/// Truncation error of `f` against the leading eigenfunctions.
pub fn truncation_curve(f: &Field, ops: &DiscreteOperators, orders: &[usize]) -> Result<TruncationReport> {
    f.check_grid(ops.grid())?;
    let norm = ops.norm(f.values());
    if norm == 0.0 {
        return Err(Error::invalid("truncation curve of the zero field"));
    }
    let max_l = orders.iter().copied().max().unwrap_or(0);
    let fields: Vec<Field> = ordered_modes(max_l).into_iter().map(|m| eigenfunction(m, ops.grid())).collect();
    let mut errors = Vec::with_capacity(orders.len());
    for &l in orders {
        if l == 0 {
            errors.push(1.0);
            continue;
        }
        let basis = PodBasis::from_fields(&fields[..l], ops)?;
        let res = f.values() - basis.project(f.values(), ops);
        errors.push(ops.norm(&res) / norm);
    }
    let pts: Vec<(f64, f64)> = orders
        .iter()
        .zip(&errors)
        .filter(|(&l, &e)| l > 0 && e > 0.0)
        .map(|(&l, &e)| ((l as f64).ln(), e.ln()))
        .collect();
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(TruncationReport {
        orders: orders.to_vec(),
        errors,
        fitted_rate: if sxx > 0.0 { sxy / sxx } else { f64::NAN },
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> Grid2D {
        Grid2D::new(n, n).unwrap()
    }

    #[test]
    fn single_mode_columns_follow_the_formula() {
        let g = grid(17);
        let c = SpectralCoefficients::single(Mode::new(1, 1), 1.0);
        let tm = build_theory_matrices(ProblemKind::InverseSource, 3, 1.0, &c, &g).unwrap();
        let phi = eigenfunction(Mode::new(1, 1), &g).into_values();
        for j in 0..3 {
            let t = (j + 1) as f64 / 3.0;
            let expect = &phi * ((1.0 - (-2.0 * t).exp()) / 2.0);
            assert!((tm.a.column(j) - expect).amax() < 1e-12);
        }
    }

    #[test]
    fn backward_single_mode_ratio_is_the_decay() {
        let c = SpectralCoefficients::single(Mode::new(1, 1), 0.5);
        let tm = build_theory_matrices(ProblemKind::Backward, 4, 0.3, &c, &grid(9)).unwrap();
        let r = (-2.0f64 * 0.3).exp();
        for (a, b) in tm.a.iter().zip(tm.a_tilde.iter()) {
            assert_relative_eq!(*b, r * a, epsilon = 1e-15);
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let g = grid(9);
        assert!(build_theory_matrices(ProblemKind::InverseSource, 1, 1.0, &default_coefficients(2), &g).is_err());
        let rep = SpectralCoefficients::new(vec![(Mode::new(1, 2), 1.0), (Mode::new(2, 1), 1.0)]).unwrap();
        assert!(build_theory_matrices(ProblemKind::InverseSource, 3, 1.0, &rep, &g).is_err());
        let zero = SpectralCoefficients::new(vec![(Mode::new(1, 1), 0.0)]).unwrap();
        assert!(build_theory_matrices(ProblemKind::InverseSource, 3, 1.0, &zero, &g).is_err());
    }

    #[test]
    fn eigenfunctions_are_mass_orthonormal_to_second_order() {
        let d: Vec<f64> = [17usize, 33]
            .iter()
            .map(|&n| {
                build_theory_matrices(ProblemKind::InverseSource, 4, 1.0, &default_coefficients(4), &grid(n))
                    .unwrap()
                    .orthonormality_defect()
            })
            .collect();
        assert!(d[0] / d[1] > 3.5 && d[1] < 2e-2, "{d:?}");
    }

    #[test]
    fn span_equality_holds_on_distinct_modes() {
        for l in [1usize, 4] {
            let tm = build_theory_matrices(ProblemKind::InverseSource, l, 1.0, &default_coefficients(l), &grid(17)).unwrap();
            let r = verify_span_equality(&tm, RANK_TOL);
            assert!(r.pass, "{r:?}");
            assert_eq!(r.rank_a, l);
            assert!(r.transfer_residual < 1e-8 && r.commutation_residual < 1e-8);
        }
    }

    #[test]
    fn foreign_column_breaks_span_equality() {
        let tm = build_theory_matrices(ProblemKind::Backward, 4, 0.05, &default_coefficients(4), &grid(17)).unwrap();
        let r = verify_span_equality(&tm.with_foreign_last_column(), RANK_TOL);
        assert!(!r.pass);
        assert_eq!(r.rank_stacked, r.rank_a + 1);
    }

    #[test]
    fn bound_table_edges() {
        let tm = build_theory_matrices(ProblemKind::InverseSource, 4, 1.0, &default_coefficients(4), &grid(17)).unwrap();
        let rep = pod_bound_table(&tm).unwrap();
        assert_eq!(rep.rows[0].lhs, 1.0);
        assert!(rep.monotone && rep.pass, "{rep:?}");
        assert!(rep.to_csv().lines().count() == rep.rows.len() + 1);
    }

    #[test]
    fn vandermonde_is_invertible() {
        for l in 1..=MAX_ASSERTED_ORDER {
            assert!(vandermonde_check(l, 1.0).pass);
        }
    }

    #[test]
    fn truncation_error_decreases() {
        let ops = DiscreteOperators::assemble(&grid(33), &CoefficientSet::laplacian()).unwrap();
        let pi = std::f64::consts::PI;
        let tent = Field::from_fn(ops.grid(), |x, y| x.min(pi - x) * y.min(pi - y)).masked(ops.grid());
        let rep = truncation_curve(&tent, &ops, &[1, 2, 4, 8, 16, 32]).unwrap();
        assert!(rep.monotone, "{rep:?}");
        assert!(rep.fitted_rate < 0.0);
    }
}
