//! Analytic Dirichlet eigenpairs of `-Laplace` on `[0, pi]^2` and the
//! exact modal solution of the source and backward problems.
//!
//! The eigenpairs are `mu_jk = j^2 + k^2` with normalized eigenfunctions
//! `phi_jk = (2 / pi) sin(j x) sin(k y)`. Modes are ordered by increasing
//! `mu`, ties broken lexicographically on `(j, k)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteOperators;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::Grid2D;
use crate::reduced::ProblemKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub j: u32,
    pub k: u32,
}

impl Mode {
    pub fn new(j: u32, k: u32) -> Self {
        Self { j, k }
    }

    pub fn eigenvalue(&self) -> f64 {
        f64::from(self.j * self.j + self.k * self.k)
    }
}

/// The first `count` modes by increasing eigenvalue.
pub fn ordered_modes(count: usize) -> Vec<Mode> {
    let bound = count.max(1) as u32;
    let mut modes: Vec<Mode> = (1..=bound)
        .flat_map(|j| (1..=bound).map(move |k| Mode::new(j, k)))
        .collect();
    modes.sort_by_key(|m| (m.j * m.j + m.k * m.k, m.j, m.k));
    modes.truncate(count);
    modes
}

/// The first `count` modes with pairwise distinct eigenvalues; within a
/// degenerate eigenvalue only the lexicographically first mode is kept.
pub fn distinct_modes(count: usize) -> Vec<Mode> {
    let mut out: Vec<Mode> = Vec::with_capacity(count);
    let mut n = count.max(1);
    loop {
        out.clear();
        for m in ordered_modes(n) {
            if out.last().is_none_or(|p| p.eigenvalue() != m.eigenvalue()) {
                out.push(m);
            } else {
                log::warn!("mode ({}, {}) skipped: eigenvalue {} is repeated", m.j, m.k, m.eigenvalue());
            }
            if out.len() == count {
                return out;
            }
        }
        n *= 2;
    }
}

/// `(mu, phi)` for mode `(j, k)`, with `phi` sampled at the nodes.
pub fn laplace_eigenpair(j: u32, k: u32, grid: &Grid2D) -> Result<(f64, Field)> {
    if j == 0 || k == 0 {
        return Err(Error::invalid(format!("mode indices must be >= 1, got ({j}, {k})")));
    }
    let mode = Mode::new(j, k);
    Ok((mode.eigenvalue(), eigenfunction(mode, grid)))
}

pub fn eigenfunction(mode: Mode, grid: &Grid2D) -> Field {
    let (j, k) = (f64::from(mode.j), f64::from(mode.k));
    let scale = 2.0 / std::f64::consts::PI;
    Field::from_fn(grid, |x, y| scale * (j * x).sin() * (k * y).sin()).masked(grid)
}

/// A truncated modal expansion `sum_k c_k phi_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoefficients {
    entries: Vec<(Mode, f64)>,
}

impl SpectralCoefficients {
    pub fn new(entries: Vec<(Mode, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (m, c) in &entries {
            if m.j == 0 || m.k == 0 {
                return Err(Error::invalid("mode indices must be >= 1"));
            }
            if !seen.insert(*m) {
                return Err(Error::invalid(format!("mode ({}, {}) listed twice", m.j, m.k)));
            }
            if !c.is_finite() {
                return Err(Error::invalid("modal coefficients must be finite"));
            }
        }
        Ok(Self { entries })
    }

    pub fn single(mode: Mode, coeff: f64) -> Self {
        Self {
            entries: vec![(mode, coeff)],
        }
    }

    /// Truncation order `L`.
    pub fn order(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(Mode, f64)] {
        &self.entries
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.entries.iter().map(|e| e.0).collect()
    }

    /// Synthesizes `sum_k c_k phi_k` on the grid.
    pub fn synthesize(&self, grid: &Grid2D) -> Field {
        let mut v = DVector::zeros(grid.node_count());
        for &(m, c) in &self.entries {
            v.axpy(c, eigenfunction(m, grid).values(), 1.0);
        }
        Field::from_values(grid, v).expect("grid-sized vector")
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(m, c)| (m, c * f(m.eigenvalue()))).collect(),
        }
    }
}

/// Final-time amplification `alpha_k` of mode `mu` after time `t`.
pub fn amplification(kind: ProblemKind, mu: f64, t: f64) -> f64 {
    match kind {
        ProblemKind::InverseSource => -(-mu * t).exp_m1() / mu,
        ProblemKind::Backward => (-mu * t).exp(),
    }
}

/// Coefficient factor of the adjoint trajectory at time `t` when the
/// adjoint is driven by the exact final state `u(T)`.
pub fn adjoint_factor(kind: ProblemKind, mu: f64, t_final: f64, t: f64) -> f64 {
    amplification(kind, mu, t_final) * amplification(kind, mu, t)
}

/// Exact modal coefficients of `u(T)` given source (or initial) coefficients.
pub fn spectral_solution(kind: ProblemKind, coeffs: &SpectralCoefficients, t_final: f64) -> Result<SpectralCoefficients> {
    if !(t_final > 0.0) {
        return Err(Error::invalid(format!("final time must be positive, got {t_final}")));
    }
    Ok(coeffs.map(|mu| amplification(kind, mu, t_final)))
}

/// Exact modal coefficients of the adjoint trajectory at time `t`.
pub fn spectral_adjoint(kind: ProblemKind, coeffs: &SpectralCoefficients, t_final: f64, t: f64) -> SpectralCoefficients {
    coeffs.map(|mu| adjoint_factor(kind, mu, t_final, t))
}

/// L2 coefficients `(field, phi_k)` for the first `order` modes.
pub fn project_onto_modes(field: &Field, ops: &DiscreteOperators, order: usize) -> Result<SpectralCoefficients> {
    if order == 0 {
        return Err(Error::invalid("truncation order must be >= 1"));
    }
    field.check_grid(ops.grid())?;
    let mf = ops.apply_mass(field.values());
    let entries = ordered_modes(order)
        .into_iter()
        .map(|m| (m, eigenfunction(m, ops.grid()).values().dot(&mf)))
        .collect();
    Ok(SpectralCoefficients { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::CoefficientSet;
    use approx::assert_relative_eq;

    fn ops(n: usize) -> DiscreteOperators {
        DiscreteOperators::assemble(&Grid2D::new(n, n).unwrap(), &CoefficientSet::laplacian()).unwrap()
    }

    #[test]
    fn analytic_eigenvalues() {
        let g = Grid2D::new(5, 5).unwrap();
        assert_eq!(laplace_eigenpair(1, 1, &g).unwrap().0, 2.0);
        assert_eq!(laplace_eigenpair(2, 2, &g).unwrap().0, 8.0);
        assert!(laplace_eigenpair(0, 1, &g).is_err());
    }

    #[test]
    fn mode_ordering_breaks_ties_lexicographically() {
        let m = ordered_modes(6);
        let expect = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1)];
        assert_eq!(m.iter().map(|m| (m.j, m.k)).collect::<Vec<_>>(), expect);
        let d = distinct_modes(6);
        let mus: Vec<f64> = d.iter().map(Mode::eigenvalue).collect();
        assert_eq!(mus, vec![2.0, 5.0, 8.0, 10.0, 13.0, 17.0]);
    }

    #[test]
    fn eigenfunction_norm_converges_at_second_order() {
        let mut errs = Vec::new();
        for n in [9usize, 17, 33] {
            let o = ops(n);
            let phi = eigenfunction(Mode::new(1, 1), o.grid());
            errs.push((o.norm(phi.values()) - 1.0).abs());
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
        assert!(errs[2] < 2e-3);
    }

    #[test]
    fn spectral_formulas() {
        let one = SpectralCoefficients::single(Mode::new(1, 1), 1.0);
        let s = spectral_solution(ProblemKind::InverseSource, &one, 1.0).unwrap();
        assert_relative_eq!(s.coefficients()[0], 0.4323323583816936, epsilon = 1e-12);
        let b = spectral_solution(ProblemKind::Backward, &one, 0.05).unwrap();
        assert_relative_eq!(b.coefficients()[0], 0.9048374180359595, epsilon = 1e-12);
        assert!(spectral_solution(ProblemKind::Backward, &one, 0.0).is_err());
    }

    #[test]
    fn short_time_limits() {
        let c = SpectralCoefficients::single(Mode::new(2, 3), 0.7);
        let s = spectral_solution(ProblemKind::InverseSource, &c, 1e-12).unwrap();
        assert!(s.coefficients()[0].abs() < 1e-11);
        let b = spectral_solution(ProblemKind::Backward, &c, 1e-12).unwrap();
        assert_relative_eq!(b.coefficients()[0], 0.7, epsilon = 1e-10);
    }

    #[test]
    fn projection_recovers_a_single_mode() {
        let o = ops(33);
        let phi = eigenfunction(Mode::new(1, 1), o.grid());
        let c = project_onto_modes(&phi, &o, 5).unwrap().coefficients();
        assert!((c[0] - 1.0).abs() < 5e-3);
        // Off-diagonal leakage is an O(h^2) effect of the consistent mass.
        assert!(c[1..].iter().all(|v| v.abs() < 5e-3), "{c:?}");
        let zero = project_onto_modes(&Field::zeros(o.grid()), &o, 3).unwrap();
        assert!(zero.coefficients().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parseval_bound_on_truncations() {
        let o = ops(25);
        let f = Field::from_fn(o.grid(), |x, y| x * (std::f64::consts::PI - x) * y.sin());
        let norm2 = o.inner(f.values(), f.values());
        let c = project_onto_modes(&f, &o, 20).unwrap().coefficients();
        let sum: f64 = c.iter().map(|v| v * v).sum();
        assert!(sum <= norm2 * (1.0 + 1e-2));
    }
}
