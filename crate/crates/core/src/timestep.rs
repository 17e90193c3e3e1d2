//! Backward-Euler time stepping of `u_t + L u = f`, `u(0) = g`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CscMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::assembly::{csr_mul_vec, DiscreteOperators};
use crate::error::{Error, Result};
use crate::field::{Field, Trajectory};

/// Uniform time grid `t_k = k T / M`, `k = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::invalid(format!("final time must be positive, got {t_final}")));
        }
        if steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }
}

/// Factorized `(M + dt K)` on the interior unknowns, reused for every step.
pub struct BackwardEuler<'a> {
    ops: &'a DiscreteOperators,
    time: TimeGrid,
    factor: CscCholesky<f64>,
}

impl<'a> BackwardEuler<'a> {
    pub fn new(ops: &'a DiscreteOperators, time: TimeGrid) -> Result<Self> {
        let dt = time.dt();
        let scaled: CsrMatrix<f64> = ops.stiffness_interior() * dt;
        let system = ops.mass_interior() + &scaled;
        let factor = CscCholesky::factor(&CscMatrix::from(&system))
            .map_err(|e| Error::LinearSolve(format!("(M + dt K) factorization: {e:?}")))?;
        Ok(Self { ops, time, factor })
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    /// One step on interior values: `(M + dt K) u_new = M (u_old + dt f)`.
    pub fn step(&self, u_old: &DVector<f64>, forcing: Option<&DVector<f64>>) -> DVector<f64> {
        let dt = self.time.dt();
        let mut rhs_src = u_old.clone();
        if let Some(f) = forcing {
            rhs_src.axpy(dt, f, 1.0);
        }
        let rhs = csr_mul_vec(self.ops.mass_interior(), &rhs_src);
        let mut b = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        self.factor.solve_mut(&mut b);
        DVector::from_column_slice(b.as_slice())
    }

    /// Runs all `M` steps from `g` with constant forcing `f`.
    pub fn run(&self, f: &Field, g: &Field) -> Result<Trajectory> {
        let grid = self.ops.grid();
        f.check_grid(grid)?;
        g.check_grid(grid)?;
        for (name, fld) in [("source", f), ("initial state", g)] {
            if !fld.is_dirichlet_conforming(grid) {
                return Err(Error::invalid(format!("{name} must vanish on the boundary")));
            }
        }
        let f_i = self.ops.restrict(f.values());
        let forcing = (f_i.amax() > 0.0).then_some(&f_i);
        let mut u = self.ops.restrict(g.values());
        let mut states = Vec::with_capacity(self.time.steps() + 1);
        states.push(g.clone());
        for _ in 0..self.time.steps() {
            u = self.step(&u, forcing);
            states.push(Field::from_values(grid, self.ops.extend(&u))?);
        }
        Trajectory::new(self.time, states)
    }

    /// Final state only, without storing the trajectory.
    pub fn final_state(&self, f: &Field, g: &Field) -> Result<Field> {
        let grid = self.ops.grid();
        f.check_grid(grid)?;
        g.check_grid(grid)?;
        let f_i = self.ops.restrict(f.values());
        let forcing = (f_i.amax() > 0.0).then_some(&f_i);
        let mut u = self.ops.restrict(g.values());
        for _ in 0..self.time.steps() {
            u = self.step(&u, forcing);
        }
        Field::from_values(grid, self.ops.extend(&u))
    }
}

/// Full-order backward-Euler trajectory of `u_t + L u = f`, `u(0) = g`.
pub fn solve_forward(ops: &DiscreteOperators, time: TimeGrid, f: &Field, g: &Field) -> Result<Trajectory> {
    BackwardEuler::new(ops, time)?.run(f, g)
}
