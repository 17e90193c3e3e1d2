use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use super::measurement::MeasurementSet;
use crate::assembly::csr_mul_vec;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::Grid2D;

/// Smallest admissible smoothing weight.
pub const ALPHA_FLOOR: f64 = 1e-14;

/// 5-point Laplacian on the interior unknowns, boundary values pinned to 0.
fn laplacian_stencil(grid: &Grid2D) -> CsrMatrix<f64> {
    let n = grid.interior().len();
    let (cx, cy) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut coo = CooMatrix::new(n, n);
    for (row, &idx) in grid.interior().iter().enumerate() {
        let (i, j) = grid.ij(idx);
        coo.push(row, row, -2.0 * (cx + cy));
        for (ii, jj, w) in [(i - 1, j, cx), (i + 1, j, cx), (i, j - 1, cy), (i, j + 1, cy)] {
            if let Some(col) = grid.interior_slot(grid.index(ii, jj)) {
                coo.push(row, col, w);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Discrete `|u|_{H^2}` realized as `||Laplace_h u||` over interior nodes.
pub fn h2_seminorm(field: &Field, grid: &Grid2D) -> Result<f64> {
    field.check_grid(grid)?;
    let u: DVector<f64> = DVector::from_iterator(grid.interior().len(), grid.interior().iter().map(|&i| field.values()[i]));
    let lap = csr_mul_vec(&laplacian_stencil(grid), &u);
    Ok((grid.hx() * grid.hy() * lap.norm_squared()).sqrt())
}

/// `alpha = (sigma n^{-1/2} / |u|_{H^2})^{4/3}`, clamped below at [`ALPHA_FLOOR`].
pub fn select_alpha(sigma: f64, n: usize, h2_norm_estimate: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise scale must be >= 0, got {sigma}")));
    }
    if n == 0 {
        return Err(Error::invalid("at least one reading is required"));
    }
    if !(h2_norm_estimate > 0.0) || !h2_norm_estimate.is_finite() {
        return Err(Error::invalid(format!("H2 norm estimate must be positive, got {h2_norm_estimate}")));
    }
    let ratio = sigma / (n as f64).sqrt() / h2_norm_estimate;
    Ok(ratio.powf(4.0 / 3.0).max(ALPHA_FLOOR))
}

/// Minimizes `(1/n) sum (u(d_i) - m_i)^2 + alpha ||Laplace_h u||^2` over
/// grid functions vanishing on the boundary.
pub fn denoise(ms: &MeasurementSet, grid: &Grid2D, alpha: f64) -> Result<Field> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("smoothing weight must be positive, got {alpha}")));
    }
    if ms.is_empty() {
        return Err(Error::invalid("at least one reading is required"));
    }
    let n_int = grid.interior().len();
    let inv_n = 1.0 / ms.len() as f64;
    let mut data_diag = vec![0.0; n_int];
    let mut rhs = DMatrix::zeros(n_int, 1);
    for (&(x, y), &r) in ms.detectors.iter().zip(&ms.readings) {
        let idx = grid.node_at(x, y).ok_or(Error::DetectorOffGrid { x, y })?;
        // Boundary readings only contribute a constant to the misfit.
        if let Some(slot) = grid.interior_slot(idx) {
            data_diag[slot] += inv_n;
            rhs[slot] += inv_n * r;
        }
    }
    let b = laplacian_stencil(grid);
    let penalty = &b.transpose() * &b;
    let w = alpha * grid.hx() * grid.hy();
    let mut coo = CooMatrix::new(n_int, n_int);
    for (r, c, v) in penalty.triplet_iter() {
        coo.push(r, c, w * v);
    }
    for (slot, &d) in data_diag.iter().enumerate() {
        if d != 0.0 {
            coo.push(slot, slot, d);
        }
    }
    let system = CscMatrix::from(&coo);
    let factor = CscCholesky::factor(&system).map_err(|e| Error::LinearSolve(format!("denoise system: {e:?}")))?;
    factor.solve_mut(&mut rhs);
    let mut values = DVector::zeros(grid.node_count());
    for (slot, &idx) in grid.interior().iter().enumerate() {
        values[idx] = rhs[slot];
    }
    Field::from_values(grid, values)
}

/// Denoises with `alpha` from [`select_alpha`], estimating `|u|_{H^2}` by
/// a plug-in fixed point on the denoised field itself.
pub fn denoise_auto(ms: &MeasurementSet, grid: &Grid2D, sweeps: usize) -> Result<(Field, f64)> {
    if ms.sigma == 0.0 {
        return Ok((denoise(ms, grid, ALPHA_FLOOR)?, ALPHA_FLOOR));
    }
    let mut alpha = select_alpha(ms.sigma, ms.len(), 1.0)?;
    let mut u = denoise(ms, grid, alpha)?;
    for _ in 0..sweeps {
        let h2 = h2_seminorm(&u, grid)?;
        if h2 == 0.0 {
            break;
        }
        let next = select_alpha(ms.sigma, ms.len(), h2)?;
        if (next - alpha).abs() <= 1e-3 * alpha {
            break;
        }
        alpha = next;
        u = denoise(ms, grid, alpha)?;
    }
    Ok((u, alpha))
}
