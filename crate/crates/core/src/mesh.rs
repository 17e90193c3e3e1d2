//! Structured P1 triangulation of the square `[0, pi]^2`.
//!
//! Nodes are numbered row-major with `y` outer and `x` inner, so node
//! `(i, j)` has index `j * nx + i`. Each grid cell is split along its
//! anti-diagonal into two right triangles:
//!
//! ```text
//! (i,j+1) ---- (i+1,j+1)
//!    |  \          |
//!    |    \  upper |
//!    | lower \     |
//! (i,j) ------ (i+1,j)
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Snapping tolerance (in units of the mesh spacing) used when a query
/// point is meant to sit on a grid line.
const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// Maps a node index to its position among the interior unknowns.
    interior_slot: Vec<Option<usize>>,
    elements: Vec<[usize; 3]>,
}

impl Grid2D {
    /// Builds the structured triangulation with `nx * ny` nodes.
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        let hx = PI / (nx - 1) as f64;
        let hy = PI / (ny - 1) as f64;

        let mut interior = Vec::with_capacity((nx - 2) * (ny - 2));
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        let mut interior_slot = vec![None; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                    boundary.push(idx);
                } else {
                    interior_slot[idx] = Some(interior.len());
                    interior.push(idx);
                }
            }
        }

        let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let n00 = j * nx + i;
                let n10 = n00 + 1;
                let n01 = n00 + nx;
                let n11 = n01 + 1;
                elements.push([n00, n10, n01]);
                elements.push([n10, n11, n01]);
            }
        }

        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            interior,
            boundary,
            interior_slot,
            elements,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Mesh spacing along `x` (equal to `hy` on square grids).
    pub fn h(&self) -> f64 {
        self.hx
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Inverse of [`Grid2D::index`].
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    /// x-coordinate of grid column `i`; the last column is exactly `pi`.
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            PI
        } else {
            i as f64 * self.hx
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            PI
        } else {
            j as f64 * self.hy
        }
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.x(i), self.y(j))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.node_count()).map(move |idx| self.node(idx))
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.interior_slot[idx].is_none()
    }

    pub fn interior_slot(&self, idx: usize) -> Option<usize> {
        self.interior_slot[idx]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    /// Signed area of element `e` (positive for counter-clockwise order).
    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.elements[e];
        let (xa, ya) = self.node(a);
        let (xb, yb) = self.node(b);
        let (xc, yc) = self.node(c);
        0.5 * ((xb - xa) * (yc - ya) - (xc - xa) * (yb - ya))
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes().map(|(x, y)| f(x, y)).collect()
    }

    /// Returns the node sitting at `(x, y)`, if any.
    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let (fi, fj) = (x / self.hx, y / self.hy);
        let (ri, rj) = (fi.round(), fj.round());
        if (fi - ri).abs() > SNAP_TOL || (fj - rj).abs() > SNAP_TOL {
            return None;
        }
        if ri < 0.0 || rj < 0.0 {
            return None;
        }
        let (i, j) = (ri as usize, rj as usize);
        (i < self.nx && j < self.ny).then(|| self.index(i, j))
    }

    /// P1 interpolation of nodal `values` at each point.
    ///
    /// Points that coincide with a node return that node's value unchanged.
    pub fn interpolate(&self, values: &[f64], points: &[(f64, f64)]) -> Result<Vec<f64>> {
        if values.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                found: values.len(),
            });
        }
        points
            .iter()
            .map(|&(x, y)| self.interpolate_one(values, x, y))
            .collect()
    }

    fn interpolate_one(&self, values: &[f64], x: f64, y: f64) -> Result<f64> {
        let eps = SNAP_TOL * self.hx.min(self.hy);
        if !(x >= -eps && x <= PI + eps && y >= -eps && y <= PI + eps) {
            return Err(Error::PointOutsideDomain { x, y });
        }
        if let Some(idx) = self.node_at(x, y) {
            return Ok(values[idx]);
        }
        let fx = (x / self.hx).clamp(0.0, (self.nx - 1) as f64);
        let fy = (y / self.hy).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let s = fx - i as f64;
        let t = fy - j as f64;
        let n00 = self.index(i, j);
        let (v00, v10, v01, v11) = (
            values[n00],
            values[n00 + 1],
            values[n00 + self.nx],
            values[n00 + self.nx + 1],
        );
        Ok(if s + t <= 1.0 {
            (1.0 - s - t) * v00 + s * v10 + t * v01
        } else {
            (1.0 - t) * v10 + (s + t - 1.0) * v11 + (1.0 - s) * v01
        })
    }
}
