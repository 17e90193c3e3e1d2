//! Nodal fields and time trajectories, plus their plain-text CSV form.
//!
//! A field file starts with one header line `nx,ny,h` holding the grid
//! dimensions and spacing, followed by `ny` lines of `nx` comma-separated
//! nodal values (row `j` holds `y = y_j`, columns increase in `x`). Every
//! float is written with 17 significant digits so the file round-trips
//! bit-exactly.

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mesh::Grid2D;
use crate::timestep::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nx: usize,
    ny: usize,
    values: DVector<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values: DVector::zeros(grid.node_count()),
        }
    }

    pub fn from_values(grid: &Grid2D, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                found: values.len(),
            });
        }
        Ok(Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values,
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &Grid2D, f: F) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            values: DVector::from_vec(grid.sample(f)),
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn matches(&self, grid: &Grid2D) -> bool {
        self.nx == grid.nx() && self.ny == grid.ny()
    }

    pub(crate) fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                found: self.len(),
            })
        }
    }

    /// Whether every boundary value is exactly zero.
    pub fn is_dirichlet_conforming(&self, grid: &Grid2D) -> bool {
        grid.boundary().iter().all(|&b| self.values[b] == 0.0)
    }

    /// Zeroes the boundary values in place.
    pub fn mask_boundary(&mut self, grid: &Grid2D) {
        for &b in grid.boundary() {
            self.values[b] = 0.0;
        }
    }

    pub fn masked(mut self, grid: &Grid2D) -> Self {
        self.mask_boundary(grid);
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            values: &self.values * s,
        }
    }

    /// Point values by P1 interpolation.
    pub fn evaluate_at_points(&self, grid: &Grid2D, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        grid.interpolate(self.values.as_slice(), points)
    }

    pub fn to_csv(&self, h: f64) -> String {
        let mut out = format!("{},{},{:.16e}\n", self.nx, self.ny, h);
        for j in 0..self.ny {
            let row = &self.values.as_slice()[j * self.nx..(j + 1) * self.nx];
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, grid: &Grid2D, path: &Path) -> Result<()> {
        self.check_grid(grid)?;
        fs::write(path, self.to_csv(grid.h()))?;
        Ok(())
    }

    /// Parses the CSV form. Returns the field together with the stored spacing.
    pub fn from_csv(text: &str, path: &Path) -> Result<(Self, f64)> {
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| perr("empty file".into()))?;
        let parts: Vec<&str> = header.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(perr(format!("header must be `nx,ny,h`, got `{header}`")));
        }
        let nx: usize = parts[0].parse().map_err(|e| perr(format!("nx: {e}")))?;
        let ny: usize = parts[1].parse().map_err(|e| perr(format!("ny: {e}")))?;
        let h: f64 = parts[2].parse().map_err(|e| perr(format!("h: {e}")))?;
        let mut values = Vec::with_capacity(nx * ny);
        for (row, line) in lines.enumerate() {
            let before = values.len();
            for tok in line.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|e| perr(format!("row {row}: {e}")))?;
                values.push(v);
            }
            if values.len() - before != nx {
                return Err(perr(format!("row {row} has {} values, expected {nx}", values.len() - before)));
            }
        }
        if values.len() != nx * ny {
            return Err(perr(format!("expected {} values, found {}", nx * ny, values.len())));
        }
        Ok((
            Self {
                nx,
                ny,
                values: DVector::from_vec(values),
            },
            h,
        ))
    }

    pub fn read_csv(path: &Path) -> Result<(Self, f64)> {
        let text = fs::read_to_string(path)?;
        Self::from_csv(&text, path)
    }
}

/// Fields `U_0 .. U_M` on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    time: TimeGrid,
    states: Vec<Field>,
}

impl Trajectory {
    pub fn new(time: TimeGrid, states: Vec<Field>) -> Result<Self> {
        if states.len() != time.steps() + 1 {
            return Err(Error::DimensionMismatch {
                expected: time.steps() + 1,
                found: states.len(),
            });
        }
        Ok(Self { time, states })
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &Field {
        &self.states[k]
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn into_states(self) -> Vec<Field> {
        self.states
    }
}
