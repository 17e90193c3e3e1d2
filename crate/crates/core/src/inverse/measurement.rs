use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Grid2D;

/// Point readings `m_i = u(d_i, T) + sigma e_i` with standard normal `e_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSet {
    pub detectors: Vec<(f64, f64)>,
    pub readings: Vec<f64>,
    /// Absolute noise scale.
    pub sigma: f64,
    /// Nominal relative level `p`, with `sigma = p * max |clean|`.
    pub level: f64,
    pub seed: u64,
    /// Quasi-uniformity ratio `d_max / d_min` of the detector layout.
    pub quasi_uniformity: f64,
}

/// Grid nodes of a uniform `per_axis x per_axis` interior layout.
///
/// Target positions `k pi / (per_axis + 1)` are snapped to the nearest
/// node; duplicates created by snapping are dropped, so requesting more
/// detectors than interior nodes yields every interior node.
pub fn uniform_detectors(grid: &Grid2D, per_axis: usize) -> Result<Vec<(f64, f64)>> {
    if per_axis == 0 {
        return Err(Error::invalid("detector layout needs at least one detector per axis"));
    }
    let axis = |n: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = (1..=per_axis)
            .map(|k| ((k * (n - 1)) as f64 / (per_axis + 1) as f64).round() as usize)
            .map(|i| i.clamp(1, n - 2))
            .collect();
        idx.dedup();
        idx
    };
    let (xs, ys) = (axis(grid.nx()), axis(grid.ny()));
    Ok(ys
        .iter()
        .flat_map(|&j| xs.iter().map(move |&i| (i, j)))
        .map(|(i, j)| (grid.x(i), grid.y(j)))
        .collect())
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// `d_max / d_min`, with `d_max` the fill distance sampled at the grid
/// nodes and cell centres and `d_min` the smallest detector separation.
pub(crate) fn quasi_uniformity(grid: &Grid2D, detectors: &[(f64, f64)]) -> f64 {
    if detectors.len() < 2 {
        return f64::INFINITY;
    }
    let mut d_min = f64::INFINITY;
    for (i, &a) in detectors.iter().enumerate() {
        for &b in &detectors[i + 1..] {
            d_min = d_min.min(dist(a, b));
        }
    }
    let centres = (0..grid.ny() - 1).flat_map(|j| {
        (0..grid.nx() - 1).map(move |i| (0.5 * (grid.x(i) + grid.x(i + 1)), 0.5 * (grid.y(j) + grid.y(j + 1))))
    });
    let d_max = grid
        .nodes()
        .chain(centres)
        .map(|p| detectors.iter().map(|&d| dist(p, d)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    d_max / d_min
}

/// Adds seeded Gaussian noise with `sigma = level * max |clean|`.
pub fn add_noise(grid: &Grid2D, detectors: &[(f64, f64)], clean: &[f64], level: f64, seed: u64) -> Result<MeasurementSet> {
    if !(level >= 0.0) {
        return Err(Error::invalid(format!("noise level must be >= 0, got {level}")));
    }
    if detectors.is_empty() {
        return Err(Error::invalid("at least one detector is required"));
    }
    if detectors.len() != clean.len() {
        return Err(Error::DimensionMismatch {
            expected: detectors.len(),
            found: clean.len(),
        });
    }
    let sigma = level * clean.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let readings = clean
        .iter()
        .map(|&c| {
            let e: f64 = StandardNormal.sample(&mut rng);
            if sigma == 0.0 {
                c
            } else {
                c + sigma * e
            }
        })
        .collect();
    Ok(MeasurementSet {
        detectors: detectors.to_vec(),
        readings,
        sigma,
        level,
        seed,
        quasi_uniformity: quasi_uniformity(grid, detectors),
    })
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    /// Same detectors and noise metadata with readings scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            readings: self.readings.iter().map(|r| r * s).collect(),
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,reading\n");
        for (&(x, y), r) in self.detectors.iter().zip(&self.readings) {
            out.push_str(&format!("{x:.16e},{y:.16e},{r:.16e}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Reads `x,y,reading` rows. Noise metadata is not stored in the file
    /// and is supplied by the caller.
    pub fn read_csv(path: &Path, grid: &Grid2D, sigma: f64, level: f64, seed: u64) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut detectors = Vec::new();
        let mut readings = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| parse_err(n + 1, e.to_string())))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 3 {
                return Err(parse_err(n + 1, format!("expected 3 columns, found {}", vals.len())));
            }
            detectors.push((vals[0], vals[1]));
            readings.push(vals[2]);
        }
        if readings.is_empty() {
            return Err(parse_err(1, "no readings".into()));
        }
        Ok(Self {
            quasi_uniformity: quasi_uniformity(grid, &detectors),
            detectors,
            readings,
            sigma,
            level,
            seed,
        })
    }
}
