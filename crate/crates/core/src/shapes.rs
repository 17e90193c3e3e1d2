//! Named source and initial-state fields used by the experiments.
//!
//! Glyphs are unions of straight strokes laid out on the unit square,
//! mapped to `[0.15 pi, 0.85 pi]^2`, with stroke width `0.08 pi`. A node
//! belongs to a glyph when its distance to some stroke is at most half
//! the width.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::Grid2D;

const NAMES: [&str; 5] = ["sin1", "sin2", "sin2exp", "glyphA", "glyphZ"];

type Stroke = ((f64, f64), (f64, f64));

const GLYPH_A: [Stroke; 3] = [((0.0, 0.0), (0.5, 1.0)), ((1.0, 0.0), (0.5, 1.0)), ((0.25, 0.45), (0.75, 0.45))];
const GLYPH_Z: [Stroke; 3] = [((0.0, 1.0), (1.0, 1.0)), ((0.0, 0.0), (1.0, 0.0)), ((1.0, 1.0), (0.0, 0.0))];

const GLYPH_LO: f64 = 0.15 * PI;
const GLYPH_SPAN: f64 = 0.7 * PI;
const STROKE_WIDTH: f64 = 0.08 * PI;

pub fn list_shapes() -> &'static [&'static str] {
    &NAMES
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn glyph(grid: &Grid2D, strokes: &[Stroke]) -> Field {
    let map = |(u, v): (f64, f64)| (GLYPH_LO + GLYPH_SPAN * u, GLYPH_LO + GLYPH_SPAN * v);
    let strokes: Vec<Stroke> = strokes.iter().map(|&(a, b)| (map(a), map(b))).collect();
    Field::from_fn(grid, |x, y| {
        let inside = strokes.iter().any(|&(a, b)| segment_distance((x, y), a, b) <= 0.5 * STROKE_WIDTH);
        if inside {
            1.0
        } else {
            0.0
        }
    })
    .masked(grid)
}

/// Nodal field for a named shape; boundary values are zero.
pub fn make_shape(name: &str, grid: &Grid2D) -> Result<Field> {
    let f = match name {
        "sin1" => Field::from_fn(grid, |x, y| x.sin() * y.sin()),
        "sin2" => Field::from_fn(grid, |x, y| (2.0 * x).sin() * (2.0 * y).sin()),
        "sin2exp" => Field::from_fn(grid, |x, y| (2.0 * x).sin() * (2.0 * y).sin() * ((x + y) / PI).exp()),
        "glyphA" => return Ok(glyph(grid, &GLYPH_A)),
        "glyphZ" => return Ok(glyph(grid, &GLYPH_Z)),
        other => {
            return Err(Error::UnknownShape {
                name: other.to_string(),
                available: NAMES.join(", "),
            })
        }
    };
    Ok(f.masked(grid))
}
