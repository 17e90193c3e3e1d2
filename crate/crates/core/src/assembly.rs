//! P1 finite-element assembly of the mass matrix and of the bilinear form
//! `a(u, v) = (q grad u, grad v) + (c u, v)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::mesh::Grid2D;

/// A scalar coefficient function on the domain.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(format!("const:{v}"), move |_, _| v)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

/// Diffusion `q` and reaction `c` of the elliptic operator.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub q: ScalarFn,
    pub c: ScalarFn,
}

impl CoefficientSet {
    pub fn new(q: ScalarFn, c: ScalarFn) -> Self {
        Self { q, c }
    }

    /// `q = 1`, `c = 0`: the Dirichlet Laplacian.
    pub fn laplacian() -> Self {
        Self::constant(1.0, 0.0)
    }

    pub fn constant(q: f64, c: f64) -> Self {
        Self::new(ScalarFn::constant(q), ScalarFn::constant(c))
    }
}

/// Assembled mass and stiffness matrices, in full node numbering and
/// restricted to the interior unknowns.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    grid: Grid2D,
    mass: CsrMatrix<f64>,
    stiffness: CsrMatrix<f64>,
    mass_interior: CsrMatrix<f64>,
    stiffness_interior: CsrMatrix<f64>,
}

impl DiscreteOperators {
    /// Assembles the consistent mass matrix and the stiffness matrix.
    ///
    /// Both the diffusion and reaction integrals use the edge-midpoint
    /// rule, which is exact for quadratics and therefore exact for the
    /// P1 mass-type products when `c` is constant.
    pub fn assemble(grid: &Grid2D, coeffs: &CoefficientSet) -> Result<Self> {
        let n = grid.node_count();
        let ni = grid.interior().len();
        let mut mass = CooMatrix::new(n, n);
        let mut stiff = CooMatrix::new(n, n);
        let mut mass_i = CooMatrix::new(ni, ni);
        let mut stiff_i = CooMatrix::new(ni, ni);

        for (e, tri) in grid.elements().iter().enumerate() {
            let pts = tri.map(|v| grid.node(v));
            let area = grid.element_area(e);
            // Gradients of the barycentric coordinates.
            let mut grads = [(0.0, 0.0); 3];
            for a in 0..3 {
                let (xb, yb) = pts[(a + 1) % 3];
                let (xc, yc) = pts[(a + 2) % 3];
                grads[a] = ((yb - yc) / (2.0 * area), (xc - xb) / (2.0 * area));
            }
            // Midpoint of the edge opposite vertex a.
            let mids: [(f64, f64); 3] = std::array::from_fn(|a| {
                let (xb, yb) = pts[(a + 1) % 3];
                let (xc, yc) = pts[(a + 2) % 3];
                (0.5 * (xb + xc), 0.5 * (yb + yc))
            });
            let mut q_mean = 0.0;
            let mut c_mid = [0.0; 3];
            for (a, &(mx, my)) in mids.iter().enumerate() {
                let q = coeffs.q.eval(mx, my);
                let c = coeffs.c.eval(mx, my);
                if !(q > 0.0) || !q.is_finite() {
                    return Err(Error::InvalidCoefficient(format!(
                        "q = {q} at ({mx:.4}, {my:.4}); diffusion must be positive"
                    )));
                }
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::InvalidCoefficient(format!(
                        "c = {c} at ({mx:.4}, {my:.4}); reaction must be non-negative"
                    )));
                }
                q_mean += q / 3.0;
                c_mid[a] = c;
            }

            for a in 0..3 {
                for b in 0..3 {
                    let m_ab = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    let diffusion = q_mean * area * (grads[a].0 * grads[b].0 + grads[a].1 * grads[b].1);
                    // Barycentric coordinate of vertex v at the midpoint opposite vertex `opp`.
                    let lam = |v: usize, opp: usize| if v == opp { 0.0 } else { 0.5 };
                    let reaction: f64 = (0..3)
                        .map(|m| c_mid[m] * lam(a, m) * lam(b, m))
                        .sum::<f64>()
                        * area
                        / 3.0;
                    let k_ab = diffusion + reaction;
                    let (ga, gb) = (tri[a], tri[b]);
                    mass.push(ga, gb, m_ab);
                    stiff.push(ga, gb, k_ab);
                    if let (Some(ia), Some(ib)) = (grid.interior_slot(ga), grid.interior_slot(gb)) {
                        mass_i.push(ia, ib, m_ab);
                        stiff_i.push(ia, ib, k_ab);
                    }
                }
            }
        }

        Ok(Self {
            grid: grid.clone(),
            mass: CsrMatrix::from(&mass),
            stiffness: CsrMatrix::from(&stiff),
            mass_interior: CsrMatrix::from(&mass_i),
            stiffness_interior: CsrMatrix::from(&stiff_i),
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn mass(&self) -> &CsrMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    pub fn mass_interior(&self) -> &CsrMatrix<f64> {
        &self.mass_interior
    }

    pub fn stiffness_interior(&self) -> &CsrMatrix<f64> {
        &self.stiffness_interior
    }

    /// Dirichlet mask: `true` on boundary nodes.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        (0..self.grid.node_count()).map(|i| self.grid.is_boundary(i)).collect()
    }

    pub fn apply_mass(&self, v: &DVector<f64>) -> DVector<f64> {
        csr_mul_vec(&self.mass, v)
    }

    pub fn apply_stiffness(&self, v: &DVector<f64>) -> DVector<f64> {
        csr_mul_vec(&self.stiffness, v)
    }

    /// Mass matrix applied to every column of `m`.
    pub fn apply_mass_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.mass * m
    }

    pub fn apply_stiffness_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.stiffness * m
    }

    /// L2 inner product of two nodal vectors.
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&self.apply_mass(b))
    }

    pub fn norm(&self, a: &DVector<f64>) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Bilinear form `a(u, v)`.
    pub fn energy(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&self.apply_stiffness(v))
    }

    pub fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.grid.interior().len(),
            self.grid.interior().iter().map(|&i| full[i]),
        )
    }

    /// Embeds interior values into a full vector with zero boundary.
    pub fn extend(&self, interior: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.grid.node_count());
        for (slot, &idx) in self.grid.interior().iter().enumerate() {
            full[idx] = interior[slot];
        }
        full
    }
}

pub(crate) fn csr_mul_vec(m: &CsrMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(m.nrows());
    for (r, row) in m.row_iter().enumerate() {
        out[r] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&c, &val)| val * v[c])
            .sum();
    }
    out
}
