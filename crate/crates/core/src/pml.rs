//! Cartesian PML stretching and the first-order absorbing boundary term.

use num_complex::Complex64;

use crate::bernstein::binomial;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point2};
use crate::spline_space::{CoeffVector, SplineSpace};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlConfig {
    /// Inner half-widths (the PML starts at `|x_j| = a_j`).
    pub a: [f64; 2],
    /// Outer half-widths.
    pub b: [f64; 2],
    pub sigma0: f64,
    pub n: u32,
}

/// `(A11, A22, J)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointWeights {
    pub a11: Complex64,
    pub a22: Complex64,
    pub j: Complex64,
}

/// Spline interpolants of the three weights.
#[derive(Debug, Clone)]
pub struct PmlWeights {
    pub a11: CoeffVector,
    pub a22: CoeffVector,
    pub j: CoeffVector,
}

impl PmlWeights {
    /// Unit weights: the plain Helmholtz operator.
    pub fn identity(space: &SplineSpace<'_>) -> Self {
        let one = space.interpolate_scalar(|_| Complex64::new(1.0, 0.0));
        Self {
            a11: one.clone(),
            a22: one.clone(),
            j: one,
        }
    }
}

impl PmlConfig {
    pub fn new(a: [f64; 2], b: [f64; 2], sigma0: f64) -> Result<Self> {
        let cfg = Self { a, b, sigma0, n: 4 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..2 {
            if !(self.a[j] > 0.0 && self.a[j] < self.b[j] && self.b[j].is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "PML extents need 0 < a < b, got a = {:?}, b = {:?}",
                    self.a, self.b
                )));
            }
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma0 must be >= 0, got {}", self.sigma0)));
        }
        Ok(())
    }

    pub fn sigma(&self, axis: usize, x: f64) -> f64 {
        let (a, b) = (self.a[axis], self.b[axis]);
        let r = x.abs();
        if r < a {
            0.0
        } else {
            self.sigma0 * ((r - a) / (b - a)).powi(self.n as i32)
        }
    }

    pub fn gamma(&self, axis: usize, x: f64) -> Complex64 {
        Complex64::new(1.0, self.sigma(axis, x))
    }

    pub fn weights_at(&self, p: Point2) -> PointWeights {
        let g1 = self.gamma(0, p.x);
        let g2 = self.gamma(1, p.y);
        PointWeights {
            a11: g2 / g1,
            a22: g1 / g2,
            j: g1 * g2,
        }
    }

    pub fn weights_to_splines(&self, space: &SplineSpace<'_>) -> PmlWeights {
        PmlWeights {
            a11: space.interpolate_scalar(|p| self.weights_at(p).a11),
            a22: space.interpolate_scalar(|p| self.weights_at(p).a22),
            j: space.interpolate_scalar(|p| self.weights_at(p).j),
        }
    }
}

/// `ik * integral over tagged edges of B_s B_t ds`, exact.
pub fn robin_boundary_term(k: f64, space: &SplineSpace<'_>, tag: BoundaryTag) -> CsrMatrix<Complex64> {
    let d = space.degree();
    let mesh = space.mesh();
    let n = space.local_dim();
    let ik = Complex64::new(0.0, k);
    let mut trip = Vec::new();
    for (_, edge) in mesh.boundary_edges() {
        if edge.tag != Some(tag) {
            continue;
        }
        let (t, e) = edge.tris[0];
        let len = mesh.geom(t).edge_length(e);
        let (lp, lq) = ((e + 1) % 3, (e + 2) % 3);
        let gid = |s: usize| {
            let mut a = [0; 3];
            a[lp] = d - s;
            a[lq] = s;
            t * n + crate::bernstein::MultiIndex::from_array(a).index()
        };
        for s in 0..=d {
            for r in 0..=d {
                let w = len * binomial(d, s) * binomial(d, r) / binomial(2 * d, s + r) / (2 * d + 1) as f64;
                trip.push((gid(s), gid(r), ik * w));
            }
        }
    }
    CsrMatrix::from_triplets(space.num_coeffs(), space.num_coeffs(), &trip)
}
