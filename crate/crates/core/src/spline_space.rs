//! Spline spaces `S^r_d` over a triangulation, represented by stacked
//! per-triangle B-form coefficients plus explicit linear constraints.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bernstein::{self, basis_values, dim, multi_indices, BFormPoly, BaryCoord, MultiIndex};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Location, Point2, Triangulation};
use crate::sparse::CsrMatrix;

/// Coefficients ordered triangle-major, then multi-index order.
pub type CoeffVector = Vec<Complex64>;

#[derive(Debug, Clone, Copy)]
pub struct SplineSpace<'a> {
    mesh: &'a Triangulation,
    degree: usize,
    smoothness: usize,
}

/// Smoothness rows `H c = 0` and boundary rows `D c = g`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub h: CsrMatrix<f64>,
    pub d: CsrMatrix<f64>,
    pub g: Vec<Complex64>,
}

impl<'a> SplineSpace<'a> {
    pub fn new(mesh: &'a Triangulation, degree: usize, smoothness: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument("spline degree must be at least 1".into()));
        }
        if smoothness > 1 {
            return Err(Error::InvalidArgument(format!("smoothness r = {smoothness} is not supported (r must be 0 or 1)")));
        }
        if smoothness == 1 && degree < 2 {
            return Err(Error::InvalidArgument("C1 splines need degree at least 2".into()));
        }
        if degree > 20 {
            return Err(Error::DegreeOverflow { degree, max: 20 });
        }
        Ok(Self { mesh, degree, smoothness })
    }

    pub fn mesh(&self) -> &'a Triangulation {
        self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    pub fn local_dim(&self) -> usize {
        dim(self.degree)
    }

    /// Length of a coefficient vector; the reported degree-of-freedom count.
    pub fn num_coeffs(&self) -> usize {
        self.mesh.num_triangles() * self.local_dim()
    }

    pub fn check_len(&self, c: &[Complex64]) -> Result<()> {
        if c.len() != self.num_coeffs() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has length {}, space needs {}",
                c.len(),
                self.num_coeffs()
            )));
        }
        Ok(())
    }

    pub fn local<'c>(&self, c: &'c [Complex64], t: usize) -> &'c [Complex64] {
        let n = self.local_dim();
        &c[t * n..(t + 1) * n]
    }

    pub fn local_poly(&self, c: &[Complex64], t: usize) -> BFormPoly {
        BFormPoly {
            degree: self.degree,
            coeffs: self.local(c, t).to_vec(),
        }
    }

    /// Global index of the coefficient of triangle `t` whose multi-index
    /// puts `counts[m]` on local vertex `m`.
    fn global(&self, t: usize, counts: [usize; 3]) -> usize {
        t * self.local_dim() + MultiIndex::from_array(counts).index()
    }

    fn local_vertex(&self, t: usize, v: usize) -> usize {
        self.mesh.triangles()[t]
            .v
            .iter()
            .position(|&w| w == v)
            .expect("edge vertex belongs to its triangle")
    }

    /// Smoothness constraint rows, `d + 1` per interior edge for C0 plus `d`
    /// more for C1, each scaled to unit max entry.
    pub fn build_smoothness(&self) -> CsrMatrix<f64> {
        let d = self.degree;
        let edges: Vec<_> = self.mesh.interior_edges().map(|(_, e)| e).collect();
        let rows: Vec<Vec<Vec<(usize, f64)>>> = edges
            .par_iter()
            .map(|edge| {
                let (t1, e1) = edge.tris[0];
                let (t2, e2) = edge.tris[1];
                let [p, q] = edge.v;
                let (p1, q1) = (self.local_vertex(t1, p), self.local_vertex(t1, q));
                let (p2, q2) = (self.local_vertex(t2, p), self.local_vertex(t2, q));
                let mut out = Vec::with_capacity(2 * d + 1);
                for s in 0..=d {
                    let mut a1 = [0; 3];
                    a1[p1] = d - s;
                    a1[q1] = s;
                    let mut a2 = [0; 3];
                    a2[p2] = d - s;
                    a2[q2] = s;
                    out.push(vec![(self.global(t1, a1), 1.0), (self.global(t2, a2), -1.0)]);
                }
                if self.smoothness == 1 {
                    let g1 = self.mesh.geom(t1);
                    let g2 = self.mesh.geom(t2);
                    let dir = g2.v[e2] - g1.v[e1];
                    let alpha = g1.direction(dir.x, dir.y).expect("valid triangle").0;
                    let beta = g2.direction(dir.x, dir.y).expect("valid triangle").0;
                    for s in 0..d {
                        let mut row = Vec::with_capacity(6);
                        for m in 0..3 {
                            let mut a1 = [0; 3];
                            a1[p1] = d - 1 - s;
                            a1[q1] = s;
                            a1[m] += 1;
                            row.push((self.global(t1, a1), alpha[m]));
                            let mut a2 = [0; 3];
                            a2[p2] = d - 1 - s;
                            a2[q2] = s;
                            a2[m] += 1;
                            row.push((self.global(t2, a2), -beta[m]));
                        }
                        let scale = row.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
                        for entry in &mut row {
                            entry.1 /= scale;
                        }
                        out.push(row);
                    }
                }
                out
            })
            .collect();
        CsrMatrix::from_rows(self.num_coeffs(), rows.into_iter().flatten().collect())
    }

    /// Boundary interpolation rows: `d + 1` equispaced samples on every
    /// boundary edge whose tag is in `tags`.
    pub fn build_dirichlet(
        &self,
        tags: &[BoundaryTag],
        g: impl Fn(Point2, BoundaryTag) -> Complex64,
    ) -> (CsrMatrix<f64>, Vec<Complex64>) {
        let d = self.degree;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (_, edge) in self.mesh.boundary_edges() {
            let tag = edge.tag.expect("boundary edges are tagged");
            if !tags.contains(&tag) {
                continue;
            }
            let (t, e) = edge.tris[0];
            let tri = self.mesh.triangles()[t];
            let (lp, lq) = ((e + 1) % 3, (e + 2) % 3);
            let (p, q) = (self.mesh.vertices()[tri.v[lp]], self.mesh.vertices()[tri.v[lq]]);
            for n in 0..=d {
                let tau = n as f64 / d as f64;
                let vals = bernstein::univariate_basis(d, tau);
                let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let row: Vec<(usize, f64)> = vals
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(s, v)| {
                        let mut a = [0; 3];
                        a[lp] = d - s;
                        a[lq] = s;
                        (self.global(t, a), v / scale)
                    })
                    .collect();
                rows.push(row);
                rhs.push(g(p.lerp(q, tau), tag) / scale);
            }
        }
        (CsrMatrix::from_rows(self.num_coeffs(), rows), rhs)
    }

    pub fn constraints(
        &self,
        tags: &[BoundaryTag],
        g: impl Fn(Point2, BoundaryTag) -> Complex64,
    ) -> ConstraintSystem {
        let h = self.build_smoothness();
        let (d, g) = self.build_dirichlet(tags, g);
        ConstraintSystem { h, d, g }
    }

    /// Continuous interpolant in `S^0_d` through the domain points.
    pub fn interpolate_scalar(&self, f: impl Fn(Point2) -> Complex64 + Sync) -> CoeffVector {
        self.interpolate_per_triangle(|_, p| f(p))
    }

    /// Like [`interpolate_scalar`](Self::interpolate_scalar) but `f` also
    /// receives the triangle index, so discontinuous data can be represented.
    pub fn interpolate_per_triangle(&self, f: impl Fn(usize, Point2) -> Complex64 + Sync) -> CoeffVector {
        let d = self.degree;
        let inv = interpolation_inverse(d);
        let n = dim(d);
        let blocks: Vec<Vec<Complex64>> = (0..self.mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let pts = self.mesh.geom(t).domain_points(d);
                let vals: Vec<Complex64> = pts.iter().map(|&p| f(t, p)).collect();
                if vals.iter().all(|v| *v == vals[0]) {
                    return vec![vals[0]; n];
                }
                (0..n)
                    .map(|r| {
                        let row = &inv[r * n..(r + 1) * n];
                        row.iter().zip(&vals).map(|(a, v)| v * a).sum()
                    })
                    .collect()
            })
            .collect();
        blocks.concat()
    }

    /// Value on triangle `t` at barycentric point `b`.
    pub fn eval_on(&self, c: &[Complex64], t: usize, b: BaryCoord) -> Complex64 {
        let mut w = self.local(c, t).to_vec();
        bernstein::de_casteljau(&mut w, self.degree, self.degree, b.0);
        w[0]
    }

    /// Value and Cartesian gradient on triangle `t` at `b`.
    pub fn eval_grad_on(&self, c: &[Complex64], t: usize, b: BaryCoord) -> (Complex64, [Complex64; 2]) {
        let d = self.degree;
        let mut w = self.local(c, t).to_vec();
        bernstein::de_casteljau(&mut w, d, d - 1, b.0);
        let g = self.mesh.geom(t).bary_gradients().expect("valid triangle");
        let val = w[0] * b.0[0] + w[1] * b.0[1] + w[2] * b.0[2];
        let df = |ax: usize| (w[0] * g[0][ax] + w[1] * g[1][ax] + w[2] * g[2][ax]) * d as f64;
        (val, [df(0), df(1)])
    }

    /// `None` outside the meshed domain.
    pub fn eval(&self, c: &[Complex64], p: Point2) -> Option<Complex64> {
        match self.mesh.locate_point(p) {
            Location::Inside { triangle, bary } => Some(self.eval_on(c, triangle, bary)),
            Location::Outside => None,
        }
    }

    pub fn eval_grad(&self, c: &[Complex64], p: Point2) -> Option<(Complex64, [Complex64; 2])> {
        match self.mesh.locate_point(p) {
            Location::Inside { triangle, bary } => Some(self.eval_grad_on(c, triangle, bary)),
            Location::Outside => None,
        }
    }
}

/// Inverse of the matrix `V[n][a] = B_a(xi_n)` at the domain points, row-major.
pub fn interpolation_inverse(d: usize) -> Vec<f64> {
    let n = dim(d);
    let idx = multi_indices(d);
    let mut v = faer::Mat::<f64>::zeros(n, n);
    for (r, m) in idx.iter().enumerate() {
        let s = 1.0 / d as f64;
        let b = BaryCoord([m.i as f64 * s, m.j as f64 * s, m.k as f64 * s]);
        for (col, val) in basis_values(d, b).into_iter().enumerate() {
            v[(r, col)] = val;
        }
    }
    let lu = v.partial_piv_lu();
    let inv = faer::linalg::solvers::DenseSolveCore::inverse(&lu);
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for col in 0..n {
            out[r * n + col] = inv[(r, col)];
        }
    }
    out
}
