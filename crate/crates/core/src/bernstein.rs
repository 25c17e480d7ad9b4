//! Bernstein-Bezier polynomials on a single triangle.
//!
//! Coefficients of degree `d` are stored for multi-indices `(i, j, k)` with
//! `i + j + k = d`, ordered by `i` descending, then `j` descending. All
//! integrals are exact and quadrature-free.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::Point2;

/// Product-degree guard for [`BFormPoly::product`].
pub const MAX_PRODUCT_DEGREE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl MultiIndex {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    pub fn degree(self) -> usize {
        self.i + self.j + self.k
    }

    /// Position in the coefficient vector of degree `self.degree()`.
    pub fn index(self) -> usize {
        index(self.i, self.j, self.k)
    }

    pub fn as_array(self) -> [usize; 3] {
        [self.i, self.j, self.k]
    }

    pub fn from_array(a: [usize; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// `d! / (i! j! k!)`
    pub fn multinomial(self) -> f64 {
        binomial(self.degree(), self.i) * binomial(self.j + self.k, self.j)
    }
}

/// Number of coefficients of a degree-`d` polynomial.
pub const fn dim(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Storage position of `(i, j, k)`; independent of `i` once `j + k` is known.
pub fn index(_i: usize, j: usize, k: usize) -> usize {
    let m = j + k;
    m * (m + 1) / 2 + k
}

/// All multi-indices of degree `d` in storage order.
pub fn multi_indices(d: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(dim(d));
    for i in (0..=d).rev() {
        for j in (0..=d - i).rev() {
            out.push(MultiIndex::new(i, j, d - i - j));
        }
    }
    out
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for t in 0..k {
        acc = acc * (n - t) as f64 / (t + 1) as f64;
    }
    acc.round()
}

/// Barycentric coordinates of a point, or of a direction when they sum to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaryCoord(pub [f64; 3]);

impl BaryCoord {
    pub fn sum(self) -> f64 {
        self.0.iter().sum()
    }
}

/// Vertex coordinates of a counterclockwise triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeom {
    pub v: [Point2; 3],
}

impl TriangleGeom {
    pub fn new(v: [Point2; 3]) -> Self {
        Self { v }
    }

    pub fn signed_area(&self) -> f64 {
        let [a, b, c] = self.v;
        0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.v[(e + 1) % 3].dist(self.v[(e + 2) % 3])
    }

    pub fn diameter(&self) -> f64 {
        (0..3).map(|e| self.edge_length(e)).fold(0.0, f64::max)
    }

    pub fn inradius(&self) -> f64 {
        let perimeter: f64 = (0..3).map(|e| self.edge_length(e)).sum();
        2.0 * self.area() / perimeter
    }

    pub fn centroid(&self) -> Point2 {
        let [a, b, c] = self.v;
        Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    fn check(&self) -> Result<f64> {
        let two_a = 2.0 * self.signed_area();
        let scale = self.diameter().powi(2);
        if !(two_a.abs() > 1e-14 * scale) {
            return Err(Error::DegenerateTriangle { area: 0.5 * two_a });
        }
        Ok(two_a)
    }

    pub fn barycentric(&self, p: Point2) -> Result<BaryCoord> {
        let two_a = self.check()?;
        let [v1, v2, v3] = self.v;
        let cr = |a: Point2, b: Point2| a.x * b.y - a.y * b.x;
        let b1 = cr(v2 - p, v3 - p) / two_a;
        let b2 = cr(v3 - p, v1 - p) / two_a;
        let b3 = cr(v1 - p, v2 - p) / two_a;
        Ok(BaryCoord([b1, b2, b3]))
    }

    pub fn point(&self, b: BaryCoord) -> Point2 {
        let [v1, v2, v3] = self.v;
        let [b1, b2, b3] = b.0;
        Point2::new(
            b1 * v1.x + b2 * v2.x + b3 * v3.x,
            b1 * v1.y + b2 * v2.y + b3 * v3.y,
        )
    }

    /// Cartesian gradients of the three barycentric coordinates.
    pub fn bary_gradients(&self) -> Result<[[f64; 2]; 3]> {
        let two_a = self.check()?;
        let [v1, v2, v3] = self.v;
        Ok([
            [(v2.y - v3.y) / two_a, (v3.x - v2.x) / two_a],
            [(v3.y - v1.y) / two_a, (v1.x - v3.x) / two_a],
            [(v1.y - v2.y) / two_a, (v2.x - v1.x) / two_a],
        ])
    }

    /// Barycentric form of a Cartesian direction vector.
    pub fn direction(&self, dx: f64, dy: f64) -> Result<BaryCoord> {
        let g = self.bary_gradients()?;
        Ok(BaryCoord([
            g[0][0] * dx + g[0][1] * dy,
            g[1][0] * dx + g[1][1] * dy,
            g[2][0] * dx + g[2][1] * dy,
        ]))
    }

    /// Domain points `(i v1 + j v2 + k v3) / d` in storage order.
    pub fn domain_points(&self, d: usize) -> Vec<Point2> {
        if d == 0 {
            return vec![self.centroid()];
        }
        multi_indices(d)
            .into_iter()
            .map(|m| {
                let s = 1.0 / d as f64;
                self.point(BaryCoord([m.i as f64 * s, m.j as f64 * s, m.k as f64 * s]))
            })
            .collect()
    }
}

/// `steps` in-place de Casteljau reductions with weights `w`. After the call
/// the first `dim(d - steps)` entries hold the reduced coefficients.
pub fn de_casteljau<T>(c: &mut [T], d: usize, steps: usize, w: [f64; 3])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    debug_assert!(steps <= d && c.len() >= dim(d));
    for l in (d - steps..d).rev() {
        for m in 0..=l {
            let base = m * (m + 1) / 2;
            let base23 = (m + 1) * (m + 2) / 2;
            for t in 0..=m {
                c[base + t] = c[base + t] * w[0] + c[base23 + t] * w[1] + c[base23 + t + 1] * w[2];
            }
        }
    }
}

/// Values of all degree-`d` Bernstein basis polynomials at `b`.
pub fn basis_values(d: usize, b: BaryCoord) -> Vec<f64> {
    let [b1, b2, b3] = b.0;
    multi_indices(d)
        .into_iter()
        .map(|m| m.multinomial() * b1.powi(m.i as i32) * b2.powi(m.j as i32) * b3.powi(m.k as i32))
        .collect()
}

/// Univariate Bernstein values `C(d,t) (1-s)^(d-t) s^t`, `t = 0..=d`.
pub fn univariate_basis(d: usize, s: f64) -> Vec<f64> {
    (0..=d)
        .map(|t| binomial(d, t) * (1.0 - s).powi((d - t) as i32) * s.powi(t as i32))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BFormPoly {
    pub degree: usize,
    pub coeffs: Vec<Complex64>,
}

impl BFormPoly {
    pub fn new(degree: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != dim(degree) {
            return Err(Error::DimensionMismatch(format!(
                "degree {degree} needs {} coefficients, got {}",
                dim(degree),
                coeffs.len()
            )));
        }
        Ok(Self { degree, coeffs })
    }

    pub fn constant(degree: usize, c: Complex64) -> Self {
        Self {
            degree,
            coeffs: vec![c; dim(degree)],
        }
    }

    pub fn zeros(degree: usize) -> Self {
        Self::constant(degree, Complex64::new(0.0, 0.0))
    }

    pub fn from_real(degree: usize, coeffs: &[f64]) -> Result<Self> {
        Self::new(degree, coeffs.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn coeff(&self, m: MultiIndex) -> Complex64 {
        self.coeffs[m.index()]
    }

    pub fn eval(&self, b: BaryCoord) -> Complex64 {
        let mut c = self.coeffs.clone();
        de_casteljau(&mut c, self.degree, self.degree, b.0);
        c[0]
    }

    /// Derivative along a direction given in barycentric form (`a` sums to 0).
    pub fn dir_derivative(&self, a: BaryCoord) -> BFormPoly {
        let d = self.degree;
        if d == 0 {
            return BFormPoly::zeros(0);
        }
        let mut c = self.coeffs.clone();
        de_casteljau(&mut c, d, 1, a.0);
        c.truncate(dim(d - 1));
        for v in &mut c {
            *v *= d as f64;
        }
        BFormPoly { degree: d - 1, coeffs: c }
    }

    /// `(d/dx, d/dy)` on the triangle `t`.
    pub fn cartesian_gradient(&self, t: &TriangleGeom) -> Result<(BFormPoly, BFormPoly)> {
        let ax = t.direction(1.0, 0.0)?;
        let ay = t.direction(0.0, 1.0)?;
        Ok((self.dir_derivative(ax), self.dir_derivative(ay)))
    }

    pub fn product(&self, other: &BFormPoly) -> Result<BFormPoly> {
        self.product_with_limit(other, MAX_PRODUCT_DEGREE)
    }

    pub fn product_with_limit(&self, other: &BFormPoly, max_degree: usize) -> Result<BFormPoly> {
        let (d1, d2) = (self.degree, other.degree);
        let d = d1 + d2;
        if d > max_degree {
            return Err(Error::DegreeOverflow { degree: d, max: max_degree });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); dim(d)];
        let norm = 1.0 / binomial(d, d1);
        let ma = multi_indices(d1);
        let mb = multi_indices(d2);
        for (a, pa) in ma.iter().zip(&self.coeffs) {
            for (b, qb) in mb.iter().zip(&other.coeffs) {
                let w = binomial(a.i + b.i, a.i) * binomial(a.j + b.j, a.j) * binomial(a.k + b.k, a.k) * norm;
                out[index(a.i + b.i, a.j + b.j, a.k + b.k)] += pa * qb * w;
            }
        }
        Ok(BFormPoly { degree: d, coeffs: out })
    }

    pub fn integral(&self, t: &TriangleGeom) -> Complex64 {
        let s: Complex64 = self.coeffs.iter().sum();
        s * (t.area() / binomial(self.degree + 2, 2))
    }
}

/// Operator applied to a trial or test function in [`weighted_pairing`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOp {
    Value,
    Dx,
    Dy,
}

fn apply(op: DiffOp, p: &BFormPoly, t: &TriangleGeom) -> Result<BFormPoly> {
    Ok(match op {
        DiffOp::Value => p.clone(),
        DiffOp::Dx => p.dir_derivative(t.direction(1.0, 0.0)?),
        DiffOp::Dy => p.dir_derivative(t.direction(0.0, 1.0)?),
    })
}

/// Exact `integral over t of op_u(u) * op_v(v) * w`.
pub fn weighted_pairing(
    u_op: DiffOp,
    u: &BFormPoly,
    v_op: DiffOp,
    v: &BFormPoly,
    w: &BFormPoly,
    t: &TriangleGeom,
) -> Result<Complex64> {
    let ou = apply(u_op, u, t)?;
    let ov = apply(v_op, v, t)?;
    Ok(ou.product(w)?.product(&ov)?.integral(t))
}

/// `integral of B^{dw}_g B^{du}_a B^{dv}_b` divided by the triangle area,
/// stored as `data[(g * dim(du) + a) * dim(dv) + b]`.
#[derive(Debug, Clone)]
pub struct TripleTensor {
    pub dw: usize,
    pub du: usize,
    pub dv: usize,
    pub data: Vec<f64>,
}

impl TripleTensor {
    pub fn new(dw: usize, du: usize, dv: usize) -> Self {
        let total = dw + du + dv;
        let norm = 1.0 / binomial(total + 2, 2);
        let (mw, mu, mv) = (multi_indices(dw), multi_indices(du), multi_indices(dv));
        let mut data = Vec::with_capacity(mw.len() * mu.len() * mv.len());
        for g in &mw {
            for a in &mu {
                for b in &mv {
                    let s = MultiIndex::new(g.i + a.i + b.i, g.j + a.j + b.j, g.k + a.k + b.k);
                    data.push(g.multinomial() * a.multinomial() * b.multinomial() / s.multinomial() * norm);
                }
            }
        }
        Self { dw, du, dv, data }
    }

    /// `sum_g w_g T[g][.][.]`, a `dim(du) x dim(dv)` row-major matrix.
    pub fn contract(&self, w: &[Complex64]) -> Vec<Complex64> {
        let block = dim(self.du) * dim(self.dv);
        let mut out = vec![Complex64::new(0.0, 0.0); block];
        for (g, wg) in w.iter().enumerate() {
            let slab = &self.data[g * block..(g + 1) * block];
            for (o, &t) in out.iter_mut().zip(slab) {
                *o += wg * t;
            }
        }
        out
    }
}

/// `integral of B^{du}_a B^{dv}_b` divided by the area, row-major.
pub fn gram(du: usize, dv: usize) -> Vec<f64> {
    let norm = 1.0 / binomial(du + dv + 2, 2);
    let (mu, mv) = (multi_indices(du), multi_indices(dv));
    let mut out = Vec::with_capacity(mu.len() * mv.len());
    for a in &mu {
        for b in &mv {
            let s = MultiIndex::new(a.i + b.i, a.j + b.j, a.k + b.k);
            out.push(a.multinomial() * b.multinomial() / s.multinomial() * norm);
        }
    }
    out
}
