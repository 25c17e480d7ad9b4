//! Independent oracles and invariant checks shared by the property suite and
//! the acceptance runner. Each check returns `Err` with a diagnostic instead of
//! panicking so the acceptance runner can aggregate failures.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spline_pml::analytic::{bessel_jy_seq, ContrastField, DiskScatter, HankelField, PlaneWave, WaveField};
use spline_pml::bernstein::{multi_indices, BFormPoly, BaryCoord, DiffOp, TriangleGeom};
use spline_pml::cli::{run_point, run_points, ExperimentConfig};
use spline_pml::mesh::{build_mesh, DomainSpec, Hole, Point2, Triangulation};
use spline_pml::pml::PmlConfig;
use spline_pml::spline_space::SplineSpace;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------- quadrature

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Collapsed-square rule on a triangle: exact for polynomials of degree
/// `2n - 2`. Returns barycentric nodes and area-scaled weights.
pub fn triangle_rule(t: &TriangleGeom, n: usize) -> Vec<(BaryCoord, f64)> {
    let gl = gauss_legendre(n);
    let area = t.area();
    let mut out = Vec::with_capacity(n * n);
    for &(s, ws) in &gl {
        for &(r, wr) in &gl {
            let b = BaryCoord([1.0 - s, s * (1.0 - r), s * r]);
            out.push((b, 2.0 * area * s * ws * wr));
        }
    }
    out
}

// ---------------------------------------------------------------- bernstein

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// `d!/(i!j!k!) b1^i b2^j b3^k` from the definition.
pub fn bernstein_direct(a: [usize; 3], b: BaryCoord) -> f64 {
    let d = a[0] + a[1] + a[2];
    let mult = factorial(d) / (factorial(a[0]) * factorial(a[1]) * factorial(a[2]));
    mult * (0..3).map(|l| b.0[l].powi(a[l] as i32)).product::<f64>()
}

pub fn eval_direct(p: &BFormPoly, b: BaryCoord) -> Complex64 {
    multi_indices(p.degree)
        .iter()
        .zip(&p.coeffs)
        .map(|(m, &cf)| cf * bernstein_direct(m.as_array(), b))
        .sum()
}

/// Gradients of the barycentric coordinates from the vertex coordinates.
pub fn bary_gradients_direct(v: [Point2; 3]) -> [[f64; 2]; 3] {
    let two_a = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y);
    [
        [(v[1].y - v[2].y) / two_a, (v[2].x - v[1].x) / two_a],
        [(v[2].y - v[0].y) / two_a, (v[0].x - v[2].x) / two_a],
        [(v[0].y - v[1].y) / two_a, (v[1].x - v[0].x) / two_a],
    ]
}

/// Cartesian gradient by the product rule on the monomial form.
pub fn grad_direct(p: &BFormPoly, v: [Point2; 3], b: BaryCoord) -> [Complex64; 2] {
    let g = bary_gradients_direct(v);
    let d = p.degree;
    let mut out = [c(0.0, 0.0); 2];
    for (m, &cf) in multi_indices(d).iter().zip(&p.coeffs) {
        let a = m.as_array();
        let mult = factorial(d) / (factorial(a[0]) * factorial(a[1]) * factorial(a[2]));
        for l in 0..3 {
            if a[l] == 0 {
                continue;
            }
            let mut term = mult * a[l] as f64 * b.0[l].powi(a[l] as i32 - 1);
            for q in (0..3).filter(|&q| q != l) {
                term *= b.0[q].powi(a[q] as i32);
            }
            out[0] += cf * (term * g[l][0]);
            out[1] += cf * (term * g[l][1]);
        }
    }
    out
}

pub fn random_poly(rng: &mut impl Rng, d: usize) -> BFormPoly {
    let coeffs = multi_indices(d)
        .iter()
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    BFormPoly::new(d, coeffs).expect("coefficient count")
}

pub fn random_simplex_point(rng: &mut impl Rng) -> BaryCoord {
    let (s, t): (f64, f64) = (rng.gen(), rng.gen());
    let (s, t) = if s + t > 1.0 { (1.0 - s, 1.0 - t) } else { (s, t) };
    BaryCoord([1.0 - s - t, s, t])
}

/// Counterclockwise triangle with a bounded aspect ratio.
pub fn random_triangle(rng: &mut impl Rng) -> TriangleGeom {
    loop {
        let mut v: Vec<Point2> = (0..3)
            .map(|_| Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let t = TriangleGeom::new([v[0], v[1], v[2]]);
        if t.signed_area() < 0.0 {
            v.swap(1, 2);
        }
        let t = TriangleGeom::new([v[0], v[1], v[2]]);
        if t.inradius() > 0.08 * t.diameter() {
            return t;
        }
    }
}

fn rel_close(a: Complex64, b: Complex64, scale: f64, tol: f64, what: &str) -> Check {
    if (a - b).norm() <= tol * scale.max(f64::MIN_POSITIVE) {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b} (scale {scale:e}, tol {tol:e})"))
    }
}

pub fn check_partition_of_unity(d: usize, b: BaryCoord) -> Check {
    let s: f64 = spline_pml::bernstein::basis_values(d, b).iter().sum();
    if (s - 1.0).abs() <= 1e-13 {
        Ok(())
    } else {
        Err(format!("partition of unity d={d} b={:?}: sum {s}", b.0))
    }
}

/// `integral(u v)` from the product and integral routines against quadrature
/// of the directly evaluated factors.
pub fn check_product_integral(u: &BFormPoly, v: &BFormPoly, t: &TriangleGeom) -> Check {
    let prod = u.product(v).map_err(|e| e.to_string())?;
    let got = prod.integral(t);
    let rule = triangle_rule(t, (u.degree + v.degree) / 2 + 2);
    let (mut want, mut scale) = (c(0.0, 0.0), 0.0);
    for (b, w) in rule {
        let f = eval_direct(u, b) * eval_direct(v, b);
        want += f * w;
        scale += f.norm() * w;
    }
    rel_close(got, want, scale, 1e-12, "product integral")
}

/// `integral(dx u * dy v * w)` against quadrature with product-rule gradients.
pub fn check_weighted_pairing(u: &BFormPoly, v: &BFormPoly, w: &BFormPoly, t: &TriangleGeom) -> Check {
    let got = spline_pml::bernstein::weighted_pairing(DiffOp::Dx, u, DiffOp::Dy, v, w, t).map_err(|e| e.to_string())?;
    let rule = triangle_rule(t, (u.degree + v.degree + w.degree) / 2 + 2);
    let (mut want, mut scale) = (c(0.0, 0.0), 0.0);
    for (b, q) in rule {
        let f = grad_direct(u, t.v, b)[0] * grad_direct(v, t.v, b)[1] * eval_direct(w, b);
        want += f * q;
        scale += f.norm() * q;
    }
    rel_close(got, want, scale, 1e-12, "weighted pairing")
}

// ---------------------------------------------------------------- splines

/// The small meshes the spline-space checks run on.
pub fn sample_meshes() -> Vec<(String, Triangulation)> {
    let specs = [
        (
            "square annulus",
            DomainSpec {
                outer: [2.0, 2.0],
                hole: Hole::Rectangle { half: [0.5, 0.5] },
                inner: Some([1.5, 1.5]),
            },
            0.5,
        ),
        (
            "disk",
            DomainSpec {
                outer: [3.0, 3.0],
                hole: Hole::Disk { radius: 1.0 },
                inner: Some([2.0, 2.0]),
            },
            1.0,
        ),
    ];
    specs
        .into_iter()
        .map(|(name, spec, h)| (name.to_string(), build_mesh(&spec, h).expect("sample mesh")))
        .collect()
}

/// Random real polynomial of total degree `d` in `(x, y) / scale`.
pub fn random_global_poly(rng: &mut impl Rng, d: usize, scale: f64) -> impl Fn(Point2) -> Complex64 + Sync {
    let mut terms = Vec::new();
    for p in 0..=d {
        for q in 0..=d - p {
            terms.push((p as i32, q as i32, rng.gen_range(-1.0..1.0)));
        }
    }
    move |pt: Point2| {
        let (x, y) = (pt.x / scale, pt.y / scale);
        c(terms.iter().map(|&(p, q, a)| a * x.powi(p) * y.powi(q)).sum(), 0.0)
    }
}

/// `H c = 0` for the stacked coefficients of a global polynomial.
pub fn check_h_annihilation(mesh: &Triangulation, d: usize, r: usize, rng: &mut impl Rng) -> Check {
    let space = SplineSpace::new(mesh, d, r).map_err(|e| e.to_string())?;
    let (lo, hi) = mesh.bounding_box();
    let scale = lo.x.abs().max(lo.y.abs()).max(hi.x).max(hi.y);
    let f = random_global_poly(rng, d, scale);
    let coeffs = space.interpolate_scalar(&f);
    let h = space.build_smoothness();
    let res = h.mul_vec(&coeffs).iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let cmax = coeffs.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    if res <= 1e-11 * cmax {
        Ok(())
    } else {
        Err(format!("||Hc|| = {res:e} for d={d} r={r}"))
    }
}

/// Interpolating a piecewise polynomial of the space returns its coefficients.
pub fn check_interpolation_idempotent(mesh: &Triangulation, d: usize, rng: &mut impl Rng) -> Check {
    let space = SplineSpace::new(mesh, d, 0).map_err(|e| e.to_string())?;
    let coeffs: Vec<Complex64> = (0..space.num_coeffs())
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let again = space.interpolate_per_triangle(|t, p| {
        let b = mesh.geom(t).barycentric(p).expect("nondegenerate");
        space.eval_on(&coeffs, t, b)
    });
    let err = coeffs.iter().zip(&again).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if err <= 1e-12 {
        Ok(())
    } else {
        Err(format!("interpolation moved coefficients by {err:e} at d={d}"))
    }
}

// ---------------------------------------------------------------- pml

pub fn pml_reference() -> PmlConfig {
    PmlConfig::new([3.0, 3.0], [5.0, 5.0], 13.0).expect("valid layer")
}

pub fn check_pml_point(cfg: &PmlConfig, p: Point2) -> Check {
    let w = cfg.weights_at(p);
    if (w.a11 * w.a22 - 1.0).norm() > 1e-13 {
        return Err(format!("A11 A22 = {} at {p:?}", w.a11 * w.a22));
    }
    for (axis, x) in [(0, p.x), (1, p.y)] {
        if cfg.gamma(axis, x).im < 0.0 {
            return Err(format!("Im gamma < 0 on axis {axis} at {x}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- analytic

pub fn check_wronskian(mmax: usize, x: f64) -> Check {
    let (j, y) = bessel_jy_seq(mmax + 1, x).map_err(|e| e.to_string())?;
    let want = 2.0 / (PI * x);
    for m in 0..=mmax {
        let w = j[m + 1] * y[m] - j[m] * y[m + 1];
        if ((w - want) / want).abs() > 1e-12 {
            return Err(format!("Wronskian m={m} x={x}: {w:e} vs {want:e}"));
        }
    }
    Ok(())
}

/// Five-point Laplacian with step `1e-4` wavelengths: `|Lap u + k^2 n u|` must
/// stay below `1e-6 k^2 |u|`, where `n` is the local refractive factor.
pub fn check_helmholtz_point(
    name: &str,
    k: f64,
    u: &dyn Fn(Point2) -> Complex64,
    factor: f64,
    rhs: Complex64,
    p: Point2,
) -> Check {
    let h = 1e-4 * 2.0 * PI / k;
    let u0 = u(p);
    let lap = (u(Point2::new(p.x + h, p.y)) + u(Point2::new(p.x - h, p.y)) + u(Point2::new(p.x, p.y + h))
        + u(Point2::new(p.x, p.y - h))
        - u0 * 4.0)
        / (h * h);
    let res = -lap - u0 * (k * k * factor) - rhs;
    if res.norm() <= 1e-6 * k * k * u0.norm().max(rhs.norm() / (k * k)) {
        Ok(())
    } else {
        Err(format!("{name}: Helmholtz residual {:e} at {p:?} (|u| = {:e})", res.norm(), u0.norm()))
    }
}

/// `value_grad` agrees with central differences.
pub fn check_gradient_point(name: &str, field: &dyn WaveField, p: Point2) -> Check {
    let k = field.wavenumber();
    let h = 1e-5 / k.max(1.0);
    let (u, g) = field.value_grad(p).map_err(|e| e.to_string())?;
    let v = |q: Point2| field.value(q).expect("field defined");
    let fd = [
        (v(Point2::new(p.x + h, p.y)) - v(Point2::new(p.x - h, p.y))) / (2.0 * h),
        (v(Point2::new(p.x, p.y + h)) - v(Point2::new(p.x, p.y - h))) / (2.0 * h),
    ];
    let scale = g[0].norm() + g[1].norm() + k * u.norm();
    for a in 0..2 {
        if (fd[a] - g[a]).norm() > 1e-6 * scale {
            return Err(format!("{name}: gradient {a} {} vs {} at {p:?}", g[a], fd[a]));
        }
    }
    Ok(())
}

/// Every exact field with a sampler for points of its domain.
pub fn exact_fields() -> Vec<(Box<dyn WaveField>, fn(&mut ChaCha8Rng) -> Point2)> {
    fn annulus(rng: &mut ChaCha8Rng, r0: f64, r1: f64) -> Point2 {
        let (r, t) = (rng.gen_range(r0..r1), rng.gen_range(0.0..2.0 * PI));
        Point2::new(r * t.cos(), r * t.sin())
    }
    vec![
        (
            Box::new(DiskScatter::new(8.0, 2.0).expect("disk")),
            |r| annulus(r, 2.05, 5.0),
        ),
        (
            Box::new(HankelField::new(1, 2.0, Point2::new(0.0, 0.0), c(1.0, 0.0))),
            |r| annulus(r, 1.0, 5.0),
        ),
        (
            Box::new(HankelField::new(3, 6.0, Point2::new(0.5, -0.25), c(0.0, 2.0))),
            |r| annulus(r, 1.5, 5.0),
        ),
        (
            Box::new(HankelField::point_source(15.0, Point2::new(0.0, 1.0))),
            |r| annulus(r, 1.5, 4.0),
        ),
        (Box::new(PlaneWave { k: 2.0 * PI, angle: 0.3 }), |r| annulus(r, 0.0, 3.0)),
        (Box::new(ContrastField { k: 15.0 }.exact()), |r| annulus(r, 0.5, 2.5)),
    ]
}

pub fn check_field(field: &dyn WaveField, p: Point2) -> Check {
    let k = field.wavenumber();
    let u = |q: Point2| field.value(q).expect("field defined");
    check_helmholtz_point(field.name(), k, &u, 1.0, c(0.0, 0.0), p)?;
    check_gradient_point(field.name(), field, p)
}

/// `-Lap f - k^2 (1 - b) f = k^2 b f` for the variable-medium data.
pub fn check_contrast_point(k: f64, p: Point2) -> Check {
    let cf = ContrastField { k };
    let u = |q: Point2| cf.data(q).expect("data defined");
    check_helmholtz_point("contrast", k, &u, 1.0 - cf.contrast(p), cf.source(p).map_err(|e| e.to_string())?, p)
}

// ---------------------------------------------------------------- solves

pub const SMALL_SQUARE: &str = r#"
experiment = "small"
scenario = "square_scatter"
k = 2.0
degrees = [3]
smoothness = 1
h = [0.5]

[geometry]
outer = [2.5, 2.5]
inner = [2.0, 2.0]
hole = { kind = "rectangle", half = [0.5, 0.5] }

[pml]
sigma0 = 13.0

[output]
grid = 60
"#;

/// Two identical runs give bitwise-identical coefficients and reports.
pub fn check_determinism(toml: &str) -> Check {
    let cfg = ExperimentConfig::from_toml(toml).map_err(|e| e.to_string())?;
    let pt = run_points(&cfg, &[])[0];
    let a = run_point(&cfg, pt).map_err(|e| e.to_string())?;
    let b = run_point(&cfg, pt).map_err(|e| e.to_string())?;
    let same = a.solve.coeffs.len() == b.solve.coeffs.len()
        && a.solve
            .coeffs
            .iter()
            .zip(&b.solve.coeffs)
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits());
    if !same || a.report != b.report || a.solve.to_key_value() != b.solve.to_key_value() {
        return Err("repeated solve differs".into());
    }
    Ok(())
}

// ---------------------------------------------------------------- suite

/// Fixed-seed sweep over every check; returns the failures.
pub fn invariant_suite() -> Vec<String> {
    let mut fails = Vec::new();
    let mut note = |r: Check| {
        if let Err(e) = r {
            fails.push(e);
        }
    };
    let mut g = rng(0x5eed);

    for d in 0..=12 {
        for _ in 0..100 {
            note(check_partition_of_unity(d, random_simplex_point(&mut g)));
        }
    }
    for _ in 0..40 {
        let t = random_triangle(&mut g);
        let (du, dv, dw) = (g.gen_range(0..=8), g.gen_range(0..=8), g.gen_range(0..=5));
        let (u, v, w) = (random_poly(&mut g, du), random_poly(&mut g, dv), random_poly(&mut g, dw));
        note(check_product_integral(&u, &v, &t));
        note(check_weighted_pairing(&u, &v, &w, &t));
    }
    for (_, mesh) in sample_meshes() {
        for d in 1..=6 {
            note(check_h_annihilation(&mesh, d, 0, &mut g));
            if d >= 2 {
                note(check_h_annihilation(&mesh, d, 1, &mut g));
            }
        }
        note(check_interpolation_idempotent(&mesh, 4, &mut g));
    }
    for x in [0.5, 1.0, 5.0, 20.0, 100.0] {
        note(check_wronskian(40, x));
    }
    for (field, sample) in exact_fields() {
        for _ in 0..100 {
            note(check_field(field.as_ref(), sample(&mut g)));
        }
    }
    for _ in 0..100 {
        let (r, t) = (g.gen_range(0.3..2.5), g.gen_range(0.0..2.0 * PI));
        note(check_contrast_point(15.0, Point2::new(r * t.cos(), r * t.sin())));
    }
    let pml = pml_reference();
    for _ in 0..1000 {
        note(check_pml_point(&pml, Point2::new(g.gen_range(-5.0..5.0), g.gen_range(-5.0..5.0))));
    }
    note(check_determinism(SMALL_SQUARE));
    fails
}
