//! Bessel and Hankel functions of integer order, and exact reference fields.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::Point2;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const MAX_ORDER: usize = 400;

fn check_arg(m: usize, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("Bessel argument must be positive and finite, got {x}")));
    }
    if m > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("Bessel order {m} exceeds {MAX_ORDER}")));
    }
    Ok(())
}

/// Normalized downward recurrence from an order far enough beyond both
/// `mmax` and `x` that the truncated tail is below double precision.
fn j_miller(mmax: usize, x: f64) -> Vec<f64> {
    let top = (mmax as f64).max(x.ceil()) + 40.0 + 10.0 * x.cbrt();
    let mut n = top as usize;
    n += n % 2;
    let mut j = vec![0.0f64; n + 2];
    j[n] = 1e-300;
    for m in (1..=n).rev() {
        j[m - 1] = (2.0 * m as f64 / x) * j[m] - j[m + 1];
        if j[m - 1].abs() > 1e250 {
            for v in &mut j[m - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = j[0];
    for k in (2..=n).step_by(2) {
        norm += 2.0 * j[k];
    }
    for v in &mut j {
        *v /= norm;
    }
    j
}

/// `J_0(x) ..= J_mmax(x)`.
pub fn bessel_j_seq(mmax: usize, x: f64) -> Result<Vec<f64>> {
    check_arg(mmax, x)?;
    let mut j = j_miller(mmax, x);
    j.truncate(mmax + 1);
    Ok(j)
}

/// `(J_m, Y_m)` for `m = 0..=mmax`. `Y_0` and `Y_1` come from Neumann series
/// in the `J` sequence; higher orders from upward recurrence.
pub fn bessel_jy_seq(mmax: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_arg(mmax, x)?;
    let jfull = j_miller(mmax.max(1), x);
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < jfull.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * jfull[2 * k] / k as f64;
        s1 += sign * (2 * k + 1) as f64 * jfull[2 * k + 1] / (k * (k + 1)) as f64;
        k += 1;
    }
    let y0 = (lg * jfull[0] - 2.0 * s0) / FRAC_PI_2;
    let y1 = (-jfull[0] / x + (lg - 1.0) * jfull[1] - s1) / FRAC_PI_2;
    let mut y = Vec::with_capacity(mmax + 1);
    y.push(y0);
    if mmax >= 1 {
        y.push(y1);
    }
    for m in 1..mmax {
        let next = (2.0 * m as f64 / x) * y[m] - y[m - 1];
        y.push(next);
    }
    let mut j = jfull;
    j.truncate(mmax + 1);
    Ok((j, y))
}

pub fn bessel_jy(m: usize, x: f64) -> Result<(f64, f64)> {
    let (j, y) = bessel_jy_seq(m, x)?;
    Ok((j[m], y[m]))
}

pub fn hankel1_seq(mmax: usize, x: f64) -> Result<Vec<Complex64>> {
    let (j, y) = bessel_jy_seq(mmax, x)?;
    Ok(j.into_iter().zip(y).map(|(a, b)| Complex64::new(a, b)).collect())
}

pub fn hankel1(m: usize, x: f64) -> Result<Complex64> {
    let (j, y) = bessel_jy(m, x)?;
    Ok(Complex64::new(j, y))
}

/// Derivative `H'_m(x)` from a sequence holding at least `H_0..=H_{m+1}`.
fn hankel_derivative(h: &[Complex64], m: usize, x: f64) -> Complex64 {
    if m == 0 {
        -h[1]
    } else {
        h[m - 1] - h[m] * (m as f64 / x)
    }
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// A complex scalar field with gradient, used as exact solution or data.
pub trait WaveField: Sync {
    fn name(&self) -> &str;
    fn wavenumber(&self) -> f64;
    fn value(&self, p: Point2) -> Result<Complex64>;
    fn value_grad(&self, p: Point2) -> Result<(Complex64, [Complex64; 2])>;
}

/// Scattered field of a plane wave `e^{ikx}` by a sound-soft disk at the
/// origin, summed as a cosine series in the polar angle.
#[derive(Debug, Clone)]
pub struct DiskScatter {
    pub k: f64,
    pub radius: f64,
    pub tol: f64,
    /// Smallest radius accepted; the default equals `radius`. Lower it to
    /// evaluate on an inscribed polygon.
    pub min_radius: f64,
    ja: Vec<f64>,
    ha: Vec<Complex64>,
}

impl DiskScatter {
    pub fn new(k: f64, radius: f64) -> Result<Self> {
        Self::with_options(k, radius, 1e-14, radius)
    }

    pub fn with_options(k: f64, radius: f64, tol: f64, min_radius: f64) -> Result<Self> {
        if !(k > 0.0 && radius > 0.0 && tol > 0.0 && min_radius > 0.0 && min_radius <= radius) {
            return Err(Error::InvalidArgument(format!(
                "disk series needs k > 0, 0 < min_radius <= radius, tol > 0 (k = {k}, radius = {radius}, min_radius = {min_radius})"
            )));
        }
        let ka = k * radius;
        let mmax = (ka.ceil() as usize + 60 + 4 * ka.cbrt().ceil() as usize).min(MAX_ORDER - 1);
        let (ja, ya) = bessel_jy_seq(mmax, ka)?;
        let ha: Vec<Complex64> = ja
            .iter()
            .zip(&ya)
            .map(|(&j, &y)| Complex64::new(j, y))
            .take_while(|h| h.im.is_finite())
            .collect();
        Ok(Self {
            k,
            radius,
            tol,
            min_radius,
            ja: ja[..ha.len()].to_vec(),
            ha,
        })
    }

    fn polar(&self, p: Point2) -> Result<(f64, f64)> {
        let r = p.norm();
        if r < self.min_radius * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "point ({}, {}) lies inside the scatterer (r = {r} < {})",
                p.x, p.y, self.min_radius
            )));
        }
        Ok((r, p.y.atan2(p.x)))
    }

    fn min_terms(&self) -> usize {
        (self.k * self.radius).ceil() as usize + 20
    }
}

impl WaveField for DiskScatter {
    fn name(&self) -> &str {
        "disk_scatter"
    }

    fn wavenumber(&self) -> f64 {
        self.k
    }

    fn value(&self, p: Point2) -> Result<Complex64> {
        Ok(self.value_grad(p)?.0)
    }

    fn value_grad(&self, p: Point2) -> Result<(Complex64, [Complex64; 2])> {
        let (r, theta) = self.polar(p)?;
        let kr = self.k * r;
        let mmax = self.ha.len() - 1;
        let hr = hankel1_seq(mmax, kr)?;
        let zero = Complex64::new(0.0, 0.0);
        let (mut u, mut ur, mut ut) = (zero, zero, zero);
        let mut ipow = Complex64::new(1.0, 0.0);
        for m in 0..mmax {
            let eps = if m == 0 { 1.0 } else { 2.0 };
            let c = -ipow * (eps * self.ja[m]);
            // H_m(kr) / H_m(ka) stays bounded where both factors are huge
            let ratio = hr[m] / self.ha[m];
            let dratio = hankel_derivative(&hr, m, kr) / self.ha[m];
            if !(ratio.re.is_finite() && ratio.im.is_finite() && dratio.re.is_finite() && dratio.im.is_finite()) {
                break;
            }
            let (s, co) = (m as f64 * theta).sin_cos();
            let term = c * ratio;
            u += term * co;
            ur += c * dratio * (self.k * co);
            ut += term * (-(m as f64) * s);
            ipow *= Complex64::new(0.0, 1.0);
            if m >= self.min_terms() && term.norm() < self.tol {
                break;
            }
        }
        let (st, ct) = theta.sin_cos();
        let ut_r = ut / r;
        Ok((u, [ur * ct - ut_r * st, ur * st + ut_r * ct]))
    }
}

/// `prefactor * e^{i m phi} H_m(k |p - center|)`, with `phi` the polar angle
/// of `p - center`.
#[derive(Debug, Clone)]
pub struct HankelField {
    pub order: usize,
    pub k: f64,
    pub center: Point2,
    pub prefactor: Complex64,
    pub label: String,
}

impl HankelField {
    pub fn new(order: usize, k: f64, center: Point2, prefactor: Complex64) -> Self {
        Self {
            order,
            k,
            center,
            prefactor,
            label: format!("hankel{order}"),
        }
    }

    /// Free-space Green's function `(i/4) H_0(k|x - x0|)` up to sign:
    /// returns `-(i/4) H_0`.
    pub fn point_source(k: f64, center: Point2) -> Self {
        let mut f = Self::new(0, k, center, Complex64::new(0.0, -0.25));
        f.label = "point_source".into();
        f
    }
}

impl WaveField for HankelField {
    fn name(&self) -> &str {
        &self.label
    }

    fn wavenumber(&self) -> f64 {
        self.k
    }

    fn value(&self, p: Point2) -> Result<Complex64> {
        Ok(self.value_grad(p)?.0)
    }

    fn value_grad(&self, p: Point2) -> Result<(Complex64, [Complex64; 2])> {
        let q = p - self.center;
        let rho = q.norm();
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument("field evaluated at its singular point".into()));
        }
        let m = self.order;
        let x = self.k * rho;
        let h = hankel1_seq(m + 1, x)?;
        let phi = q.y.atan2(q.x);
        let e = Complex64::from_polar(1.0, m as f64 * phi) * self.prefactor;
        let u = e * h[m];
        let ur = e * hankel_derivative(&h, m, x) * self.k;
        let ut_r = e * Complex64::new(0.0, m as f64) * h[m] / rho;
        let (s, c) = (q.y / rho, q.x / rho);
        Ok((u, [ur * c - ut_r * s, ur * s + ut_r * c]))
    }
}

/// `e^{ik (x cos a + y sin a)}`
#[derive(Debug, Clone)]
pub struct PlaneWave {
    pub k: f64,
    pub angle: f64,
}

impl WaveField for PlaneWave {
    fn name(&self) -> &str {
        "plane_wave"
    }

    fn wavenumber(&self) -> f64 {
        self.k
    }

    fn value(&self, p: Point2) -> Result<Complex64> {
        let (s, c) = self.angle.sin_cos();
        Ok(Complex64::from_polar(1.0, self.k * (p.x * c + p.y * s)))
    }

    fn value_grad(&self, p: Point2) -> Result<(Complex64, [Complex64; 2])> {
        let (s, c) = self.angle.sin_cos();
        let u = self.value(p)?;
        let iku = u * Complex64::new(0.0, self.k);
        Ok((u, [iku * c, iku * s]))
    }
}

/// Smooth contrast `b(x) = 0.5 erfc(5(|x|^2 - 1))` with source data
/// `f = H_0(k|x|)`; then `u = f` solves `-Lap u - k^2 (1 - b) u = k^2 b f`.
#[derive(Debug, Clone)]
pub struct ContrastField {
    pub k: f64,
}

impl ContrastField {
    pub fn contrast(&self, p: Point2) -> f64 {
        0.5 * erfc(5.0 * (p.x * p.x + p.y * p.y - 1.0))
    }

    pub fn data(&self, p: Point2) -> Result<Complex64> {
        hankel1(0, self.k * p.norm())
    }

    /// `k^2 b f`
    pub fn source(&self, p: Point2) -> Result<Complex64> {
        Ok(self.data(p)? * (self.k * self.k * self.contrast(p)))
    }

    pub fn exact(&self) -> HankelField {
        HankelField::new(0, self.k, Point2::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }
}

/// Large-argument leading term `sqrt(2/(pi x)) e^{i(x - m pi/2 - pi/4)}`.
pub fn hankel1_asymptotic(m: usize, x: f64) -> Complex64 {
    Complex64::from_polar((2.0 / (PI * x)).sqrt(), x - m as f64 * FRAC_PI_2 - 0.25 * PI)
}
