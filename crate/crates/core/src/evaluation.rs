//! Discrete grid errors and field snapshots.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::WaveField;
use crate::error::{Error, Result};
use crate::mesh::{Location, Point2};
use crate::spline_space::SplineSpace;

pub const CSV_HEADER: &str = "experiment,k,sigma0,d,h,dofs,h1_rel,l2_rel";

/// Axis-aligned sampling window; grid points include both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRegion {
    pub lo: Point2,
    pub hi: Point2,
}

impl SampleRegion {
    pub fn centered(half: [f64; 2]) -> Self {
        Self {
            lo: Point2::new(-half[0], -half[1]),
            hi: Point2::new(half[0], half[1]),
        }
    }

    fn coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn point(&self, i: usize, j: usize, nx: usize, ny: usize) -> Point2 {
        Point2::new(
            Self::coord(self.lo.x, self.hi.x, i, nx),
            Self::coord(self.lo.y, self.hi.y, j, ny),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridErrors {
    pub relative_l2: f64,
    pub relative_h1: f64,
    pub samples: usize,
}

/// Relative discrete errors `||s - u|| / ||u||` and
/// `||grad(s - u)|| / ||grad u||` over an `n x n` grid. Points outside the
/// mesh, or where `exact` is undefined, are skipped.
pub fn grid_errors(
    space: &SplineSpace<'_>,
    c: &[Complex64],
    exact: &dyn WaveField,
    region: &SampleRegion,
    n: usize,
) -> Result<GridErrors> {
    space.check_len(c)?;
    let mesh = space.mesh();
    let rows: Vec<([f64; 4], usize)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc = [0.0; 4];
            let mut count = 0;
            for i in 0..n {
                let p = region.point(i, j, n, n);
                let Location::Inside { triangle, bary } = mesh.locate_point(p) else {
                    continue;
                };
                let Ok((u, gu)) = exact.value_grad(p) else {
                    continue;
                };
                let (s, gs) = space.eval_grad_on(c, triangle, bary);
                acc[0] += (s - u).norm_sqr();
                acc[1] += u.norm_sqr();
                acc[2] += (gs[0] - gu[0]).norm_sqr() + (gs[1] - gu[1]).norm_sqr();
                acc[3] += gu[0].norm_sqr() + gu[1].norm_sqr();
                count += 1;
            }
            (acc, count)
        })
        .collect();
    let samples: usize = rows.iter().map(|r| r.1).sum();
    if samples == 0 {
        return Err(Error::EmptySampleSet);
    }
    let mut tot = [0.0; 4];
    for (r, _) in &rows {
        for (t, v) in tot.iter_mut().zip(r) {
            *t += v;
        }
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(GridErrors {
        relative_l2: ratio(tot[0], tot[1]),
        relative_h1: ratio(tot[2], tot[3]),
        samples,
    })
}

/// One CSV row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub experiment: String,
    pub k: f64,
    pub sigma0: f64,
    pub degree: usize,
    pub h: f64,
    pub dofs: usize,
    pub relative_h1: f64,
    pub relative_l2: f64,
}

impl ErrorReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6e},{:.6e}",
            self.experiment, self.k, self.sigma0, self.degree, self.h, self.dofs, self.relative_h1, self.relative_l2
        )
    }
}

pub fn write_reports<W: Write>(out: &mut W, rows: &[ErrorReport], header: bool) -> std::io::Result<()> {
    if header {
        writeln!(out, "{CSV_HEADER}")?;
    }
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Samples on a regular grid; `None` marks points outside the mesh.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub nx: usize,
    pub ny: usize,
    pub region: SampleRegion,
    pub values: Vec<Option<Complex64>>,
}

pub fn field_snapshot(
    space: &SplineSpace<'_>,
    c: &[Complex64],
    region: &SampleRegion,
    nx: usize,
    ny: usize,
) -> Result<FieldSnapshot> {
    space.check_len(c)?;
    let mesh = space.mesh();
    let values: Vec<Option<Complex64>> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..nx).map(move |i| match mesh.locate_point(region.point(i, j, nx, ny)) {
                Location::Inside { triangle, bary } => Some(space.eval_on(c, triangle, bary)),
                Location::Outside => None,
            })
        })
        .collect();
    Ok(FieldSnapshot {
        nx,
        ny,
        region: *region,
        values,
    })
}

impl FieldSnapshot {
    /// CSV with columns `x,y,re,im,abs,mask`; `mask` is 1 inside the mesh and
    /// 0 outside, where the value columns are 0.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x,y,re,im,abs,mask")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = self.region.point(i, j, self.nx, self.ny);
                match self.values[j * self.nx + i] {
                    Some(v) => writeln!(out, "{},{},{:e},{:e},{:e},1", p.x, p.y, v.re, v.im, v.norm())?,
                    None => writeln!(out, "{},{},0,0,0,0", p.x, p.y)?,
                }
            }
        }
        Ok(())
    }
}
