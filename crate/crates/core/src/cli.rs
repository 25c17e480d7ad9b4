//! Experiment configuration and the driver behind the command-line tool.
//!
//! A config is a TOML file; see `configs/` for one per scenario. Each run
//! covers the cross product of `degrees` and `h`, optionally further crossed
//! with sweep axes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::analytic::{ContrastField, DiskScatter, HankelField, PlaneWave, WaveField};
use crate::assembly::{assemble, solve_saddle, SolveOptions, SolveReport};
use crate::error::{Error, Result};
use crate::evaluation::{field_snapshot, grid_errors, write_reports, ErrorReport, SampleRegion};
use crate::mesh::{build_mesh, BoundaryTag, DomainSpec, Hole, Point2, Triangulation};
use crate::pml::{robin_boundary_term, PmlConfig, PmlWeights};
use crate::spline_space::SplineSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    DiskScatter,
    SquareScatter,
    VariableMedium,
    Trapping,
    Amphitheater,
}

impl Scenario {
    /// Scenarios with a known exact solution report errors; the others emit
    /// field snapshots only.
    pub fn has_exact(self) -> bool {
        !matches!(self, Scenario::Trapping | Scenario::Amphitheater)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    #[default]
    Pml,
    Abc,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoleConfig {
    Rectangle { half: [f64; 2] },
    Disk { radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
    EllipticWall { semi_axes: [f64; 2], thickness: f64, opening_half_angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub outer: [f64; 2],
    /// PML interface box; absent (or equal to `outer`) under ABC truncation.
    #[serde(default)]
    pub inner: Option<[f64; 2]>,
    pub hole: HoleConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlSection {
    #[serde(default)]
    pub sigma0: f64,
    #[serde(default = "default_n")]
    pub n: u32,
}

fn default_n() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_weight")]
    pub smoothness_weight: f64,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_iters() -> usize {
    SolveOptions::default().max_iters
}

fn default_penalty() -> f64 {
    SolveOptions::default().penalty
}

fn default_weight() -> f64 {
    SolveOptions::default().smoothness_weight
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_iters(),
            penalty: default_penalty(),
            smoothness_weight: default_weight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Error-grid resolution per axis.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Sample the PML layer too instead of the physical region only.
    #[serde(default)]
    pub include_layer: bool,
    /// Field snapshot resolution per axis; 0 disables snapshots.
    #[serde(default)]
    pub snapshot: usize,
}

fn default_grid() -> usize {
    500
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            include_layer: false,
            snapshot: 0,
        }
    }
}

/// Incident field for scenarios without an exact solution.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// Plane-wave direction in degrees.
    #[serde(default)]
    pub angle_deg: f64,
    /// Point-source location.
    #[serde(default)]
    pub point: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub sigma0: Vec<f64>,
    /// Layer widths `M`; the outer box becomes `inner + M/2` per side.
    #[serde(default)]
    pub width: Vec<f64>,
    #[serde(default)]
    pub degree: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub scenario: Scenario,
    pub k: f64,
    pub degrees: Vec<usize>,
    pub h: Vec<f64>,
    #[serde(default)]
    pub smoothness: usize,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub heavy: bool,
    pub geometry: GeometryConfig,
    pub pml: PmlSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub source: Option<SourceSection>,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("config: {m}")));
        if self.experiment.is_empty() || self.experiment.contains(['/', ',', '\\']) {
            return bad(format!("experiment name {:?} must be non-empty without '/', '\\' or ','", self.experiment));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return bad(format!("k must be >= 0, got {}", self.k));
        }
        if self.degrees.iter().any(|&d| d == 0) || self.sweep.degree.iter().any(|&d| d == 0) {
            return bad("degrees must be >= 1".into());
        }
        if self.h.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return bad("mesh widths must be positive".into());
        }
        if self.smoothness > 1 {
            return bad("smoothness must be 0 or 1".into());
        }
        if self.pml.sigma0 < 0.0 || self.sweep.sigma0.iter().any(|&s| s < 0.0) {
            return bad("sigma0 must be >= 0".into());
        }
        if self.sweep.width.iter().any(|&m| !(m > 0.0)) {
            return bad("sweep widths must be positive".into());
        }
        match (self.truncation, self.geometry.inner) {
            (Truncation::Pml, None) => return bad("pml truncation needs geometry.inner".into()),
            (Truncation::Abc, Some(inner)) if inner != self.geometry.outer => {
                return bad("abc truncation has no PML interface; omit geometry.inner or set it to outer".into())
            }
            _ => {}
        }
        if self.truncation == Truncation::Abc
            && (self.pml.sigma0 != 0.0 || !self.sweep.sigma0.is_empty() || !self.sweep.width.is_empty())
        {
            return bad("abc truncation requires sigma0 = 0 and no sigma0 or width sweep".into());
        }
        match (self.scenario, &self.geometry.hole) {
            (Scenario::DiskScatter | Scenario::VariableMedium, HoleConfig::Disk { .. }) => {}
            (Scenario::DiskScatter | Scenario::VariableMedium, _) => return bad("this scenario needs a disk hole".into()),
            (Scenario::SquareScatter, HoleConfig::Rectangle { .. }) => {}
            (Scenario::SquareScatter, _) => return bad("square_scatter needs a rectangle hole".into()),
            _ => {}
        }
        if matches!(self.scenario, Scenario::Amphitheater)
            && self.source.as_ref().and_then(|s| s.point).is_none()
        {
            return bad("amphitheater needs [source] point".into());
        }
        if self.k == 0.0 && !matches!(self.scenario, Scenario::SquareScatter) {
            return bad("k = 0 is only supported for square_scatter".into());
        }
        self.domain(self.geometry.outer)?.validate()?;
        if self.truncation == Truncation::Pml {
            self.pml_config(self.pml.sigma0, self.geometry.outer)?;
        }
        Ok(())
    }

    fn hole(&self) -> Hole {
        match &self.geometry.hole {
            HoleConfig::Rectangle { half } => Hole::Rectangle { half: *half },
            HoleConfig::Disk { radius } => Hole::Disk { radius: *radius },
            HoleConfig::Polygon { vertices } => Hole::Polygon {
                vertices: vertices.iter().map(|v| Point2::new(v[0], v[1])).collect(),
            },
            HoleConfig::EllipticWall {
                semi_axes,
                thickness,
                opening_half_angle,
            } => Hole::EllipticWall {
                semi_axes: *semi_axes,
                thickness: *thickness,
                opening_half_angle: *opening_half_angle,
            },
        }
    }

    fn domain(&self, outer: [f64; 2]) -> Result<DomainSpec> {
        Ok(DomainSpec {
            outer,
            hole: self.hole(),
            inner: match self.truncation {
                Truncation::Pml => self.geometry.inner,
                Truncation::Abc => None,
            },
        })
    }

    /// Boundary of the region of interest.
    fn interface(&self) -> [f64; 2] {
        self.geometry.inner.unwrap_or(self.geometry.outer)
    }

    fn pml_config(&self, sigma0: f64, outer: [f64; 2]) -> Result<PmlConfig> {
        let cfg = PmlConfig {
            a: self.interface(),
            b: outer,
            sigma0,
            n: self.pml.n,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One point of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPoint {
    pub degree: usize,
    pub h: f64,
    pub sigma0: f64,
    pub outer: [f64; 2],
    pub width: Option<f64>,
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub point: RunPoint,
    pub report: Option<ErrorReport>,
    pub solve: SolveReport,
    pub triangles: usize,
    pub snapshot_csv: Option<String>,
}

/// Outgoing field used as exact solution and as boundary data, plus the
/// optional variable-medium data.
struct Problem {
    exact: Option<Box<dyn WaveField>>,
    boundary: Box<dyn Fn(Point2) -> Complex64 + Sync>,
    contrast: Option<ContrastField>,
    /// Impose `boundary` on the outer edge as well instead of zero.
    outer_data: bool,
}

fn problem(cfg: &ExperimentConfig, mesh: &Triangulation) -> Result<Problem> {
    let k = cfg.k;
    Ok(match cfg.scenario {
        Scenario::DiskScatter => {
            let HoleConfig::Disk { radius } = cfg.geometry.hole else { unreachable!() };
            // boundary data is sampled on the inscribed polygon
            let min_r = mesh
                .min_boundary_distance(BoundaryTag::Scatterer, Point2::new(0.0, 0.0))
                .unwrap_or(radius);
            let field = DiskScatter::with_options(k, radius, 1e-14, min_r)?;
            let data = field.clone();
            Problem {
                exact: Some(Box::new(field)),
                boundary: Box::new(move |p| data.value(p).unwrap_or_default()),
                contrast: None,
                outer_data: false,
            }
        }
        Scenario::SquareScatter => {
            if k == 0.0 {
                // harmonic polynomial data for the Laplace limit
                let f = HarmonicPoly;
                Problem {
                    exact: Some(Box::new(f)),
                    boundary: Box::new(move |p| f.value(p).unwrap_or_default()),
                    contrast: None,
                    outer_data: true,
                }
            } else {
                let field = HankelField::new(1, k, Point2::new(0.0, 0.0), Complex64::new(1.0, 0.0));
                let data = field.clone();
                Problem {
                    exact: Some(Box::new(field)),
                    boundary: Box::new(move |p| data.value(p).unwrap_or_default()),
                    contrast: None,
                    outer_data: false,
                }
            }
        }
        Scenario::VariableMedium => {
            let c = ContrastField { k };
            let field = c.exact();
            let data = field.clone();
            Problem {
                exact: Some(Box::new(field)),
                boundary: Box::new(move |p| data.value(p).unwrap_or_default()),
                contrast: Some(c),
                outer_data: false,
            }
        }
        Scenario::Trapping => {
            let angle = cfg.source.as_ref().map(|s| s.angle_deg).unwrap_or(0.0).to_radians();
            let inc = PlaneWave { k, angle };
            Problem {
                exact: None,
                boundary: Box::new(move |p| -inc.value(p).unwrap_or_default()),
                contrast: None,
                outer_data: false,
            }
        }
        Scenario::Amphitheater => {
            let pt = cfg.source.as_ref().and_then(|s| s.point).expect("validated");
            let src = HankelField::point_source(k, Point2::new(pt[0], pt[1]));
            Problem {
                exact: None,
                boundary: Box::new(move |p| src.value(p).unwrap_or_default()),
                contrast: None,
                outer_data: false,
            }
        }
    })
}

/// `x^2 - y^2`, used for the `k = 0` smoke configuration.
#[derive(Debug, Clone, Copy)]
struct HarmonicPoly;

impl WaveField for HarmonicPoly {
    fn name(&self) -> &str {
        "harmonic_poly"
    }
    fn wavenumber(&self) -> f64 {
        0.0
    }
    fn value(&self, p: Point2) -> Result<Complex64> {
        Ok(Complex64::new(p.x * p.x - p.y * p.y, 0.0))
    }
    fn value_grad(&self, p: Point2) -> Result<(Complex64, [Complex64; 2])> {
        Ok((
            self.value(p)?,
            [Complex64::new(2.0 * p.x, 0.0), Complex64::new(-2.0 * p.y, 0.0)],
        ))
    }
}

fn fmt_tag(v: f64) -> String {
    format!("{v}")
}

/// Builds, solves and measures one point of the experiment matrix.
pub fn run_point(cfg: &ExperimentConfig, point: RunPoint) -> Result<RunOutcome> {
    let domain = cfg.domain(point.outer)?;
    let mesh: Triangulation = build_mesh(&domain, point.h)?;
    let space = SplineSpace::new(&mesh, point.degree, cfg.smoothness)?;
    let pml = match cfg.truncation {
        Truncation::Pml => Some(cfg.pml_config(point.sigma0, point.outer)?),
        Truncation::Abc => None,
    };
    let prob = problem(cfg, &mesh)?;
    let k = cfg.k;

    let mut weights: PmlWeights = match &pml {
        Some(pml) => pml.weights_to_splines(&space),
        None => PmlWeights::identity(&space),
    };
    let mut source = None;
    if let Some(c) = &prob.contrast {
        let jac = |p| pml.as_ref().map_or(Complex64::new(1.0, 0.0), |pml| pml.weights_at(p).j);
        weights.j = space.interpolate_scalar(|p| jac(p) * (1.0 - c.contrast(p)));
        source = Some(space.interpolate_scalar(|p| c.source(p).unwrap_or_default()));
    }
    let mut sys = assemble(&space, &weights, k, source.as_deref())?;
    let opts = SolveOptions {
        tol: cfg.solver.tol,
        max_iters: cfg.solver.max_iters,
        penalty: cfg.solver.penalty,
        smoothness_weight: cfg.solver.smoothness_weight,
    };
    let boundary = &prob.boundary;
    let cons = match cfg.truncation {
        Truncation::Pml => space.constraints(&[BoundaryTag::Scatterer, BoundaryTag::OuterPml], |p, tag| match tag {
            BoundaryTag::Scatterer => boundary(p),
            BoundaryTag::OuterPml if prob.outer_data => boundary(p),
            BoundaryTag::OuterPml => Complex64::new(0.0, 0.0),
        }),
        Truncation::Abc => {
            sys = sys.with_robin(robin_boundary_term(k, &space, BoundaryTag::OuterPml));
            space.constraints(&[BoundaryTag::Scatterer], |p, _| boundary(p))
        }
    };
    // the element matrices are not needed once the system matrix exists
    let a = sys.system_matrix();
    let load = std::mem::take(&mut sys.load);
    drop(sys);
    let solve = solve_saddle(&a, &load, &cons, &opts)?;
    drop(a);

    let report = match &prob.exact {
        Some(exact) => {
            let half = if cfg.output.include_layer { point.outer } else { cfg.interface() };
            let e = grid_errors(&space, &solve.coeffs, exact.as_ref(), &SampleRegion::centered(half), cfg.output.grid)?;
            let mut name = cfg.experiment.clone();
            if let Some(m) = point.width {
                name = format!("{name}[M={}]", fmt_tag(m));
            }
            if cfg.truncation == Truncation::Abc {
                name = format!("{name}[abc]");
            }
            Some(ErrorReport {
                experiment: name,
                k,
                sigma0: point.sigma0,
                degree: point.degree,
                h: point.h,
                dofs: space.num_coeffs(),
                relative_h1: e.relative_h1,
                relative_l2: e.relative_l2,
            })
        }
        None => None,
    };
    let snapshot_csv = if cfg.output.snapshot > 0 || prob.exact.is_none() {
        let res = if cfg.output.snapshot > 0 { cfg.output.snapshot } else { 200 };
        let snap = field_snapshot(&space, &solve.coeffs, &SampleRegion::centered(point.outer), res, res)?;
        let mut buf = Vec::new();
        snap.write_csv(&mut buf)?;
        Some(String::from_utf8(buf).expect("ascii"))
    } else {
        None
    };
    Ok(RunOutcome {
        point,
        report,
        solve,
        triangles: mesh.num_triangles(),
        snapshot_csv,
    })
}

/// Axes accepted by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepAxis {
    Sigma0,
    Width,
    Degree,
}

/// Expands the experiment matrix: `degrees x h`, or the requested sweep
/// axes crossed with whatever the config fixes.
pub fn run_points(cfg: &ExperimentConfig, axes: &[SweepAxis]) -> Vec<RunPoint> {
    let has = |a: SweepAxis| axes.contains(&a);
    let degrees: Vec<usize> = if has(SweepAxis::Degree) { cfg.sweep.degree.clone() } else { cfg.degrees.clone() };
    let sigmas: Vec<f64> = if has(SweepAxis::Sigma0) { cfg.sweep.sigma0.clone() } else { vec![cfg.pml.sigma0] };
    let widths: Vec<Option<f64>> = if has(SweepAxis::Width) {
        cfg.sweep.width.iter().map(|&m| Some(m)).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for &width in &widths {
        let outer = match width {
            Some(m) => {
                let a = cfg.interface();
                [a[0] + 0.5 * m, a[1] + 0.5 * m]
            }
            None => cfg.geometry.outer,
        };
        for &sigma0 in &sigmas {
            for &degree in &degrees {
                for &h in &cfg.h {
                    out.push(RunPoint { degree, h, sigma0, outer, width });
                }
            }
        }
    }
    out
}

/// Files written by [`execute`].
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub solve_log: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub rows: Vec<ErrorReport>,
}

/// Runs every point and writes `<experiment>.csv`, `<experiment>_solve.txt`
/// and any field snapshots into `out_dir`. Nothing is written if a run fails.
pub fn execute(cfg: &ExperimentConfig, axes: &[SweepAxis], out_dir: &Path) -> Result<Outputs> {
    let points = run_points(cfg, axes);
    let mut outcomes = Vec::with_capacity(points.len());
    for p in points {
        outcomes.push(run_point(cfg, p)?);
    }
    fs::create_dir_all(out_dir)?;
    let mut outputs = Outputs {
        solve_log: out_dir.join(format!("{}_solve.txt", cfg.experiment)),
        ..Outputs::default()
    };
    let mut log = String::new();
    for o in &outcomes {
        log.push_str(&format!(
            "[run d={} h={} sigma0={} outer={},{}]\ntriangles = {}\n",
            o.point.degree,
            fmt_tag(o.point.h),
            fmt_tag(o.point.sigma0),
            fmt_tag(o.point.outer[0]),
            fmt_tag(o.point.outer[1]),
            o.triangles
        ));
        log.push_str(&o.solve.to_key_value());
        if let Some(r) = &o.report {
            outputs.rows.push(r.clone());
        }
        if let Some(csv) = &o.snapshot_csv {
            let path = out_dir.join(format!(
                "{}_d{}_h{}_s{}_field.csv",
                cfg.experiment,
                o.point.degree,
                fmt_tag(o.point.h),
                fmt_tag(o.point.sigma0)
            ));
            fs::write(&path, csv)?;
            outputs.snapshots.push(path);
        }
    }
    fs::write(&outputs.solve_log, log)?;
    if cfg.scenario.has_exact() {
        let path = out_dir.join(format!("{}.csv", cfg.experiment));
        let mut f = fs::File::create(&path)?;
        write_reports(&mut f, &outputs.rows, true)?;
        f.flush()?;
        outputs.csv = Some(path);
    }
    Ok(outputs)
}
