//! Conforming triangulations of rectangular annuli: generation, uniform
//! refinement, quality measures, point location and a plain-text exchange
//! format.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use crate::bernstein::{BaryCoord, TriangleGeom};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Vertex indices, counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub v: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Scatterer,
    OuterPml,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Scatterer => "scatterer",
            BoundaryTag::OuterPml => "outer_pml",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scatterer" => Some(BoundaryTag::Scatterer),
            "outer_pml" => Some(BoundaryTag::OuterPml),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Local edge `e` of a triangle is the one opposite local vertex `e`.
#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoints with `v[0] < v[1]`.
    pub v: [usize; 2],
    /// Incident `(triangle, local edge)` pairs; one for boundary edges.
    pub tris: Vec<(usize, usize)>,
    pub tag: Option<BoundaryTag>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tris.len() == 1
    }
}

/// Result of a point-location query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Inside { triangle: usize, bary: BaryCoord },
    Outside,
}

#[derive(Debug)]
pub struct Triangulation {
    vertices: Vec<Point2>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    tri_edges: Vec<[usize; 3]>,
    locator: OnceLock<Locator>,
}

impl Clone for Triangulation {
    fn clone(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: self.triangles.clone(),
            edges: self.edges.clone(),
            tri_edges: self.tri_edges.clone(),
            locator: OnceLock::new(),
        }
    }
}

impl Triangulation {
    /// Builds the edge table and validates orientation and manifoldness.
    /// `tag_of` classifies each boundary edge from its endpoints.
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<Triangle>,
        tag_of: impl Fn(Point2, Point2) -> Option<BoundaryTag>,
    ) -> Result<Self> {
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        let nv = vertices.len();
        let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.v;
            if a >= nv || b >= nv || c >= nv {
                return Err(Error::InvalidMesh(format!("triangle {t} has an out-of-range vertex")));
            }
            if a == b || b == c || a == c {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let geom = TriangleGeom::new([vertices[a], vertices[b], vertices[c]]);
            let scale = geom.diameter().powi(2);
            if geom.signed_area() <= 1e-14 * scale {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is not counterclockwise or is degenerate (signed area {:e})",
                    geom.signed_area()
                )));
            }
            let mut te = [0usize; 3];
            for (e, slot) in te.iter_mut().enumerate() {
                let p = tri.v[(e + 1) % 3];
                let q = tri.v[(e + 2) % 3];
                let key = (p.min(q), p.max(q));
                let id = *edge_of.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        v: [key.0, key.1],
                        tris: Vec::with_capacity(2),
                        tag: None,
                    });
                    edges.len() - 1
                });
                edges[id].tris.push((t, e));
                if edges[id].tris.len() > 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        key.0, key.1
                    )));
                }
                *slot = id;
            }
            tri_edges.push(te);
        }
        for edge in &mut edges {
            if edge.is_boundary() {
                let tag = tag_of(vertices[edge.v[0]], vertices[edge.v[1]]).ok_or_else(|| {
                    Error::InvalidMesh(format!("boundary edge ({}, {}) has no tag", edge.v[0], edge.v[1]))
                })?;
                edge.tag = Some(tag);
            } else {
                // the two incident triangles must traverse the edge in opposite directions
                let dir = |&(t, e): &(usize, usize)| {
                    let tri: &Triangle = &triangles[t];
                    tri.v[(e + 1) % 3] == edge.v[0]
                };
                if dir(&edge.tris[0]) == dir(&edge.tris[1]) {
                    return Err(Error::InvalidMesh(format!(
                        "inconsistent orientation across edge ({}, {})",
                        edge.v[0], edge.v[1]
                    )));
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
            edges,
            tri_edges,
            locator: OnceLock::new(),
        })
    }

    /// Builds a mesh whose boundary edges are tagged from an explicit list.
    pub fn with_tags(
        vertices: Vec<Point2>,
        triangles: Vec<Triangle>,
        tags: &[(usize, usize, BoundaryTag)],
    ) -> Result<Self> {
        let lookup: HashMap<(usize, usize), BoundaryTag> = tags
            .iter()
            .map(|&(a, b, t)| ((a.min(b), a.max(b)), t))
            .collect();
        let index: HashMap<(u64, u64), usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.x.to_bits(), p.y.to_bits()), i))
            .collect();
        Self::new(vertices, triangles, |p, q| {
            let a = index[&(p.x.to_bits(), p.y.to_bits())];
            let b = index[&(q.x.to_bits(), q.y.to_bits())];
            lookup.get(&(a.min(b), a.max(b))).copied()
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge ids of a triangle's local edges.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn geom(&self, t: usize) -> TriangleGeom {
        let [a, b, c] = self.triangles[t].v;
        TriangleGeom::new([self.vertices[a], self.vertices[b], self.vertices[c]])
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| !e.is_boundary())
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary())
    }

    /// Smallest distance from `center` to a boundary edge carrying `tag`.
    pub fn min_boundary_distance(&self, tag: BoundaryTag, center: Point2) -> Option<f64> {
        self.boundary_edges()
            .filter(|(_, e)| e.tag == Some(tag))
            .map(|(_, e)| {
                let (a, b) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
                let ab = b - a;
                let t = (((center - a).x * ab.x + (center - a).y * ab.y) / (ab.x * ab.x + ab.y * ab.y)).clamp(0.0, 1.0);
                center.dist(a.lerp(b, t))
            })
            .min_by(f64::total_cmp)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.geom(t).area()).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.geom(t).diameter())
            .fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// `max_T diam(T) / inradius(T)`.
    pub fn quasi_uniformity(&self) -> Result<f64> {
        let mut beta: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let g = self.geom(t);
            if g.signed_area().abs() <= 1e-300 {
                return Err(Error::DegenerateTriangle { area: g.signed_area() });
            }
            beta = beta.max(g.diameter() / g.inradius());
        }
        Ok(beta)
    }

    /// Splits every triangle into four congruent children through the edge
    /// midpoints. Boundary tags are inherited by the half-edges.
    pub fn refine_uniform(&self) -> Triangulation {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(
            self.edges
                .iter()
                .map(|e| self.vertices[e.v[0]].lerp(self.vertices[e.v[1]], 0.5)),
        );
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.v;
            let [ea, eb, ec] = self.tri_edges[t];
            let (ma, mb, mc) = (nv + ea, nv + eb, nv + ec);
            triangles.push(Triangle { v: [a, mc, mb] });
            triangles.push(Triangle { v: [mc, b, ma] });
            triangles.push(Triangle { v: [mb, ma, c] });
            triangles.push(Triangle { v: [ma, mb, mc] });
        }
        let mut tags = Vec::new();
        for (id, e) in self.boundary_edges() {
            let tag = e.tag.expect("boundary edges are tagged");
            tags.push((e.v[0], nv + id, tag));
            tags.push((nv + id, e.v[1], tag));
        }
        let lookup: HashMap<(usize, usize), BoundaryTag> = tags
            .into_iter()
            .map(|(a, b, t)| ((a.min(b), a.max(b)), t))
            .collect();
        // vertex coordinates are unique, so map them back to indices
        let index: HashMap<(u64, u64), usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.x.to_bits(), p.y.to_bits()), i))
            .collect();
        Triangulation::new(vertices, triangles, |p, q| {
            let a = index[&(p.x.to_bits(), p.y.to_bits())];
            let b = index[&(q.x.to_bits(), q.y.to_bits())];
            lookup.get(&(a.min(b), a.max(b))).copied()
        })
        .expect("refinement of a valid mesh is valid")
    }

    /// Finds the lowest-index triangle containing `p`.
    pub fn locate_point(&self, p: Point2) -> Location {
        let loc = self.locator.get_or_init(|| Locator::build(self));
        loc.locate(self, p)
    }

    /// Boundary edge loops as vertex cycles, each with its tag.
    pub fn boundary_loops(&self) -> Result<Vec<(BoundaryTag, Vec<usize>)>> {
        let mut next: HashMap<usize, (usize, usize)> = HashMap::new();
        for (id, e) in self.boundary_edges() {
            let (t, le) = e.tris[0];
            let tri = self.triangles[t];
            let from = tri.v[(le + 1) % 3];
            let to = tri.v[(le + 2) % 3];
            if next.insert(from, (to, id)).is_some() {
                return Err(Error::InvalidMesh(format!("boundary vertex {from} is not manifold")));
            }
        }
        let mut visited = vec![false; self.edges.len()];
        let mut loops = Vec::new();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        for start in starts {
            let (_, first_edge) = next[&start];
            if visited[first_edge] {
                continue;
            }
            let tag = self.edges[first_edge].tag.expect("tagged");
            let mut cycle = vec![start];
            let mut cur = start;
            loop {
                let (to, id) = *next
                    .get(&cur)
                    .ok_or_else(|| Error::InvalidMesh("open boundary chain".into()))?;
                visited[id] = true;
                if self.edges[id].tag != Some(tag) {
                    return Err(Error::InvalidMesh("boundary loop mixes tags".into()));
                }
                if to == start {
                    break;
                }
                cycle.push(to);
                cur = to;
            }
            loops.push((tag, cycle));
        }
        Ok(loops)
    }

    /// Exhaustive pairwise conformity check: triangles may only meet in a
    /// shared vertex or a shared full edge. Quadratic; meant for tests and
    /// imported meshes of modest size.
    pub fn check_conformity(&self) -> Result<()> {
        let n = self.triangles.len();
        let boxes: Vec<(Point2, Point2)> = (0..n)
            .map(|t| {
                let g = self.geom(t);
                let (mut lo, mut hi) = (g.v[0], g.v[0]);
                for p in &g.v[1..] {
                    lo.x = lo.x.min(p.x);
                    lo.y = lo.y.min(p.y);
                    hi.x = hi.x.max(p.x);
                    hi.y = hi.y.max(p.y);
                }
                (lo, hi)
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| boxes[a].0.x.total_cmp(&boxes[b].0.x));
        for (pos, &s) in order.iter().enumerate() {
            for &t in &order[pos + 1..] {
                if boxes[t].0.x > boxes[s].1.x {
                    break;
                }
                if boxes[t].0.y > boxes[s].1.y || boxes[s].0.y > boxes[t].1.y {
                    continue;
                }
                if !self.pair_conforms(s, t) {
                    return Err(Error::InvalidMesh(format!("triangles {s} and {t} overlap")));
                }
            }
        }
        Ok(())
    }

    fn pair_conforms(&self, s: usize, t: usize) -> bool {
        let (ts, tt) = (self.triangles[s].v, self.triangles[t].v);
        let (gs, gt) = (self.geom(s), self.geom(t));
        let scale = gs.diameter().max(gt.diameter());
        let tol = 1e-12 * scale;
        // vertices of one may not lie in the other except as shared vertices
        for (va, gb, vb) in [(ts, &gt, tt), (tt, &gs, ts)] {
            for &v in &va {
                if vb.contains(&v) {
                    continue;
                }
                let b = gb.barycentric(self.vertices[v]).expect("valid triangle");
                if b.0.iter().all(|&x| x > -tol / scale) {
                    return false;
                }
            }
        }
        // edges may not cross properly
        for e in 0..3 {
            let (p0, p1) = (ts[(e + 1) % 3], ts[(e + 2) % 3]);
            for f in 0..3 {
                let (q0, q1) = (tt[(f + 1) % 3], tt[(f + 2) % 3]);
                let shared = [p0, p1].iter().filter(|v| [q0, q1].contains(v)).count();
                if shared > 0 {
                    continue;
                }
                if segments_cross(
                    self.vertices[p0],
                    self.vertices[p1],
                    self.vertices[q0],
                    self.vertices[q1],
                    tol,
                ) {
                    return false;
                }
            }
        }
        // two shared vertices: third vertices on opposite sides
        let shared: Vec<usize> = ts.iter().copied().filter(|v| tt.contains(v)).collect();
        if shared.len() == 3 {
            return false;
        }
        if shared.len() == 2 {
            let a = self.vertices[shared[0]];
            let b = self.vertices[shared[1]];
            let os = *ts.iter().find(|v| !shared.contains(v)).unwrap();
            let ot = *tt.iter().find(|v| !shared.contains(v)).unwrap();
            let side = |p: Point2| cross(b - a, p - a);
            if side(self.vertices[os]) * side(self.vertices[ot]) >= 0.0 {
                return false;
            }
        }
        true
    }

    /// Writes the plain-text exchange format.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "vertices {} triangles {}", self.vertices.len(), self.triangles.len())?;
        for p in &self.vertices {
            writeln!(out, "{} {}", p.x, p.y)?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t.v[0], t.v[1], t.v[2])?;
        }
        writeln!(out, "boundary")?;
        for (_, e) in self.boundary_edges() {
            writeln!(out, "edge {} {} {}", e.v[0], e.v[1], e.tag.expect("tagged"))?;
        }
        Ok(())
    }

    /// Reads the plain-text exchange format written by [`write_text`].
    /// A trailing integer region tag on triangle lines is accepted and ignored.
    ///
    /// [`write_text`]: Triangulation::write_text
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((n, Err(e))) => Err(Error::MeshParse { line: n, msg: e.to_string() }),
                None => Err(Error::MeshParse { line: 0, msg: format!("unexpected end of file, expected {what}") }),
            }
        };
        let (ln, header) = next_line("header")?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::MeshParse {
            line: ln,
            msg: "expected `vertices N triangles M`".into(),
        };
        if toks.len() != 4 || toks[0] != "vertices" || toks[2] != "triangles" {
            return Err(bad_header());
        }
        let nv: usize = toks[1].parse().map_err(|_| bad_header())?;
        let nt: usize = toks[3].parse().map_err(|_| bad_header())?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = next_line("vertex")?;
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MeshParse { line: ln, msg: e.to_string() })?;
            if xs.len() != 2 {
                return Err(Error::MeshParse { line: ln, msg: "expected `x y`".into() });
            }
            vertices.push(Point2::new(xs[0], xs[1]));
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = next_line("triangle")?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MeshParse { line: ln, msg: e.to_string() })?;
            if ids.len() != 3 && ids.len() != 4 {
                return Err(Error::MeshParse { line: ln, msg: "expected `i j k [tag]`".into() });
            }
            triangles.push(Triangle { v: [ids[0], ids[1], ids[2]] });
        }
        let mut tags = Vec::new();
        if let Ok((ln, l)) = next_line("boundary") {
            if l.trim() != "boundary" {
                return Err(Error::MeshParse { line: ln, msg: "expected `boundary`".into() });
            }
            while let Ok((ln, l)) = next_line("edge") {
                let toks: Vec<&str> = l.split_whitespace().collect();
                let err = || Error::MeshParse { line: ln, msg: "expected `edge v1 v2 tag`".into() };
                if toks.len() != 4 || toks[0] != "edge" {
                    return Err(err());
                }
                let a: usize = toks[1].parse().map_err(|_| err())?;
                let b: usize = toks[2].parse().map_err(|_| err())?;
                let tag = BoundaryTag::parse(toks[3]).ok_or_else(err)?;
                tags.push((a, b, tag));
            }
        }
        Self::with_tags(vertices, triangles, &tags)
    }
}

fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_cross(p0: Point2, p1: Point2, q0: Point2, q1: Point2, tol: f64) -> bool {
    let d1 = cross(p1 - p0, q0 - p0);
    let d2 = cross(p1 - p0, q1 - p0);
    let d3 = cross(q1 - q0, p0 - q0);
    let d4 = cross(q1 - q0, p1 - q0);
    let lp = p0.dist(p1);
    let lq = q0.dist(q1);
    (d1 > tol * lp && d2 < -tol * lp || d1 < -tol * lp && d2 > tol * lp)
        && (d3 > tol * lq && d4 < -tol * lq || d3 < -tol * lq && d4 > tol * lq)
}

/// Uniform bucket grid over the mesh bounding box; each bucket lists the
/// triangles whose bounding boxes overlap it, in ascending index order.
#[derive(Debug)]
struct Locator {
    origin: Point2,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn build(mesh: &Triangulation) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let n = mesh.num_triangles().max(1);
        let w = (hi.x - lo.x).max(1e-300);
        let h = (hi.y - lo.y).max(1e-300);
        let target = (w * h / n as f64).sqrt();
        let nx = ((w / target).ceil() as usize).clamp(1, 4096);
        let ny = ((h / target).ceil() as usize).clamp(1, 4096);
        let cell = [w / nx as f64, h / ny as f64];
        let mut buckets = vec![Vec::new(); nx * ny];
        let clampi = |v: f64, m: usize| (v.floor().max(0.0) as usize).min(m - 1);
        for t in 0..mesh.num_triangles() {
            let g = mesh.geom(t);
            let xs = g.v.iter().map(|p| p.x);
            let ys = g.v.iter().map(|p| p.y);
            let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
            let pad = 1e-9 * target;
            let i0 = clampi((x0 - pad - lo.x) / cell[0], nx);
            let i1 = clampi((x1 + pad - lo.x) / cell[0], nx);
            let j0 = clampi((y0 - pad - lo.y) / cell[1], ny);
            let j1 = clampi((y1 + pad - lo.y) / cell[1], ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t as u32);
                }
            }
        }
        Self {
            origin: lo,
            cell,
            dims: [nx, ny],
            buckets,
        }
    }

    fn locate(&self, mesh: &Triangulation, p: Point2) -> Location {
        let fx = (p.x - self.origin.x) / self.cell[0];
        let fy = (p.y - self.origin.y) / self.cell[1];
        let [nx, ny] = self.dims;
        if !(fx > -1e-9 && fy > -1e-9 && fx < nx as f64 + 1e-9 && fy < ny as f64 + 1e-9) {
            return Location::Outside;
        }
        let i = (fx.floor().max(0.0) as usize).min(nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(ny - 1);
        for &t in &self.buckets[j * nx + i] {
            let t = t as usize;
            let b = mesh
                .geom(t)
                .barycentric(p)
                .expect("mesh triangles are nondegenerate");
            if b.0.iter().all(|&x| x >= -1e-12) {
                return Location::Inside { triangle: t, bary: b };
            }
        }
        Location::Outside
    }
}

/// Shape of the scatterer removed from the box.
#[derive(Debug, Clone, PartialEq)]
pub enum Hole {
    /// `[-c1, c1] x [-c2, c2]`
    Rectangle { half: [f64; 2] },
    /// Disk of the given radius, approximated by an inscribed regular polygon.
    Disk { radius: f64 },
    /// Polygon whose vertices lie on grid lines; grid cells with centers
    /// inside are removed.
    Polygon { vertices: Vec<Point2> },
    /// Thick elliptic arc: points whose normalized elliptic radius lies in
    /// `[1, 1 + thickness/semi_minor]`, minus an opening around `+y`.
    /// Removed as a staircase of grid cells.
    EllipticWall {
        semi_axes: [f64; 2],
        thickness: f64,
        opening_half_angle: f64,
    },
}

impl Hole {
    fn extent(&self) -> [f64; 2] {
        match self {
            Hole::Rectangle { half } => *half,
            Hole::Disk { radius } => [*radius, *radius],
            Hole::Polygon { vertices } => vertices.iter().fold([0.0, 0.0], |m, p| {
                [m[0].max(p.x.abs()), m[1].max(p.y.abs())]
            }),
            Hole::EllipticWall { semi_axes, thickness, .. } => {
                let s = 1.0 + thickness / semi_axes[1];
                [semi_axes[0] * s, semi_axes[1] * s]
            }
        }
    }

    fn removes_cell(&self, center: Point2, band: f64) -> bool {
        match self {
            Hole::Rectangle { half } => center.x.abs() < half[0] && center.y.abs() < half[1],
            Hole::Disk { .. } => center.x.abs() < band && center.y.abs() < band,
            Hole::Polygon { vertices } => point_in_polygon(center, vertices),
            Hole::EllipticWall {
                semi_axes,
                thickness,
                opening_half_angle,
            } => {
                let rho = ((center.x / semi_axes[0]).powi(2) + (center.y / semi_axes[1]).powi(2)).sqrt();
                let outer = 1.0 + thickness / semi_axes[1];
                let angle_from_top = center.x.atan2(center.y).abs();
                (1.0..=outer).contains(&rho) && angle_from_top > *opening_half_angle
            }
        }
    }
}

/// Even-odd rule.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Outer box `[-b1,b1] x [-b2,b2]`, the scatterer, and optionally the inner
/// PML interface box the mesh must align with.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub outer: [f64; 2],
    pub hole: Hole,
    pub inner: Option<[f64; 2]>,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let [b1, b2] = self.outer;
        if !(b1 > 0.0 && b2 > 0.0 && b1.is_finite() && b2.is_finite()) {
            return Err(Error::InvalidDomain(format!("outer half-widths must be positive, got {:?}", self.outer)));
        }
        let ext = self.hole.extent();
        if !(ext[0] > 0.0 && ext[1] > 0.0) {
            return Err(Error::InvalidDomain("hole must have positive extent".into()));
        }
        let container = self.inner.unwrap_or(self.outer);
        if let Some([a1, a2]) = self.inner {
            if !(a1 > 0.0 && a2 > 0.0 && a1 < b1 && a2 < b2) {
                return Err(Error::InvalidDomain(format!(
                    "inner box {:?} must lie strictly inside the outer box {:?}",
                    self.inner.unwrap(),
                    self.outer
                )));
            }
        }
        if !(ext[0] < container[0] && ext[1] < container[1]) {
            return Err(Error::InvalidDomain(format!(
                "hole extent {:?} is not strictly inside the box {:?}",
                ext, container
            )));
        }
        Ok(())
    }

    /// Half-width of the square band box around a disk hole for mesh width `h`.
    pub fn disk_band_half_width(&self, h: f64) -> Option<f64> {
        let Hole::Disk { radius } = self.hole else {
            return None;
        };
        let limit = self.inner.unwrap_or(self.outer);
        let limit = limit[0].min(limit[1]);
        let c = h * (1.5 * radius / h - 1e-9).ceil();
        Some(c.min(limit))
    }

    /// Vertex count of the inscribed polygon: the smallest multiple of 4
    /// with edge length at most `h`.
    pub fn disk_polygon_vertices(radius: f64, h: f64) -> usize {
        let mut n = 4;
        while 2.0 * radius * (std::f64::consts::PI / n as f64).sin() > h + 1e-12 {
            n += 4;
        }
        n
    }
}

fn push_key(keys: &mut Vec<f64>, v: f64) {
    keys.push(v);
    keys.push(-v);
}

fn breakpoints(mut keys: Vec<f64>, h: f64) -> Vec<f64> {
    keys.sort_by(f64::total_cmp);
    keys.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let mut pts = vec![keys[0]];
    for w in keys.windows(2) {
        let (u, v) = (w[0], w[1]);
        let n = ((v - u) / h - 1e-9).ceil().max(1.0) as usize;
        for s in 1..n {
            pts.push(u + (v - u) * s as f64 / n as f64);
        }
        pts.push(v);
    }
    pts
}

fn index_of(pts: &[f64], v: f64) -> usize {
    pts.iter()
        .position(|&p| (p - v).abs() <= 1e-9 * (1.0 + v.abs()))
        .expect("value is a breakpoint")
}

/// Generates a structured triangulation: a tensor grid of cells aligned with
/// the outer box, the inner PML box and the hole, each cell split into two
/// triangles along its `/` diagonal. A disk hole is surrounded by a refined
/// constrained Delaunay band between the inscribed polygon and a grid-aligned
/// square.
pub fn build_mesh(spec: &DomainSpec, h: f64) -> Result<Triangulation> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("mesh width must be positive, got {h}")));
    }
    spec.validate()?;
    let band = spec.disk_band_half_width(h);
    if let (Some(c), Hole::Disk { radius }) = (band, &spec.hole) {
        if c <= *radius * (1.0 + 1e-9) {
            return Err(Error::InvalidDomain(format!(
                "no room for the radial band: band half-width {c} vs radius {radius}"
            )));
        }
    }
    let mut keys = [Vec::new(), Vec::new()];
    for ax in 0..2 {
        push_key(&mut keys[ax], spec.outer[ax]);
        if let Some(inner) = spec.inner {
            push_key(&mut keys[ax], inner[ax]);
        }
        match &spec.hole {
            Hole::Rectangle { half } => push_key(&mut keys[ax], half[ax]),
            Hole::Disk { .. } => {
                push_key(&mut keys[ax], band.unwrap());
                keys[ax].push(0.0);
            }
            Hole::Polygon { vertices } => {
                for p in vertices {
                    keys[ax].push(if ax == 0 { p.x } else { p.y });
                }
            }
            Hole::EllipticWall { .. } => {}
        }
    }
    let [keys_x, keys_y] = keys;
    let xs = breakpoints(keys_x, h);
    let ys = breakpoints(keys_y, h);
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let band_c = band.unwrap_or(0.0);

    let mut kept = vec![false; nx * ny];
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    for j in 0..ny {
        for i in 0..nx {
            let center = Point2::new(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
            if !spec.hole.removes_cell(center, band_c) {
                kept[j * nx + i] = true;
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[(j + dj) * (nx + 1) + i + di] = true;
                }
            }
        }
    }
    if let Hole::Disk { .. } = spec.hole {
        // the band square may border no kept cell when it is the outer box
        let on_square = |v: f64| v.abs() <= band_c * (1.0 + 1e-12);
        for j in 0..=ny {
            for i in 0..=nx {
                let (x, y) = (xs[i], ys[j]);
                if on_square(x) && on_square(y) && x.abs().max(y.abs()) >= band_c * (1.0 - 1e-12) {
                    used[j * (nx + 1) + i] = true;
                }
            }
        }
    }
    let mut vid = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[j * (nx + 1) + i] {
                vid[j * (nx + 1) + i] = vertices.len();
                vertices.push(Point2::new(xs[i], ys[j]));
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !kept[j * nx + i] {
                continue;
            }
            let p00 = vid[j * (nx + 1) + i];
            let p10 = vid[j * (nx + 1) + i + 1];
            let p01 = vid[(j + 1) * (nx + 1) + i];
            let p11 = vid[(j + 1) * (nx + 1) + i + 1];
            triangles.push(Triangle { v: [p00, p10, p11] });
            triangles.push(Triangle { v: [p00, p11, p01] });
        }
    }

    if let Hole::Disk { radius } = spec.hole {
        let c = band_c;
        let grid_id = |x: f64, y: f64| vid[index_of(&ys, y) * (nx + 1) + index_of(&xs, x)];
        let inside = |v: f64| v > -c * (1.0 + 1e-12) && v < c * (1.0 + 1e-12);
        let bx: Vec<f64> = xs.iter().copied().filter(|&v| inside(v)).collect();
        let by: Vec<f64> = ys.iter().copied().filter(|&v| inside(v)).collect();
        let eps = 1e-12 * c;
        // square ring, counterclockwise from (c, 0)
        let mut square: Vec<(Point2, usize)> = Vec::new();
        let mut push = |x: f64, y: f64| square.push((Point2::new(x, y), grid_id(x, y)));
        for &y in by.iter().filter(|&&y| y >= -eps && y < c - eps) {
            push(c, y);
        }
        for &x in bx.iter().rev().filter(|&&x| x > -c + eps) {
            push(x, c);
        }
        for &y in by.iter().rev().filter(|&&y| y > -c + eps) {
            push(-c, y);
        }
        for &x in bx.iter().filter(|&&x| x < c - eps) {
            push(x, -c);
        }
        for &y in by.iter().filter(|&&y| y < -eps) {
            push(c, y);
        }
        triangulate_disk_band(radius, h, &square, &mut vertices, &mut triangles)?;
    }

    let [b1, b2] = spec.outer;
    let on_outer = |p: Point2| {
        let tol = 1e-9 * (b1 + b2);
        [
            (p.x - b1).abs() <= tol,
            (p.x + b1).abs() <= tol,
            (p.y - b2).abs() <= tol,
            (p.y + b2).abs() <= tol,
        ]
    };
    Triangulation::new(vertices, triangles, |p, q| {
        let (sp, sq) = (on_outer(p), on_outer(q));
        if (0..4).any(|s| sp[s] && sq[s]) {
            Some(BoundaryTag::OuterPml)
        } else {
            Some(BoundaryTag::Scatterer)
        }
    })
}

/// Fills the band between a regular polygon inscribed in the disk and the
/// square `ring` (counterclockwise, already carrying vertex ids) with a
/// refined constrained Delaunay triangulation: triangle area at most
/// `3h^2/4`, angles at least 30 degrees, ring and polygon edges left unsplit.
fn triangulate_disk_band(
    radius: f64,
    h: f64,
    ring: &[(Point2, usize)],
    vertices: &mut Vec<Point2>,
    triangles: &mut Vec<Triangle>,
) -> Result<()> {
    use spade::{AngleLimit, ConstrainedDelaunayTriangulation as Cdt, RefinementParameters, Triangulation as _};

    let to_spade = |p: Point2| spade::Point2::new(p.x, p.y);
    let fail = |e: spade::InsertionError| Error::InvalidMesh(format!("disk band triangulation: {e:?}"));
    let mut cdt: Cdt<spade::Point2<f64>> = Cdt::new();
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut close = |cdt: &mut Cdt<spade::Point2<f64>>, pts: &[(Point2, usize)]| -> Result<()> {
        let handles = pts
            .iter()
            .map(|&(p, id)| {
                let v = cdt.insert(to_spade(p)).map_err(fail)?;
                ids.insert(v.index(), id);
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, &a) in handles.iter().enumerate() {
            cdt.add_constraint(a, handles[(i + 1) % handles.len()]);
        }
        Ok(())
    };
    close(&mut cdt, ring)?;
    let n = DomainSpec::disk_polygon_vertices(radius, h);
    let polygon: Vec<(Point2, usize)> = (0..n)
        .map(|j| {
            // exact axis points keep the polygon symmetric
            let (sn, cs) = match (4 * j) % n {
                0 => [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)][4 * j / n],
                _ => (2.0 * std::f64::consts::PI * j as f64 / n as f64).sin_cos(),
            };
            vertices.push(Point2::new(radius * cs, radius * sn));
            (vertices[vertices.len() - 1], vertices.len() - 1)
        })
        .collect();
    close(&mut cdt, &polygon)?;

    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .keep_constraint_edges()
        .with_angle_limit(AngleLimit::from_deg(30.0))
        .with_max_allowed_area(0.75 * h * h);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::InvalidMesh("disk band refinement did not finish".into()));
    }
    let excluded: std::collections::HashSet<_> = result.excluded_faces.iter().map(|f| f.index()).collect();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix().index()) {
            continue;
        }
        let v = face.vertices().map(|v| {
            *ids.entry(v.fix().index()).or_insert_with(|| {
                let p = v.position();
                vertices.push(Point2::new(p.x, p.y));
                vertices.len() - 1
            })
        });
        triangles.push(Triangle { v });
    }
    Ok(())
}
