//! Element assembly of the weighted weak form and the constrained solve.

use std::fmt::Write as _;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Conj, Par};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bernstein::{dim, gram, multi_indices, MultiIndex, TripleTensor};
use crate::error::{Error, Result};
use crate::pml::PmlWeights;
use crate::spline_space::{ConstraintSystem, SplineSpace};
use crate::sparse::CsrMatrix;

/// Block-diagonal matrices of the discontinuous test space.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub k: f64,
    /// `integral of A grad u . grad v`
    pub stiffness: CsrMatrix<Complex64>,
    /// `integral of J u v`
    pub mass: CsrMatrix<Complex64>,
    /// `integral of f v`
    pub load: Vec<Complex64>,
    pub robin: Option<CsrMatrix<Complex64>>,
}

impl DiscreteSystem {
    /// `K - k^2 M - R`
    pub fn system_matrix(&self) -> CsrMatrix<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let a = self
            .stiffness
            .axpby(one, &self.mass, Complex64::new(-self.k * self.k, 0.0));
        match &self.robin {
            Some(r) => a.axpby(one, r, -one),
            None => a,
        }
    }

    pub fn with_robin(mut self, r: CsrMatrix<Complex64>) -> Self {
        self.robin = Some(r);
        self
    }
}

fn uniform(w: &[Complex64]) -> Option<Complex64> {
    w.iter().all(|v| *v == w[0]).then_some(w[0])
}

/// `sum_g w_g T[g]`, or the scaled Gram matrix when `w` is constant.
fn weight_block(t: &TripleTensor, gram: &[f64], w: &[Complex64]) -> Vec<Complex64> {
    match uniform(w) {
        Some(c) => gram.iter().map(|&g| c * g).collect(),
        None => t.contract(w),
    }
}

/// Assembles stiffness, mass and load for weights `(A11, A22, J)` given as
/// splines on the same space, and an optional source spline.
pub fn assemble(
    space: &SplineSpace<'_>,
    weights: &PmlWeights,
    k: f64,
    source: Option<&[Complex64]>,
) -> Result<DiscreteSystem> {
    space.check_len(&weights.a11)?;
    space.check_len(&weights.a22)?;
    space.check_len(&weights.j)?;
    if let Some(f) = source {
        space.check_len(f)?;
    }
    let d = space.degree();
    let (n, n1) = (dim(d), dim(d - 1));
    let t1 = TripleTensor::new(d, d - 1, d - 1);
    let t0 = TripleTensor::new(d, d, d);
    let gram1 = gram(d - 1, d - 1);
    let gram0 = gram(d, d);
    let lowered: Vec<Vec<(usize, usize)>> = multi_indices(d)
        .into_iter()
        .map(|a| {
            let arr = a.as_array();
            (0..3)
                .filter(|&m| arr[m] > 0)
                .map(|m| {
                    let mut b = arr;
                    b[m] -= 1;
                    (m, MultiIndex::from_array(b).index())
                })
                .collect()
        })
        .collect();
    let mesh = space.mesh();
    let dd = (d * d) as f64;

    type Block = (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>);
    let blocks: Vec<Result<Block>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geom(t);
            let area = geom.area();
            let g = geom.bary_gradients()?;
            let gx = weight_block(&t1, &gram1, space.local(&weights.a11, t));
            let gy = weight_block(&t1, &gram1, space.local(&weights.a22, t));
            let mut kb = vec![Complex64::new(0.0, 0.0); n * n];
            for (ai, la) in lowered.iter().enumerate() {
                for (bi, lb) in lowered.iter().enumerate() {
                    let mut s = Complex64::new(0.0, 0.0);
                    for &(m, mu) in la {
                        for &(q, nu) in lb {
                            s += gx[mu * n1 + nu] * (g[m][0] * g[q][0]) + gy[mu * n1 + nu] * (g[m][1] * g[q][1]);
                        }
                    }
                    kb[ai * n + bi] = s * (dd * area);
                }
            }
            let mut mb = weight_block(&t0, &gram0, space.local(&weights.j, t));
            for v in &mut mb {
                *v *= area;
            }
            let lb = match source {
                Some(f) => {
                    let fl = space.local(f, t);
                    (0..n)
                        .map(|b| (0..n).map(|a| fl[a] * gram0[a * n + b]).sum::<Complex64>() * area)
                        .collect()
                }
                None => vec![Complex64::new(0.0, 0.0); n],
            };
            Ok((kb, mb, lb))
        })
        .collect();

    let total = space.num_coeffs();
    let mut k_rows = Vec::with_capacity(total);
    let mut m_rows = Vec::with_capacity(total);
    let mut load = Vec::with_capacity(total);
    for (t, blk) in blocks.into_iter().enumerate() {
        let (kb, mb, lb) = blk?;
        for a in 0..n {
            k_rows.push((0..n).map(|b| (t * n + b, kb[a * n + b])).collect());
            m_rows.push((0..n).map(|b| (t * n + b, mb[a * n + b])).collect());
        }
        load.extend(lb);
    }
    Ok(DiscreteSystem {
        k,
        stiffness: CsrMatrix::from_rows(total, k_rows),
        mass: CsrMatrix::from_rows(total, m_rows),
        load,
        robin: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Penalty on boundary rows relative to the largest matrix entry.
    pub penalty: f64,
    /// Extra weight on smoothness rows; their penalty is `penalty * weight^2`.
    pub smoothness_weight: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 5,
            penalty: 1e6,
            smoothness_weight: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub coeffs: Vec<Complex64>,
    /// `||H c||_inf`
    pub smoothness_residual: f64,
    /// `||D c - g||_inf`
    pub boundary_residual: f64,
    /// Relative residual of the first saddle block, measured on the unknowns
    /// left after eliminating coefficient equalities.
    pub equation_residual: f64,
    /// Size of the last correction relative to `||c||_inf`.
    pub last_step: f64,
    pub iterations: usize,
}

impl SolveReport {
    /// Flat `key = value` block.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dofs = {}", self.coeffs.len());
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "smoothness_residual = {:e}", self.smoothness_residual);
        let _ = writeln!(s, "boundary_residual = {:e}", self.boundary_residual);
        let _ = writeln!(s, "equation_residual = {:e}", self.equation_residual);
        let _ = writeln!(s, "last_step = {:e}", self.last_step);
        s
    }
}

fn norm_inf(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.norm()))
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Saddle matrices with more nonzeros than this use the simplicial LU: the
/// supernodal variant reserves storage for a column-pivoting fill bound that
/// outgrows desktop memory well before the simplicial fill does.
const SUPERNODAL_MAX_NNZ: usize = 2_000_000;

/// Sparse LU with partial pivoting.
struct SparseLu {
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, c64>,
}

impl SparseLu {
    fn factor(a: &SparseColMat<usize, c64>) -> Result<Self> {
        let fail = |e: String| Error::SingularSystem(format!("factorization failed: {e}"));
        let mut params = LuSymbolicParams::default();
        if a.compute_nnz() > SUPERNODAL_MAX_NNZ {
            params.supernodal_flop_ratio_threshold = SupernodalThreshold::FORCE_SIMPLICIAL;
        }
        let symbolic = factorize_symbolic_lu(a.symbolic(), params).map_err(|e| fail(format!("{e:?}")))?;
        let mut numeric = NumericLu::new();
        let req = symbolic.factorize_numeric_lu_scratch::<c64>(Par::Seq, Default::default());
        let mut mem = MemBuffer::try_new(req).map_err(|_| fail("out of memory".into()))?;
        symbolic
            .factorize_numeric_lu(&mut numeric, a.as_ref(), Par::Seq, MemStack::new(&mut mem), Default::default())
            .map_err(|e| fail(format!("{e:?}")))?;
        Ok(Self { symbolic, numeric })
    }

    fn solve_in_place(&self, rhs: faer::MatMut<'_, c64>) {
        let req = self.symbolic.solve_in_place_scratch::<c64>(rhs.ncols(), Par::Seq);
        let mut mem = MemBuffer::new(req);
        LuRef::new_unchecked(&self.symbolic, &self.numeric).solve_in_place_with_conj(
            Conj::No,
            rhs,
            Par::Seq,
            MemStack::new(&mut mem),
        );
    }
}

/// Coefficient classes tied by smoothness rows of the form `x c_a - x c_b = 0`
/// (all C0 rows). Returns the class of every coefficient, numbered by first
/// appearance, the class count and which rows of `h` were consumed.
fn equality_classes(h: &CsrMatrix<f64>, n: usize) -> (Vec<usize>, usize, Vec<bool>) {
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut consumed = vec![false; h.nrows()];
    for (r, used) in consumed.iter_mut().enumerate() {
        let row: Vec<(usize, f64)> = h.row(r).collect();
        if let [(a, va), (b, vb)] = row[..] {
            if va != 0.0 && va == -vb {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
                *used = true;
            }
        }
    }
    let mut class = vec![usize::MAX; n];
    let mut count = 0;
    for i in 0..n {
        let root = find(&mut parent, i);
        if class[root] == usize::MAX {
            class[root] = count;
            count += 1;
        }
        class[i] = class[root];
    }
    (class, count, consumed)
}

/// Solves `A c + L^T lambda = b`, `L c = G` with `L = [H; D]`, `G = [0; g]`.
///
/// Smoothness rows that merely equate two coefficients are eliminated by
/// sharing one unknown between them. The remaining saddle system is
/// regularized as `[A L^T; L -P^-1]` with boundary penalty
/// `penalty * max|A_ij|` and smoothness penalty `penalty * weight^2` times
/// that, factored once by sparse LU, and iterated with exact residuals. When
/// the boundary rows are slightly inconsistent with the smoothness rows (C1
/// splines on straight boundaries), `c` settles on the weighted least-squares
/// fit of the boundary data and the iteration stops once the correction
/// stagnates.
pub fn solve_saddle(
    a: &CsrMatrix<Complex64>,
    b: &[Complex64],
    cons: &ConstraintSystem,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let n = a.ncols();
    if a.nrows() != n || b.len() != n || cons.h.ncols() != n || cons.d.ncols() != n || cons.g.len() != cons.d.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "system {}x{}, load {}, H {}x{}, D {}x{}, g {}",
            a.nrows(),
            a.ncols(),
            b.len(),
            cons.h.nrows(),
            cons.h.ncols(),
            cons.d.nrows(),
            cons.d.ncols(),
            cons.g.len()
        )));
    }
    if opts.max_iters == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("solver needs max_iters >= 1 and tol > 0".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let (class, nu, consumed) = equality_classes(&cons.h, n);
    let kept: Vec<Vec<(usize, f64)>> = (0..cons.h.nrows())
        .filter(|&r| !consumed[r])
        .map(|r| cons.h.row(r).collect())
        .collect();
    let nh = kept.len();
    let l = CsrMatrix::from_rows(n, kept).vstack(&cons.d);
    let m = l.nrows();
    let mut big_g = vec![zero; nh];
    big_g.extend_from_slice(&cons.g);
    let a_max = a.max_abs().max(f64::MIN_POSITIVE);
    let rho_d = opts.penalty * a_max;
    let rho_h = rho_d * opts.smoothness_weight * opts.smoothness_weight;
    let inv_rho = |r: usize| if r < nh { 1.0 / rho_h } else { 1.0 / rho_d };

    // regularized KKT matrix [A L^T; L -P^-1] on the shared unknowns
    let mut trip: Vec<Triplet<usize, usize, c64>> = Vec::with_capacity(a.nnz() + 2 * l.nnz() + m);
    trip.extend(a.triplets().map(|(r, c, v)| Triplet::new(class[r], class[c], v)));
    for (r, c, v) in l.triplets() {
        trip.push(Triplet::new(nu + r, class[c], Complex64::new(v, 0.0)));
        trip.push(Triplet::new(class[c], nu + r, Complex64::new(v, 0.0)));
    }
    for r in 0..m {
        trip.push(Triplet::new(nu + r, nu + r, Complex64::new(-inv_rho(r), 0.0)));
    }
    let kkt = SparseColMat::<usize, c64>::try_new_from_triplets(nu + m, nu + m, &trip)
        .map_err(|e| Error::SingularSystem(format!("matrix construction failed: {e:?}")))?;
    drop(trip);
    let lu = SparseLu::factor(&kkt)?;
    drop(kkt);

    // residual of the first block, summed onto the shared unknowns
    let reduced_residual = |c: &[Complex64], lam: &[Complex64]| {
        let ac = a.mul_vec(c);
        let ltl = l.mul_transpose_vec(lam);
        let mut r = vec![zero; nu];
        for i in 0..n {
            r[class[i]] += b[i] - ac[i] - ltl[i];
        }
        (r, norm2(&ltl))
    };
    let mut u = vec![zero; nu];
    let mut c = vec![zero; n];
    let mut lam = vec![zero; m];
    let mut report = SolveReport {
        coeffs: Vec::new(),
        smoothness_residual: f64::INFINITY,
        boundary_residual: f64::INFINITY,
        equation_residual: f64::INFINITY,
        last_step: f64::INFINITY,
        iterations: 0,
    };
    let (mut r1, _) = reduced_residual(&c, &lam);
    let b_norm = {
        let mut tb = vec![zero; nu];
        for i in 0..n {
            tb[class[i]] += b[i];
        }
        norm2(&tb)
    };
    for it in 1..=opts.max_iters {
        let lc = l.mul_vec(&c);
        let mut rhs = faer::Mat::<c64>::from_fn(nu + m, 1, |i, _| if i < nu { r1[i] } else { big_g[i - nu] - lc[i - nu] });
        lu.solve_in_place(rhs.as_mut());
        if (0..nu + m).any(|i| !rhs[(i, 0)].re.is_finite() || !rhs[(i, 0)].im.is_finite()) {
            return Err(Error::SingularSystem("non-finite correction".into()));
        }
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += rhs[(i, 0)];
        }
        for (i, lm) in lam.iter_mut().enumerate() {
            *lm += rhs[(nu + i, 0)];
        }
        for (ci, &k) in c.iter_mut().zip(&class) {
            *ci = u[k];
        }

        let un = norm_inf(&u);
        let step = (0..nu).fold(0.0f64, |mx, i| mx.max(rhs[(i, 0)].norm()));
        let hc = cons.h.mul_vec(&c);
        let dcg: Vec<Complex64> = cons.d.mul_vec(&c).iter().zip(&cons.g).map(|(x, g)| x - g).collect();
        let (res, ltl_norm) = reduced_residual(&c, &lam);
        let denom = b_norm + a_max * norm2(&u) + ltl_norm;
        report.smoothness_residual = norm_inf(&hc);
        report.boundary_residual = norm_inf(&dcg);
        report.equation_residual = if denom > 0.0 { norm2(&res) / denom } else { 0.0 };
        report.last_step = if un > 0.0 { step / un } else { 0.0 };
        report.iterations = it;
        r1 = res;

        let scale = un.max(norm_inf(&cons.g));
        let smooth_ok = report.smoothness_residual <= opts.tol * un.max(f64::MIN_POSITIVE) || report.smoothness_residual == 0.0;
        let eq_ok = report.equation_residual <= opts.tol;
        let bnd_ok = report.boundary_residual <= opts.tol * scale || report.last_step <= opts.tol;
        if smooth_ok && eq_ok && bnd_ok {
            report.coeffs = c;
            return Ok(report);
        }
    }
    Err(Error::NotConverged {
        iterations: report.iterations,
        smoothness_residual: report.smoothness_residual,
        equation_residual: report.equation_residual,
    })
}

/// Constrained solve of the PML system `(K - k^2 M) c = b`.
pub fn solve_constrained(sys: &DiscreteSystem, cons: &ConstraintSystem, opts: &SolveOptions) -> Result<SolveReport> {
    solve_saddle(&sys.system_matrix(), &sys.load, cons, opts)
}

/// Constrained solve with the absorbing boundary term; `sys.robin` must be set
/// and `cons` should carry scatterer rows only.
pub fn solve_abc(sys: &DiscreteSystem, cons: &ConstraintSystem, opts: &SolveOptions) -> Result<SolveReport> {
    if sys.robin.is_none() {
        return Err(Error::InvalidArgument("absorbing-boundary solve needs a Robin matrix".into()));
    }
    solve_saddle(&sys.system_matrix(), &sys.load, cons, opts)
}
