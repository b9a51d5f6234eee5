//! Pointwise algebra for degenerate quadratic forms `Q(x, ξ) = ξ'Q(x)ξ`.
//!
//! A form may vanish on nonzero directions, so every routine works on the
//! range of `Q(x)` through an eigen-decomposition with a relative cutoff
//! `tol · λ_max(Q(x))`. Eigenvalues below the cutoff are treated as kernel.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::Serialize;

use crate::dense::{dot, Matrix};
use crate::{Error, Result, FORM_TOL};

/// Shared evaluator `point -> T`.
pub type PointFn<T> = Arc<dyn Fn(&[f64]) -> T + Send + Sync>;

/// A field of symmetric nonnegative definite `n × n` matrices with a declared bound `C0`.
#[derive(Clone)]
pub struct SymMatrixField {
    dim: usize,
    bound_c0: f64,
    eval: PointFn<Matrix>,
}

impl core::fmt::Debug for SymMatrixField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SymMatrixField")
            .field("dim", &self.dim)
            .field("bound_c0", &self.bound_c0)
            .finish_non_exhaustive()
    }
}

impl SymMatrixField {
    /// Wrap an evaluator. `bound_c0` is the declared bound `ξ'Q(x)ξ ≤ C0 |ξ|²`.
    pub fn new(
        dim: usize,
        bound_c0: f64,
        eval: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        SymMatrixField {
            dim,
            bound_c0,
            eval: Arc::new(eval),
        }
    }

    /// The same matrix everywhere; `C0` is its largest eigenvalue.
    pub fn constant(m: Matrix) -> Self {
        let dim = m.rows();
        let bound = m.sym_eigen().max().max(0.0);
        Self::new(dim, bound, move |_| m.clone())
    }

    /// `α · self`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let inner = self.eval.clone();
        Self::new(self.dim, alpha.abs() * self.bound_c0, move |x| inner(x).scaled(alpha))
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared bound `C0`.
    pub fn bound_c0(&self) -> f64 {
        self.bound_c0
    }

    /// Evaluate at `x`, checking shape, finiteness and symmetry.
    pub fn eval(&self, x: &[f64]) -> Result<Matrix> {
        let m = (self.eval)(x);
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(Error::contract(format!(
                "matrix field declared {0}x{0} returned {1}x{2}",
                self.dim,
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::Data {
                what: "matrix coefficient".into(),
                location: x.to_vec(),
            });
        }
        if !m.is_symmetric(1e-12) {
            return Err(Error::hypothesis("matrix field is not symmetric", x));
        }
        Ok(m)
    }

    /// Verify nonnegativity and the declared bound at `x` along the given directions.
    pub fn check_at(&self, x: &[f64], directions: &[Vec<f64>]) -> Result<()> {
        let m = self.eval(x)?;
        let norm = m.norm_fro();
        for xi in directions {
            let val = m.bilinear(xi, xi);
            let xi2 = dot(xi, xi);
            if val < -FORM_TOL * (1.0 + norm) * xi2 {
                return Err(Error::hypothesis("matrix field is not nonnegative definite", x));
            }
            if val > self.bound_c0 * xi2 * (1.0 + FORM_TOL) + FORM_TOL {
                return Err(Error::hypothesis(
                    format!("quadratic form exceeds declared bound C0 = {}", self.bound_c0),
                    x,
                ));
            }
        }
        Ok(())
    }
}

/// An ordered tuple of first-order vectorfields `T_i = Σ_j t_ij(x) ∂_j`.
///
/// Evaluates to a `count × dim` matrix whose row `i` holds the coefficients of `T_i`.
#[derive(Clone)]
pub struct VectorFieldTuple {
    dim: usize,
    count: usize,
    eval: PointFn<Matrix>,
}

impl core::fmt::Debug for VectorFieldTuple {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("VectorFieldTuple")
            .field("dim", &self.dim)
            .field("count", &self.count)
            .finish_non_exhaustive()
    }
}

impl VectorFieldTuple {
    /// Wrap an evaluator returning `count × dim` coefficient matrices.
    pub fn new(
        dim: usize,
        count: usize,
        eval: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        VectorFieldTuple {
            dim,
            count,
            eval: Arc::new(eval),
        }
    }

    /// The empty tuple.
    pub fn empty(dim: usize) -> Self {
        Self::new(dim, 0, move |_| Matrix::zeros(0, dim))
    }

    /// Constant coefficients.
    pub fn constant(rows: Matrix) -> Self {
        let (count, dim) = (rows.rows(), rows.cols());
        Self::new(dim, count, move |_| rows.clone())
    }

    /// Stack several tuples on top of each other.
    pub fn concat(dim: usize, parts: &[VectorFieldTuple]) -> Result<Self> {
        if parts.iter().any(|p| p.dim != dim) {
            return Err(Error::contract("concatenated tuples must share a dimension"));
        }
        let count = parts.iter().map(|p| p.count).sum();
        let parts: Vec<VectorFieldTuple> = parts.to_vec();
        Ok(Self::new(dim, count, move |x| {
            let mut data = Vec::with_capacity(count * dim);
            for p in &parts {
                data.extend_from_slice((p.eval)(x).as_slice());
            }
            Matrix::from_vec(count, dim, data).expect("tuple parts have consistent shapes")
        }))
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vectorfields.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Coefficients at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Matrix> {
        let m = (self.eval)(x);
        if m.rows() != self.count || m.cols() != self.dim {
            return Err(Error::contract(format!(
                "tuple declared {}x{} returned {}x{}",
                self.count,
                self.dim,
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::Data {
                what: "vectorfield coefficient".into(),
                location: x.to_vec(),
            });
        }
        Ok(m)
    }
}

/// Outcome of a subunit test for one vector at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubunitEntry {
    /// Whether `(v·ξ)² ≤ Q(x, ξ)` holds for all `ξ` within tolerance.
    pub is_subunit: bool,
    /// `sup_ξ (v·ξ)² / ξ'Qξ`; infinite when `v` leaves the range of `Q`.
    pub worst_ratio: f64,
}

/// Subunit verdicts for each row of a tuple over a set of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubunitCertificate {
    /// Verdict per row.
    pub is_subunit: Vec<bool>,
    /// Largest ratio seen over all rows and points.
    pub worst_ratio: f64,
    /// Tolerance used.
    pub tolerance: f64,
    /// Point where the worst ratio occurred.
    pub witness: Vec<f64>,
}

impl SubunitCertificate {
    /// True when every row passed.
    pub fn all_subunit(&self) -> bool {
        self.is_subunit.iter().all(|&b| b)
    }
}

/// `ξ'Q(x)ξ`, with round-off negatives in `[-τ, 0)` clamped to zero.
pub fn eval_quadratic_form(qf: &SymMatrixField, x: &[f64], xi: &[f64]) -> Result<f64> {
    if xi.len() != qf.dim() || x.len() != qf.dim() {
        return Err(Error::contract(format!(
            "form of dimension {} evaluated with point of length {} and direction of length {}",
            qf.dim(),
            x.len(),
            xi.len()
        )));
    }
    let q = qf.eval(x)?;
    let val = q.bilinear(xi, xi);
    let tau = FORM_TOL * (1.0 + q.norm_fro()) * dot(xi, xi);
    if val >= 0.0 {
        Ok(val)
    } else if val >= -tau {
        Ok(0.0)
    } else {
        Err(Error::hypothesis("quadratic form is negative", x))
    }
}

/// Pseudoinverse by eigen-decomposition with cutoff `tol · λ_max`.
pub fn pseudo_inverse(a: &Matrix, tol: f64) -> Matrix {
    let e = a.sym_eigen();
    let cutoff = tol * e.max().max(0.0);
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let lam = e.values[k];
        if lam > cutoff && lam > 0.0 {
            let v = e.vector(k);
            out = out.add_scaled(1.0 / lam, &Matrix::outer(&v));
        }
    }
    out
}

/// Subunit test of `v` against the matrix `q` (no field evaluation).
pub fn subunit_against(q: &Matrix, v: &[f64], tol: f64, x: &[f64]) -> Result<SubunitEntry> {
    if tol <= 0.0 {
        return Err(Error::contract("subunit tolerance must be positive"));
    }
    if v.len() != q.rows() {
        return Err(Error::contract("vector and form dimensions differ"));
    }
    let e = q.sym_eigen();
    let qnorm = e.values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if e.min() < -tol * (1.0 + qnorm) {
        return Err(Error::hypothesis(
            format!("form is not nonnegative definite (λ_min = {})", e.min()),
            x,
        ));
    }
    let slack = tol * (1.0 + qnorm);
    let excess = Matrix::outer(v).add_scaled(-1.0, q).sym_eigen().max();

    let cutoff = tol * e.max().max(0.0);
    let mut range_ratio = 0.0;
    let mut kernel_energy = 0.0;
    for k in 0..q.rows() {
        let c = dot(&e.vector(k), v);
        let lam = e.values[k];
        if lam > cutoff && lam > 0.0 {
            range_ratio += c * c / lam;
        } else {
            kernel_energy += c * c;
        }
    }
    let worst_ratio = if kernel_energy > slack {
        f64::INFINITY
    } else {
        range_ratio
    };
    Ok(SubunitEntry {
        is_subunit: excess <= slack && worst_ratio <= 1.0 + tol,
        worst_ratio,
    })
}

/// Is `v` subunit with respect to `Q(x)`?
///
/// Primary criterion: `λ_max(vv' − Q(x)) ≤ tol·(1 + ‖Q(x)‖)`. The reported
/// ratio is `v'Q(x)†v` on the range (infinite if `v` has a kernel component),
/// and a positive verdict also requires it to stay within `1 + tol`.
pub fn is_subunit(qf: &SymMatrixField, v: &[f64], x: &[f64], tol: f64) -> Result<SubunitEntry> {
    let q = qf.eval(x)?;
    subunit_against(&q, v, tol, x)
}

/// Check every row of `tuple` at every point.
pub fn certify_tuple(
    qf: &SymMatrixField,
    tuple: &VectorFieldTuple,
    points: impl IntoIterator<Item = Vec<f64>>,
    tol: f64,
) -> Result<SubunitCertificate> {
    let mut cert = SubunitCertificate {
        is_subunit: alloc::vec![true; tuple.count()],
        worst_ratio: 0.0,
        tolerance: tol,
        witness: Vec::new(),
    };
    if tuple.count() == 0 {
        return Ok(cert);
    }
    for x in points {
        let q = qf.eval(&x)?;
        let rows = tuple.eval(&x)?;
        for i in 0..tuple.count() {
            let entry = subunit_against(&q, rows.row(i), tol, &x)?;
            cert.is_subunit[i] &= entry.is_subunit;
            if entry.worst_ratio > cert.worst_ratio || cert.witness.is_empty() {
                cert.worst_ratio = cert.worst_ratio.max(entry.worst_ratio);
                cert.witness = x.clone();
            }
        }
    }
    Ok(cert)
}

/// Symmetric nonnegative square root `U diag(√max(λ,0)) U'`.
pub fn sqrt_psd(a: &Matrix, tol: f64) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::contract("square root of a non-square matrix"));
    }
    let norm = a.norm_fro();
    if !a.is_symmetric(tol) {
        return Err(Error::hypothesis("matrix is not symmetric", &[]));
    }
    let e = a.sym_eigen();
    if e.min() < -tol * norm.max(f64::MIN_POSITIVE) && e.min() < 0.0 {
        return Err(Error::hypothesis(
            format!("matrix has negative eigenvalue {}", e.min()),
            &[],
        ));
    }
    let n = a.rows();
    let mut s = Matrix::zeros(n, n);
    for k in 0..n {
        let lam = e.values[k].max(0.0);
        if lam > 0.0 {
            s = s.add_scaled(libm::sqrt(lam), &Matrix::outer(&e.vector(k)));
        }
    }
    Ok(s.sym_part())
}

/// Comparability constants `c1 Q ≤ P ≤ C1 Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparability {
    /// Lower constant `c1`.
    pub lower: f64,
    /// Upper constant `C1`.
    pub upper: f64,
}

impl Comparability {
    /// `α` times both constants.
    pub fn scaled(self, alpha: f64) -> Self {
        Comparability {
            lower: alpha * self.lower,
            upper: alpha * self.upper,
        }
    }
}

/// Generalized spectrum of `p` against `q` on `range(q)`, after checking `ker q ⊆ ker p`.
///
/// Returns `None` for the degenerate case `q = 0, p = 0` (no constraint at this point).
pub fn comparability_at(p: &Matrix, q: &Matrix, tol: f64, x: &[f64]) -> Result<Option<(f64, f64)>> {
    if p.rows() != q.rows() || p.cols() != q.cols() {
        return Err(Error::contract("P and Q dimensions differ"));
    }
    let e = q.sym_eigen();
    let cutoff = tol * e.max().max(0.0);
    let pnorm = p.norm_fro();
    let mut range = Vec::new();
    for k in 0..q.rows() {
        let v = e.vector(k);
        let lam = e.values[k];
        if lam > cutoff && lam > 0.0 {
            range.push((v, lam));
        } else if p.bilinear(&v, &v) > tol * (1.0 + pnorm) {
            return Err(Error::NotComparable {
                reason: "kernel of Q is not contained in kernel of P".into(),
                point: x.to_vec(),
            });
        }
    }
    if range.is_empty() {
        return Ok(None);
    }
    let r = range.len();
    let mut w = Matrix::zeros(r, r);
    for a in 0..r {
        let pa = p.matvec(&range[a].0);
        for b in 0..r {
            w[(a, b)] = dot(&range[b].0, &pa) / libm::sqrt(range[a].1 * range[b].1);
        }
    }
    let ew = w.sym_eigen();
    Ok(Some((ew.min(), ew.max())))
}

/// `(c1, C1)` over the sample points.
pub fn comparability_constants(
    pf: &SymMatrixField,
    qf: &SymMatrixField,
    sample_points: impl IntoIterator<Item = Vec<f64>>,
    tol: f64,
) -> Result<Comparability> {
    if pf.dim() != qf.dim() {
        return Err(Error::contract("P and Q fields have different dimensions"));
    }
    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    let mut lower_at = Vec::new();
    let mut any = false;
    for x in sample_points {
        any = true;
        let p = pf.eval(&x)?;
        let q = qf.eval(&x)?;
        if let Some((lo, hi)) = comparability_at(&p, &q, tol, &x)? {
            if lo < lower {
                lower = lo;
                lower_at = x.clone();
            }
            upper = upper.max(hi);
        }
    }
    if !any {
        return Err(Error::contract("comparability needs at least one sample point"));
    }
    if !lower.is_finite() {
        // Q vanished at every sample: nothing constrains the constants.
        return Ok(Comparability { lower: 1.0, upper: 1.0 });
    }
    if lower <= tol {
        return Err(Error::NotComparable {
            reason: format!("lower constant c1 = {lower} is not positive"),
            point: lower_at,
        });
    }
    Ok(Comparability { lower, upper })
}

/// Rows of `√P(x) / √C1`; each is subunit against `Q(x)` whenever `P ≤ C1 Q`.
pub fn subunit_rows_of_sqrt_p(pf: &SymMatrixField, c1_upper: f64, x: &[f64]) -> Result<Matrix> {
    if c1_upper <= 0.0 {
        return Err(Error::contract("C1 must be positive"));
    }
    let p = pf.eval(x)?;
    Ok(sqrt_psd(&p, FORM_TOL)?.scaled(1.0 / libm::sqrt(c1_upper)))
}
