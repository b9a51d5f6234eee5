//! Assembly of the bilinear form
//!
//! ```text
//! Λ(u, v) = ∫ (∇v)'P∇u − ∫ v H·Ru − ∫ u G·Sv − ∫ F u v
//! ```
//!
//! over interior hat functions, its shift `Λ_p = Λ + p (·,·)_{L²}`, the load
//! functional `−∫ f v − ∫ g·Tv`, and the discrete degenerate Sobolev norms.
//!
//! Matrix convention: `A[j, i] = Λ(φ_i, φ_j)`, so row `j` is the test function
//! and `A u = b` is the discrete weak equation.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{dot, Matrix};
use crate::krylov::lanczos_extremes;
use crate::mesh::{DiscreteField, DiscreteSpace, QuadPoint};
use crate::problem::{ProblemSpec, ScalarField, VectorData};
use crate::qform::{SymMatrixField, VectorFieldTuple};
use crate::sparse::{BandedCholesky, CsrMatrix};
use crate::{Error, Result};

/// Which trial functions the columns range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    /// Interior hats only (homogeneous Dirichlet).
    Interior,
    /// Every node (used for lifted boundary data).
    AllNodes,
}

/// The assembled discrete operator.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// `∫ (∇φ_j)'P∇φ_i`.
    pub principal: CsrMatrix,
    /// `∫ φ_j H·Rφ_i`.
    pub drift: CsrMatrix,
    /// `∫ φ_i G·Sφ_j`.
    pub adjoint_drift: CsrMatrix,
    /// `∫ F φ_i φ_j`.
    pub zeroth: CsrMatrix,
    /// `A = principal − drift − adjoint_drift − zeroth`.
    pub a: CsrMatrix,
    /// Mass matrix.
    pub mass: CsrMatrix,
    /// `∫ (∇φ_j)'Q∇φ_i`, the gradient part of the discrete QH¹ inner product.
    pub q_stiffness: CsrMatrix,
    /// Load vector `b` (zero until [`assemble_load`] is applied).
    pub load: Vec<f64>,
    /// Shift `p`.
    pub shift: f64,
    /// `A + p·M`.
    pub shifted: CsrMatrix,
}

impl AssembledSystem {
    /// Dimension (number of interior dofs).
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Discrete QH¹ Gram matrix `M + K_Q`.
    pub fn qh1_gram(&self) -> CsrMatrix {
        self.mass.add_scaled(1.0, &self.q_stiffness)
    }

    /// `A_p = A + p M`, keeping `A`.
    pub fn with_shift(&self, p: f64) -> AssembledSystem {
        apply_shift(self, p)
    }
}

struct Terms {
    principal: Vec<(usize, usize, f64)>,
    drift: Vec<(usize, usize, f64)>,
    adjoint: Vec<(usize, usize, f64)>,
    zeroth: Vec<(usize, usize, f64)>,
    mass: Vec<(usize, usize, f64)>,
    q_stiff: Vec<(usize, usize, f64)>,
}

struct PointCoefficients {
    p: Matrix,
    q: Matrix,
    h: Vec<f64>,
    r: Matrix,
    g: Vec<f64>,
    s: Matrix,
    f: f64,
}

fn coefficients_at(spec: &ProblemSpec, x: &[f64]) -> Result<PointCoefficients> {
    Ok(PointCoefficients {
        p: spec.p.eval(x)?,
        q: spec.q.eval(x)?,
        h: spec.h.eval(x, "H")?,
        r: spec.r.eval(x)?,
        g: spec.g_coef.eval(x, "G")?,
        s: spec.s.eval(x)?,
        f: spec.f_coef.eval(x, "F")?,
    })
}

/// `Σ_k c_k (row_k · grad)`.
fn tuple_action(coef: &[f64], rows: &Matrix, grad: &[f64]) -> f64 {
    coef.iter().enumerate().map(|(k, c)| c * dot(rows.row(k), grad)).sum()
}

fn assemble_terms(spec: &ProblemSpec, space: &DiscreteSpace, columns: Columns) -> Result<(Terms, usize)> {
    spec.validate()?;
    if spec.dim() != space.dim() {
        return Err(Error::contract("problem and space dimensions differ"));
    }
    let dim = space.dim();
    let ncols = match columns {
        Columns::Interior => space.n_interior(),
        Columns::AllNodes => space.n_nodes(),
    };
    let col_of = |node: usize| match columns {
        Columns::Interior => space.dof_of(node),
        Columns::AllNodes => Some(node),
    };
    let mut terms = Terms {
        principal: Vec::new(),
        drift: Vec::new(),
        adjoint: Vec::new(),
        zeroth: Vec::new(),
        mass: Vec::new(),
        q_stiff: Vec::new(),
    };
    let nb = if dim == 1 { 2 } else { 4 };
    for cell in 0..space.n_cells() {
        let mut el = [[[0.0; 4]; 4]; 6];
        let mut nodes = Vec::new();
        for qp in space.cell_quad(cell) {
            let x = &qp.x[..dim];
            let c = coefficients_at(spec, x)?;
            let basis = space.local_basis(&qp);
            nodes = basis.nodes;
            let w = qp.weight;
            // Per-trial-function drift actions H·R∇φ_i and G·S∇φ_i.
            let mut hr = [0.0; 4];
            let mut gs = [0.0; 4];
            for a in 0..nb {
                let g = &basis.grads[a][..dim];
                hr[a] = tuple_action(&c.h, &c.r, g);
                gs[a] = tuple_action(&c.g, &c.s, g);
            }
            for j in 0..nb {
                let gj = &basis.grads[j][..dim];
                let pj = c.p.matvec(gj);
                let qj = c.q.matvec(gj);
                let vj = basis.values[j];
                for i in 0..nb {
                    let gi = &basis.grads[i][..dim];
                    let vi = basis.values[i];
                    el[0][j][i] += w * dot(&pj, gi);
                    el[1][j][i] += w * vj * hr[i];
                    el[2][j][i] += w * vi * gs[j];
                    el[3][j][i] += w * c.f * vi * vj;
                    el[4][j][i] += w * vi * vj;
                    el[5][j][i] += w * dot(&qj, gi);
                }
            }
        }
        for (j, &nj) in nodes.iter().enumerate() {
            let Some(row) = space.dof_of(nj) else { continue };
            for (i, &ni) in nodes.iter().enumerate() {
                let Some(col) = col_of(ni) else { continue };
                terms.principal.push((row, col, el[0][j][i]));
                terms.drift.push((row, col, el[1][j][i]));
                terms.adjoint.push((row, col, el[2][j][i]));
                terms.zeroth.push((row, col, el[3][j][i]));
                terms.mass.push((row, col, el[4][j][i]));
                terms.q_stiff.push((row, col, el[5][j][i]));
            }
        }
    }
    Ok((terms, ncols))
}

fn build_system(terms: Terms, nrows: usize, ncols: usize) -> AssembledSystem {
    let mk = |t: Vec<(usize, usize, f64)>| CsrMatrix::from_triplets(nrows, ncols, t);
    let principal = mk(terms.principal);
    let drift = mk(terms.drift);
    let adjoint_drift = mk(terms.adjoint);
    let zeroth = mk(terms.zeroth);
    let a = principal
        .add_scaled(-1.0, &drift)
        .add_scaled(-1.0, &adjoint_drift)
        .add_scaled(-1.0, &zeroth);
    AssembledSystem {
        shifted: a.clone(),
        principal,
        drift,
        adjoint_drift,
        zeroth,
        a,
        mass: mk(terms.mass),
        q_stiffness: mk(terms.q_stiff),
        load: vec![0.0; nrows],
        shift: 0.0,
    }
}

/// Assemble `Λ` over interior hats, with each of its four terms retained.
pub fn assemble_bilinear(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<AssembledSystem> {
    let (terms, ncols) = assemble_terms(spec, space, Columns::Interior)?;
    Ok(build_system(terms, space.n_interior(), ncols))
}

/// Assemble with interior rows and the chosen column set.
pub fn assemble_bilinear_columns(
    spec: &ProblemSpec,
    space: &DiscreteSpace,
    columns: Columns,
) -> Result<AssembledSystem> {
    let (terms, ncols) = assemble_terms(spec, space, columns)?;
    Ok(build_system(terms, space.n_interior(), ncols))
}

/// `b_j = −∫ f φ_j − Σ_k ∫ g_k (T_k φ_j)`, with `T_k φ_j = row_k(T)·∇φ_j`.
pub fn assemble_load(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<Vec<f64>> {
    spec.validate()?;
    let dim = space.dim();
    let mut b = vec![0.0; space.n_interior()];
    for qp in space.quad_points() {
        let x = &qp.x[..dim];
        let f = spec.f.eval(x, "f")?;
        let g = spec.g.eval(x, "g")?;
        let t = spec.t.eval(x)?;
        let basis = space.local_basis(&qp);
        for (a, &node) in basis.nodes.iter().enumerate() {
            if let Some(j) = space.dof_of(node) {
                let tg = tuple_action(&g, &t, &basis.grads[a][..dim]);
                b[j] -= qp.weight * (f * basis.values[a] + tg);
            }
        }
    }
    Ok(b)
}

/// Bilinear form and load together.
pub fn assemble(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<AssembledSystem> {
    let mut sys = assemble_bilinear(spec, space)?;
    sys.load = assemble_load(spec, space)?;
    Ok(sys)
}

/// `A_p = A + p·M`; the unshifted `A` is kept.
pub fn apply_shift(sys: &AssembledSystem, p: f64) -> AssembledSystem {
    assert!(p >= 0.0, "shift must be nonnegative");
    let mut out = sys.clone();
    out.shift = p;
    out.shifted = if p == 0.0 { sys.a.clone() } else { sys.a.add_scaled(p, &sys.mass) };
    out
}

/// `‖u‖_{L²} + (∫ Q(x, ∇u))^{1/2}` by quadrature (a sum of the two norms).
pub fn qh1_norm(space: &DiscreteSpace, u: &DiscreteField, qf: &SymMatrixField) -> Result<f64> {
    let (l2sq, semi) = qh1_parts(space, u, qf)?;
    Ok(libm::sqrt(l2sq) + libm::sqrt(semi))
}

/// `(∫ u², ∫ Q(x, ∇u))`.
pub fn qh1_parts(space: &DiscreteSpace, u: &DiscreteField, qf: &SymMatrixField) -> Result<(f64, f64)> {
    let dim = space.dim();
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for qp in space.quad_points() {
        let (v, g) = u.at_quad(&qp);
        let q = qf.eval(&qp.x[..dim])?;
        l2 += qp.weight * v * v;
        semi += qp.weight * q.bilinear(&g[..dim], &g[..dim]).max(0.0);
    }
    Ok((l2, semi))
}

/// `‖v‖_{L^q}` of a scalar field by quadrature of `|v|^q`.
pub fn lq_norm_scalar(space: &DiscreteSpace, f: &ScalarField, q: f64) -> Result<f64> {
    let dim = space.dim();
    let mut err = None;
    let s = space.integrate(|qp: &QuadPoint| match f.eval(&qp.x[..dim], "coefficient") {
        Ok(v) => libm::pow(v.abs(), q),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(libm::pow(s, 1.0 / q))
}

/// `‖ |v| ‖_{L^q}` of a vector field (Euclidean norm pointwise).
pub fn lq_norm_vector(space: &DiscreteSpace, v: &VectorData, q: f64) -> Result<f64> {
    if v.is_empty() {
        return Ok(0.0);
    }
    let dim = space.dim();
    let mut err = None;
    let s = space.integrate(|qp: &QuadPoint| match v.eval(&qp.x[..dim], "coefficient") {
        Ok(x) => libm::pow(crate::dense::norm2(&x), q),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(libm::pow(s, 1.0 / q))
}

/// Operator norm of `A` in the discrete QH¹ metric,
/// `sup |v'Au| / (‖u‖_G ‖v‖_G)` with `G = M + K_Q`.
///
/// Since `‖u‖_G ≤ qh1_norm(u)`, the returned constant also bounds
/// `|v'Au| / (qh1(u) qh1(v))`. Computed as the square root of the largest
/// eigenvalue of `G⁻¹A'G⁻¹A` by Lanczos.
pub fn discrete_bound_constant(sys: &AssembledSystem) -> Result<f64> {
    let n = sys.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let gram = sys.qh1_gram();
    let chol = BandedCholesky::factor(&gram)?;
    let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * libm::sin(i as f64 + 0.5)).collect();
    let r = lanczos_extremes(
        |x| {
            let ax = sys.a.matvec(x);
            let z = chol.solve(&ax);
            chol.solve(&sys.a.matvec_t(&z))
        },
        |x| gram.matvec(x),
        &start,
        200,
    );
    Ok(libm::sqrt(r.max.max(0.0)))
}

/// Helper for tests and diagnostics: `T(uv)` vs `u Tv + v Tu` for analytic data.
pub fn product_rule_defect(
    tuple: &VectorFieldTuple,
    x: &[f64],
    u: f64,
    grad_u: &[f64],
    v: f64,
    grad_v: &[f64],
    grad_uv: &[f64],
) -> Result<f64> {
    let rows = tuple.eval(x)?;
    let mut worst: f64 = 0.0;
    for k in 0..tuple.count() {
        let t = rows.row(k);
        let lhs = dot(t, grad_uv);
        let rhs = u * dot(t, grad_v) + v * dot(t, grad_u);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Matrix;
    use crate::mesh::{build_space, BoxDomain};
    use approx::assert_relative_eq;

    fn laplace_1d() -> ProblemSpec {
        let q = SymMatrixField::constant(Matrix::identity(1));
        ProblemSpec::principal(BoxDomain::unit(1), q, 2.0, 6.0)
    }

    #[test]
    fn single_hat_stiffness_is_four() {
        let space = build_space(&BoxDomain::unit(1), &[2], 3).unwrap();
        let sys = assemble_bilinear(&laplace_1d(), &space).unwrap();
        assert_eq!(sys.dim(), 1);
        assert_relative_eq!(sys.a.get(0, 0), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn load_examples() {
        let space = build_space(&BoxDomain::unit(1), &[2], 3).unwrap();
        let mut spec = laplace_1d();
        assert_eq!(assemble_load(&spec, &space).unwrap(), vec![0.0]);
        spec.f = ScalarField::constant(1.0);
        assert_relative_eq!(assemble_load(&spec, &space).unwrap()[0], -0.5, epsilon = 1e-15);
        spec.f = ScalarField::constant(0.0);
        spec.t = VectorFieldTuple::constant(Matrix::identity(1));
        spec.g = VectorData::constant(vec![1.0]);
        assert!(assemble_load(&spec, &space).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn shift_examples() {
        let space = build_space(&BoxDomain::unit(2), &[4, 4], 3).unwrap();
        let q = SymMatrixField::constant(Matrix::identity(2));
        let spec = ProblemSpec::principal(BoxDomain::unit(2), q, 2.0, 6.0);
        let sys = assemble_bilinear(&spec, &space).unwrap();
        assert_eq!(apply_shift(&sys, 0.0).shifted, sys.a);
        let two = apply_shift(&sys, 2.0);
        let diff = two.shifted.add_scaled(-1.0, &sys.a).add_scaled(-2.0, &sys.mass);
        assert!(diff.max_abs() < 1e-14);
        assert_eq!(two.a, sys.a);
    }

    #[test]
    fn symmetric_without_lower_order_terms() {
        let space = build_space(&BoxDomain::unit(2), &[5, 4], 3).unwrap();
        let q = SymMatrixField::new(2, 1.0, |x| Matrix::from_diag(&[1.0, x[0] * x[0]]));
        let spec = ProblemSpec::principal(BoxDomain::unit(2), q, 2.0, 6.0);
        let sys = assemble_bilinear(&spec, &space).unwrap();
        assert!(sys.a.add_scaled(-1.0, &sys.a.transpose()).max_abs() < 1e-15);
        assert_eq!(sys.a, sys.principal);
    }

    #[test]
    fn qh1_norm_examples() {
        let space = build_space(&BoxDomain::unit(2), &[8, 8], 3).unwrap();
        let id = SymMatrixField::constant(Matrix::identity(2));
        let c = space.interpolate(|_| -2.5).unwrap();
        assert_relative_eq!(qh1_norm(&space, &c, &id).unwrap(), 2.5, epsilon = 1e-13);
        let x1 = space.interpolate(|x| x[0]).unwrap();
        assert_relative_eq!(
            qh1_norm(&space, &x1, &id).unwrap(),
            libm::sqrt(1.0 / 3.0) + 1.0,
            epsilon = 1e-12
        );
        let zero = SymMatrixField::constant(Matrix::zeros(2, 2));
        let (l2, _) = qh1_parts(&space, &x1, &id).unwrap();
        assert_relative_eq!(qh1_norm(&space, &x1, &zero).unwrap(), libm::sqrt(l2), epsilon = 1e-15);
    }

    #[test]
    fn nonfinite_coefficient_is_reported_with_location() {
        let space = build_space(&BoxDomain::unit(1), &[4], 3).unwrap();
        let mut spec = laplace_1d();
        spec.f_coef = ScalarField::new(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 });
        match assemble_bilinear(&spec, &space) {
            Err(Error::Data { location, .. }) => assert!(location[0] > 0.5),
            other => panic!("expected data error, got {other:?}"),
        }
    }
}
