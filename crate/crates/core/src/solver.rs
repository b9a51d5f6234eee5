//! Direct and shifted-Fredholm solves of the homogeneous problem, reduction
//! of boundary data to the homogeneous case, and the zero-data uniqueness harness.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Serialize, Serializer};

use crate::analysis::{certify_shift, compute_constants, ConstantOptions, ConstantsReport};
use crate::assembly::{assemble, assemble_bilinear, assemble_bilinear_columns, assemble_load, qh1_norm, AssembledSystem, Columns};
use crate::dense::{dot, norm2, Matrix};
use crate::krylov::gmres;
use crate::mesh::{DiscreteField, DiscreteSpace};
use crate::problem::{ExactSolution, ProblemSpec, ScalarField, VectorData};
use crate::qform::{certify_tuple, comparability_constants, sqrt_psd, VectorFieldTuple};
use crate::sparse::BandedLu;
use crate::{Error, Result, FORM_TOL};

/// Largest system solved by banded factorization; beyond it the direct route uses GMRES.
pub const DIRECT_FACTOR_LIMIT: usize = 200_000;
/// Relative tolerance of iterative solves.
pub const LINEAR_TOL: f64 = 1e-10;
/// Target relative residual `‖b − A u‖/‖b‖` of the Fredholm route.
pub const FREDHOLM_TOL: f64 = 1e-13;
/// Defect-correction passes of the Fredholm route.
pub const FREDHOLM_PASSES: usize = 6;

/// Which solution route(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// `A u = b`.
    Direct,
    /// `(I − p A_p⁻¹ M) u = A_p⁻¹ b`.
    Fredholm,
    /// Both, with the discrepancy reported.
    Both,
}

impl core::str::FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Route::Direct),
            "fredholm" => Ok(Route::Fredholm),
            "both" => Ok(Route::Both),
            other => Err(Error::Configuration(format!("unknown route {other:?}"))),
        }
    }
}

/// Solver options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Route.
    pub route: Route,
    /// How to derive the shift.
    pub constants: ConstantOptions,
    /// Use this initial shift instead of the constant chain.
    pub shift_override: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            route: Route::Both,
            constants: ConstantOptions::default(),
            shift_override: None,
        }
    }
}

impl SolveOptions {
    /// Default options with the given route.
    pub fn with_route(route: Route) -> Self {
        SolveOptions {
            route,
            ..Self::default()
        }
    }
}

fn serialize_field<S: Serializer>(field: &DiscreteField, s: S) -> core::result::Result<S::Ok, S::Error> {
    s.collect_seq(field.nodal_values().iter())
}

/// Result of a solve.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Route requested.
    pub route: Route,
    /// Shift used by the Fredholm route (0 for the direct route).
    pub shift_used: f64,
    /// `‖A u − b‖ / ‖b‖` (absolute when `b = 0`).
    pub linear_residual: f64,
    /// GMRES iterations spent on the Fredholm system.
    pub fredholm_iterations: usize,
    /// Relative QH¹ distance between the two routes' solutions.
    pub route_discrepancy: Option<f64>,
    /// `‖u_h − u‖_{L²}` against the exact solution.
    pub error_L2: Option<f64>,
    /// `‖u_h − u‖_{L²} + (∫Q(∇(u_h − u)))^{1/2}`.
    pub error_QH1: Option<f64>,
    /// `(∫Q(∇(u_h − u)))^{1/2}`.
    pub error_qh1_seminorm: Option<f64>,
    /// The direct route hit a singular matrix and fell back to Fredholm.
    pub direct_fallback: bool,
    /// Number of interior unknowns.
    pub dofs: usize,
    /// Constant chain, when the Fredholm route ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsReport>,
    /// Nodal values of the solution (boundary data included).
    #[serde(serialize_with = "serialize_field")]
    pub solution: DiscreteField,
}

struct RouteOutcome {
    u: Vec<f64>,
    iterations: usize,
    shift: f64,
    constants: Option<ConstantsReport>,
}

fn direct_solve(sys: &AssembledSystem) -> Result<Vec<f64>> {
    let n = sys.dim();
    if n <= DIRECT_FACTOR_LIMIT {
        let lu = BandedLu::factor(&sys.a)?;
        Ok(lu.solve(&sys.load))
    } else {
        let out = gmres(|x| sys.a.matvec(x), &sys.load, None, LINEAR_TOL, 200, 10 * n)?;
        Ok(out.x)
    }
}

fn fredholm_solve(
    spec: &ProblemSpec,
    space: &DiscreteSpace,
    sys: &AssembledSystem,
    opts: &SolveOptions,
) -> Result<RouteOutcome> {
    let n = sys.dim();
    let mut constants = None;
    let p0 = match opts.shift_override {
        Some(p) => p,
        None => {
            let c = compute_constants(spec, space, opts.constants)?;
            let p = c.p;
            constants = Some(c);
            p
        }
    };
    let (shifted, cert, doublings) = certify_shift(sys, p0)?;
    if let Some(c) = constants.as_mut() {
        c.p = shifted.shift;
        c.shift_doublings = doublings;
        c.lambda_min = Some(cert.lambda_min);
    }
    let p = shifted.shift;
    let lu = BandedLu::factor(&shifted.shifted)?;
    let cap = 10 * n.max(1);
    let bnorm = norm2(&sys.load);
    let mut u = vec![0.0; n];
    let mut iterations = 0;
    // Each pass solves the Fredholm system for the current defect, so
    // rounding in the inner solve is corrected by the outer one.
    for _ in 0..FREDHOLM_PASSES {
        let au = sys.a.matvec(&u);
        let r: Vec<f64> = sys.load.iter().zip(&au).map(|(b, a)| b - a).collect();
        if norm2(&r) <= FREDHOLM_TOL * bnorm || bnorm == 0.0 {
            break;
        }
        let rhs = lu.solve(&r);
        let out = gmres(
            |x| {
                let mx = lu.solve(&sys.mass.matvec(x));
                x.iter().zip(&mx).map(|(a, b)| a - p * b).collect()
            },
            &rhs,
            None,
            LINEAR_TOL,
            n.min(300),
            cap.saturating_sub(iterations),
        )?;
        iterations += out.iterations;
        u.iter_mut().zip(&out.x).for_each(|(a, c)| *a += c);
    }
    let res = linear_residual(sys, &u);
    if res > LINEAR_TOL {
        return Err(Error::SolverFailure(format!(
            "Fredholm route stalled at relative residual {res:e}"
        )));
    }
    Ok(RouteOutcome {
        u,
        iterations,
        shift: p,
        constants,
    })
}

/// `‖A u − b‖ / ‖b‖`, absolute when `b = 0`.
pub fn linear_residual(sys: &AssembledSystem, u: &[f64]) -> f64 {
    let au = sys.a.matvec(u);
    let r: Vec<f64> = au.iter().zip(&sys.load).map(|(a, b)| a - b).collect();
    let bn = norm2(&sys.load);
    if bn > 0.0 {
        norm2(&r) / bn
    } else {
        norm2(&r)
    }
}

/// Error norms `(L², QH¹ seminorm)` of `u_h` against an exact solution.
pub fn error_norms(space: &DiscreteSpace, spec: &ProblemSpec, uh: &DiscreteField, exact: &ExactSolution) -> Result<(f64, f64)> {
    let dim = space.dim();
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for qp in space.quad_points() {
        let x = &qp.x[..dim];
        let (v, g) = uh.at_quad(&qp);
        let e = v - exact.value.eval(x, "exact solution")?;
        let ge = exact.gradient.eval(x, "exact gradient")?;
        let d: Vec<f64> = (0..dim).map(|k| g[k] - ge[k]).collect();
        let q = spec.q.eval(x)?;
        l2 += qp.weight * e * e;
        semi += qp.weight * q.bilinear(&d, &d).max(0.0);
    }
    Ok((libm::sqrt(l2), libm::sqrt(semi)))
}

fn relative_distance(space: &DiscreteSpace, spec: &ProblemSpec, a: &DiscreteField, b: &DiscreteField) -> Result<f64> {
    let diff: Vec<f64> = a.nodal_values().iter().zip(b.nodal_values()).map(|(x, y)| x - y).collect();
    let d = qh1_norm(space, &DiscreteField::new(space, diff)?, &spec.q)?;
    let scale = qh1_norm(space, a, &spec.q)?;
    Ok(if scale > 0.0 { d / scale } else { d })
}

/// Solve an assembled homogeneous system by the requested route(s).
fn solve_assembled(
    spec: &ProblemSpec,
    space: &DiscreteSpace,
    sys: &AssembledSystem,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let mut report = SolveReport {
        solution: space.field_from_interior(&vec![0.0; sys.dim()]),
        route: opts.route,
        shift_used: 0.0,
        linear_residual: 0.0,
        fredholm_iterations: 0,
        route_discrepancy: None,
        error_L2: None,
        error_QH1: None,
        error_qh1_seminorm: None,
        direct_fallback: false,
        dofs: sys.dim(),
        constants: None,
    };
    let mut direct = None;
    if matches!(opts.route, Route::Direct | Route::Both) {
        match direct_solve(sys) {
            Ok(u) => direct = Some(u),
            Err(Error::Singular { .. }) => report.direct_fallback = true,
            Err(e) => return Err(e),
        }
    }
    let mut fredholm = None;
    if opts.route != Route::Direct || direct.is_none() {
        let out = fredholm_solve(spec, space, sys, opts)?;
        report.shift_used = out.shift;
        report.fredholm_iterations = out.iterations;
        report.constants = out.constants;
        fredholm = Some(out.u);
    }
    let primary = match (&direct, &fredholm) {
        (Some(d), _) => d.clone(),
        (None, Some(f)) => f.clone(),
        (None, None) => return Err(Error::Internal("no route produced a solution".into())),
    };
    if opts.route == Route::Both {
        if let (Some(d), Some(f)) = (&direct, &fredholm) {
            let fd = space.field_from_interior(d);
            let ff = space.field_from_interior(f);
            report.route_discrepancy = Some(relative_distance(space, spec, &fd, &ff)?);
        }
    }
    report.linear_residual = linear_residual(sys, &primary);
    report.solution = space.field_from_interior(&primary);
    Ok(report)
}

fn fill_errors(report: &mut SolveReport, spec: &ProblemSpec, space: &DiscreteSpace) -> Result<()> {
    if let Some(exact) = &spec.exact {
        let (l2, semi) = error_norms(space, spec, &report.solution, exact)?;
        report.error_L2 = Some(l2);
        report.error_qh1_seminorm = Some(semi);
        report.error_QH1 = Some(l2 + semi);
    }
    Ok(())
}

/// Solve the homogeneous Dirichlet problem (`φ` must be absent).
pub fn solve_homogeneous(spec: &ProblemSpec, space: &DiscreteSpace, opts: &SolveOptions) -> Result<SolveReport> {
    if spec.phi.is_some() {
        return Err(Error::contract("boundary data present: use solve_dirichlet"));
    }
    let sys = assemble(spec, space)?;
    let mut report = solve_assembled(spec, space, &sys, opts)?;
    fill_errors(&mut report, spec, space)?;
    Ok(report)
}

/// The homogeneous problem for `u = w − φ_h`, with `φ_h` the Q1 interpolant of `φ`.
///
/// Returns the reduced spec together with `φ_h`. With `f₁ = H·R∇φ_h`,
/// `f₂ = Gφ_h`, `f₃ = Fφ_h`, `f₄ = √C1 √P∇φ_h` and `V = √P/√C1`, the data
/// become `f̄ = f − f₁ − f₃`, `ḡ = (g, −f₂, f₄)`, `T̄ = (T, S, V)`.
pub fn reduce_to_homogeneous(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<(ProblemSpec, DiscreteField)> {
    spec.validate()?;
    let dim = spec.dim();
    let phi = spec
        .phi
        .as_ref()
        .ok_or_else(|| Error::contract("reduction needs boundary data"))?;
    let phi_h = space.interpolate(|x| phi.value.call(x))?;
    let pts = space.quad_coords();
    let c1_upper = comparability_constants(&spec.p, &spec.q, pts.iter().cloned(), FORM_TOL)?.upper;
    let sqrt_c1 = libm::sqrt(c1_upper);

    let field = Arc::new(phi_h.clone());
    let grad_at = {
        let field = field.clone();
        move |x: &[f64]| field.eval(x).unwrap_or((f64::NAN, [f64::NAN; 2]))
    };
    let grad_at = Arc::new(grad_at);

    let sqrt_p = {
        let p = spec.p.clone();
        move |x: &[f64]| -> Matrix {
            p.eval(x)
                .and_then(|m| sqrt_psd(&m, FORM_TOL))
                .unwrap_or_else(|_| Matrix::from_diag(&vec![f64::NAN; dim]))
        }
    };
    let sqrt_p = Arc::new(sqrt_p);

    let v_tuple = {
        let sqrt_p = sqrt_p.clone();
        VectorFieldTuple::new(dim, dim, move |x| {
            if sqrt_c1 > 0.0 {
                sqrt_p(x).scaled(1.0 / sqrt_c1)
            } else {
                Matrix::zeros(dim, dim)
            }
        })
    };
    let cert = certify_tuple(&spec.q, &v_tuple, pts.iter().cloned(), FORM_TOL)?;
    if !cert.all_subunit() {
        return Err(Error::Internal(format!(
            "rows of sqrt(P)/sqrt(C1) are not subunit (ratio {:e} at {:?})",
            cert.worst_ratio, cert.witness
        )));
    }

    let f_bar = {
        let (f, h, r, fc, g) = (spec.f.clone(), spec.h.clone(), spec.r.clone(), spec.f_coef.clone(), grad_at.clone());
        ScalarField::new(move |x| {
            let (v, grad) = g(x);
            let hv = h.call(x);
            let rows = match r.eval(x) {
                Ok(m) => m,
                Err(_) => return f64::NAN,
            };
            let f1: f64 = hv.iter().enumerate().map(|(k, hk)| hk * dot(rows.row(k), &grad[..x.len()])).sum();
            let f3 = fc.call(x) * v;
            f.call(x) - f1 - f3
        })
    };
    let minus_f2 = {
        let (gc, g) = (spec.g_coef.clone(), grad_at.clone());
        VectorData::new(spec.n_drift(), move |x| {
            let v = g(x).0;
            gc.call(x).iter().map(|gk| -gk * v).collect()
        })
    };
    let f4 = {
        let (sp, g) = (sqrt_p.clone(), grad_at.clone());
        VectorData::new(dim, move |x| {
            let grad = g(x).1;
            sp(x).matvec(&grad[..x.len()]).iter().map(|v| sqrt_c1 * v).collect()
        })
    };

    let mut out = spec.clone();
    out.t = VectorFieldTuple::concat(dim, &[spec.t.clone(), spec.s.clone(), v_tuple])?;
    out.g = VectorData::concat(&[spec.g.clone(), minus_f2, f4]);
    out.f = f_bar;
    out.phi = None;
    out.exact = None;
    Ok((out, phi_h))
}

/// Solve with boundary data: reduce, solve the homogeneous problem, add `φ_h`.
pub fn solve_dirichlet(spec: &ProblemSpec, space: &DiscreteSpace, opts: &SolveOptions) -> Result<SolveReport> {
    if spec.phi.is_none() {
        return solve_homogeneous(spec, space, opts);
    }
    let (reduced, phi_h) = reduce_to_homogeneous(spec, space)?;
    let sys = assemble(&reduced, space)?;
    let mut report = solve_assembled(&reduced, space, &sys, opts)?;
    report.solution = report.solution.add(&phi_h);
    fill_errors(&mut report, spec, space)?;
    Ok(report)
}

/// Oracle for the reduction: assemble over all nodes, impose `φ` nodally on
/// the boundary and solve the condensed interior system directly.
pub fn solve_lifted(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<DiscreteField> {
    let mut nodal = vec![0.0; space.n_nodes()];
    if let Some(phi) = &spec.phi {
        for &b in space.boundary() {
            nodal[b] = phi.value.eval(space.node(b), "boundary value")?;
        }
    }
    let all = assemble_bilinear_columns(spec, space, Columns::AllNodes)?;
    let interior = assemble_bilinear(spec, space)?;
    let lift = all.a.matvec(&nodal);
    let load = assemble_load(spec, space)?;
    let rhs: Vec<f64> = load.iter().zip(&lift).map(|(b, l)| b - l).collect();
    let u = BandedLu::factor(&interior.a)?.solve(&rhs);
    for (k, &node) in space.interior().iter().enumerate() {
        nodal[node] = u[k];
    }
    DiscreteField::new(space, nodal)
}

/// `max_j |Λ(w, φ_j) + ∫f φ_j + ∫g·Tφ_j|` and `‖b‖` for a field carrying its boundary values.
pub fn weak_residual(spec: &ProblemSpec, space: &DiscreteSpace, w: &DiscreteField) -> Result<(f64, f64)> {
    let all = assemble_bilinear_columns(spec, space, Columns::AllNodes)?;
    let load = assemble_load(spec, space)?;
    let aw = all.a.matvec(w.nodal_values());
    let worst = aw.iter().zip(&load).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((worst, norm2(&load)))
}

/// Outcome of the zero-data harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// Largest QH¹ norm over the two routes.
    pub max_norm: f64,
    /// `1e-8·(1 + ‖A‖_∞)`.
    pub threshold: f64,
    /// `max_norm ≤ threshold`.
    pub passes: bool,
}

/// Solve with `f = 0`, `g = 0`, `φ = 0` by both routes and measure the solutions.
pub fn uniqueness_harness(spec: &ProblemSpec, space: &DiscreteSpace, opts: &SolveOptions) -> Result<UniquenessReport> {
    let zero = spec.with_zero_data();
    let sys = assemble(&zero, space)?;
    let mut max_norm: f64 = 0.0;
    for route in [Route::Direct, Route::Fredholm] {
        let o = SolveOptions { route, ..*opts };
        let r = solve_assembled(&zero, space, &sys, &o)?;
        max_norm = max_norm.max(qh1_norm(space, &r.solution, &zero.q)?);
    }
    let threshold = 1e-8 * (1.0 + sys.a.norm_inf());
    Ok(UniquenessReport {
        max_norm,
        threshold,
        passes: max_norm <= threshold,
    })
}
