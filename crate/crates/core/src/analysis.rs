//! Hypothesis checks and the explicit constant chain leading to the
//! coercivity shift `p`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{apply_shift, lq_norm_scalar, lq_norm_vector, AssembledSystem};
use crate::dense::{dot, Matrix};
use crate::krylov::lanczos_extremes;
use crate::mesh::DiscreteSpace;
use crate::problem::{check_exponents, sigma_dual, ProblemSpec};
use crate::qform::{certify_tuple, comparability_constants, Comparability, SubunitCertificate};
use crate::sparse::{BandedCholesky, CsrMatrix};
use crate::{Error, Result, FORM_TOL};

/// Default safety factor multiplying `C_total`.
pub const DEFAULT_SAFETY: f64 = 10.0;

/// Maximum number of shift doublings before giving up.
pub const MAX_DOUBLINGS: usize = 40;

/// Where `C5` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum C5Provenance {
    /// Closed form for the Euclidean gradient, `n ≥ 3`.
    EllipticFormula,
    /// Lower-bound estimate from discrete test fields.
    DiscreteEstimate,
    /// Supplied by the caller.
    Given,
}

/// How to obtain `C5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SobolevMode {
    /// `2(n−1)/(√n (n−2))`; requires `Q ≡ I` and a declared `n ≥ 3`.
    EllipticFormula {
        /// Declared ambient dimension.
        declared_dim: usize,
    },
    /// Maximize the discrete Sobolev ratio over a test set.
    DiscreteEstimate,
}

/// A Sobolev constant with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevConstant {
    /// The constant.
    pub value: f64,
    /// How it was obtained.
    pub provenance: C5Provenance,
}

/// Every quantity in the chain from the hypotheses to the shift `p`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    /// Lower comparability constant.
    pub c1: f64,
    /// Upper comparability constant.
    pub C1: f64,
    /// Bound on `Q`.
    pub C0: f64,
    /// Sobolev constant.
    pub C5: f64,
    /// Provenance of `C5`.
    pub C5_provenance: C5Provenance,
    /// Sobolev gain.
    pub sigma: f64,
    /// `σ/(σ−1)`.
    pub sigma_dual: f64,
    /// Coefficient integrability exponent.
    pub q: f64,
    /// `‖H‖_q + ‖G‖_q + ‖F‖_{q/2}`.
    pub M: f64,
    /// `c1/(8√N C5 M)`; absent on the fast path or when `N = 0`.
    pub eps: Option<f64>,
    /// `√(c1/(8 C5² M))`; absent on the fast path.
    pub eta: Option<f64>,
    /// `ε^(−σ/(q(σ−1)−2σ))`.
    pub C_eps: Option<f64>,
    /// `η^(−σ/(q(σ−1)−2σ))`.
    pub C_eta: Option<f64>,
    /// `(2/c1) N C_ε² M²`.
    pub C_I: f64,
    /// `C_η² M²`.
    pub C_II: f64,
    /// `C_I + C_II + c1/4`.
    pub C_total: f64,
    /// Shift actually used (after any doubling).
    pub p: f64,
    /// `M = 0`, so no shift is needed.
    pub coercive_fast_path: bool,
    /// Size `N` of the drift tuples.
    pub n_tuple: usize,
    /// Doublings applied by the coercivity certificate.
    pub shift_doublings: usize,
    /// Smallest generalized eigenvalue of `sym(A_p)` against the QH¹ Gram matrix, once certified.
    pub lambda_min: Option<f64>,
}

/// Inputs to [`coercivity_shift`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInputs {
    /// Comparability constants.
    pub comparability: Comparability,
    /// Bound on `Q`.
    pub c0: f64,
    /// Sobolev constant.
    pub c5: SobolevConstant,
    /// `σ`.
    pub sigma: f64,
    /// `q`.
    pub q: f64,
    /// `M`.
    pub m: f64,
    /// `N`.
    pub n_tuple: usize,
}

/// Fill in the chain `ε, η, C_ε, C_η, C_I, C_II, C_total` and pick `p = safety·C_total`.
///
/// With `M = 0` the form is already coercive and `p = 0`.
pub fn coercivity_shift(inputs: &ConstantInputs, safety: f64) -> Result<ConstantsReport> {
    let ConstantInputs {
        comparability,
        c0,
        c5,
        sigma,
        q,
        m,
        n_tuple,
    } = *inputs;
    let denom = q * (sigma - 1.0) - 2.0 * sigma;
    if !(sigma > 1.0) || !(denom > 0.0) {
        return Err(Error::Exponent {
            q,
            sigma,
            bound: 2.0 * sigma_dual(sigma),
        });
    }
    if !(safety >= 1.0) || !safety.is_finite() {
        return Err(Error::Configuration(format!("safety factor must be at least 1, got {safety}")));
    }
    let c1 = comparability.lower;
    let mut report = ConstantsReport {
        c1,
        C1: comparability.upper,
        C0: c0,
        C5: c5.value,
        C5_provenance: c5.provenance,
        sigma,
        sigma_dual: sigma_dual(sigma),
        q,
        M: m,
        eps: None,
        eta: None,
        C_eps: None,
        C_eta: None,
        C_I: 0.0,
        C_II: 0.0,
        C_total: c1 / 4.0,
        p: 0.0,
        coercive_fast_path: m == 0.0,
        n_tuple,
        shift_doublings: 0,
        lambda_min: None,
    };
    if m == 0.0 {
        return Ok(report);
    }
    if !(c5.value > 0.0) || !(c1 > 0.0) {
        return Err(Error::Configuration("c1 and C5 must be positive".into()));
    }
    let power = -sigma / denom;
    let n = n_tuple as f64;
    if n_tuple > 0 {
        let eps = c1 / (8.0 * libm::sqrt(n) * c5.value * m);
        let c_eps = libm::pow(eps, power);
        report.eps = Some(eps);
        report.C_eps = Some(c_eps);
        report.C_I = (2.0 / c1) * n * c_eps * c_eps * m * m;
    }
    let eta = libm::sqrt(c1 / (8.0 * c5.value * c5.value * m));
    let c_eta = libm::pow(eta, power);
    report.eta = Some(eta);
    report.C_eta = Some(c_eta);
    report.C_II = c_eta * c_eta * m * m;
    report.C_total = report.C_I + report.C_II + c1 / 4.0;
    report.p = safety * report.C_total;
    if report.p <= report.C_total {
        report.p = report.C_total * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE;
    }
    Ok(report)
}

/// `(c1/(√N C5 C(H,G)))^(2qσ′/(q−2σ′))`, or `+∞` when the base has a zero denominator.
pub fn gamma_lower_bound(constants: &ConstantsReport, hg_norm: f64) -> f64 {
    let sd = sigma_dual(constants.sigma);
    let q = constants.q;
    let denom = libm::sqrt(constants.n_tuple as f64) * constants.C5 * hg_norm;
    if denom == 0.0 {
        return f64::INFINITY;
    }
    libm::pow(constants.c1 / denom, 2.0 * q * sd / (q - 2.0 * sd))
}

/// `C1² + √N C5 (‖H‖_{2σ′} + ‖G‖_{2σ′}) + C5² ‖F‖_{σ′}`.
pub fn structural_bound_constant(c1_upper: f64, n_tuple: usize, c5: f64, h_norm: f64, g_norm: f64, f_norm: f64) -> f64 {
    c1_upper * c1_upper + libm::sqrt(n_tuple as f64) * c5 * (h_norm + g_norm) + c5 * c5 * f_norm
}

/// The structural constant with coefficient norms computed by quadrature on `space`.
pub fn structural_bound_for(spec: &ProblemSpec, space: &DiscreteSpace, c1_upper: f64, c5: f64) -> Result<f64> {
    let sd = spec.sigma_dual();
    Ok(structural_bound_constant(
        c1_upper,
        spec.n_drift(),
        c5,
        lq_norm_vector(space, &spec.h, 2.0 * sd)?,
        lq_norm_vector(space, &spec.g_coef, 2.0 * sd)?,
        lq_norm_scalar(space, &spec.f_coef, sd)?,
    ))
}

/// `M = ‖H‖_{L^q} + ‖G‖_{L^q} + ‖F‖_{L^{q/2}}` by quadrature.
pub fn coefficient_aggregate(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<f64> {
    let q = spec.q_exp;
    Ok(lq_norm_vector(space, &spec.h, q)?
        + lq_norm_vector(space, &spec.g_coef, q)?
        + lq_norm_scalar(space, &spec.f_coef, q / 2.0)?)
}

/// Outcome of the negativity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativityReport {
    /// Whether every hat functional is `≤ tolerance`.
    pub passes: bool,
    /// Interior dof with the largest functional value.
    pub worst_dof: Option<usize>,
    /// Coordinates of that node.
    pub worst_point: Vec<f64>,
    /// Largest functional value.
    pub worst_value: f64,
    /// Tolerance used.
    pub tolerance: f64,
    /// `ℓ(φ_j)` for every interior hat.
    pub values: Vec<f64>,
}

/// Evaluate `ℓ(w) = ∫ F w + Σ_k G_k (S_k w)` on every interior hat.
///
/// Passes iff all values are `≤ 1e-12·(1 + max|ℓ|)`. Since `ℓ` is linear and a
/// Q1 function is nonnegative iff its nodal values are, this covers the whole
/// discrete nonnegative cone.
pub fn check_negativity(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<NegativityReport> {
    let dim = space.dim();
    let mut values = vec![0.0; space.n_interior()];
    for qp in space.quad_points() {
        let x = &qp.x[..dim];
        let f = spec.f_coef.eval(x, "F")?;
        let g = spec.g_coef.eval(x, "G")?;
        let s = spec.s.eval(x)?;
        let basis = space.local_basis(&qp);
        for (a, &node) in basis.nodes.iter().enumerate() {
            if let Some(j) = space.dof_of(node) {
                let grad = &basis.grads[a][..dim];
                let gs: f64 = g.iter().enumerate().map(|(k, gk)| gk * dot(s.row(k), grad)).sum();
                values[j] += qp.weight * (f * basis.values[a] + gs);
            }
        }
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-12 * (1.0 + max_abs);
    let mut worst_dof = None;
    let mut worst_value = f64::NEG_INFINITY;
    for (j, &v) in values.iter().enumerate() {
        if v > worst_value {
            worst_value = v;
            worst_dof = Some(j);
        }
    }
    let worst_point = worst_dof
        .map(|j| space.node(space.interior()[j]).to_vec())
        .unwrap_or_default();
    Ok(NegativityReport {
        passes: worst_value <= tolerance || values.is_empty(),
        worst_dof,
        worst_point,
        worst_value: if values.is_empty() { 0.0 } else { worst_value },
        tolerance,
        values,
    })
}

/// `2(n−1)/(√n (n−2))` for `n ≥ 3`.
pub fn elliptic_sobolev_constant(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Configuration(format!(
            "the elliptic Sobolev formula needs n >= 3, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(2.0 * (nf - 1.0) / (libm::sqrt(nf) * (nf - 2.0)))
}

/// Number of random fields in the discrete estimate.
pub const SOBOLEV_RANDOM_FIELDS: usize = 50;
/// Ascent steps per refined field.
pub const SOBOLEV_ASCENT_STEPS: usize = 20;
/// Seed of the random fields.
pub const SOBOLEV_SEED: u64 = 0x5eed_50b0;

/// Quadrature table restricted to interior dofs.
struct DofQuadrature {
    weights: Vec<f64>,
    dofs: Vec<[usize; 4]>,
    values: Vec<[f64; 4]>,
    n_local: usize,
}

impl DofQuadrature {
    fn new(space: &DiscreteSpace) -> Self {
        let n_local = if space.dim() == 1 { 2 } else { 4 };
        let mut out = DofQuadrature {
            weights: Vec::new(),
            dofs: Vec::new(),
            values: Vec::new(),
            n_local,
        };
        for qp in space.quad_points() {
            let basis = space.local_basis(&qp);
            let mut d = [usize::MAX; 4];
            let mut v = [0.0; 4];
            for a in 0..n_local {
                d[a] = space.dof_of(basis.nodes[a]).unwrap_or(usize::MAX);
                v[a] = basis.values[a];
            }
            out.weights.push(qp.weight);
            out.dofs.push(d);
            out.values.push(v);
        }
        out
    }

    fn value(&self, k: usize, w: &[f64]) -> f64 {
        (0..self.n_local)
            .filter(|&a| self.dofs[k][a] != usize::MAX)
            .map(|a| self.values[k][a] * w[self.dofs[k][a]])
            .sum()
    }

    /// `∫ |w|^r`.
    fn power_integral(&self, w: &[f64], r: f64) -> f64 {
        (0..self.weights.len())
            .map(|k| self.weights[k] * libm::pow(self.value(k, w).abs(), r))
            .sum()
    }

    /// `b_j = ∫ |w|^{r−2} w φ_j`.
    fn ascent_load(&self, w: &[f64], r: f64) -> Vec<f64> {
        let mut b = vec![0.0; w.len()];
        for k in 0..self.weights.len() {
            let v = self.value(k, w);
            let s = self.weights[k] * libm::pow(v.abs(), r - 2.0) * v;
            for a in 0..self.n_local {
                let j = self.dofs[k][a];
                if j != usize::MAX {
                    b[j] += s * self.values[k][a];
                }
            }
        }
        b
    }
}

/// Sobolev constant in the requested mode.
///
/// The discrete estimate maximizes `‖w‖_{L^{2σ}} / (∫Q(∇w))^{1/2}` over every
/// interior hat, the all-ones interior field and seeded random fields; the
/// best hat, the all-ones field and each random field are refined by a
/// normalized fixed-point ascent. It is a lower bound for the true constant.
pub fn sobolev_constant(spec: &ProblemSpec, space: &DiscreteSpace, mode: SobolevMode) -> Result<SobolevConstant> {
    match mode {
        SobolevMode::EllipticFormula { declared_dim } => {
            for x in space.quad_coords().iter().step_by(7) {
                let q = spec.q.eval(x)?;
                if q.add_scaled(-1.0, &Matrix::identity(q.rows())).max_abs() > FORM_TOL {
                    return Err(Error::hypothesis("elliptic Sobolev formula requires Q = I", x));
                }
            }
            Ok(SobolevConstant {
                value: elliptic_sobolev_constant(declared_dim)?,
                provenance: C5Provenance::EllipticFormula,
            })
        }
        SobolevMode::DiscreteEstimate => {
            let k = crate::assembly::assemble_bilinear(&ProblemSpec::principal(
                spec.domain.clone(),
                spec.q.clone(),
                spec.sigma,
                spec.q_exp,
            ), space)?
            .q_stiffness;
            let value = discrete_sobolev_estimate(space, &k, spec.sigma)?;
            Ok(SobolevConstant {
                value,
                provenance: C5Provenance::DiscreteEstimate,
            })
        }
    }
}

/// Discrete Sobolev ratio estimate given the Q-stiffness matrix over interior dofs.
pub fn discrete_sobolev_estimate(space: &DiscreteSpace, k_q: &CsrMatrix, sigma: f64) -> Result<f64> {
    let n = k_q.nrows();
    if n == 0 {
        return Err(Error::contract("no interior degrees of freedom"));
    }
    let r = 2.0 * sigma;
    let chol = BandedCholesky::factor(k_q).map_err(|_| {
        Error::hypothesis(
            "the Q-gradient vanishes on a nonzero discrete field",
            space.node(space.interior()[0]),
        )
    })?;
    let quad = DofQuadrature::new(space);
    let ratio = |w: &[f64]| -> Result<f64> {
        let energy = k_q.bilinear(w, w);
        let wn = crate::dense::norm2(w);
        if !(energy > 1e-14 * wn * wn * k_q.max_abs()) {
            return Err(Error::hypothesis(
                "the Q-gradient vanishes on a nonzero discrete field",
                space.node(space.interior()[0]),
            ));
        }
        Ok(libm::pow(quad.power_integral(w, r), 1.0 / r) / libm::sqrt(energy))
    };
    let refine = |start: Vec<f64>| -> Result<f64> {
        let mut best = ratio(&start)?;
        let mut w = start;
        for _ in 0..SOBOLEV_ASCENT_STEPS {
            let b = quad.ascent_load(&w, r);
            let next = chol.solve(&b);
            let scale = crate::dense::norm2(&next);
            if !(scale > 0.0) || !scale.is_finite() {
                break;
            }
            w = next.iter().map(|v| v / scale).collect();
            best = best.max(ratio(&w)?);
        }
        Ok(best)
    };

    // Every hat at once: ‖φ_j‖_r^r accumulates locally.
    let mut hat_power = vec![0.0; n];
    for k in 0..quad.weights.len() {
        for a in 0..quad.n_local {
            let j = quad.dofs[k][a];
            if j != usize::MAX {
                hat_power[j] += quad.weights[k] * libm::pow(quad.values[k][a].abs(), r);
            }
        }
    }
    let mut best = 0.0f64;
    let mut best_hat = 0;
    for j in 0..n {
        let kjj = k_q.get(j, j);
        if !(kjj > 0.0) {
            return Err(Error::hypothesis(
                "a hat function has zero Q-energy",
                space.node(space.interior()[j]),
            ));
        }
        let rj = libm::pow(hat_power[j], 1.0 / r) / libm::sqrt(kjj);
        if rj > best {
            best = rj;
            best_hat = j;
        }
    }
    let mut hat = vec![0.0; n];
    hat[best_hat] = 1.0;
    best = best.max(refine(hat)?);
    best = best.max(refine(vec![1.0; n])?);
    let mut rng = ChaCha8Rng::seed_from_u64(SOBOLEV_SEED);
    for _ in 0..SOBOLEV_RANDOM_FIELDS {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        best = best.max(refine(w)?);
    }
    Ok(best)
}

/// Coercivity certificate for `sym(A_p)` against the discrete QH¹ Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityCertificate {
    /// `sym(A_p)` is positive definite.
    pub passes: bool,
    /// Estimated smallest eigenvalue of `G⁻¹ sym(A_p)`.
    pub lambda_min: f64,
    /// Shift at which the certificate was issued.
    pub shift: f64,
}

/// Check that `sym(A_p)` is positive definite and estimate `λ_min` of the pencil `(sym(A_p), G)`.
pub fn verify_shifted_coercivity(sys: &AssembledSystem) -> Result<CoercivityCertificate> {
    let n = sys.dim();
    if n == 0 {
        return Ok(CoercivityCertificate {
            passes: true,
            lambda_min: f64::INFINITY,
            shift: sys.shift,
        });
    }
    let s = sys.shifted.sym_part();
    let pd = BandedCholesky::factor(&s).is_ok();
    let gram = sys.qh1_gram();
    let gchol = BandedCholesky::factor(&gram)?;
    let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * libm::cos(1.7 * i as f64)).collect();
    let ritz = lanczos_extremes(|x| gchol.solve(&s.matvec(x)), |x| gram.matvec(x), &start, 300.min(n));
    Ok(CoercivityCertificate {
        passes: pd && ritz.min > 0.0,
        lambda_min: ritz.min,
        shift: sys.shift,
    })
}

/// Shift `sys` by `p0`, doubling (`p ← max(2p, 1)`) until the certificate passes.
///
/// Returns the shifted system, the certificate and the number of doublings.
pub fn certify_shift(sys: &AssembledSystem, p0: f64) -> Result<(AssembledSystem, CoercivityCertificate, usize)> {
    let mut p = p0.max(0.0);
    let mut last = f64::NAN;
    for doublings in 0..=MAX_DOUBLINGS {
        let shifted = apply_shift(sys, p);
        let cert = verify_shifted_coercivity(&shifted)?;
        if cert.passes {
            return Ok((shifted, cert, doublings));
        }
        last = cert.lambda_min;
        p = (2.0 * p).max(1.0);
    }
    Err(Error::Unsolvable {
        p,
        lambda_min: last,
        doublings: MAX_DOUBLINGS as u32,
    })
}

/// Options for [`compute_constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantOptions {
    /// Safety factor on `C_total`.
    pub safety: f64,
    /// Sobolev mode.
    pub sobolev: SobolevMode,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        ConstantOptions {
            safety: DEFAULT_SAFETY,
            sobolev: SobolevMode::DiscreteEstimate,
        }
    }
}

/// Comparability at the quadrature points, `C0`, `C5`, `M`, then the shift chain.
pub fn compute_constants(spec: &ProblemSpec, space: &DiscreteSpace, opts: ConstantOptions) -> Result<ConstantsReport> {
    check_exponents(spec.sigma, spec.q_exp)?;
    let comparability = comparability_constants(&spec.p, &spec.q, space.quad_coords(), FORM_TOL)?;
    let m = coefficient_aggregate(spec, space)?;
    // The shift chain only consumes C5 when lower-order terms are present.
    let c5 = sobolev_constant(spec, space, opts.sobolev)?;
    coercivity_shift(
        &ConstantInputs {
            comparability,
            c0: spec.q.bound_c0(),
            c5,
            sigma: spec.sigma,
            q: spec.q_exp,
            m,
            n_tuple: spec.n_drift(),
        },
        opts.safety,
    )
}

/// Every structural hypothesis evaluated on the discrete space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// Exponent condition `q > 2σ′`.
    pub exponents_ok: bool,
    /// Comparability constants, or the reason they failed.
    pub comparability: core::result::Result<Comparability, String>,
    /// Subunit certificate for `R`.
    pub subunit_r: SubunitCertificate,
    /// Subunit certificate for `S`.
    pub subunit_s: SubunitCertificate,
    /// Subunit certificate for `T`.
    pub subunit_t: SubunitCertificate,
    /// Negativity condition.
    pub negativity: NegativityReport,
}

impl HypothesisReport {
    /// All checks passed.
    pub fn passes(&self) -> bool {
        self.exponents_ok
            && self.comparability.is_ok()
            && self.subunit_r.all_subunit()
            && self.subunit_s.all_subunit()
            && self.subunit_t.all_subunit()
            && self.negativity.passes
    }

    /// Human-readable reasons for failure.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.exponents_ok {
            out.push("exponent condition q > 2σ' fails".into());
        }
        if let Err(e) = &self.comparability {
            out.push(format!("comparability: {e}"));
        }
        for (name, c) in [("R", &self.subunit_r), ("S", &self.subunit_s), ("T", &self.subunit_t)] {
            if !c.all_subunit() {
                out.push(format!(
                    "tuple {name} is not subunit (worst ratio {:.6e} at {:?})",
                    c.worst_ratio, c.witness
                ));
            }
        }
        if !self.negativity.passes {
            out.push(format!(
                "negativity fails: value {:.6e} at {:?}",
                self.negativity.worst_value, self.negativity.worst_point
            ));
        }
        out
    }
}

/// Run every hypothesis check at the quadrature points of `space`.
pub fn check_hypotheses(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<HypothesisReport> {
    spec.validate().or_else(|e| match e {
        Error::Exponent { .. } => Ok(()),
        other => Err(other),
    })?;
    let pts = space.quad_coords();
    let comparability =
        match comparability_constants(&spec.p, &spec.q, pts.iter().cloned(), FORM_TOL) {
            Ok(c) => Ok(c),
            Err(e @ Error::NotComparable { .. }) => Err(format!("{e}")),
            Err(e) => return Err(e),
        };
    Ok(HypothesisReport {
        exponents_ok: check_exponents(spec.sigma, spec.q_exp).is_ok(),
        comparability,
        subunit_r: certify_tuple(&spec.q, &spec.r, pts.iter().cloned(), FORM_TOL)?,
        subunit_s: certify_tuple(&spec.q, &spec.s, pts.iter().cloned(), FORM_TOL)?,
        subunit_t: certify_tuple(&spec.q, &spec.t, pts.iter().cloned(), FORM_TOL)?,
        negativity: check_negativity(spec, space)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_bilinear;
    use crate::mesh::{build_space, BoxDomain};
    use crate::problem::{ScalarField, VectorData};
    use crate::qform::{SymMatrixField, VectorFieldTuple};
    use approx::assert_relative_eq;

    fn inputs(m: f64) -> ConstantInputs {
        ConstantInputs {
            comparability: Comparability { lower: 1.0, upper: 1.0 },
            c0: 1.0,
            c5: SobolevConstant {
                value: 2.0,
                provenance: C5Provenance::Given,
            },
            sigma: 2.0,
            q: 6.0,
            m,
            n_tuple: 1,
        }
    }

    #[test]
    fn chain_hand_example() {
        let r = coercivity_shift(&inputs(1.0), 10.0).unwrap();
        assert_relative_eq!(r.eps.unwrap(), 1.0 / 16.0, max_relative = 1e-14);
        assert_relative_eq!(r.C_eps.unwrap(), 16.0, max_relative = 1e-14);
        assert_relative_eq!(r.C_I, 512.0, max_relative = 1e-14);
        assert_relative_eq!(r.eta.unwrap(), libm::sqrt(1.0 / 32.0), max_relative = 1e-14);
        assert_relative_eq!(r.C_eta.unwrap(), libm::sqrt(32.0), max_relative = 1e-14);
        assert_relative_eq!(r.C_II, 32.0, max_relative = 1e-14);
        assert_relative_eq!(r.C_total, 544.25, max_relative = 1e-14);
        assert!(r.p > r.C_total);
        assert!(!r.coercive_fast_path);
    }

    #[test]
    fn chain_fast_path_and_monotonicity() {
        let r = coercivity_shift(&inputs(0.0), 10.0).unwrap();
        assert!(r.coercive_fast_path);
        assert_eq!(r.p, 0.0);
        let a = coercivity_shift(&inputs(1.0), 10.0).unwrap();
        let b = coercivity_shift(&inputs(2.0), 10.0).unwrap();
        assert!(b.C_total > a.C_total);
        let mut bad = inputs(1.0);
        bad.q = 4.0;
        assert!(matches!(coercivity_shift(&bad, 10.0), Err(Error::Exponent { .. })));
        let one = coercivity_shift(&inputs(1.0), 1.0).unwrap();
        assert!(one.p > one.C_total);
    }

    #[test]
    fn gamma_examples() {
        let mut r = coercivity_shift(&inputs(1.0), 10.0).unwrap();
        r.C5 = 1.0;
        assert_relative_eq!(gamma_lower_bound(&r, 2.0), libm::pow(2.0, -12.0), max_relative = 1e-14);
        assert_relative_eq!(gamma_lower_bound(&r, 1.0), 1.0, max_relative = 1e-14);
        assert!(gamma_lower_bound(&r, 4.0) < gamma_lower_bound(&r, 2.0));
        assert_eq!(gamma_lower_bound(&r, 0.0), f64::INFINITY);
    }

    #[test]
    fn elliptic_constant() {
        assert_relative_eq!(elliptic_sobolev_constant(3).unwrap(), 4.0 / libm::sqrt(3.0), max_relative = 1e-15);
        assert!(elliptic_sobolev_constant(2).is_err());
    }

    fn laplace() -> ProblemSpec {
        ProblemSpec::principal(BoxDomain::unit(2), SymMatrixField::constant(Matrix::identity(2)), 2.0, 6.0)
    }

    #[test]
    fn negativity_examples() {
        let space = build_space(&BoxDomain::unit(2), &[6, 6], 3).unwrap();
        let mut spec = laplace();
        let r = check_negativity(&spec, &space).unwrap();
        assert!(r.passes && r.values.iter().all(|&v| v == 0.0));
        spec.f_coef = ScalarField::constant(-1.0);
        assert!(check_negativity(&spec, &space).unwrap().passes);
        spec.f_coef = ScalarField::constant(0.1);
        let r = check_negativity(&spec, &space).unwrap();
        assert!(!r.passes && r.worst_value > 0.0 && r.worst_dof.is_some());
    }

    #[test]
    fn negativity_with_adjoint_drift() {
        // ∫ G (S·∇φ) with constant G, S vanishes for every hat.
        let space = build_space(&BoxDomain::unit(2), &[5, 5], 3).unwrap();
        let mut spec = laplace();
        spec.r = VectorFieldTuple::constant(Matrix::from_rows(&[&[1.0, 0.0]]));
        spec.s = VectorFieldTuple::constant(Matrix::from_rows(&[&[1.0, 0.0]]));
        spec.h = VectorData::constant(vec![0.0]);
        spec.g_coef = VectorData::constant(vec![3.0]);
        let r = check_negativity(&spec, &space).unwrap();
        assert!(r.passes);
        assert!(r.values.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn discrete_sobolev_dominates_centered_hat() {
        let space = build_space(&BoxDomain::unit(2), &[4, 4], 3).unwrap();
        let spec = laplace();
        let c5 = sobolev_constant(&spec, &space, SobolevMode::DiscreteEstimate).unwrap();
        assert_eq!(c5.provenance, C5Provenance::DiscreteEstimate);
        // Centre hat: ∫|∇φ|² = 8/3 for a bilinear hat on a uniform grid.
        let centre = space.interpolate(|x| if (x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12 { 1.0 } else { 0.0 }).unwrap();
        let mut l4 = 0.0;
        let mut grad = 0.0;
        for qp in space.quad_points() {
            let (v, g) = centre.at_quad(&qp);
            l4 += qp.weight * v.powi(4);
            grad += qp.weight * (g[0] * g[0] + g[1] * g[1]);
        }
        assert_relative_eq!(grad, 8.0 / 3.0, max_relative = 1e-12);
        let hat_ratio = libm::pow(l4, 0.25) / libm::sqrt(grad);
        assert!(c5.value >= hat_ratio);
    }

    #[test]
    fn sobolev_elliptic_mode_requires_identity() {
        let space = build_space(&BoxDomain::unit(2), &[3, 3], 3).unwrap();
        let c = sobolev_constant(&laplace(), &space, SobolevMode::EllipticFormula { declared_dim: 3 }).unwrap();
        assert_relative_eq!(c.value, 4.0 / libm::sqrt(3.0), max_relative = 1e-15);
        let mut g = laplace();
        g.q = SymMatrixField::new(2, 1.0, |x| Matrix::from_diag(&[1.0, x[0] * x[0]]));
        assert!(sobolev_constant(&g, &space, SobolevMode::EllipticFormula { declared_dim: 3 }).is_err());
    }

    #[test]
    fn sobolev_rejects_vanishing_gradient() {
        let space = build_space(&BoxDomain::unit(2), &[4, 4], 3).unwrap();
        let mut spec = laplace();
        // Q vanishes on the left half: hats supported there carry no energy.
        spec.q = SymMatrixField::new(2, 1.0, |x| Matrix::identity(2).scaled(if x[0] > 0.5 { 1.0 } else { 0.0 }));
        spec.p = spec.q.clone();
        assert!(matches!(
            sobolev_constant(&spec, &space, SobolevMode::DiscreteEstimate),
            Err(Error::Hypothesis { .. })
        ));
    }

    #[test]
    fn coercivity_examples() {
        let space = build_space(&BoxDomain::unit(2), &[6, 6], 3).unwrap();
        let sys = assemble_bilinear(&laplace(), &space).unwrap();
        let cert = verify_shifted_coercivity(&sys).unwrap();
        assert!(cert.passes && cert.lambda_min > 0.0);

        // A = 0, p = 1: A_p = M.
        let mut zero = sys.clone();
        zero.a = CsrMatrix::zeros(sys.dim(), sys.dim());
        let shifted = apply_shift(&zero, 1.0);
        assert!(verify_shifted_coercivity(&shifted).unwrap().passes);
    }

    #[test]
    fn strong_zeroth_order_term_needs_inflation() {
        let space = build_space(&BoxDomain::unit(2), &[6, 6], 3).unwrap();
        let mut spec = laplace();
        spec.f_coef = ScalarField::constant(200.0);
        let sys = assemble_bilinear(&spec, &space).unwrap();
        assert!(!verify_shifted_coercivity(&sys).unwrap().passes);
        let (shifted, cert, doublings) = certify_shift(&sys, 0.0).unwrap();
        assert!(cert.passes && doublings > 0);
        // Dense oracle: the symmetric part is positive definite.
        let dense = shifted.shifted.sym_part().to_dense();
        assert!(dense.sym_eigen().min() > 0.0);
    }
}
