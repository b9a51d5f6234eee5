//! The Dirichlet problem description.
//!
//! ```text
//! ∇'P∇u + H·Ru + S'(Gu) + Fu = f + T'g   in Θ,     u = φ on ∂Θ
//! ```
//!
//! with `Q` the reference form, `R`, `S` `N`-tuples, `T` a `K`-tuple, and
//! exponents `σ > 1`, `q > 2σ'`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::BoxDomain;
use crate::qform::{PointFn, SymMatrixField, VectorFieldTuple};
use crate::{Error, Result};

/// Scalar coefficient or datum.
#[derive(Clone)]
pub struct ScalarField(PointFn<f64>);

impl ScalarField {
    /// Wrap a closure.
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField(Arc::new(f))
    }

    /// Constant value.
    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    /// Evaluate, rejecting non-finite values.
    pub fn eval(&self, x: &[f64], what: &str) -> Result<f64> {
        let v = (self.0)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Data {
                what: what.into(),
                location: x.to_vec(),
            })
        }
    }

    /// Raw evaluation.
    pub fn call(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

impl core::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("ScalarField(..)")
    }
}

/// `R^len`-valued coefficient or datum (`H`, `G`, `g`).
#[derive(Clone)]
pub struct VectorData {
    len: usize,
    eval: PointFn<Vec<f64>>,
}

impl VectorData {
    /// Wrap a closure returning vectors of length `len`.
    pub fn new(len: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        VectorData { len, eval: Arc::new(f) }
    }

    /// Constant vector.
    pub fn constant(v: Vec<f64>) -> Self {
        let len = v.len();
        Self::new(len, move |_| v.clone())
    }

    /// Identically zero vector of length `len`.
    pub fn zeros(len: usize) -> Self {
        Self::new(len, move |_| vec![0.0; len])
    }

    /// Length of the vectors.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True for the empty tuple.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Evaluate, checking length and finiteness.
    pub fn eval(&self, x: &[f64], what: &str) -> Result<Vec<f64>> {
        let v = (self.eval)(x);
        if v.len() != self.len {
            return Err(Error::contract(format!(
                "{what} declared with length {} returned {}",
                self.len,
                v.len()
            )));
        }
        if v.iter().any(|a| !a.is_finite()) {
            return Err(Error::Data {
                what: what.into(),
                location: x.to_vec(),
            });
        }
        Ok(v)
    }

    /// Raw evaluation.
    pub fn call(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    /// Stack several vectors.
    pub fn concat(parts: &[VectorData]) -> Self {
        let len = parts.iter().map(|p| p.len).sum();
        let parts = parts.to_vec();
        Self::new(len, move |x| parts.iter().flat_map(|p| (p.eval)(x)).collect())
    }
}

impl core::fmt::Debug for VectorData {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "VectorData(len = {})", self.len)
    }
}

/// Boundary value `φ`, with an optional analytic gradient used only for error reporting.
#[derive(Clone, Debug)]
pub struct BoundaryValue {
    /// Values.
    pub value: ScalarField,
    /// Optional analytic gradient.
    pub gradient: Option<VectorData>,
}

/// Known exact solution for error reporting.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    /// `u(x)`.
    pub value: ScalarField,
    /// `∇u(x)`.
    pub gradient: VectorData,
}

/// Full Dirichlet problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    /// Reference quadratic form.
    pub q: SymMatrixField,
    /// Principal coefficient, comparable to `Q`.
    pub p: SymMatrixField,
    /// First-order tuple acting on `u` in `H·Ru`.
    pub r: VectorFieldTuple,
    /// First-order tuple in `S'(Gu)`.
    pub s: VectorFieldTuple,
    /// Data tuple in `T'g`.
    pub t: VectorFieldTuple,
    /// Drift coefficient.
    pub h: VectorData,
    /// Adjoint-drift coefficient.
    pub g_coef: VectorData,
    /// Zeroth-order coefficient.
    pub f_coef: ScalarField,
    /// Scalar right-hand side.
    pub f: ScalarField,
    /// Vector right-hand side paired with `T`.
    pub g: VectorData,
    /// Boundary value; `None` means homogeneous data.
    pub phi: Option<BoundaryValue>,
    /// Sobolev gain `σ > 1`.
    pub sigma: f64,
    /// Coefficient integrability `q > 2σ'`.
    pub q_exp: f64,
    /// The box `Θ`.
    pub domain: BoxDomain,
    /// Exact solution when known.
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    /// Pure principal part `∇'P∇` with `P = Q`, zero data, `N = K = 0`.
    pub fn principal(domain: BoxDomain, q: SymMatrixField, sigma: f64, q_exp: f64) -> Self {
        let n = domain.dim();
        ProblemSpec {
            p: q.clone(),
            q,
            r: VectorFieldTuple::empty(n),
            s: VectorFieldTuple::empty(n),
            t: VectorFieldTuple::empty(n),
            h: VectorData::zeros(0),
            g_coef: VectorData::zeros(0),
            f_coef: ScalarField::constant(0.0),
            f: ScalarField::constant(0.0),
            g: VectorData::zeros(0),
            phi: None,
            sigma,
            q_exp,
            domain,
            exact: None,
        }
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Drift tuple size `N`.
    pub fn n_drift(&self) -> usize {
        self.r.count()
    }

    /// Data tuple size `K`.
    pub fn n_data(&self) -> usize {
        self.t.count()
    }

    /// Dual exponent `σ' = σ/(σ − 1)`.
    pub fn sigma_dual(&self) -> f64 {
        sigma_dual(self.sigma)
    }

    /// Check shapes and exponents.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.q.dim() != n || self.p.dim() != n {
            return Err(Error::contract("P and Q must match the domain dimension"));
        }
        for (name, t) in [("R", &self.r), ("S", &self.s), ("T", &self.t)] {
            if t.dim() != n {
                return Err(Error::contract(format!("tuple {name} has the wrong dimension")));
            }
        }
        let big_n = self.r.count();
        if self.s.count() != big_n || self.h.len() != big_n || self.g_coef.len() != big_n {
            return Err(Error::contract(format!(
                "N mismatch: R has {}, S has {}, H has {}, G has {}",
                big_n,
                self.s.count(),
                self.h.len(),
                self.g_coef.len()
            )));
        }
        if self.t.count() != self.g.len() {
            return Err(Error::contract(format!(
                "K mismatch: T has {} fields, g has length {}",
                self.t.count(),
                self.g.len()
            )));
        }
        check_exponents(self.sigma, self.q_exp)
    }

    /// Copy with all data (`f`, `g`, `φ`) set to zero.
    pub fn with_zero_data(&self) -> Self {
        let mut out = self.clone();
        out.f = ScalarField::constant(0.0);
        out.g = VectorData::zeros(self.g.len());
        out.phi = None;
        out.exact = None;
        out
    }
}

/// `σ/(σ − 1)`.
pub fn sigma_dual(sigma: f64) -> f64 {
    sigma / (sigma - 1.0)
}

/// Require `σ > 1` and `q > 2σ'`.
pub fn check_exponents(sigma: f64, q: f64) -> Result<()> {
    if !(sigma > 1.0) || !sigma.is_finite() {
        return Err(Error::Exponent {
            q,
            sigma,
            bound: f64::INFINITY,
        });
    }
    let bound = 2.0 * sigma_dual(sigma);
    if !(q > bound) {
        return Err(Error::Exponent { q, sigma, bound });
    }
    Ok(())
}
