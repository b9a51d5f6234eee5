//! Built-in manufactured problems on the unit interval and unit square.
//!
//! Each carries its exact solution; the data `f` are derived by hand from
//! `div(P∇u) + H·Ru + S'(Gu) + Fu = f + T'g`, where `S_k'w = −div(s_k w)`.

use alloc::vec;
use core::f64::consts::PI;

use crate::dense::Matrix;
use crate::mesh::BoxDomain;
use crate::problem::{BoundaryValue, ExactSolution, ProblemSpec, ScalarField, VectorData};
use crate::qform::{SymMatrixField, VectorFieldTuple};

/// Default Sobolev gain.
pub const DEFAULT_SIGMA: f64 = 2.0;
/// Default integrability exponent (must exceed `2σ′ = 4`).
pub const DEFAULT_Q: f64 = 6.0;

/// Named built-in problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// `u'' = −2` on (0,1), `u = x(1−x)`.
    Poisson1d,
    /// `Δu = −2π² sin(πx₁) sin(πx₂)`.
    Poisson2d,
    /// `∂₁²u + x₁²∂₂²u = f` with the same sine solution.
    Grushin,
    /// Grushin with first- and zeroth-order terms and vector data.
    GrushinDrift,
}

impl Builtin {
    /// Every built-in.
    pub const ALL: [Builtin; 4] = [Builtin::Poisson1d, Builtin::Poisson2d, Builtin::Grushin, Builtin::GrushinDrift];

    /// Configuration name.
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Poisson1d => "poisson1d",
            Builtin::Poisson2d => "poisson2d",
            Builtin::Grushin => "grushin",
            Builtin::GrushinDrift => "grushin-drift",
        }
    }

    /// Look up by configuration name.
    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    /// Spatial dimension.
    pub fn dim(self) -> usize {
        match self {
            Builtin::Poisson1d => 1,
            _ => 2,
        }
    }

    /// Whether `H`, `G` or `F` are nonzero.
    pub fn has_lower_order_terms(self) -> bool {
        self == Builtin::GrushinDrift
    }

    /// The problem with the given exponents.
    pub fn spec(self, sigma: f64, q: f64) -> ProblemSpec {
        match self {
            Builtin::Poisson1d => poisson1d(sigma, q),
            Builtin::Poisson2d => poisson2d(sigma, q),
            Builtin::Grushin => grushin(sigma, q),
            Builtin::GrushinDrift => grushin_drift(sigma, q),
        }
    }
}

/// `diag(1, x₁²)`.
pub fn grushin_form() -> SymMatrixField {
    SymMatrixField::new(2, 1.0, |x| Matrix::from_diag(&[1.0, x[0] * x[0]]))
}

fn sine_exact() -> ExactSolution {
    ExactSolution {
        value: ScalarField::new(sine),
        gradient: VectorData::new(2, |x| {
            vec![
                PI * libm::cos(PI * x[0]) * libm::sin(PI * x[1]),
                PI * libm::sin(PI * x[0]) * libm::cos(PI * x[1]),
            ]
        }),
    }
}

fn sine(x: &[f64]) -> f64 {
    libm::sin(PI * x[0]) * libm::sin(PI * x[1])
}

/// `u'' = −2`, `u = x(1 − x)`.
pub fn poisson1d(sigma: f64, q: f64) -> ProblemSpec {
    let mut spec = ProblemSpec::principal(BoxDomain::unit(1), SymMatrixField::constant(Matrix::identity(1)), sigma, q);
    spec.f = ScalarField::constant(-2.0);
    spec.exact = Some(ExactSolution {
        value: ScalarField::new(|x| x[0] * (1.0 - x[0])),
        gradient: VectorData::new(1, |x| vec![1.0 - 2.0 * x[0]]),
    });
    spec
}

/// `Δu = −2π² u` with `u = sin(πx₁) sin(πx₂)`.
pub fn poisson2d(sigma: f64, q: f64) -> ProblemSpec {
    let mut spec = ProblemSpec::principal(BoxDomain::unit(2), SymMatrixField::constant(Matrix::identity(2)), sigma, q);
    spec.f = ScalarField::new(|x| -2.0 * PI * PI * sine(x));
    spec.exact = Some(sine_exact());
    spec
}

/// `∂₁²u + x₁²∂₂²u = −π²(1 + x₁²) u`.
pub fn grushin(sigma: f64, q: f64) -> ProblemSpec {
    let mut spec = ProblemSpec::principal(BoxDomain::unit(2), grushin_form(), sigma, q);
    spec.f = ScalarField::new(|x| -PI * PI * (1.0 + x[0] * x[0]) * sine(x));
    spec.exact = Some(sine_exact());
    spec
}

/// Grushin principal part with
/// `R = ½(∂₁ + x₁∂₂)`, `H = 2`, `S = x₁∂₂`, `G = 1`, `F = −1`, `T = ∂₁`, `g = x₁x₂`.
///
/// Here `H·Ru = ∂₁u + x₁∂₂u`, `S'(Gu) = −x₁∂₂u` and `T'g = −x₂`, so
/// `f = −π²(1 + x₁²)u + ∂₁u − u + x₂`.
pub fn grushin_drift(sigma: f64, q: f64) -> ProblemSpec {
    let mut spec = grushin(sigma, q);
    spec.r = VectorFieldTuple::new(2, 1, |x| Matrix::from_rows(&[&[0.5, 0.5 * x[0]]]));
    spec.s = VectorFieldTuple::new(2, 1, |x| Matrix::from_rows(&[&[0.0, x[0]]]));
    spec.t = VectorFieldTuple::constant(Matrix::from_rows(&[&[1.0, 0.0]]));
    spec.h = VectorData::constant(vec![2.0]);
    spec.g_coef = VectorData::constant(vec![1.0]);
    spec.f_coef = ScalarField::constant(-1.0);
    spec.g = VectorData::new(1, |x| vec![x[0] * x[1]]);
    spec.f = ScalarField::new(|x| {
        let u = sine(x);
        let du1 = PI * libm::cos(PI * x[0]) * libm::sin(PI * x[1]);
        -PI * PI * (1.0 + x[0] * x[0]) * u + du1 - u + x[1]
    });
    spec
}

/// Laplacian with `φ = x₁` and `f = 0`; the exact solution is `w = x₁`.
pub fn poisson_linear_phi(sigma: f64, q: f64) -> ProblemSpec {
    let mut spec = ProblemSpec::principal(BoxDomain::unit(2), SymMatrixField::constant(Matrix::identity(2)), sigma, q);
    spec.phi = Some(BoundaryValue {
        value: ScalarField::new(|x| x[0]),
        gradient: Some(VectorData::constant(vec![1.0, 0.0])),
    });
    spec.exact = Some(ExactSolution {
        value: ScalarField::new(|x| x[0]),
        gradient: VectorData::constant(vec![1.0, 0.0]),
    });
    spec
}

/// Grushin with `φ = x₁ + 2x₂`; since `div(P∇φ) = 0`, `w = sin(πx₁)sin(πx₂) + φ`.
pub fn grushin_linear_phi(sigma: f64, q: f64) -> ProblemSpec {
    let mut spec = grushin(sigma, q);
    spec.phi = Some(BoundaryValue {
        value: ScalarField::new(|x| x[0] + 2.0 * x[1]),
        gradient: Some(VectorData::constant(vec![1.0, 2.0])),
    });
    let base = sine_exact();
    spec.exact = Some(ExactSolution {
        value: ScalarField::new(|x| sine(x) + x[0] + 2.0 * x[1]),
        gradient: VectorData::new(2, move |x| {
            let g = base.gradient.call(x);
            vec![g[0] + 1.0, g[1] + 2.0]
        }),
    });
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    /// `div(P∇u) + H·Ru + S'(Gu) + Fu − T'g` by central differences, with
    /// every coefficient taken from the spec.
    fn fd_residual(spec: &ProblemSpec, x: [f64; 2]) -> f64 {
        let h = 1e-4;
        let u = |y: [f64; 2]| spec.exact.as_ref().unwrap().value.call(&y);
        let flux = |y: [f64; 2], k: usize| {
            // k-th component of P∇u at y.
            let mut e = [0.0; 2];
            e[0] = (u([y[0] + h, y[1]]) - u([y[0] - h, y[1]])) / (2.0 * h);
            e[1] = (u([y[0], y[1] + h]) - u([y[0], y[1] - h])) / (2.0 * h);
            spec.p.eval(&y).unwrap().matvec(&e)[k]
        };
        let div = (flux([x[0] + h, x[1]], 0) - flux([x[0] - h, x[1]], 0)) / (2.0 * h)
            + (flux([x[0], x[1] + h], 1) - flux([x[0], x[1] - h], 1)) / (2.0 * h);
        let grad = [
            (u([x[0] + h, x[1]]) - u([x[0] - h, x[1]])) / (2.0 * h),
            (u([x[0], x[1] + h]) - u([x[0], x[1] - h])) / (2.0 * h),
        ];
        let hv = spec.h.call(&x);
        let r = spec.r.eval(&x).unwrap();
        let hr: f64 = (0..hv.len()).map(|k| hv[k] * (r.row(k)[0] * grad[0] + r.row(k)[1] * grad[1])).sum();
        // S'(Gu) = −div(Σ_k s_k G_k u).
        let w = |y: [f64; 2], c: usize| -> f64 {
            let s = spec.s.eval(&y).unwrap();
            let g = spec.g_coef.call(&y);
            (0..g.len()).map(|k| s.row(k)[c] * g[k]).sum::<f64>() * u(y)
        };
        let sg = -((w([x[0] + h, x[1]], 0) - w([x[0] - h, x[1]], 0)) / (2.0 * h)
            + (w([x[0], x[1] + h], 1) - w([x[0], x[1] - h], 1)) / (2.0 * h));
        let tg = |y: [f64; 2], c: usize| -> f64 {
            let t = spec.t.eval(&y).unwrap();
            let g = spec.g.call(&y);
            (0..g.len()).map(|k| t.row(k)[c] * g[k]).sum()
        };
        let t_adj = -((tg([x[0] + h, x[1]], 0) - tg([x[0] - h, x[1]], 0)) / (2.0 * h)
            + (tg([x[0], x[1] + h], 1) - tg([x[0], x[1] - h], 1)) / (2.0 * h));
        let lhs = div + hr + sg + spec.f_coef.call(&x) * u(x);
        lhs - spec.f.call(&x) - t_adj
    }

    #[test]
    fn manufactured_data_satisfy_the_equation() {
        let pts: Vec<[f64; 2]> = vec![[0.3, 0.7], [0.55, 0.2], [0.81, 0.44], [0.12, 0.9]];
        for b in [Builtin::Poisson2d, Builtin::Grushin, Builtin::GrushinDrift] {
            let spec = b.spec(DEFAULT_SIGMA, DEFAULT_Q);
            for x in &pts {
                let r = fd_residual(&spec, *x);
                assert!(r.abs() < 1e-5, "{}: residual {r} at {x:?}", b.name());
            }
        }
        let g = grushin_linear_phi(DEFAULT_SIGMA, DEFAULT_Q);
        for x in &pts {
            assert!(fd_residual(&g, *x).abs() < 1e-5);
        }
    }

    #[test]
    fn names_round_trip() {
        for b in Builtin::ALL {
            assert_eq!(Builtin::from_name(b.name()), Some(b));
            assert!(b.spec(DEFAULT_SIGMA, DEFAULT_Q).validate().is_ok());
        }
        assert_eq!(Builtin::from_name("heat"), None);
    }
}
