//! Krylov iterations: restarted GMRES and a Lanczos estimator for the
//! extreme eigenvalues of an operator that is self-adjoint in a weighted
//! inner product.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{dot, norm2};
use crate::{Error, Result};

/// Outcome of a GMRES run.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    /// Approximate solution.
    pub x: Vec<f64>,
    /// Total inner iterations.
    pub iterations: usize,
    /// Final residual `‖b − A x‖ / ‖b‖` (absolute when `b = 0`).
    pub relative_residual: f64,
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations.
///
/// Fails with [`Error::SolverFailure`] when `max_iter` inner iterations pass
/// without reaching `rel_tol`.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresOutcome> {
    let n = b.len();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let m = restart.max(1).min(n.max(1));
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta / bnorm <= rel_tol {
            return Ok(GmresOutcome {
                x,
                iterations: total,
                relative_residual: beta / bnorm,
            });
        }
        if total >= max_iter {
            return Err(Error::SolverFailure(alloc::format!(
                "GMRES reached {max_iter} iterations with relative residual {:e}",
                beta / bnorm
            )));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_done = 0;
        for j in 0..m {
            let mut w = apply(&basis[j]);
            let mut h = vec![0.0; j + 2];
            for i in 0..=j {
                h[i] = dot(&w, &basis[i]);
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= h[i] * vk;
                }
            }
            h[j + 1] = norm2(&w);
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = libm::hypot(h[j], h[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) };
            cs.push(c);
            sn.push(s);
            let hj1 = h[j + 1];
            h[j] = c * h[j] + s * hj1;
            h[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            hess.push(h);
            total += 1;
            k_done = j + 1;
            let happy = hj1 <= 1e-300;
            if !happy {
                basis.push(w.iter().map(|v| v / hj1).collect());
            }
            if g[j + 1].abs() / bnorm <= rel_tol * 0.5 || happy || total >= max_iter {
                break;
            }
        }
        // Back substitution on the triangular Hessenberg factor.
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_done {
                s -= hess[j][i] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&basis[j]) {
                *xk += yj * vk;
            }
        }
    }
}

/// Extreme Ritz values from a Lanczos run.
#[derive(Debug, Clone, Copy)]
pub struct RitzBounds {
    /// Smallest Ritz value.
    pub min: f64,
    /// Largest Ritz value.
    pub max: f64,
    /// Lanczos steps taken.
    pub steps: usize,
}

/// Lanczos with full reorthogonalization for an operator `B` self-adjoint in
/// the inner product `⟨x, y⟩ = x' G y`.
///
/// `apply` computes `B x`, `gram` computes `G x`. Stops at an invariant
/// subspace, after `max_steps`, or once both extreme Ritz values settle.
pub fn lanczos_extremes(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut gram: impl FnMut(&[f64]) -> Vec<f64>,
    start: &[f64],
    max_steps: usize,
) -> RitzBounds {
    let n = start.len();
    let mut v = start.to_vec();
    let mut gv = gram(&v);
    let nrm = libm::sqrt(dot(&v, &gv).max(0.0));
    if n == 0 || nrm == 0.0 {
        return RitzBounds {
            min: 0.0,
            max: 0.0,
            steps: 0,
        };
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    gv.iter_mut().for_each(|x| *x /= nrm);
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut gvs: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let steps = max_steps.min(n).max(1);
    let mut prev = (f64::NAN, f64::NAN);
    for k in 0..steps {
        let mut w = apply(&v);
        let a = dot(&w, &gv);
        alpha.push(a);
        vs.push(v.clone());
        gvs.push(gv.clone());
        // Two passes of full reorthogonalization in the G inner product.
        for _ in 0..2 {
            for (vi, gvi) in vs.iter().zip(&gvs) {
                let c = dot(&w, gvi);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= c * vk;
                }
            }
        }
        let gw = gram(&w);
        let b = libm::sqrt(dot(&w, &gw).max(0.0));
        let (lo, hi) = tridiagonal_extremes(&alpha, &beta);
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let settled = k >= 4 && (lo - prev.0).abs() <= 1e-14 * scale && (hi - prev.1).abs() <= 1e-14 * scale;
        prev = (lo, hi);
        if b <= 1e-12 * scale || settled || k + 1 == steps {
            return RitzBounds {
                min: lo,
                max: hi,
                steps: k + 1,
            };
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
        gv = gw.iter().map(|x| x / b).collect();
    }
    unreachable!("loop returns on its last step")
}

/// Extreme eigenvalues of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, by Sturm-sequence bisection.
pub fn tridiagonal_extremes(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let n = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = beta.get(i).map_or(0.0, |b| b.abs()) + if i > 0 { beta[i - 1].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // Number of eigenvalues strictly below `x`.
    let count_below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            d = alpha[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let bisect = |target: usize| {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(mid) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(0), bisect(n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Matrix;

    #[test]
    fn tridiagonal_extremes_of_laplacian() {
        let n = 20;
        let alpha = vec![2.0; n];
        let beta = vec![-1.0; n - 1];
        let (lo, hi) = tridiagonal_extremes(&alpha, &beta);
        let pi = core::f64::consts::PI;
        let exact = |k: usize| 2.0 - 2.0 * libm::cos(k as f64 * pi / (n as f64 + 1.0));
        assert!((lo - exact(1)).abs() < 1e-12);
        assert!((hi - exact(n)).abs() < 1e-12);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let a = Matrix::from_rows(&[&[4.0, 1.0, 0.0], &[-2.0, 5.0, 1.0], &[0.5, 0.0, 3.0]]);
        let b = [1.0, 2.0, 3.0];
        let out = gmres(|x| a.matvec(x), &b, None, 1e-12, 2, 100).unwrap();
        let exact = a.solve(&b).unwrap();
        for (p, q) in out.x.iter().zip(&exact) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_generalized_extremes() {
        // B = G^{-1} S with diagonal G and S: eigenvalues s_i / g_i.
        let s = [1.0, 4.0, 9.0, 2.0, 0.5];
        let g = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = lanczos_extremes(
            |x| x.iter().enumerate().map(|(i, v)| s[i] * v / g[i]).collect(),
            |x| x.iter().enumerate().map(|(i, v)| g[i] * v).collect(),
            &[1.0, 1.0, 1.0, 1.0, 1.0],
            50,
        );
        assert!((r.min - 0.1).abs() < 1e-12);
        assert!((r.max - 3.0).abs() < 1e-12);
    }
}
