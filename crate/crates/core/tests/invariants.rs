use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subelliptic_core::analysis::{
    check_negativity, coercivity_shift, compute_constants, verify_shifted_coercivity, certify_shift, C5Provenance,
    ConstantInputs, ConstantOptions, SobolevConstant,
};
use subelliptic_core::assembly::{apply_shift, assemble, assemble_bilinear, discrete_bound_constant, product_rule_defect, qh1_norm};
use subelliptic_core::builtins::{self, grushin_form, Builtin, DEFAULT_Q, DEFAULT_SIGMA};
use subelliptic_core::dense::{dot, Matrix};
use subelliptic_core::mesh::{build_space, BoxDomain, DiscreteSpace};
use subelliptic_core::problem::{BoundaryValue, ProblemSpec, ScalarField, VectorData};
use subelliptic_core::qform::{
    comparability_constants, is_subunit, sqrt_psd, subunit_against, Comparability, SymMatrixField, VectorFieldTuple,
};
use subelliptic_core::solver::{reduce_to_homogeneous, solve_dirichlet, solve_homogeneous, weak_residual, Route, SolveOptions};
use subelliptic_core::FORM_TOL;

fn psd2(a: f64, b: f64, angle: f64) -> Matrix {
    let (c, s) = (angle.cos(), angle.sin());
    let u = Matrix::from_rows(&[&[c, -s], &[s, c]]);
    u.matmul(&Matrix::from_diag(&[a, b])).matmul(&u.transpose())
}

fn unit_square(n: usize) -> DiscreteSpace {
    build_space(&BoxDomain::unit(2), &[n, n], 3).unwrap()
}

fn brute_ratio(q: &Matrix, v: &[f64], directions: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..directions {
        let t = std::f64::consts::PI * k as f64 / directions as f64;
        let xi = [t.cos(), t.sin()];
        let num = dot(v, &xi).powi(2);
        let den = q.bilinear(&xi, &xi);
        worst = worst.max(if den > 0.0 { num / den } else if num > 0.0 { f64::INFINITY } else { 0.0 });
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subunit_verdict_matches_sampling(a in 0.05f64..3.0, b in 0.05f64..3.0, ang in 0.0f64..3.2,
                                        vx in -2.0f64..2.0, vy in -2.0f64..2.0) {
        let q = psd2(a, b, ang);
        let v = [vx, vy];
        let exact = subunit_against(&q, &v, 1e-12, &[0.0, 0.0]).unwrap();
        let brute = brute_ratio(&q, &v, 10_000);
        prop_assume!((brute - 1.0).abs() > 1e-3);
        prop_assert_eq!(exact.is_subunit, brute <= 1.0);
    }

    #[test]
    fn sqrt_round_trip(a in 0.0f64..5.0, b in 0.0f64..5.0, ang in 0.0f64..3.2) {
        let p = psd2(a, b, ang);
        let s = sqrt_psd(&p, FORM_TOL).unwrap();
        prop_assert!(s.is_symmetric(1e-14));
        prop_assert!(s.matmul(&s).add_scaled(-1.0, &p).max_abs() <= 1e-10 * (1.0 + p.max_abs()));
        prop_assert!(s.sym_eigen().min() >= -1e-12);
    }

    #[test]
    fn comparability_scales_linearly(alpha in 0.1f64..10.0, a in 0.2f64..3.0, b in 0.2f64..3.0) {
        let q = SymMatrixField::constant(psd2(1.0, 2.0, 0.3));
        let p = SymMatrixField::constant(psd2(a, b, 0.3));
        let pts: Vec<Vec<f64>> = vec![vec![0.1, 0.2], vec![0.5, 0.5]];
        let base = comparability_constants(&p, &q, pts.clone(), FORM_TOL).unwrap();
        let scaled = comparability_constants(&p.scaled(alpha), &q, pts, FORM_TOL).unwrap();
        let want: Comparability = base.scaled(alpha);
        prop_assert!((scaled.lower - want.lower).abs() <= 1e-12 * want.lower);
        prop_assert!((scaled.upper - want.upper).abs() <= 1e-12 * want.upper);
    }

    #[test]
    fn subunit_tuple_bound(x1 in 0.0f64..1.0, g1 in -3.0f64..3.0, g2 in -3.0f64..3.0,
                           t1 in 0.0f64..6.3, t2 in 0.0f64..6.3, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
        // Rows Q^{1/2} u with |u| ≤ 1 are subunit.
        let q = grushin_form().eval(&[x1, 0.5]).unwrap();
        let root = sqrt_psd(&q, FORM_TOL).unwrap();
        let rows: Vec<Vec<f64>> = [(t1, r1), (t2, r2)]
            .iter()
            .map(|&(t, r)| root.matvec(&[r * t.cos(), r * t.sin()]))
            .collect();
        for row in &rows {
            prop_assert!(is_subunit(&grushin_form(), row, &[x1, 0.5], 1e-10).unwrap().is_subunit);
        }
        let g = [g1, g2];
        let lhs: f64 = rows.iter().map(|r| dot(r, &g).powi(2)).sum();
        prop_assert!(lhs <= rows.len() as f64 * q.bilinear(&g, &g) + 1e-12);
    }

    #[test]
    fn product_rule_for_analytic_samples(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, a in -2.0f64..2.0) {
        let tuple = VectorFieldTuple::new(2, 2, |x| Matrix::from_rows(&[&[0.5, 0.5 * x[0]], &[0.0, x[0]]]));
        let u = (a * x1).sin() + x2 * x2;
        let gu = [a * (a * x1).cos(), 2.0 * x2];
        let v = (x1 * x2).exp();
        let gv = [x2 * v, x1 * v];
        // ∇(uv) computed by hand from the product.
        let guv = [gu[0] * v + u * gv[0], gu[1] * v + u * gv[1]];
        let defect = product_rule_defect(&tuple, &[x1, x2], u, &gu, v, &gv, &guv).unwrap();
        prop_assert!(defect <= 1e-12 * (1.0 + u.abs() + v.abs()) * 4.0);
    }

    #[test]
    fn constant_chain_is_deterministic(m in 0.0f64..5.0, c5 in 0.1f64..3.0, n in 0usize..4) {
        let inputs = ConstantInputs {
            comparability: Comparability { lower: 0.7, upper: 1.3 },
            c0: 1.0,
            c5: SobolevConstant { value: c5, provenance: C5Provenance::Given },
            sigma: 2.0,
            q: 7.0,
            m,
            n_tuple: n,
        };
        let a = coercivity_shift(&inputs, 10.0).unwrap();
        let b = coercivity_shift(&inputs, 10.0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.p.to_bits() == b.p.to_bits());
        if m == 0.0 { prop_assert_eq!(a.p, 0.0); } else { prop_assert!(a.p > a.C_total); }
    }
}

#[test]
fn adjoint_consistency_matches_direct_quadrature() {
    let space = unit_square(6);
    let spec = ProblemSpec::principal(BoxDomain::unit(2), grushin_form(), DEFAULT_SIGMA, DEFAULT_Q);
    let sys = assemble_bilinear(&spec, &space).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let u: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fu = space.field_from_interior(&u);
        let fv = space.field_from_interior(&v);
        let mut direct = 0.0;
        for qp in space.quad_points() {
            let (_, gu) = fu.at_quad(&qp);
            let (_, gv) = fv.at_quad(&qp);
            direct += qp.weight * spec.p.eval(&qp.x).unwrap().bilinear(&gv, &gu);
        }
        assert!((sys.a.bilinear(&v, &u) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}

#[test]
fn grushin_stiffness_matches_high_order_oracle() {
    // Independent oracle: tensor Gauss rule of order 6 with hat gradients written out by hand.
    let n = 4;
    let space = build_space(&BoxDomain::unit(2), &[n, n], 3).unwrap();
    let spec = ProblemSpec::principal(BoxDomain::unit(2), grushin_form(), DEFAULT_SIGMA, DEFAULT_Q);
    let sys = assemble_bilinear(&spec, &space).unwrap();
    let (pts, wts) = subelliptic_core::mesh::gauss_legendre_unit(6);
    let h = 1.0 / n as f64;
    let hat_grad = |node: [usize; 2], x: [f64; 2]| -> [f64; 2] {
        let cx = node[0] as f64 * h;
        let cy = node[1] as f64 * h;
        let (dx, dy) = (x[0] - cx, x[1] - cy);
        if dx.abs() >= h || dy.abs() >= h {
            return [0.0, 0.0];
        }
        let bx = 1.0 - dx.abs() / h;
        let by = 1.0 - dy.abs() / h;
        [-dx.signum() / h * by, -dy.signum() / h * bx]
    };
    let interior: Vec<[usize; 2]> = (1..n).flat_map(|j| (1..n).map(move |i| [i, j])).collect();
    for (r, &nj) in interior.iter().enumerate() {
        for (c, &ni) in interior.iter().enumerate() {
            let mut s = 0.0;
            for cy in 0..n {
                for cx in 0..n {
                    for (a, wa) in pts.iter().zip(&wts) {
                        for (b, wb) in pts.iter().zip(&wts) {
                            let x = [(cx as f64 + a) * h, (cy as f64 + b) * h];
                            let gi = hat_grad(ni, x);
                            let gj = hat_grad(nj, x);
                            s += wa * wb * h * h * (gj[0] * gi[0] + x[0] * x[0] * gj[1] * gi[1]);
                        }
                    }
                }
            }
            assert!((sys.principal.get(r, c) - s).abs() < 1e-12, "entry {r},{c}");
        }
    }
}

#[test]
fn boundedness_by_discrete_constant() {
    let space = unit_square(6);
    let spec = Builtin::GrushinDrift.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let sys = assemble_bilinear(&spec, &space).unwrap();
    let c = discrete_bound_constant(&sys).unwrap();
    assert!(c > 0.0 && c.is_finite());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let u: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nu = qh1_norm(&space, &space.field_from_interior(&u), &spec.q).unwrap();
        let nv = qh1_norm(&space, &space.field_from_interior(&v), &spec.q).unwrap();
        assert!(sys.a.bilinear(&v, &u).abs() <= c * nu * nv * (1.0 + 1e-10));
    }
}

#[test]
fn mass_matrix_is_positive() {
    let space = unit_square(5);
    let sys = assemble_bilinear(&Builtin::Grushin.spec(DEFAULT_SIGMA, DEFAULT_Q), &space).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let u: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(sys.mass.bilinear(&u, &u) > 0.0);
    }
    assert!(sys.mass.to_dense().sym_eigen().min() > 0.0);
}

#[test]
fn negativity_certificate_is_sound_on_the_cone() {
    let space = unit_square(6);
    let spec = Builtin::GrushinDrift.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let report = check_negativity(&spec, &space).unwrap();
    assert!(report.passes);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let w: Vec<f64> = (0..space.n_interior()).map(|_| rng.gen_range(0.0..1.0)).collect();
        // ℓ(w) by direct quadrature of F w + G (S·∇w).
        let field = space.field_from_interior(&w);
        let mut ell = 0.0;
        for qp in space.quad_points() {
            let (v, g) = field.at_quad(&qp);
            let x = &qp.x;
            let s = spec.s.eval(x).unwrap();
            let gc = spec.g_coef.call(x);
            let gs: f64 = (0..gc.len()).map(|k| gc[k] * dot(s.row(k), &g)).sum();
            ell += qp.weight * (spec.f_coef.call(x) * v + gs);
        }
        let l1: f64 = w.iter().sum();
        assert!(ell <= report.tolerance * l1);
    }
}

#[test]
fn shift_sufficiency_on_random_fields() {
    let space = unit_square(6);
    let spec = Builtin::GrushinDrift.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let sys = assemble(&spec, &space).unwrap();
    let (shifted, cert, _) = certify_shift(&sys, 0.0).unwrap();
    assert!(cert.passes);
    let sym = shifted.shifted.sym_part();
    let gram = shifted.qh1_gram();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let u: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(sym.bilinear(&u, &u) >= cert.lambda_min * gram.bilinear(&u, &u) - 1e-10);
    }
}

#[test]
fn fast_path_certifies_at_zero_shift() {
    for b in [Builtin::Poisson1d, Builtin::Poisson2d, Builtin::Grushin] {
        let spec = b.spec(DEFAULT_SIGMA, DEFAULT_Q);
        let cells = if b.dim() == 1 { vec![16] } else { vec![8, 8] };
        let space = build_space(&BoxDomain::unit(b.dim()), &cells, 3).unwrap();
        let c = compute_constants(&spec, &space, ConstantOptions::default()).unwrap();
        assert!(c.coercive_fast_path && c.p == 0.0);
        let sys = apply_shift(&assemble(&spec, &space).unwrap(), c.p);
        assert!(verify_shifted_coercivity(&sys).unwrap().passes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weak_residual_and_route_equivalence(fc in -3.0f64..0.0, gc in -1.0f64..1.0, hc in -1.0f64..1.0) {
        let space = unit_square(6);
        let mut spec = Builtin::GrushinDrift.spec(DEFAULT_SIGMA, DEFAULT_Q);
        spec.f_coef = ScalarField::constant(fc);
        spec.g_coef = VectorData::constant(vec![gc]);
        spec.h = VectorData::constant(vec![hc]);
        spec.exact = None;
        let r = solve_homogeneous(&spec, &space, &SolveOptions::default()).unwrap();
        let (res, bn) = weak_residual(&spec, &space, &r.solution).unwrap();
        prop_assert!(res <= 1e-9 * (1.0 + bn));
        prop_assert!(r.route_discrepancy.unwrap() <= 1e-8);
    }

    #[test]
    fn reduction_preserves_subunit_fields(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0) {
        let space = unit_square(5);
        let mut spec = builtins::grushin(DEFAULT_SIGMA, DEFAULT_Q);
        spec.phi = Some(BoundaryValue {
            value: ScalarField::new(move |x| c + a * x[0] + b * x[1] * x[1]),
            gradient: None,
        });
        let (red, _) = reduce_to_homogeneous(&spec, &space).unwrap();
        for x in space.quad_coords() {
            let rows = red.t.eval(&x).unwrap();
            for k in 0..red.t.count() {
                prop_assert!(is_subunit(&red.q, rows.row(k), &x, FORM_TOL).unwrap().is_subunit);
            }
        }
        let r = solve_dirichlet(&spec, &space, &SolveOptions::with_route(Route::Direct)).unwrap();
        let (res, bn) = weak_residual(&spec, &space, &r.solution).unwrap();
        prop_assert!(res <= 1e-9 * (1.0 + bn));
    }
}
