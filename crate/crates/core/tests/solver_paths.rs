use subelliptic_core::analysis::{certify_shift, compute_constants, verify_shifted_coercivity, ConstantOptions};
use subelliptic_core::assembly::{apply_shift, assemble, qh1_norm};
use subelliptic_core::builtins::{self, Builtin, DEFAULT_Q, DEFAULT_SIGMA};
use subelliptic_core::mesh::{build_space, BoxDomain, DiscreteField};
use subelliptic_core::solver::{
    reduce_to_homogeneous, solve_dirichlet, solve_homogeneous, solve_lifted, uniqueness_harness, weak_residual, Route,
    SolveOptions,
};

fn space(b: Builtin, n: usize) -> subelliptic_core::mesh::DiscreteSpace {
    let cells = if b.dim() == 1 { vec![n] } else { vec![n, n] };
    build_space(&BoxDomain::unit(b.dim()), &cells, 3).unwrap()
}

fn rel_qh1(s: &subelliptic_core::mesh::DiscreteSpace, q: &subelliptic_core::qform::SymMatrixField, a: &DiscreteField, b: &DiscreteField) -> f64 {
    let diff: Vec<f64> = a.nodal_values().iter().zip(b.nodal_values()).map(|(x, y)| x - y).collect();
    let d = qh1_norm(s, &DiscreteField::new(s, diff).unwrap(), q).unwrap();
    d / qh1_norm(s, a, q).unwrap().max(1e-300)
}

#[test]
fn poisson2d_rates() {
    let spec = Builtin::Poisson2d.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let mut l2 = Vec::new();
    let mut semi = Vec::new();
    for n in [8, 16, 32] {
        let r = solve_homogeneous(&spec, &space(Builtin::Poisson2d, n), &SolveOptions::with_route(Route::Direct)).unwrap();
        l2.push(r.error_L2.unwrap());
        semi.push(r.error_qh1_seminorm.unwrap());
    }
    assert!((l2[1] / l2[2]).log2() > 1.8);
    assert!((semi[1] / semi[2]).log2() > 0.9);
}

#[test]
fn grushin_errors_decrease() {
    let spec = Builtin::Grushin.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            solve_homogeneous(&spec, &space(Builtin::Grushin, n), &SolveOptions::with_route(Route::Direct))
                .unwrap()
                .error_L2
                .unwrap()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 1.5);
    }
}

#[test]
fn drift_routes_agree_and_residual_is_small() {
    let spec = Builtin::GrushinDrift.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let s = space(Builtin::GrushinDrift, 12);
    let r = solve_homogeneous(&spec, &s, &SolveOptions::default()).unwrap();
    assert!(r.route_discrepancy.unwrap() <= 1e-8, "{:?}", r.route_discrepancy);
    assert!(r.fredholm_iterations <= 10 * r.dofs);
    assert!(r.linear_residual <= 1e-10);
    let (res, bn) = weak_residual(&spec, &s, &r.solution).unwrap();
    assert!(res <= 1e-9 * (1.0 + bn));
    let c = r.constants.unwrap();
    assert!(!c.coercive_fast_path && c.p > c.C_total);
}

#[test]
fn direct_route_is_shift_independent() {
    let spec = Builtin::GrushinDrift.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let s = space(Builtin::GrushinDrift, 8);
    let a = solve_homogeneous(
        &spec,
        &s,
        &SolveOptions {
            route: Route::Direct,
            shift_override: Some(3.0),
            ..SolveOptions::default()
        },
    )
    .unwrap();
    let b = solve_homogeneous(
        &spec,
        &s,
        &SolveOptions {
            route: Route::Direct,
            shift_override: Some(3000.0),
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert_eq!(a.solution.nodal_values(), b.solution.nodal_values());
}

#[test]
fn fredholm_route_is_shift_insensitive() {
    let spec = Builtin::GrushinDrift.spec(DEFAULT_SIGMA, DEFAULT_Q);
    let s = space(Builtin::GrushinDrift, 8);
    let run = |p| {
        solve_homogeneous(
            &spec,
            &s,
            &SolveOptions {
                route: Route::Fredholm,
                shift_override: Some(p),
                ..SolveOptions::default()
            },
        )
        .unwrap()
        .solution
    };
    assert!(rel_qh1(&s, &spec.q, &run(50.0), &run(5000.0)) < 1e-8);
}

#[test]
fn uniqueness_on_builtins() {
    for b in [Builtin::Poisson2d, Builtin::Grushin, Builtin::GrushinDrift] {
        let spec = b.spec(DEFAULT_SIGMA, DEFAULT_Q);
        let u = uniqueness_harness(&spec, &space(b, 8), &SolveOptions::default()).unwrap();
        assert!(u.passes, "{}", b.name());
    }
}

#[test]
fn shift_certificates() {
    for b in Builtin::ALL {
        let spec = b.spec(DEFAULT_SIGMA, DEFAULT_Q);
        let s = space(b, 8);
        let c = compute_constants(&spec, &s, ConstantOptions::default()).unwrap();
        assert_eq!(c.coercive_fast_path, !b.has_lower_order_terms());
        let sys = assemble(&spec, &s).unwrap();
        let (_, cert, doublings) = certify_shift(&sys, c.p).unwrap();
        assert!(cert.passes && cert.lambda_min > 0.0 && doublings <= 40);
        if c.coercive_fast_path {
            assert!(verify_shifted_coercivity(&apply_shift(&sys, 0.0)).unwrap().passes);
        }
    }
}

#[test]
fn reduction_matches_lifted_solve() {
    for spec in [
        builtins::poisson_linear_phi(DEFAULT_SIGMA, DEFAULT_Q),
        builtins::grushin_linear_phi(DEFAULT_SIGMA, DEFAULT_Q),
    ] {
        let s = build_space(&BoxDomain::unit(2), &[10, 10], 3).unwrap();
        let lifted = solve_lifted(&spec, &s).unwrap();
        for route in [Route::Direct, Route::Fredholm] {
            let r = solve_dirichlet(&spec, &s, &SolveOptions::with_route(route)).unwrap();
            assert!(rel_qh1(&s, &spec.q, &lifted, &r.solution) < 1e-8);
            let (res, bn) = weak_residual(&spec, &s, &r.solution).unwrap();
            assert!(res <= 1e-9 * (1.0 + bn));
        }
    }
}

#[test]
fn poisson_linear_phi_has_vanishing_homogeneous_part() {
    let spec = builtins::poisson_linear_phi(DEFAULT_SIGMA, DEFAULT_Q);
    let s = build_space(&BoxDomain::unit(2), &[6, 6], 3).unwrap();
    let r = solve_dirichlet(&spec, &s, &SolveOptions::with_route(Route::Direct)).unwrap();
    for (k, v) in r.solution.nodal_values().iter().enumerate() {
        assert!((v - s.node(k)[0]).abs() < 1e-12);
    }
    assert!(r.error_L2.unwrap() < 1e-12);
}

#[test]
fn reduced_tuple_is_subunit_and_sized() {
    let spec = builtins::grushin_linear_phi(DEFAULT_SIGMA, DEFAULT_Q);
    let s = build_space(&BoxDomain::unit(2), &[6, 6], 3).unwrap();
    let (red, _) = reduce_to_homogeneous(&spec, &s).unwrap();
    assert_eq!(red.t.count(), spec.n_data() + spec.n_drift() + 2);
    assert_eq!(red.g.len(), red.t.count());
    assert!(red.phi.is_none());
    let cert =
        subelliptic_core::qform::certify_tuple(&red.q, &red.t, s.quad_coords(), subelliptic_core::FORM_TOL).unwrap();
    assert!(cert.all_subunit());
}
