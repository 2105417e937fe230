use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tubeqer::fbi::holomorphy_residual;
use tubeqer::geometry::{apply_j, grad_rho, hamilton_field, kahler_potential, TangentVector, TubePoint};
use tubeqer::hypersurface::{admissible_check, corner_distance, f_value, HypersurfaceSpec, TrigPoly};
use tubeqer::qer::{cr_residual, r_identity_residual, symbol_a, tangent_basis, y_decomposition_residual};
use tubeqer::spectral::{make_shell_ensemble, EnsembleSpec, ModeSum};

const TAU: f64 = 2.0;

fn point() -> impl Strategy<Value = TubePoint> {
    (0.0..2.0 * PI, 0.0..2.0 * PI, -1.9..1.9f64, -1.9..1.9f64).prop_map(|(a, b, c, d)| TubePoint::torus([a, b], [c, d]))
}

fn vector() -> impl Strategy<Value = TangentVector> {
    prop::array::uniform4(-3.0..3.0f64).prop_map(|v| TangentVector::new(&v[..2], &v[2..]))
}

fn shell() -> impl Strategy<Value = ModeSum> {
    (prop::sample::select(vec![5i64, 25, 50, 65, 85]), any::<u64>())
        .prop_map(|(r2, seed)| make_shell_ensemble(&EnsembleSpec { dim: 2, r2, draws: 1, seed }).unwrap().remove(0))
}

fn surfaces() -> Vec<HypersurfaceSpec> {
    vec![
        HypersurfaceSpec::vertical(2, &[1, 0], 0.0).unwrap(),
        HypersurfaceSpec::vertical(2, &[1, 1], 0.5).unwrap(),
        HypersurfaceSpec::tilted(2, &[0.3, -0.2], 0.5).unwrap(),
        HypersurfaceSpec::tube_graph(2, 0.5, TrigPoly::cos_x1()).unwrap(),
    ]
}

/// A surface from the catalogue and a point on it with `|ξ|` bounded away from 0.
fn on_surface() -> impl Strategy<Value = (HypersurfaceSpec, TubePoint)> {
    (0..4usize, any::<u64>()).prop_map(|(i, seed)| {
        let s = surfaces().swap_remove(i);
        let p = s.sample_point(&mut ChaCha8Rng::seed_from_u64(seed), (0.2, 0.95 * TAU));
        (s, p)
    })
}

fn close(a: &TangentVector, b: &TangentVector, tol: f64) -> bool {
    a.sub(b).norm() <= tol * (1.0 + a.norm())
}

proptest! {
    #[test]
    fn gradient_norm_is_twice_the_potential(p in point()) {
        let g = grad_rho(&p);
        prop_assert!((g.dot(&g) - 2.0 * kahler_potential(&p)).abs() < 1e-14 * (1.0 + p.xi_norm2()));
    }

    #[test]
    fn j_is_an_isometric_complex_structure(v in vector(), w in vector()) {
        let (jv, jw) = (apply_j(&v), apply_j(&w));
        prop_assert!((jv.dot(&jw) - v.dot(&w)).abs() < 1e-12);
        prop_assert!(close(&apply_j(&jv), &v.scale(-1.0), 1e-15));
        prop_assert!(jv.dot(&v).abs() < 1e-12);
    }

    #[test]
    fn hamilton_field_of_rho_is_the_geodesic_flow(p in point()) {
        let h = hamilton_field(&grad_rho(&p));
        let expected = TangentVector::new(&p.xi[..2], &[0.0, 0.0]);
        prop_assert!(close(&h, &expected, 1e-15));
    }

    #[test]
    fn parseval_on_a_fine_grid(u in shell()) {
        let u = u.normalized();
        prop_assert!((u.l2_norm_sqr_trapezoid(40) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuation_restricts_to_u(u in shell(), x in prop::array::uniform2(0.0..2.0 * PI)) {
        let real = u.eval_u(&x);
        let cont = u.eval_u_complex(&TubePoint::torus(x, [0.0, 0.0]));
        prop_assert!((real - cont).norm() < 1e-13);
    }

    #[test]
    fn continuation_is_harmonic(u in shell(), p in point()) {
        prop_assert!(holomorphy_residual(&u, &p) < 1e-12);
    }

    #[test]
    fn frame_and_angles((s, p) in on_surface()) {
        let nu = s.normal(&p).unwrap();
        let x = apply_j(&nu);
        prop_assert!((x.norm() - 1.0).abs() < 1e-14);
        prop_assert!(x.dot(&nu).abs() < 1e-14);
        let (theta, phi) = s.angles(&p).unwrap();
        prop_assert!(admissible_check(theta, phi), "({theta}, {phi}) outside the diamond");
        let g = grad_rho(&p);
        let tangential = g.sub(&nu.scale(g.dot(&nu))).norm();
        prop_assert!((tangential - g.norm() * theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn exact_identities_hold(u in shell(), (s, p) in on_surface()) {
        prop_assert!(cr_residual(&u, &s, &p).unwrap() < 1e-11);
        prop_assert!(r_identity_residual(&u, &s, &p).unwrap() < 1e-11);
        prop_assert!(y_decomposition_residual(&u, &s, &p).unwrap() < 1e-11);
    }

    #[test]
    fn symbol_of_a_has_the_sign_structure(
        (s, p) in on_surface(),
        c in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let basis = tangent_basis(&s, &p).unwrap();
        let mut eta = TangentVector::zero(2);
        for (b, ci) in basis.iter().zip(&c) {
            eta = eta.add(&b.scale(*ci));
        }
        prop_assume!(eta.norm() > 1e-3);
        let eta = eta.normalized();
        let x = apply_j(&s.normal(&p).unwrap());
        let (theta, phi) = s.angles(&p).unwrap();
        let tangential = x.dot(&eta).powi(2) - 1.0;
        prop_assert!(tangential <= 1e-14);
        let expected = tangential + p.xi_norm2() * f_value(theta, phi);
        prop_assert!((symbol_a(&s, &p, &eta).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn f_is_negative_inside_the_diamond(theta in 0.0..PI, phi in 0.0..PI) {
        prop_assume!(admissible_check(theta, phi) && corner_distance(theta, phi) > 1e-6);
        prop_assert!(f_value(theta, phi) < 0.0);
    }
}

#[test]
fn f_vanishes_at_the_corners() {
    assert_eq!(f_value(FRAC_PI_2, 0.0), 0.0);
    assert_eq!(f_value(FRAC_PI_2, PI), 0.0);
}

#[test]
fn sign_scan_on_many_pairs() {
    use rand::RngExt;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let surfaces = surfaces();
    for i in 0..100_000 {
        let s = &surfaces[i % surfaces.len()];
        let p = s.sample_point(&mut rng, (0.2, 0.95 * TAU));
        let basis = tangent_basis(s, &p).unwrap();
        let mut eta = TangentVector::zero(2);
        for b in &basis {
            eta = eta.add(&b.scale(rng.random_range(-1.0..1.0)));
        }
        let eta = eta.normalized();
        let x = apply_j(&s.normal(&p).unwrap());
        let (theta, phi) = s.angles(&p).unwrap();
        let a = symbol_a(s, &p, &eta).unwrap();
        assert!(x.dot(&eta).powi(2) - 1.0 <= 1e-14);
        assert!(a <= x.dot(&eta).powi(2) - 1.0 + p.xi_norm2() * f_value(theta, phi) + 1e-12);
    }
}
