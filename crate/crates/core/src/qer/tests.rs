use std::f64::consts::{FRAC_PI_2, PI};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hypersurface::{SurfaceResolution, TrigPoly};
use crate::spectral::{make_shell_ensemble, EnsembleSpec, Mode};

fn vertical() -> HypersurfaceSpec {
    HypersurfaceSpec::vertical(2, &[1, 0], 0.0).unwrap()
}

fn graph(delta: f64) -> HypersurfaceSpec {
    HypersurfaceSpec::tube_graph(2, delta, TrigPoly::cos_x1()).unwrap()
}

fn random_sum(rng: &mut ChaCha8Rng, r2: i64) -> ModeSum {
    let spec = EnsembleSpec { dim: 2, r2, draws: 1, seed: rng.random() };
    make_shell_ensemble(&spec).unwrap().remove(0)
}

/// A node of Σ with |ξ| < 1.5 drawn from the grid parametrization.
fn random_node(rng: &mut ChaCha8Rng, spec: &HypersurfaceSpec) -> TubePoint {
    let r: f64 = rng.random_range(0.2..1.5);
    let a: f64 = rng.random_range(0.0..TWO_PI);
    let x1: f64 = rng.random_range(0.0..TWO_PI);
    let x2: f64 = rng.random_range(0.0..TWO_PI);
    match &spec.kind {
        SurfaceKind::Vertical { .. } => TubePoint::torus([0.0, x2], [r * a.cos(), r * a.sin()]),
        SurfaceKind::Tilted { a: t, c } => {
            let xi = [r * a.cos(), r * a.sin()];
            TubePoint::torus([x1, t[0] * xi[0] + t[1] * xi[1] + c], xi)
        }
        SurfaceKind::TubeGraph { delta, g } => {
            let rr = (1.0 + delta * g.value(&[x1, x2])).sqrt();
            TubePoint::torus([x1, x2], [rr * a.cos(), rr * a.sin()])
        }
    }
}

#[test]
fn exact_identities_and_controls() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let surfaces = [vertical(), graph(0.5), HypersurfaceSpec::tilted(2, &[0.3, -0.2], 0.5).unwrap()];
    for _ in 0..60 {
        let u = random_sum(&mut rng, 25);
        for s in &surfaces {
            let p = random_node(&mut rng, s);
            assert!(s.value(&p).abs() < 1e-12);
            assert!(cr_residual(&u, s, &p).unwrap() < 1e-12);
            assert!(r_identity_residual(&u, s, &p).unwrap() < 1e-12);
            assert!(y_decomposition_residual(&u, s, &p).unwrap() < 1e-12);
        }
    }
    let u = ModeSum::new(0.2, 2, vec![Mode::new(&[3, 4], Complex64::new(1.0, 0.0))]).unwrap();
    let p = TubePoint::torus([0.0, 0.4], [0.6, 0.8]);
    assert!(cr_residual_with(&u, &vertical(), &p, Continuation::Anti).unwrap() > 0.1);
    assert!(r_identity_residual_with(&u, &vertical(), &p, Continuation::Anti).unwrap() > 0.1);
    assert!(r_identity_residual_with(&u, &vertical(), &p, Continuation::Trivial).unwrap() > 0.1);
}

#[test]
fn circle_identities() {
    let u = ModeSum::plane_wave(&[7]);
    let s = HypersurfaceSpec::vertical(1, &[1], 0.0).unwrap();
    for xi in [-1.2, -0.3, 0.5, 1.0] {
        let p = TubePoint::circle(0.0, xi);
        assert!(cr_residual(&u, &s, &p).unwrap() < 1e-13);
        assert!(r_identity_residual(&u, &s, &p).unwrap() < 1e-13);
    }
}

#[test]
fn y_closed_form_needs_sin_squared() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_sum(&mut rng, 25);
    let s = graph(0.5);
    let p = TubePoint::torus([1.0, 0.2], {
        let r = (1.0 + 0.5 * 1f64.cos()).sqrt();
        [r * 0.3f64.cos(), r * 0.3f64.sin()]
    });
    let (theta, _) = s.angles(&p).unwrap();
    assert!(theta > 0.05 && (theta - FRAC_PI_2).abs() > 0.05);
    assert!(y_decomposition_residual_with(&u, &s, &p, YForm::Corrected).unwrap() < 1e-12);
    assert!(y_decomposition_residual_with(&u, &s, &p, YForm::Displayed).unwrap() > 1e-3);
    // Vertical node with ξ = (0.6, 0.8): Y = ξ·∂_ξ and Yρ = |ξ|² = 1.
    let c = y_commutator_coefficient(FRAC_PI_2, (-0.6f64).acos(), 1.0, 0.05, YForm::Corrected);
    assert!((c - Complex64::new(-20.0, 0.0)).norm() < 1e-13);
    let (t, f) = vertical().angles(&TubePoint::torus([0.0, 0.0], [0.6, 0.8])).unwrap();
    assert!((t - FRAC_PI_2).abs() < 1e-15 && (f.cos() + 0.6).abs() < 1e-15);
}

fn fine(h: f64) -> SurfaceResolution {
    SurfaceResolution {
        periodic: 8,
        angle: ((40.0 / h.sqrt()) as usize).max(64),
        radial_width: 0.25 * h.sqrt(),
        radial_order: 12,
    }
}

#[test]
fn circle_cauchy_terms_match_hand_computation() {
    let k = 10;
    let h = 0.1;
    let u = ModeSum::plane_wave(&[k]);
    let model = ManifoldModel::new(1, 4.0).unwrap();
    let s = HypersurfaceSpec::vertical(1, &[1], 0.0).unwrap();
    let grid = SurfaceGrid::build(&s, &model, &fine(h)).unwrap();
    let l = cauchy_lhs(&u, &grid, |_| 1.0).unwrap();
    let [t1, t2, _] = l.scaled(h, 0);
    let root = (PI * h).sqrt();
    assert!((t1 - Complex64::new(-0.5 * h * root, 0.0)).norm() < 1e-10);
    assert!((t2 - Complex64::new(root, 0.0)).norm() < 1e-10);
    let zero = cauchy_lhs(&u, &grid, |_| 0.0).unwrap();
    assert!(zero.total.is_zero());
}

#[test]
fn torus_vertical_scaled_lhs() {
    let model = ManifoldModel::new(2, 3.0).unwrap();
    for m in [5i64, 10] {
        let h = 1.0 / m as f64;
        let u = ModeSum::plane_wave(&[m, 0]).normalized();
        let grid = SurfaceGrid::build(&vertical(), &model, &fine(h)).unwrap();
        let l = cauchy_lhs(&u, &grid, |_| 1.0).unwrap();
        let [_, _, total] = l.scaled(h, 2);
        assert!((total.re - 0.5 * (1.0 - h)).abs() < 1e-9, "m = {m}: {total}");
        let forms = ModeForms::compute(&[[m, 0]], h, &grid, Some(|_: &TubePoint| 1.0)).unwrap();
        let v = forms.member(&u).unwrap();
        assert!((v.term1 + v.term2 - total).norm() < 1e-9);
    }
    // Oblique mode: (2k̂₁² − 1 − h)/2.
    let u = ModeSum::plane_wave(&[3, 4]).normalized();
    let h = u.h();
    let grid = SurfaceGrid::build(&vertical(), &model, &fine(h)).unwrap();
    let [_, _, total] = cauchy_lhs(&u, &grid, |_| 1.0).unwrap().scaled(h, 2);
    assert!((total.re - 0.5 * (2.0 * 0.36 - 1.0 - h)).abs() < 1e-9, "{total}");
}

#[test]
fn forms_agree_with_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = ManifoldModel::torus();
    let u = random_sum(&mut rng, 25);
    let h = u.h();
    let ks: Vec<[i64; 2]> = u.terms().iter().map(|m| m.k).collect();
    for s in [vertical(), graph(0.5)] {
        let res = SurfaceResolution::for_h(h, &s);
        let grid = SurfaceGrid::build(&s, &model, &res).unwrap();
        let a = |p: &TubePoint| 1.0 + 0.5 * p.x[1].cos();
        let forms = ModeForms::compute(&ks, h, &grid, Some(a)).unwrap();
        let v = forms.member(&u).unwrap();
        let direct = cauchy_lhs(&u, &grid, a).unwrap().scaled(h, 2);
        assert!((v.term1 - direct[0]).norm() < 1e-9 * direct[2].norm());
        assert!((v.term2 - direct[1]).norm() < 1e-9 * direct[2].norm());
        let norm = restriction_norm(&u, &grid).unwrap();
        assert!((v.norm_sq.sqrt() - norm).abs() < 1e-10 * norm);
        let bare = restriction_norm_log_sq(&u, &grid, NormScale::Bare).unwrap();
        let weighted = weighted_norm_log(&u, &grid).unwrap();
        assert!((weighted - 1.0 / h - bare).abs() < 1e-11);
    }
}

#[test]
fn density_on_vertical() {
    let s = vertical();
    for a in [0.0f64, 0.4, 1.3, 2.9] {
        let p = TubePoint::torus([0.0, 1.0], [a.cos(), a.sin()]);
        let (q1, q2) = density_parts(&s, &p, 1.0).unwrap();
        let x = a.cos().powi(2);
        assert!((q1 + 16.0 * x).abs() < 1e-14 && (q2 - x).abs() < 1e-14);
    }
    assert!(density_q(&s, &TubePoint::torus([0.0, 0.0], [0.0, 1.0])).unwrap().abs() < 1e-15);
    assert!(matches!(density_q(&s, &TubePoint::torus([0.0, 0.0], [0.0, 0.9])), Err(Error::OffEnergyShell(_))));
    let grid = intersect_sphere_bundle(&s, &CurveResolution::default()).unwrap();
    let c = calibrate_b0_sq(&grid, |p| -15.0 * p.xi[0] * p.xi[0]).unwrap();
    assert!((c - B0_SQ).abs() < 1e-12);
}

#[test]
fn density_matches_finite_differences_on_graph() {
    let s = graph(0.5);
    let grid = intersect_sphere_bundle(&s, &CurveResolution { periodic: 8, angle: 8 }).unwrap();
    let beta = |q: &TubePoint| s.value(q) / s.grad(q).norm();
    let phi = |z: &TubePoint, y: &[f64; 2]| {
        // i((x − y − iξ')²/2 + |ξ'|²/2), real part of the derivative along ν.
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..2 {
            let d = Complex64::new(z.x[j] - y[j], -z.xi[j]);
            acc += d * d / 2.0 + z.xi[j] * z.xi[j] / 2.0;
        }
        Complex64::i() * acc
    };
    let eps = 1e-6;
    for node in grid.nodes.iter().step_by(5) {
        let p = node.p;
        let d = density_inputs(&s, &p, 1.0).unwrap();
        let mut q = p;
        q.xi = [-2.0 * p.xi[0], -2.0 * p.xi[1]];
        for j in 0..2 {
            let (mut a, mut b) = (q, q);
            a.x[j] += eps;
            b.x[j] -= eps;
            let fd = (beta(&a) - beta(&b)) / (2.0 * eps);
            assert!((fd - d.dx_beta[j]).abs() < 1e-7, "{fd} vs {}", d.dx_beta[j]);
        }
        let zp = q.shifted(&d.nu, eps);
        let zm = q.shifted(&d.nu, -eps);
        let fd = (phi(&zp, &p.x) - phi(&zm, &p.x)) / (2.0 * eps);
        assert!((fd.re - d.dphi_beta).abs() < 1e-7 && fd.im.abs() < 1e-7);
        let gb = s.grad(&p).scale(1.0 / s.grad(&p).norm());
        assert!((gb.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn rhs_values() {
    let s = vertical();
    let grid = intersect_sphere_bundle(&s, &CurveResolution::default()).unwrap();
    let one = qer_rhs(&grid, |_| 1.0).unwrap();
    assert!((one + 30.0 * PI * PI).abs() < 1e-9);
    let sq = qer_rhs(&grid, |p| p.xi[0] * p.xi[0]).unwrap();
    assert!((sq / one - 0.75).abs() < 1e-12);
    assert_eq!(qer_rhs(&grid, |p| if p.x[0] > 1.0 { 1.0 } else { 0.0 }).unwrap(), 0.0);
    let (ok, v) = general_position_check(&s, &CurveResolution::default()).unwrap();
    assert!(ok && v < 0.0);
    let (ok, _) = general_position_check_with(&grid, |p| p.xi[1]).unwrap();
    assert!(!ok);
    for t in [0.02, 0.05, 0.1] {
        let tilted = HypersurfaceSpec::tilted(2, &[t, t], 0.0).unwrap();
        let (ok, v) = general_position_check(&tilted, &CurveResolution::default()).unwrap();
        assert!(ok && v < 0.0);
    }
}

#[test]
fn defect_reference() {
    let s = vertical();
    let u = ModeSum::plane_wave(&[5, 0]);
    let v = qer_rhs_defect(&s, |_| 1.0, &u, 64).unwrap();
    assert!((v + 15.0 * TWO_PI).abs() < 1e-10);
    let w = qer_rhs_defect(&s, |_| 1.0, &ModeSum::plane_wave(&[0, 5]), 64).unwrap();
    assert!(w.abs() < 1e-12);
    // Equal weights on the 12-point shell reproduce the Liouville average exactly.
    let terms: Vec<Mode> =
        crate::spectral::shell_points(2, 25).iter().map(|k| Mode::new(k, Complex64::new(1.0, 0.0))).collect();
    let e = ModeSum::new(0.2, 2, terms).unwrap();
    let avg = qer_rhs_defect(&s, |_| 1.0, &e, 64).unwrap() / e.l2_norm_sqr();
    let grid = intersect_sphere_bundle(&s, &CurveResolution::default()).unwrap();
    let liou = qer_rhs(&grid, |_| 1.0).unwrap() / liouville_mass(2);
    assert!((avg - liou).abs() < 1e-12);
}

#[test]
fn symbols() {
    let s = graph(0.5);
    let p = TubePoint::torus([FRAC_PI_2, 0.3], [0.6, 0.8]);
    let (theta, phi) = s.angles(&p).unwrap();
    let fterm = f_value(theta, phi);
    assert!(fterm < 0.0);
    let zero = TangentVector::zero(2);
    assert!((symbol_a(&s, &p, &zero).unwrap() - fterm).abs() < 1e-15);
    let basis = tangent_basis(&s, &p).unwrap();
    assert_eq!(basis.len(), 3);
    assert!((symbol_a(&s, &p, &basis[0]).unwrap() - fterm).abs() < 1e-14);
    assert!((symbol_a(&s, &p, &basis[1]).unwrap() - (fterm - 1.0)).abs() < 1e-14);
    assert!(symbol_a(&s, &p, &s.normal(&p).unwrap()).is_err());
    let b = symbol_b(&s, &p, &zero).unwrap();
    assert!((b + theta.cos() * phi.cos()).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let q = random_node(&mut rng, &s);
        let bs = tangent_basis(&s, &q).unwrap();
        let mut eta = TangentVector::zero(2);
        for v in &bs {
            eta = eta.add(&v.scale(rng.random_range(-1.0..1.0)));
        }
        let (t, f) = s.angles(&q).unwrap();
        let sa = symbol_a(&s, &q, &eta).unwrap();
        assert!(sa - q.xi_norm2() * f_value(t, f) <= 1e-12);
    }
}

#[test]
fn ellipticity() {
    let res = CurveResolution { periodic: 32, angle: 64 };
    let e = ellipticity_scan(&graph(0.5), &res, 1.0, 8, 3, Some(0.1)).unwrap();
    assert!(e.max_sigma < 0.0 && (e.max_sigma - e.max_f_term).abs() < 1e-12);
    assert!(e.margin >= 0.5 * e.max_f_term.abs());
    let v = ellipticity_scan(&vertical(), &res, 0.0, 1, 1, None).unwrap();
    assert!(v.max_sigma.abs() < 1e-12);
    assert!(ellipticity_scan(&vertical(), &res, 1.0, 4, 2, Some(0.1)).is_err());
}

#[test]
fn chart_and_flow_out() {
    for s in [
        vertical(),
        HypersurfaceSpec::vertical(2, &[0, -1], 1.0).unwrap(),
        HypersurfaceSpec::tilted(2, &[0.3, -0.4], 0.2).unwrap(),
    ] {
        let chart = SigmaChart::new(&s).unwrap();
        let p = chart.embed(&[0.7, 0.3, -0.5]);
        assert!(s.value(&p).abs() < 1e-12);
        let g = s.grad(&p);
        let pb = chart.pullback(&g.dx, &g.dxi);
        assert!(pb.iter().all(|v| v.abs() < 1e-15));
        let set = flow_out_set(&s, &CurveResolution { periodic: 8, angle: 8 }, 5).unwrap();
        assert_eq!(set.points.len(), set.base.len() * 5);
        for fp in &set.points {
            let w = chart.w_duals(&fp.point.xi);
            assert!(fp.sigma_duals.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!((fp.point.xi_norm() - 1.0).abs() < 1e-12);
        }
        for fp in &set.base {
            assert_eq!(fp.t, 0.0);
            assert!(distance_to_w_sigma(&chart, &fp.sigma_coords, &fp.sigma_duals) < 1e-6);
        }
    }
    assert!(SigmaChart::new(&graph(0.5)).is_err());
    let chart = SigmaChart::new(&vertical()).unwrap();
    assert_eq!(chart.axes, vec![crate::fbi::Axis::X(1), crate::fbi::Axis::Xi(0), crate::fbi::Axis::Xi(1)]);
    assert_eq!(chart.w_duals(&[0.6, 0.8]), vec![0.8, 0.0, 0.0]);
}

#[test]
fn multiplier() {
    let s = vertical();
    let u = ModeSum::plane_wave(&[3, 4]);
    let one = multiplier_residual(&u, &s, &SeparableSymbol::one(3)).unwrap();
    assert!(one.residual < 1e-12);
    let sym = SeparableSymbol {
        terms: vec![SymbolTerm {
            coef: 1.0,
            position: vec![Profile::Cos { amp: 0.3, freq: 1.0 }, Profile::One, Profile::One],
            dual: vec![
                Profile::Bump { center: 0.0, radius: 2.5 },
                Profile::Bump { center: 0.0, radius: 2.0 },
                Profile::Gaussian { center: 0.0, width: 1.5 },
            ],
        }],
    };
    let mut last = f64::INFINITY;
    for s_ in [1i64, 2, 4, 8] {
        let u = ModeSum::plane_wave(&[3 * s_, 4 * s_]);
        let r = multiplier_residual(&u, &s, &sym).unwrap();
        assert!(r.residual < last, "{} !< {last}", r.residual);
        last = r.residual;
    }
    assert!(last < 0.1);
}

#[test]
fn sigma_wavefront_plumbing() {
    let model = ManifoldModel::torus();
    let h: f64 = 0.1;
    let u = ModeSum::plane_wave(&[6, 8]);
    let params = WfSigmaParams::for_h(h, model.tau());
    let c = wf_sigma_containment(&u, &vertical(), &model, &params).unwrap();
    assert!(c.stats.points > 0);
    assert!(c.stats.max_distance < 4.0 * h.sqrt(), "{}", c.stats.max_distance);
    assert!(c.max_shell_distance < 3.0 * h.sqrt());
}

#[test]
fn scaling_report_shape() {
    let model = ManifoldModel::torus();
    let fams: Vec<Vec<ModeSum>> =
        [8i64, 16, 32, 64].iter().map(|&m| vec![ModeSum::plane_wave(&[m, 0]).normalized()]).collect();
    let rep = scaling_experiment(
        &vertical(),
        &model,
        |_: &TubePoint| 1.0,
        &fams,
        |h| SurfaceResolution { periodic: 4, ..SurfaceResolution::for_h(h, &vertical()) },
        &CurveResolution::default(),
        ScalingOptions { lhs: true, defect: true },
    )
    .unwrap();
    assert_eq!(rep.rows.len(), 4);
    assert!(rep.rows.windows(2).all(|w| w[0].h > w[1].h));
    for r in &rep.rows {
        // The ξ cutoff at τ = 2 costs about e^{−1/h}.
        let tol = (2.0 * (-1.0 / r.h).exp()).max(1e-12);
        assert!((r.scaled_lhs.re - 0.5 * (1.0 - r.h)).abs() < tol, "{r:?}");
        assert!((r.rhs_defect.unwrap() + 15.0 / TWO_PI).abs() < 1e-10);
        assert!((r.norm_mean - std::f64::consts::FRAC_1_SQRT_2).abs() < tol);
    }
    let fit = rep.fits.norm.as_ref().unwrap();
    assert!(fit.slope.abs() < 1e-3);
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 5);
}
