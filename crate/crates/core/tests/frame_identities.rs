use std::f64::consts::TAU;

use flatlab_core::field::{ScalarField, TensorField, VectorField};
use flatlab_core::fuchsian::invariant::{random_vector, Invariance};
use flatlab_core::fuchsian::{bolza_generators, Word};
use flatlab_core::jet::CJet;
use flatlab_core::metric::{ConformalChart, Law, MetricFamily};
use flatlab_core::so2::*;
use flatlab_core::dynamics::OrbitPolyline;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

const CENTER: Complex64 = Complex64::new(-0.1, 1.1);
const RHO: f64 = 0.55;

fn rect() -> Rect {
    bump_support(CENTER, RHO)
}

fn charts() -> Vec<FrameOperatorSet> {
    vec![
        FrameOperatorSet::new(ConformalChart::half_plane()),
        FrameOperatorSet::new(perturbed_half_plane(0.05, Complex64::new(0.0, 1.0), 1.0)),
    ]
}

fn local_vector(c: Complex64, rho: f64, a: Complex64) -> VectorField {
    let b = flatlab_core::fuchsian::invariant::hyperbolic_bump(c, rho);
    VectorField::new(move |x, y| CJet::real(b.compose(x, y) * *y).mul_c(a.re, a.im))
}

#[test]
fn frame_fields_are_skew() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let f = random_function(&mut rng, 1, CENTER, RHO);
    let g = random_function(&mut rng, 1, CENTER, RHO);
    for ops in charts() {
        let r = rect();
        let pair = |a: &SphereBundleFunction, b: &SphereBundleFunction| pairing(&ops.chart, a, b, &r).unwrap();
        let skew = |a: Complex64, b: Complex64| (a + b).norm() / a.norm();
        let (xf, xg) = (ops.apply_x(&f).unwrap(), ops.apply_x(&g).unwrap());
        assert!(skew(pair(&xf, &g), pair(&f, &xg)) < 1e-7, "{}", ops.chart.name);
        let (pf, pg) = (ops.apply_xperp(&f).unwrap(), ops.apply_xperp(&g).unwrap());
        assert!(skew(pair(&pf, &g), pair(&f, &pg)) < 1e-7);
        assert!(skew(pair(&ops.apply_v(&f), &g), pair(&f, &ops.apply_v(&g))) < 1e-12);
        let (up, dn) = (ops.eta(&f, Ladder::Raise).unwrap(), ops.eta(&g, Ladder::Lower).unwrap());
        assert!(skew(pair(&up, &g), pair(&f, &dn)) < 1e-7);
    }
}

#[test]
fn fiber_linear_mode_equation() {
    let v = local_vector(CENTER, RHO, Complex64::new(0.7, -0.4));
    let grid = rect().grid(9);
    for ops in charts() {
        let r = mode_equation_check(&ops, &v, &grid).unwrap();
        assert!(r.off_modes < 1e-12, "{r:?}");
        assert!(r.ladder_vs_direct < 1e-10, "{r:?}");
        assert!(r.f2 < 1e-10 && r.f_minus2 < 1e-10 && r.f0 < 1e-10, "{r:?}");
        assert!(r.f0_vs_lie < 1e-10, "{r:?}");
        let u = fiber_linear_from_vector(&ops.chart, &v);
        assert!(u.reality_residual(&grid) < 1e-15);
        let (even, _) = flip_decompose(&u);
        assert!(even.modes().is_empty());
        let (_, odd) = flip_decompose(&ops.apply_x(&u).unwrap());
        assert!(odd.sup_norm(&grid) == 0.0);
    }
    let zero = mode_equation_check(&charts()[0], &VectorField::zero(), &grid).unwrap();
    assert_eq!(zero.max(), 0.0);
}

#[test]
fn dot_p_lives_in_even_modes() {
    let b = flatlab_core::fuchsian::invariant::hyperbolic_bump(CENTER, RHO);
    let h = TensorField::new(move |x, y| {
        let s = b.compose(x, y) * y.powi(-2);
        [s * 0.8, s * -0.3, s * 0.2 + 1.0]
    });
    let fam = MetricFamily::new(ConformalChart::half_plane(), Law::LinearTensor(h));
    let p = dot_p_function(&fam);
    let (_, odd) = flip_decompose(&p);
    assert!(odd.modes().is_empty());
    let n = 16;
    let mut fft = FftPlanner::new();
    let plan = fft.plan_fft_forward(n);
    for (x, y) in rect().grid(6) {
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(fam.dot_p(x, y, TAU * j as f64 / n as f64).unwrap(), 0.0))
            .collect();
        plan.process(&mut buf);
        for (k, c) in buf.iter().enumerate() {
            let m = if k < n / 2 { k as i32 } else { k as i32 - n as i32 };
            let c = c / n as f64;
            if [0, 2, -2].contains(&m) {
                assert!((c - p.coefficient_value(m, x, y)).norm() < 1e-13);
            } else {
                assert!(c.norm() < 1e-12, "mode {m}: {c}");
            }
        }
        let direct = fam.dot_p_mode_coeffs(x, y).unwrap();
        assert!((direct[1] - p.coefficient_value(2, x, y)).norm() < 1e-14);
    }
}

#[test]
fn xu_along_a_closed_geodesic() {
    let chart = ConformalChart::half_plane();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_vector(&mut rng, &Invariance::bolza());
    let u = fiber_linear_from_vector(&chart, &v);
    let ops = FrameOperatorSet::new(chart.clone());
    let xu = ops.apply_x(&u).unwrap();
    let g = bolza_generators();
    let orbit = OrbitPolyline::from_axis(&g.eval(&Word::parse("aB").unwrap()), 256, None).unwrap();
    let vals: Vec<f64> = orbit.points.iter().map(|p| u.eval(p.x, p.y, p.theta).re).collect();
    let du = flatlab_core::variation::spectral_derivative(&vals, orbit.period);
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (p, d) in orbit.points.iter().zip(&du) {
        let x = xu.eval(p.x, p.y, p.theta);
        assert!(x.im.abs() < 1e-12);
        err = err.max((x.re - d).abs());
        scale = scale.max(d.abs());
    }
    assert!(err < 1e-6 * scale.max(1.0), "{err:e} {scale:e}");
    let rep = flatlab_core::variation::xu_lie_identity_residual(&chart, &v, &orbit, 256).unwrap();
    assert!(rep.residual < 1e-6 * rep.scale.max(1.0));
}

#[test]
fn energy_identity_and_coercivity() {
    let a = bump_coefficient(CENTER, RHO, [Complex64::new(0.4, 1.0), Complex64::new(-0.2, 0.3), Complex64::new(0.1, 0.0)]);
    let hyp = FrameOperatorSet::new(ConformalChart::half_plane());
    for m in [1, 2, 3] {
        let e = energy_identity_residual(&hyp, &a, m, &rect()).unwrap();
        // the quadrature identity holds with the reversed bracket sign
        assert!(e.opposite_relative < 1e-6, "{e:?}");
        assert!(e.relative > 0.1, "{e:?}");
    }
    let flat = FrameOperatorSet::new(ConformalChart::flat(flatlab_core::metric::Domain::UpperHalfPlane));
    for m in [-1, 0, 2] {
        let e = energy_identity_residual(&flat, &a, m, &rect()).unwrap();
        assert!(e.relative < 1e-6, "{e:?}");
    }
    let var = FrameOperatorSet::new(perturbed_half_plane(0.05, CENTER, 1.0));
    let co = coercivity_check(&var, &a, 1, &rect()).unwrap();
    assert!(co.kappa0 > 0.0);
    assert!(co.opposite_holds && co.opposite_slack > 1e-6 * co.energy.norm_w, "{co:?}");
    assert!(!co.holds);
}

#[test]
fn base_functions_raise_to_mode_one() {
    let f = SphereBundleFunction::from_scalar(&ScalarField::new(|x, y| (*x * 2.0).sin() * *y));
    let ops = FrameOperatorSet::new(ConformalChart::half_plane());
    let up = ops.eta(&f, Ladder::Raise).unwrap();
    assert!(up.off_mode_residual(&[1], &rect().grid(5)) < MODE_TOL);
}
