//! First variation of closed-geodesic lengths and the cohomological
//! identities behind it.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::dynamics::orbit::{line_integral, line_integral_sym, sym_on_unit_tangent, OrbitPolyline};
use crate::dynamics::{integrate_path, unit_tangent};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::fuchsian::invariant::{random_scalar, BumpSite, Invariance};
use crate::jet::{Jet, MAX_ORDER};
use crate::metric::{sym_form, ConformalChart, Law, Metric, MetricFamily};

/// `½ ∫ ḣ(T, T) ds` along a closed geodesic of the base metric.
pub fn first_variation_length(family: &MetricFamily, orbit: &OrbitPolyline) -> Result<f64> {
    Ok(0.5 * line_integral_sym(&family.base, orbit, |x, y| family.family_dot_metric(x, y))?)
}

/// `-∫ ṗ ds`.
pub fn dot_l_from_dot_p(family: &MetricFamily, orbit: &OrbitPolyline) -> Result<f64> {
    Ok(-line_integral(orbit, |p| family.dot_p(p.x, p.y, p.theta))?)
}

/// `∫ ṗ ds`, which vanishes for families of constant length.
pub fn gk_strip_residual(isofamily: &MetricFamily, orbit: &OrbitPolyline) -> Result<f64> {
    line_integral(orbit, |p| isofamily.dot_p(p.x, p.y, p.theta))
}

/// Lie derivative `ℒ_v g` of the conformal metric `g = e^{2φ}(dx² + dy²)`:
/// `e^{2φ} (2 v·∇φ δ_ij + ∂_i v^j + ∂_j v^i)`. Jets of the result carry at
/// most order `MAX_ORDER - 1`.
pub fn lie_derivative_metric(chart: &ConformalChart, v: &VectorField) -> TensorField {
    let phi = chart.phi.clone();
    let v = v.clone();
    TensorField::new(move |x, y| {
        let n = x.order().min(y.order()).min(MAX_ORDER - 1);
        let (x, y) = (x.truncate(n), y.truncate(n));
        let (x0, y0) = (x.value(), y.value());
        let p = phi.jet(x0, y0, n + 1);
        let vj = v.jet(x0, y0, n + 1);
        let sub = |j: Jet| j.substitute(&x, &y);
        let (px, py) = (sub(p.dx()), sub(p.dy()));
        let (v1, v2) = (sub(vj.re.truncate(n)), sub(vj.im.truncate(n)));
        let (v1x, v1y) = (sub(vj.re.dx()), sub(vj.re.dy()));
        let (v2x, v2y) = (sub(vj.im.dx()), sub(vj.im.dy()));
        let e2 = (sub(p.truncate(n)) * 2.0).exp();
        let div_part = (v1 * px + v2 * py) * 2.0;
        [e2 * (div_part + v1x * 2.0), e2 * (v2x + v1y), e2 * (div_part + v2y * 2.0)]
    })
}

/// Family with `∂_t g_t = ℒ_v g`, the first-order pullback of `g` by the
/// flow of `v`.
pub fn pullback_family(chart: &ConformalChart, v: &VectorField) -> MetricFamily {
    MetricFamily::new(chart.clone(), Law::LinearTensor(lie_derivative_metric(chart, v)))
}

/// `max |v|_g` over the orbit samples.
pub fn vector_scale(chart: &ConformalChart, v: &VectorField, orbit: &OrbitPolyline) -> Result<f64> {
    let mut m: f64 = 0.0;
    for p in &orbit.points {
        let g = chart.tensor(p.x, p.y)?;
        let vv = v.value(p.x, p.y);
        m = m.max(sym_form(&g, vv, vv).sqrt());
    }
    Ok(m)
}

/// Derivative of uniformly sampled periodic data by trigonometric
/// interpolation.
pub fn spectral_derivative(values: &[f64], period: f64) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
        if n % 2 == 0 && k == n / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, TAU * kk / period);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct XuReport {
    /// `max_s |du/ds - ½ (ℒ_v g)(T, T)|`.
    pub residual: f64,
    /// `max_s |du/ds|`.
    pub scale: f64,
}

/// Compares `d/ds g(v, T)` with `½ (ℒ_v g)(T, T)` on `samples` equally spaced
/// points of a closed geodesic.
pub fn xu_lie_identity_residual(
    chart: &ConformalChart,
    v: &VectorField,
    orbit: &OrbitPolyline,
    samples: usize,
) -> Result<XuReport> {
    if samples < 8 {
        return Err(Error::Precondition(format!("need at least 8 samples, got {samples}")));
    }
    let path = integrate_path(chart, &orbit.points[0], orbit.period, samples)?;
    let lie = lie_derivative_metric(chart, v);
    let mut u = Vec::with_capacity(samples);
    let mut rhs = Vec::with_capacity(samples);
    for s in &path[..samples] {
        let [x, y, th] = *s;
        let g = chart.tensor(x, y)?;
        let t = unit_tangent(chart, x, y, th)?;
        u.push(sym_form(&g, v.value(x, y), t));
        rhs.push(0.5 * sym_on_unit_tangent(&g, &lie.value(x, y), th));
    }
    let du = spectral_derivative(&u, orbit.period);
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in du.iter().zip(&rhs) {
        residual = residual.max((a - b).abs());
        scale = scale.max(a.abs());
    }
    Ok(XuReport { residual, scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// `g_t = e^{2tu} g` with `u` invariant.
    Conformal,
    /// `g_t = g + t (c g + h)` with a generic invariant symmetric tensor `h`.
    Tensor,
}

/// Invariant tensor `Σ B_k A_k / y²` with constant symmetric `A_k`.
pub fn random_tensor<R: Rng + ?Sized>(rng: &mut R, inv: &Invariance) -> TensorField {
    let n = rng.gen_range(1..=2);
    let mut parts: Vec<(ScalarField, [f64; 3])> = Vec::with_capacity(n);
    for _ in 0..n {
        let a = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        parts.push((BumpSite::random(rng).field(), a));
    }
    let local = TensorField::new(move |x, y| {
        let o = x.order().min(y.order());
        let w = y.powi(-2);
        let mut acc = [Jet::zero(o); 3];
        for (b, a) in &parts {
            let bw = b.compose(x, y) * w;
            for i in 0..3 {
                acc[i] += bw * a[i];
            }
        }
        acc
    });
    inv.tensor(&local)
}

/// The chart metric `e^{2φ} δ` as a tensor field.
pub fn metric_tensor(chart: &ConformalChart) -> TensorField {
    let phi = chart.phi.clone();
    TensorField::new(move |x, y| {
        let s = (phi.compose(x, y) * 2.0).exp();
        [s, Jet::zero(s.order()), s]
    })
}

pub fn random_family<R: Rng + ?Sized>(
    rng: &mut R,
    chart: &ConformalChart,
    inv: &Invariance,
    kind: FamilyKind,
) -> MetricFamily {
    let law = match kind {
        FamilyKind::Conformal => Law::ConformalExp(random_scalar(rng, inv, true)),
        FamilyKind::Tensor => {
            let c0 = rng.gen_range(0.2..0.5);
            Law::LinearTensor(random_tensor(rng, inv).add(&metric_tensor(chart).scale(c0)))
        }
    };
    MetricFamily::new(chart.clone(), law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::invariant::{killing_rotation, random_vector};
    use crate::fuchsian::{bolza_generators, systole, Word};
    use crate::metric::Domain;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn systolic() -> OrbitPolyline {
        let e = bolza_generators().eval(&Word::parse("a").unwrap());
        OrbitPolyline::from_axis(&e, 1024, None).unwrap()
    }

    #[test]
    fn homothety_and_metric_direction() {
        let o = systolic();
        let h = ConformalChart::half_plane();
        let fam = MetricFamily::new(h.clone(), Law::ConformalExp(ScalarField::constant(1.0)));
        assert_relative_eq!(first_variation_length(&fam, &o).unwrap(), systole(), max_relative = 1e-13);
        assert_relative_eq!(dot_l_from_dot_p(&fam, &o).unwrap(), systole(), max_relative = 1e-13);
        let g = TensorField::new(|_, y| {
            let s = y.powi(-2);
            [s, Jet::zero(s.order()), s]
        });
        let fam = MetricFamily::new(h, Law::LinearTensor(g));
        assert_relative_eq!(first_variation_length(&fam, &o).unwrap(), 0.5 * systole(), max_relative = 1e-13);
        assert_relative_eq!(dot_l_from_dot_p(&fam, &o).unwrap(), 0.5 * systole(), max_relative = 1e-13);
    }

    #[test]
    fn identity_chain_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inv = Invariance::bolza();
        let chart = ConformalChart::half_plane();
        let o = systolic();
        let h1 = random_tensor(&mut rng, &inv);
        let h2 = random_tensor(&mut rng, &inv);
        let f = |h: TensorField| MetricFamily::new(chart.clone(), Law::LinearTensor(h));
        let a = first_variation_length(&f(h1.clone()), &o).unwrap();
        let b = first_variation_length(&f(h2.clone()), &o).unwrap();
        let c = first_variation_length(&f(h1.scale(0.7).add(&h2.scale(-1.3))), &o).unwrap();
        assert!((c - (0.7 * a - 1.3 * b)).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
        assert!((a - dot_l_from_dot_p(&f(h1.clone()), &o).unwrap()).abs() < 1e-10 * (1.0 + a.abs()));
        let r = first_variation_length(&f(h1), &o.reversed()).unwrap();
        assert!((a - r).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn euler_field_doubles_flat_metric() {
        let flat = ConformalChart::flat(Domain::Plane);
        let v = VectorField::new(|x, y| crate::jet::CJet::new(*x, *y));
        let l = lie_derivative_metric(&flat, &v);
        let h = l.value(0.3, -0.8);
        assert_relative_eq!(h[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(h[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(h[2], 2.0, epsilon = 1e-14);
        let z = lie_derivative_metric(&flat, &VectorField::zero()).value(1.0, 2.0);
        assert_eq!(z, [0.0; 3]);
    }

    #[test]
    fn lie_derivative_jets_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chart = ConformalChart::half_plane();
        let v = random_vector(&mut rng, &Invariance::bolza());
        let l = lie_derivative_metric(&chart, &v);
        let (x, y) = (0.1, 1.2);
        let j = l.jet(x, y, 1);
        let e = 1e-5;
        for i in 0..3 {
            let fd = (l.value(x + e, y)[i] - l.value(x - e, y)[i]) / (2.0 * e);
            assert!((j[i].partial(1, 0) - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn coboundaries_integrate_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let chart = ConformalChart::half_plane();
        let o = systolic();
        for _ in 0..3 {
            let v = random_vector(&mut rng, &Invariance::bolza());
            let fam = pullback_family(&chart, &v);
            let scale = vector_scale(&chart, &v, &o).unwrap();
            assert!(gk_strip_residual(&fam, &o).unwrap().abs() < 1e-6 * scale.max(1e-3) * o.period);
            let xu = xu_lie_identity_residual(&chart, &v, &o, 1024).unwrap();
            assert!(xu.residual < 1e-6, "{xu:?}");
        }
        assert_eq!(gk_strip_residual(&pullback_family(&chart, &VectorField::zero()), &o).unwrap(), 0.0);
    }

    #[test]
    fn rotation_field_is_killing() {
        let chart = ConformalChart::half_plane();
        let o = systolic();
        let v = killing_rotation(Complex64::new(0.2, 1.3));
        let h = lie_derivative_metric(&chart, &v).value(0.4, 0.9);
        assert!(h.iter().all(|c| c.abs() < 1e-12));
        assert!(gk_strip_residual(&pullback_family(&chart, &v), &o).unwrap().abs() < 1e-8);
    }

    #[test]
    fn spectral_derivative_of_trig_data() {
        let n = 64;
        let l = 2.5;
        let vals: Vec<f64> = (0..n).map(|k| (TAU * 3.0 * k as f64 / n as f64).sin()).collect();
        let d = spectral_derivative(&vals, l);
        for (k, dv) in d.iter().enumerate() {
            let expect = TAU * 3.0 / l * (TAU * 3.0 * k as f64 / n as f64).cos();
            assert!((dv - expect).abs() < 1e-12);
        }
    }
}
