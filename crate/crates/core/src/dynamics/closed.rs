//! Closed geodesics of perturbed metrics in a fixed deck class.
//!
//! Each continuation stage first minimizes the discrete energy of an
//! `M`-point polyline whose last segment ends at the deck image of the first
//! vertex, then polishes by shooting: the start point slides along a fixed
//! transversal, and start angle and period are adjusted until the flow maps
//! the start state onto its deck image.

use num_complex::Complex64;
use serde::Serialize;

use super::orbit::{OrbitPolyline, CLOSURE_TOL};
use super::{angle_diff, integrate_geodesic, integrate_path, PhasePoint};
use crate::error::{Error, Result};
use crate::fuchsian::mobius::Mobius;
use crate::metric::{Metric, MetricFamily};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinderOptions {
    /// Vertices of the discrete-energy polyline.
    pub energy_points: usize,
    /// Integration steps per period while shooting.
    pub steps: usize,
    /// Samples of the returned orbit.
    pub out_points: usize,
    pub cont_step: f64,
    pub max_iters: usize,
    /// Absolute closure tolerance of the shooting stage.
    pub tol: f64,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self { energy_points: 64, steps: 512, out_points: 1024, cont_step: 1e-2, max_iters: 40, tol: 1e-12 }
    }
}

fn deck_of(orbit: &OrbitPolyline) -> Mobius {
    orbit.deck.unwrap_or_else(Mobius::identity)
}

/// `½ Σ g_mid(Δ_k, Δ_k)` over the twisted polyline `c_0, ..., c_{M-1}, A c_0`.
pub fn discrete_energy<M: Metric + ?Sized>(metric: &M, pts: &[Complex64], deck: &Mobius) -> Result<f64> {
    let n = pts.len();
    let mut e = 0.0;
    for k in 0..n {
        let a = pts[k];
        let b = if k + 1 < n { pts[k + 1] } else { deck.apply(pts[0]) };
        let m = 0.5 * (a + b);
        let d = b - a;
        let g = metric.tensor(m.re, m.im)?;
        e += 0.5 * (g[0] * d.re * d.re + 2.0 * g[1] * d.re * d.im + g[2] * d.im * d.im);
    }
    Ok(e)
}

fn energy_gradient<M: Metric + ?Sized>(metric: &M, u: &[f64], deck: &Mobius) -> Result<Vec<f64>> {
    let n = u.len() / 2;
    let mut grad = vec![0.0; u.len()];
    let c0 = Complex64::new(u[0], u[1]);
    for k in 0..n {
        let (ax, ay) = (u[2 * k], u[2 * k + 1]);
        let (bx, by) = if k + 1 < n {
            (u[2 * k + 2], u[2 * k + 3])
        } else {
            let z = deck.apply(c0);
            (z.re, z.im)
        };
        let (mx, my) = (0.5 * (ax + bx), 0.5 * (ay + by));
        let (dx, dy) = (bx - ax, by - ay);
        let g = metric.tensor_jet(mx, my, 1)?;
        let gd = [g[0].value() * dx + g[1].value() * dy, g[1].value() * dx + g[2].value() * dy];
        // ¼ ∂_l g(Δ, Δ)
        let quad = |l: usize| {
            let (i, j) = if l == 0 { (1, 0) } else { (0, 1) };
            0.25 * (g[0].partial(i, j) * dx * dx + 2.0 * g[1].partial(i, j) * dx * dy + g[2].partial(i, j) * dy * dy)
        };
        let q = [quad(0), quad(1)];
        grad[2 * k] += -gd[0] + q[0];
        grad[2 * k + 1] += -gd[1] + q[1];
        let right = [gd[0] + q[0], gd[1] + q[1]];
        if k + 1 < n {
            grad[2 * k + 2] += right[0];
            grad[2 * k + 3] += right[1];
        } else {
            let d = deck.derivative(c0);
            grad[0] += d.re * right[0] + d.im * right[1];
            grad[1] += -d.im * right[0] + d.re * right[1];
        }
    }
    Ok(grad)
}

fn energy_of<M: Metric + ?Sized>(metric: &M, u: &[f64], deck: &Mobius) -> Result<f64> {
    let pts: Vec<Complex64> = u.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    discrete_energy(metric, &pts, deck)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Damped Newton–CG on the discrete energy with finite-difference
/// Hessian-vector products. The tangential motion of the first vertex is
/// frozen, which removes the near-null sliding mode; CG is preconditioned
/// with the 2×2 diagonal blocks `g(m_{k-1}) + g(m_k)`. Returns the
/// minimizing vertices.
pub fn minimize_energy<M: Metric + ?Sized>(
    metric: &M,
    start: &[Complex64],
    deck: &Mobius,
    max_iters: usize,
) -> Result<Vec<Complex64>> {
    let n = start.len();
    let mut u: Vec<f64> = start.iter().flat_map(|z| [z.re, z.im]).collect();
    let dim = u.len();
    let scale = norm_inf(&u).max(1.0);
    let mut e = energy_of(metric, &u, deck)?;
    let mut g0 = None;
    for _ in 0..max_iters {
        let tangent = {
            let prev = deck.inverse().apply(Complex64::new(u[dim - 2], u[dim - 1]));
            let d = Complex64::new(u[2], u[3]) - prev;
            d / d.norm()
        };
        let project = |v: &mut [f64]| {
            let a = v[0] * tangent.re + v[1] * tangent.im;
            v[0] -= a * tangent.re;
            v[1] -= a * tangent.im;
        };
        let mut g = energy_gradient(metric, &u, deck)?;
        project(&mut g);
        let gn = norm_inf(&g);
        let gn0 = *g0.get_or_insert(gn);
        // the polyline only seeds the shooting stage
        if gn < 1e-8 * scale || gn < 1e-7 * gn0 {
            break;
        }
        // block preconditioner
        let mut blocks = vec![[0.0; 3]; n];
        for k in 0..n {
            let a = Complex64::new(u[2 * k], u[2 * k + 1]);
            let b = if k + 1 < n { Complex64::new(u[2 * k + 2], u[2 * k + 3]) } else { deck.apply(Complex64::new(u[0], u[1])) };
            let m = 0.5 * (a + b);
            let gm = metric.tensor(m.re, m.im)?;
            for i in 0..3 {
                blocks[k][i] += gm[i];
                blocks[(k + 1) % n][i] += gm[i];
            }
        }
        let precond = |r: &[f64]| -> Vec<f64> {
            let mut z = vec![0.0; dim];
            for (k, b) in blocks.iter().enumerate() {
                let det = b[0] * b[2] - b[1] * b[1];
                z[2 * k] = (b[2] * r[2 * k] - b[1] * r[2 * k + 1]) / det;
                z[2 * k + 1] = (-b[1] * r[2 * k] + b[0] * r[2 * k + 1]) / det;
            }
            project(&mut z);
            z
        };
        let eps = 1e-6 * scale;
        let hv = |v: &[f64]| -> Result<Vec<f64>> {
            let s = eps / norm_inf(v);
            let up: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + s * b).collect();
            let um: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - s * b).collect();
            let gp = energy_gradient(metric, &up, deck)?;
            let gm = energy_gradient(metric, &um, deck)?;
            let mut out: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * s)).collect();
            project(&mut out);
            Ok(out)
        };
        // truncated preconditioned CG on H p = -g
        let forcing = 0.1f64.min((gn / gn0).sqrt());
        let mut p = vec![0.0; dim];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut z = precond(&r);
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let r0 = dot(&r, &r).sqrt();
        for it in 0..dim {
            let hd = hv(&d)?;
            let curv = dot(&d, &hd);
            if curv <= 0.0 {
                if it == 0 {
                    p = z.clone();
                }
                break;
            }
            let alpha = rz / curv;
            for i in 0..dim {
                p[i] += alpha * d[i];
                r[i] -= alpha * hd[i];
            }
            if dot(&r, &r).sqrt() <= forcing * r0 {
                break;
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..dim {
                d[i] = z[i] + beta * d[i];
            }
        }
        // backtracking on the energy
        let slope = dot(&g, &p);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            if let Ok(et) = energy_of(metric, &trial, deck) {
                if et <= e + 1e-4 * step * slope {
                    u = trial;
                    e = et;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(u.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

struct Shooting<'a, M: Metric + ?Sized> {
    metric: &'a M,
    deck: Mobius,
    base: Complex64,
    normal: Complex64,
    steps: usize,
}

impl<M: Metric + ?Sized> Shooting<'_, M> {
    fn start(&self, q: &[f64; 3]) -> PhasePoint {
        let z = self.base + self.normal * q[0];
        PhasePoint { x: z.re, y: z.im, theta: q[1] }
    }

    fn residual(&self, q: &[f64; 3]) -> Result<[f64; 3]> {
        let p0 = self.start(q);
        let end = integrate_geodesic(self.metric, &p0, q[2], self.steps)?;
        let z0 = Complex64::new(p0.x, p0.y);
        let target = self.deck.apply(z0);
        let ta = self.deck.apply_angle(z0, p0.theta);
        Ok([end.x - target.re, end.y - target.im, angle_diff(end.theta, ta)])
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

fn shoot<M: Metric + ?Sized>(
    metric: &M,
    deck: &Mobius,
    guess: PhasePoint,
    period: f64,
    opts: &FinderOptions,
) -> Result<(PhasePoint, f64)> {
    let sh = Shooting {
        metric,
        deck: *deck,
        base: Complex64::new(guess.x, guess.y),
        normal: Complex64::new(-guess.theta.sin(), guess.theta.cos()),
        steps: opts.steps,
    };
    let mut q = [0.0, guess.theta, period];
    let mut r = sh.residual(&q)?;
    let scale = guess.x.abs().max(guess.y.abs()).max(1.0) * (1.0 + deck.m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
    let tol = opts.tol * scale;
    let mut jac = None;
    let mut best = norm_inf(&r);
    for iter in 0..opts.max_iters {
        if best < tol {
            break;
        }
        if jac.is_none() || iter % 6 == 5 {
            let mut j = [[0.0; 3]; 3];
            for c in 0..3 {
                let hstep = 1e-7 * if c == 2 { q[2].max(1.0) } else { 1.0 };
                let mut qp = q;
                qp[c] += hstep;
                let rp = sh.residual(&qp)?;
                for row in 0..3 {
                    j[row][c] = (rp[row] - r[row]) / hstep;
                }
            }
            jac = Some(j);
        }
        let dq = solve3(jac.unwrap(), r).ok_or(Error::Convergence { iters: iter, residual: best })?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let trial = [q[0] - lambda * dq[0], q[1] - lambda * dq[1], q[2] - lambda * dq[2]];
            if let Ok(rt) = sh.residual(&trial) {
                let nt = norm_inf(&rt);
                if nt < best {
                    q = trial;
                    r = rt;
                    best = nt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            // refresh the Jacobian once before giving up
            if jac.is_some() && iter % 6 != 4 {
                jac = None;
                continue;
            }
            break;
        }
    }
    if best < tol.max(0.1 * CLOSURE_TOL) {
        Ok((sh.start(&q), q[2]))
    } else {
        Err(Error::Convergence { iters: opts.max_iters, residual: best })
    }
}

fn check_curvature<M: Metric + ?Sized>(metric: &M, pts: &[Complex64]) -> Result<()> {
    for z in pts {
        let k = metric.curvature(z.re, z.im)?;
        if !(k < 0.0) {
            return Err(Error::Model(format!("curvature {k:.3e} is not negative at ({}, {})", z.re, z.im)));
        }
    }
    Ok(())
}

fn solve_stage<M: Metric + ?Sized>(metric: &M, orbit: &OrbitPolyline, t: f64, opts: &FinderOptions) -> Result<OrbitPolyline> {
    let deck = deck_of(orbit);
    let n = orbit.len();
    let m = opts.energy_points.clamp(8, n);
    let start: Vec<Complex64> = (0..m)
        .map(|k| {
            let p = orbit.points[k * n / m];
            Complex64::new(p.x, p.y)
        })
        .collect();
    check_curvature(metric, &start)?;
    let verts = minimize_energy(metric, &start, &deck, 15)?;

    // shooting guess from the first vertex and its neighbours
    let prev = deck.inverse().apply(verts[m - 1]);
    let dir = verts[1] - prev;
    let c0 = verts[0];
    let len_guess: f64 = (0..m)
        .map(|k| {
            let a = verts[k];
            let b = if k + 1 < m { verts[k + 1] } else { deck.apply(verts[0]) };
            let mid = 0.5 * (a + b);
            let g = metric.tensor(mid.re, mid.im).unwrap_or([f64::NAN; 3]);
            let d = b - a;
            (g[0] * d.re * d.re + 2.0 * g[1] * d.re * d.im + g[2] * d.im * d.im).sqrt()
        })
        .sum();
    let len_guess = if len_guess.is_finite() { len_guess } else { orbit.period };
    let guess = PhasePoint { x: c0.re, y: c0.im, theta: dir.arg() };
    let (p0, period) = shoot(metric, &deck, guess, len_guess, opts)?;

    let path = integrate_path(metric, &p0, period, opts.out_points)?;
    let points = path[..opts.out_points].iter().map(|s| PhasePoint::new(s[0], s[1], s[2])).collect();
    Ok(OrbitPolyline { points, period, deck: orbit.deck, deck_word: orbit.deck_word.clone(), t })
}

/// Closed `g_t`-geodesic in the deck class of `seed`, continued from
/// `seed.t` in steps of at most `opts.cont_step`.
pub fn find_closed_geodesic(
    family: &MetricFamily,
    t: f64,
    seed: &OrbitPolyline,
    opts: &FinderOptions,
) -> Result<OrbitPolyline> {
    if seed.len() < 8 {
        return Err(Error::Precondition("seed needs at least 8 points".into()));
    }
    let g0 = family.at(seed.t);
    let deck = deck_of(seed);
    let last = seed.points[seed.len() - 1];
    let next = integrate_geodesic(&g0, &last, seed.step(), 1)?;
    let target = super::orbit::deck_apply(&deck, &seed.points[0]);
    let gap = (next.x - target.x).abs().max((next.y - target.y).abs());
    if !(gap < 1e-6 * target.y.abs().max(1.0)) {
        return Err(Error::Precondition(format!("seed is not closed under its deck element (gap {gap:.3e})")));
    }
    let stages = ((t - seed.t).abs() / opts.cont_step).ceil().max(1.0) as usize;
    let mut orbit = seed.clone();
    for k in 1..=stages {
        let tk = seed.t + (t - seed.t) * k as f64 / stages as f64;
        orbit = solve_stage(&family.at(tk), &orbit, tk, opts)?;
    }
    Ok(orbit)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdDerivative {
    /// Extrapolated (or plain central) derivative.
    pub value: f64,
    /// `|extrapolated - central|`, or the central step error proxy.
    pub error: f64,
    pub central: f64,
}

/// Central difference of `t ↦ L(t)` at `seed.t`, optionally with one
/// Richardson level using `±2δt`.
pub fn fd_length_derivative(
    family: &MetricFamily,
    seed: &OrbitPolyline,
    dt: f64,
    richardson: bool,
    opts: &FinderOptions,
) -> Result<FdDerivative> {
    let len = |s: f64| -> Result<f64> { Ok(find_closed_geodesic(family, seed.t + s * dt, seed, opts)?.period) };
    let d1 = (len(1.0)? - len(-1.0)?) / (2.0 * dt);
    if !richardson {
        return Ok(FdDerivative { value: d1, error: f64::NAN, central: d1 });
    }
    let d2 = (len(2.0)? - len(-2.0)?) / (4.0 * dt);
    let r = (4.0 * d1 - d2) / 3.0;
    Ok(FdDerivative { value: r, error: (r - d1).abs(), central: d1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::orbit::orbit_length;
    use crate::field::ScalarField;
    use crate::fuchsian::invariant::{random_scalar, Invariance};
    use crate::fuchsian::{bolza_generators, length_of, Word};
    use crate::metric::{ConformalChart, Law};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seed(w: &str) -> OrbitPolyline {
        let e = bolza_generators().eval(&Word::parse(w).unwrap());
        OrbitPolyline::from_axis(&e, 512, Some(w.into())).unwrap()
    }

    #[test]
    fn recovers_the_axis_at_zero() {
        let fam = MetricFamily::new(ConformalChart::half_plane(), Law::ConformalExp(ScalarField::zero()));
        let s = seed("aB");
        let o = find_closed_geodesic(&fam, 0.0, &s, &FinderOptions::default()).unwrap();
        assert_relative_eq!(o.period, length_of(&s.deck.unwrap()).unwrap(), max_relative = 1e-10);
        assert!(o.residuals(&fam.at(0.0)).unwrap().within_tolerance());
    }

    #[test]
    fn homothety_scales_length() {
        let fam = MetricFamily::new(ConformalChart::half_plane(), Law::ConformalExp(ScalarField::constant(1.0)));
        let s = seed("a");
        let o = find_closed_geodesic(&fam, 0.03, &s, &FinderOptions::default()).unwrap();
        assert_relative_eq!(o.period, s.period * 0.03f64.exp(), max_relative = 1e-10);
        for p in o.points.iter().step_by(64) {
            assert!(p.x.abs() < 1e-9);
        }
    }

    #[test]
    fn perturbed_orbit_is_a_local_energy_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_scalar(&mut rng, &Invariance::bolza(), true);
        let fam = MetricFamily::new(ConformalChart::half_plane(), Law::ConformalExp(u));
        let s = seed("a");
        let opts = FinderOptions::default();
        let o = find_closed_geodesic(&fam, 0.02, &s, &opts).unwrap();
        let g = fam.at(0.02);
        let r = o.residuals(&g).unwrap();
        assert!(r.within_tolerance(), "{r:?}");
        assert_relative_eq!(orbit_length(&g, &o).unwrap(), o.period, max_relative = 1e-10);
        let deck = o.deck.unwrap();
        let pts: Vec<Complex64> = o.points.iter().step_by(8).map(|p| Complex64::new(p.x, p.y)).collect();
        let e0 = discrete_energy(&g, &pts, &deck).unwrap();
        for k in 0..5 {
            let bumped: Vec<Complex64> = pts
                .iter()
                .enumerate()
                .map(|(i, z)| z + Complex64::new(0.0, 1e-3 * ((i * (k + 1)) as f64).sin()) * z.im)
                .collect();
            assert!(discrete_energy(&g, &bumped, &deck).unwrap() > e0);
        }
    }

    #[test]
    fn homothety_derivative() {
        let fam = MetricFamily::new(ConformalChart::half_plane(), Law::ConformalExp(ScalarField::constant(1.0)));
        let s = seed("a");
        let d = fd_length_derivative(&fam, &s, 1e-3, true, &FinderOptions::default()).unwrap();
        assert_relative_eq!(d.value, s.period, max_relative = 1e-8);
    }
}
