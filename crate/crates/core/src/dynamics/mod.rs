//! Geodesic flow on the unit tangent bundle of a chart.
//!
//! Phase points carry the chart position and the Euclidean direction angle
//! of the velocity, which for conformal metrics coincides with the fiber
//! angle measured in the frame `e1 = e^{-φ}∂x`, `e2 = e^{-φ}∂y`. Arclength is
//! the independent variable.

pub mod closed;
pub mod jacobi;
pub mod orbit;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use closed::{fd_length_derivative, find_closed_geodesic, FinderOptions, FdDerivative};
pub use jacobi::{jacobi_monodromy, MonodromyMatrix};
pub use orbit::OrbitPolyline;

use crate::error::{Error, Result};
use crate::metric::{sym_form, Metric};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PhasePoint {
    /// Builds a point with the angle reduced to `[0, 2π)`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn state(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }
}

pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed difference `a - b` reduced to `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Unit tangent vector (coordinate components) at Euclidean angle `theta`.
pub fn unit_tangent<M: Metric + ?Sized>(metric: &M, x: f64, y: f64, theta: f64) -> Result<[f64; 2]> {
    let g = metric.tensor(x, y)?;
    let (s, c) = theta.sin_cos();
    let n = sym_form(&g, [c, s], [c, s]).sqrt();
    Ok([c / n, s / n])
}

/// Right-hand side `(ẋ, ẏ, θ̇)` of the unit-speed geodesic equation.
pub fn geodesic_rhs<M: Metric + ?Sized>(metric: &M, state: &[f64; 3]) -> Result<[f64; 3]> {
    let [x, y, th] = *state;
    let g = metric.tensor(x, y)?;
    let gam = metric.christoffel(x, y)?;
    let (s, c) = th.sin_cos();
    let n2 = sym_form(&g, [c, s], [c, s]);
    let n = n2.sqrt();
    let v = [c / n, s / n];
    let mut a = [0.0; 2];
    for (k, ak) in a.iter_mut().enumerate() {
        *ak = -(gam[k][0][0] * v[0] * v[0] + 2.0 * gam[k][0][1] * v[0] * v[1] + gam[k][1][1] * v[1] * v[1]);
    }
    let thdot = (v[0] * a[1] - v[1] * a[0]) * n2;
    Ok([v[0], v[1], thdot])
}

const A: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];

/// One fixed Dormand–Prince step (fifth-order solution). Takes `f(y)` and
/// returns the new state together with `f` at the new state.
pub fn dopri5_step<const N: usize, F>(f: &mut F, y: &[f64; N], k1: &[f64; N], h: f64) -> Result<([f64; N], [f64; N])>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 6];
    k[0] = *k1;
    for s in 1..6 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s - 1][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(&ys)?;
    }
    let mut out = *y;
    for (s, ks) in k.iter().enumerate() {
        if B[s] != 0.0 {
            for i in 0..N {
                out[i] += h * B[s] * ks[i];
            }
        }
    }
    let k_next = f(&out)?;
    Ok((out, k_next))
}

fn escape(err: Error, s: f64) -> Error {
    match err {
        Error::Domain { x, y } => Error::Escape { x, y, s },
        other => other,
    }
}

/// Integrates the geodesic flow for arclength `tau` in `steps` equal steps,
/// returning every intermediate state (unwrapped angles), `steps + 1` in all.
pub fn integrate_path<M: Metric + ?Sized>(metric: &M, z0: &PhasePoint, tau: f64, steps: usize) -> Result<Vec<[f64; 3]>> {
    let steps = steps.max(1);
    let h = tau / steps as f64;
    let mut f = |s: &[f64; 3]| geodesic_rhs(metric, s);
    let mut y = z0.state();
    let mut k = f(&y).map_err(|e| escape(e, 0.0))?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y);
    for i in 0..steps {
        let (ny, nk) = dopri5_step(&mut f, &y, &k, h).map_err(|e| escape(e, i as f64 * h))?;
        y = ny;
        k = nk;
        out.push(y);
    }
    Ok(out)
}

/// Advances `z0` along the unit-speed geodesic by arclength `tau`.
pub fn integrate_geodesic<M: Metric + ?Sized>(metric: &M, z0: &PhasePoint, tau: f64, steps: usize) -> Result<PhasePoint> {
    let steps = steps.max(1);
    let h = tau / steps as f64;
    let mut f = |s: &[f64; 3]| geodesic_rhs(metric, s);
    let mut y = z0.state();
    let mut k = f(&y).map_err(|e| escape(e, 0.0))?;
    for i in 0..steps {
        let (ny, nk) = dopri5_step(&mut f, &y, &k, h).map_err(|e| escape(e, i as f64 * h))?;
        y = ny;
        k = nk;
    }
    Ok(PhasePoint::new(y[0], y[1], y[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::mobius::half_plane_geodesic;
    use crate::metric::{ConformalChart, Domain};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn flat_motion_is_straight() {
        let c = ConformalChart::flat(Domain::Plane);
        let p = integrate_geodesic(&c, &PhasePoint::new(0.0, 0.0, 0.3), 2.0, 10).unwrap();
        assert_relative_eq!(p.x, 2.0 * 0.3f64.cos(), epsilon = 1e-14);
        assert_relative_eq!(p.y, 2.0 * 0.3f64.sin(), epsilon = 1e-14);
        assert_relative_eq!(p.theta, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn vertical_half_plane_geodesic() {
        let c = ConformalChart::half_plane();
        let p = integrate_geodesic(&c, &PhasePoint::new(0.0, 1.0, FRAC_PI_2), 1.0, 200).unwrap();
        assert!(p.x.abs() < 1e-14);
        assert_relative_eq!(p.y, 1f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(p.theta, FRAC_PI_2, epsilon = 1e-14);
    }

    #[test]
    fn generic_half_plane_geodesic_matches_closed_form() {
        let c = ConformalChart::half_plane();
        let z0 = PhasePoint::new(0.3, 0.8, 0.4);
        let path = integrate_path(&c, &z0, 3.0, 600).unwrap();
        // all points on one Euclidean circle centred on the real axis
        let (x1, y1, _) = half_plane_geodesic(0.3, 0.8, 0.4, 0.0);
        let center = x1 + y1 * 0.4f64.tan();
        let radius = (x1 - center).hypot(y1);
        for (i, st) in path.iter().enumerate() {
            assert!(((st[0] - center).hypot(st[1]) - radius).abs() < 1e-8);
            let (xe, ye, te) = half_plane_geodesic(0.3, 0.8, 0.4, 3.0 * i as f64 / 600.0);
            assert!((st[0] - xe).abs() < 1e-9 && (st[1] - ye).abs() < 1e-9);
            assert!(angle_diff(st[2], te).abs() < 1e-9);
        }
    }

    #[test]
    fn escape_reports_location() {
        let c = ConformalChart::flat(Domain::Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 });
        let r = integrate_geodesic(&c, &PhasePoint::new(0.0, 0.0, 0.0), 5.0, 50);
        assert!(matches!(r, Err(Error::Escape { .. })));
    }

    #[test]
    fn unit_speed_is_conserved() {
        let c = ConformalChart::half_plane();
        let path = integrate_path(&c, &PhasePoint::new(-0.2, 1.3, 1.1), 4.0, 800).unwrap();
        let h = 4.0 / 800.0;
        for w in path.windows(3).step_by(37) {
            let vx = (w[2][0] - w[0][0]) / (2.0 * h);
            let vy = (w[2][1] - w[0][1]) / (2.0 * h);
            let speed = vx.hypot(vy) / w[1][1];
            assert!((speed - 1.0).abs() < 1e-4);
        }
        // the integrated velocity is exactly unit length in g at every state
        for st in path.iter().step_by(50) {
            let v = geodesic_rhs(&c, st).unwrap();
            assert_relative_eq!(v[0].hypot(v[1]) / st[1], 1.0, epsilon = 1e-14);
        }
    }
}
