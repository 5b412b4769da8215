//! Linearized Poincaré maps from normal Jacobi fields.

use serde::Serialize;

use super::orbit::OrbitPolyline;
use super::{dopri5_step, geodesic_rhs};
use crate::error::{Error, Result};
use crate::metric::Metric;

/// Fundamental matrix of `J'' + K J = 0` over one period, acting on `(J, J')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonodromyMatrix {
    pub p: [[f64; 2]; 2],
    pub period: f64,
}

impl MonodromyMatrix {
    pub fn det(&self) -> f64 {
        self.p[0][0] * self.p[1][1] - self.p[0][1] * self.p[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.p[0][0] + self.p[1][1]
    }

    /// `|det(I - P)|`.
    pub fn det_i_minus(&self) -> f64 {
        (1.0 - self.trace() + self.det()).abs()
    }

    pub fn mul(&self, o: &MonodromyMatrix) -> MonodromyMatrix {
        let (a, b) = (self.p, o.p);
        let mut p = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                p[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        MonodromyMatrix { p, period: self.period + o.period }
    }

    pub fn pow(&self, m: usize) -> MonodromyMatrix {
        let mut acc = MonodromyMatrix { p: [[1.0, 0.0], [0.0, 1.0]], period: 0.0 };
        for _ in 0..m {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2.0
    }
}

/// Integrates the geodesic together with two normal Jacobi fields from the
/// orbit's first point over its period, using the orbit's own step.
pub fn jacobi_monodromy<M: Metric + ?Sized>(metric: &M, orbit: &OrbitPolyline) -> Result<MonodromyMatrix> {
    orbit.check(metric)?;
    let n = orbit.len().max(512);
    let h = orbit.period / n as f64;
    let mut f = |s: &[f64; 7]| -> Result<[f64; 7]> {
        let g = geodesic_rhs(metric, &[s[0], s[1], s[2]])?;
        let k = metric.curvature(s[0], s[1])?;
        Ok([g[0], g[1], g[2], s[4], -k * s[3], s[6], -k * s[5]])
    };
    let p0 = orbit.points[0];
    let mut y = [p0.x, p0.y, p0.theta, 1.0, 0.0, 0.0, 1.0];
    let mut k = f(&y)?;
    for _ in 0..n {
        let (ny, nk) = dopri5_step(&mut f, &y, &k, h)?;
        y = ny;
        k = nk;
    }
    let m = MonodromyMatrix { p: [[y[3], y[5]], [y[4], y[6]]], period: orbit.period };
    if !m.p.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::Precondition("non-finite Jacobi solution".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PhasePoint;
    use crate::fuchsian::{bolza_generators, det_weight_constant_curvature, Word};
    use crate::metric::{ConformalChart, Domain};
    use approx::assert_relative_eq;

    #[test]
    fn constant_negative_curvature() {
        let g = bolza_generators();
        let c = ConformalChart::half_plane();
        for w in ["a", "ab", "aB"] {
            let e = g.eval(&Word::parse(w).unwrap());
            let o = OrbitPolyline::from_axis(&e, 512, None).unwrap();
            let m = jacobi_monodromy(&c, &o).unwrap();
            assert!((m.det() - 1.0).abs() < 1e-10);
            assert!(m.is_hyperbolic());
            let expect = det_weight_constant_curvature(o.period).unwrap();
            assert_relative_eq!(m.det_i_minus(), expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn flat_shear() {
        let c = ConformalChart::flat(Domain::Plane);
        let l = 2.5;
        let n = 64;
        let points = (0..n).map(|k| PhasePoint::new(l * k as f64 / n as f64, 0.0, 0.0)).collect();
        let deck = crate::fuchsian::Mobius::from_raw([[1.0, l], [0.0, 1.0]]);
        let o = OrbitPolyline { points, period: l, deck: Some(deck), deck_word: None, t: 0.0 };
        let m = jacobi_monodromy(&c, &o).unwrap();
        assert_relative_eq!(m.p[0][1], l, epsilon = 1e-13);
        assert_relative_eq!(m.p[0][0], 1.0, epsilon = 1e-13);
        assert!(m.det_i_minus() < 1e-13);
    }
}
