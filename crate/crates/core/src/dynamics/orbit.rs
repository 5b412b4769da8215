//! Closed orbits sampled at equal arclength.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use super::{angle_diff, geodesic_rhs, integrate_geodesic, PhasePoint};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::fuchsian::mobius::{length_of, Mobius};
use crate::metric::{sym_form, Metric, Sym2};

pub const CLOSURE_TOL: f64 = 1e-8;
pub const SPEED_TOL: f64 = 1e-8;
pub const GEO_TOL: f64 = 1e-6;

/// `N` samples `c(kL/N)`, `k = 0..N`, of a unit-speed closed orbit. With a
/// deck element `A` the orbit closes up to `A`: `c(s + L) = A c(s)`.
#[derive(Clone, Debug)]
pub struct OrbitPolyline {
    pub points: Vec<PhasePoint>,
    pub period: f64,
    pub deck: Option<Mobius>,
    pub deck_word: Option<String>,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitResiduals {
    pub closure: f64,
    pub speed: f64,
    pub geodesic: f64,
}

impl OrbitResiduals {
    pub fn within_tolerance(&self) -> bool {
        self.closure < CLOSURE_TOL && self.speed < SPEED_TOL && self.geodesic < GEO_TOL
    }
}

/// Image of a phase point under a deck transformation.
pub fn deck_apply(g: &Mobius, p: &PhasePoint) -> PhasePoint {
    let z = Complex64::new(p.x, p.y);
    let w = g.apply(z);
    PhasePoint::new(w.re, w.im, g.apply_angle(z, p.theta))
}

const STENCIL: [f64; 9] = [3.0, -32.0, 168.0, -672.0, 0.0, 672.0, -168.0, 32.0, -3.0];

impl OrbitPolyline {
    /// Exact samples of the axis of `e`, starting at the foot of the
    /// perpendicular from `i`.
    pub fn from_axis(e: &Mobius, n: usize, word: Option<String>) -> Result<Self> {
        let points = crate::fuchsian::axis_seed(e, n)?;
        Ok(Self { points, period: length_of(e)?, deck: Some(*e), deck_word: word, t: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.period / self.points.len() as f64
    }

    /// Sample `k` for any integer `k`, continued through the deck element.
    pub fn point(&self, k: isize) -> PhasePoint {
        let n = self.points.len() as isize;
        let (q, r) = (k.div_euclid(n), k.rem_euclid(n));
        let p = self.points[r as usize];
        match (&self.deck, q) {
            (_, 0) | (None, _) => p,
            (Some(a), q) if q > 0 => deck_apply(&a.pow(q as u32), &p),
            (Some(a), q) => deck_apply(&a.inverse().pow((-q) as u32), &p),
        }
    }

    /// The `m`-fold iterate, of period `mL` and deck element `A^m`.
    pub fn iterate(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Precondition("iterate exponent must be at least 1".into()));
        }
        let n = self.points.len() as isize;
        let points = (0..m as isize * n).map(|k| self.point(k)).collect();
        Ok(Self {
            points,
            period: self.period * m as f64,
            deck: self.deck.map(|a| a.pow(m as u32)),
            deck_word: self.deck_word.as_ref().map(|w| w.repeat(m)),
            t: self.t,
        })
    }

    /// The same orbit traversed backwards.
    pub fn reversed(&self) -> Self {
        let n = self.points.len() as isize;
        let points = (0..n)
            .map(|k| {
                let p = self.point(-k);
                PhasePoint::new(p.x, p.y, p.theta + PI)
            })
            .collect();
        Self {
            points,
            period: self.period,
            deck: self.deck.map(|a| a.inverse()),
            deck_word: self.deck_word.clone(),
            t: self.t,
        }
    }

    /// Eighth-order central differences `(ẋ, ẏ, θ̇)` at sample `k`.
    pub fn derivative(&self, k: usize) -> [f64; 3] {
        let h = self.step();
        let c = self.points[k];
        let mut d = [0.0; 3];
        for (j, w) in STENCIL.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let p = self.point(k as isize + j as isize - 4);
            d[0] += w * p.x;
            d[1] += w * p.y;
            d[2] += w * angle_diff(p.theta, c.theta);
        }
        d.map(|v| v / (840.0 * h))
    }

    pub fn residuals<M: Metric + ?Sized>(&self, metric: &M) -> Result<OrbitResiduals> {
        let n = self.points.len();
        let mut speed: f64 = 0.0;
        let mut geo: f64 = 0.0;
        for k in 0..n {
            let p = self.points[k];
            let d = self.derivative(k);
            let g = metric.tensor(p.x, p.y)?;
            speed = speed.max((sym_form(&g, [d[0], d[1]], [d[0], d[1]]) - 1.0).abs());
            let f = geodesic_rhs(metric, &p.state())?;
            for i in 0..3 {
                geo = geo.max((d[i] - f[i]).abs());
            }
        }
        let last = self.points[n - 1];
        let next = integrate_geodesic(metric, &last, self.step(), 1)?;
        let target = self.point(n as isize);
        let closure = (next.x - target.x).abs().max((next.y - target.y).abs()).max(angle_diff(next.theta, target.theta).abs());
        Ok(OrbitResiduals { closure, speed, geodesic: geo })
    }

    /// Errors unless all residuals are within tolerance.
    pub fn check<M: Metric + ?Sized>(&self, metric: &M) -> Result<OrbitResiduals> {
        let r = self.residuals(metric)?;
        if r.within_tolerance() {
            Ok(r)
        } else {
            Err(Error::Precondition(format!(
                "orbit residuals out of tolerance: closure {:.3e}, speed {:.3e}, geodesic {:.3e}",
                r.closure, r.speed, r.geodesic
            )))
        }
    }

    /// CSV dump with columns `s, x, y, theta`.
    pub fn to_csv(&self) -> String {
        let h = self.step();
        let mut out = String::from("s,x,y,theta\n");
        for (k, p) in self.points.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", k as f64 * h, p.x, p.y, p.theta);
        }
        out
    }
}

/// Periodic trapezoid rule `Σ f(c_k) L/N` along the orbit.
pub fn line_integral<F>(orbit: &OrbitPolyline, f: F) -> Result<f64>
where
    F: Fn(&PhasePoint) -> Result<f64>,
{
    let vals = orbit.points.iter().map(&f).collect::<Result<Vec<_>>>()?;
    Ok(crate::par::pairwise_sum(&vals) * orbit.step())
}

/// `∫ |ċ|_g ds` with velocities from eighth-order differences.
pub fn orbit_length<M: Metric + ?Sized>(metric: &M, orbit: &OrbitPolyline) -> Result<f64> {
    let vals = (0..orbit.len())
        .map(|k| {
            let p = orbit.points[k];
            let d = orbit.derivative(k);
            let g = metric.tensor(p.x, p.y)?;
            Ok(sym_form(&g, [d[0], d[1]], [d[0], d[1]]).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    let l = crate::par::pairwise_sum(&vals) * orbit.step();
    if l > 0.0 {
        Ok(l)
    } else {
        Err(Error::Precondition("degenerate orbit".into()))
    }
}

/// `h(T, T)` with `T` the `g`-unit vector at direction `theta`.
pub fn sym_on_unit_tangent(g: &Sym2, h: &Sym2, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    sym_form(h, [c, s], [c, s]) / sym_form(g, [c, s], [c, s])
}

/// `∫ h(T, T) ds` for a tensor given pointwise.
pub fn line_integral_sym<M, H>(metric: &M, orbit: &OrbitPolyline, h: H) -> Result<f64>
where
    M: Metric + ?Sized,
    H: Fn(f64, f64) -> Result<Sym2>,
{
    line_integral(orbit, |p| {
        let g = metric.tensor(p.x, p.y)?;
        Ok(sym_on_unit_tangent(&g, &h(p.x, p.y)?, p.theta))
    })
}

pub fn line_integral_h_tt<M: Metric + ?Sized>(metric: &M, h: &TensorField, orbit: &OrbitPolyline) -> Result<f64> {
    line_integral_sym(metric, orbit, |x, y| Ok(h.value(x, y)))
}
