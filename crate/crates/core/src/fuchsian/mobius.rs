//! Orientation-preserving isometries of the upper half-plane.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::CJet;

pub const DET_TOL: f64 = 1e-9;

/// Double-double scalar used to accumulate long matrix products.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn mul_f64(self, v: f64) -> Dd {
        self.mul(Dd::new(v))
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul_f64(q2));
        let q3 = r.hi / o.hi;
        Dd::new(q1).add(Dd::new(q2)).add(Dd::new(q3))
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let s = self.hi.sqrt();
        // one Newton step in double-double
        let r = self.sub(Dd::new(s).mul(Dd::new(s)));
        Dd::new(s).add(Dd::new(r.hi / (2.0 * s)))
    }
}

/// 2×2 matrix over [`Dd`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdMat(pub [[Dd; 2]; 2]);

impl DdMat {
    pub fn identity() -> Self {
        DdMat([[Dd::new(1.0), Dd::ZERO], [Dd::ZERO, Dd::new(1.0)]])
    }

    pub fn mul(&self, o: &DdMat) -> DdMat {
        let a = &self.0;
        let b = &o.0;
        let e = |i: usize, j: usize| a[i][0].mul(b[0][j]).add(a[i][1].mul(b[1][j]));
        DdMat([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    /// Inverse of a determinant-one matrix.
    pub fn inverse(&self) -> DdMat {
        let m = &self.0;
        DdMat([[m[1][1], m[0][1].neg()], [m[1][0].neg(), m[0][0]]])
    }

    pub fn trace(&self) -> Dd {
        self.0[0][0].add(self.0[1][1])
    }

    pub fn to_mobius(&self) -> Mobius {
        let m = &self.0;
        Mobius::from_raw([[m[0][0].to_f64(), m[0][1].to_f64()], [m[1][0].to_f64(), m[1][1].to_f64()]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub m: [[f64; 2]; 2],
    pub tol: f64,
}

/// Classification by trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// The oriented axis of a hyperbolic element, parametrized by arclength.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    /// `x = xi`, `y = exp(dir * s)`.
    Vertical { xi: f64, dir: f64 },
    /// `x = center + dir * radius * tanh(s)`, `y = radius / cosh(s)`.
    Circle { center: f64, radius: f64, dir: f64 },
}

impl Axis {
    pub fn point(&self, s: f64) -> Complex64 {
        match *self {
            Axis::Vertical { xi, dir } => Complex64::new(xi, (dir * s).exp()),
            Axis::Circle { center, radius, dir } => {
                Complex64::new(center + dir * radius * s.tanh(), radius / s.cosh())
            }
        }
    }

    /// Euclidean direction angle of the unit tangent at parameter `s`.
    pub fn angle(&self, s: f64) -> f64 {
        match *self {
            Axis::Vertical { dir, .. } => {
                if dir > 0.0 {
                    std::f64::consts::FRAC_PI_2
                } else {
                    -std::f64::consts::FRAC_PI_2
                }
            }
            Axis::Circle { dir, .. } => {
                let sech = 1.0 / s.cosh();
                (-s.tanh() * sech).atan2(dir * sech * sech)
            }
        }
    }

    /// Parameter of the axis point closest to `p`.
    pub fn foot(&self, p: Complex64) -> f64 {
        match *self {
            Axis::Vertical { xi, dir } => {
                // the perpendicular from p is the circle about xi through p
                let r = (p - Complex64::new(xi, 0.0)).norm();
                dir * r.ln()
            }
            Axis::Circle { center, radius, dir } => {
                // send the axis to the imaginary axis with endpoints
                // r_ = start (s = -inf) -> 0 and a = end -> inf
                let r_ = center - dir * radius;
                let a = center + dir * radius;
                let t = |z: Complex64| (z - r_) / (a - z) * dir.signum();
                let w = t(p);
                let foot_w = Complex64::new(0.0, w.norm());
                // invert t: z = (r_ + a w') / (1 + w') with w' = dir * w
                let wp = foot_w * dir.signum();
                let z = (wp * a + r_) / (wp + 1.0);
                let ratio = ((z.re - center) / (dir * radius)).clamp(-1.0 + 1e-16, 1.0 - 1e-16);
                ratio.atanh()
            }
        }
    }
}

impl Mobius {
    pub fn from_raw(m: [[f64; 2]; 2]) -> Self {
        Self { m, tol: DET_TOL }
    }

    pub fn new(m: [[f64; 2]; 2]) -> Result<Self> {
        let e = Self::from_raw(m);
        if (e.det() - 1.0).abs() >= e.tol {
            return Err(Error::Precondition(format!("determinant {} is not 1", e.det())));
        }
        Ok(e)
    }

    pub fn identity() -> Self {
        Self::from_raw([[1.0, 0.0], [0.0, 1.0]])
    }

    /// Diagonal element `diag(e^{λ}, e^{-λ})`.
    pub fn diagonal(lambda: f64) -> Self {
        Self::from_raw([[lambda.exp(), 0.0], [0.0, (-lambda).exp()]])
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn mul(&self, o: &Mobius) -> Mobius {
        let a = &self.m;
        let b = &o.m;
        Mobius::from_raw([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    pub fn inverse(&self) -> Mobius {
        let m = &self.m;
        Mobius::from_raw([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn pow(&self, n: u32) -> Mobius {
        (0..n).fold(Mobius::identity(), |acc, _| acc.mul(self))
    }

    pub fn conjugate_by(&self, g: &Mobius) -> Mobius {
        g.mul(self).mul(&g.inverse())
    }

    pub fn kind(&self) -> Kind {
        let t = self.trace().abs();
        if t > 2.0 + self.tol {
            Kind::Hyperbolic
        } else if t < 2.0 - self.tol {
            Kind::Elliptic
        } else {
            Kind::Parabolic
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.kind() == Kind::Hyperbolic
    }

    /// Representative with nonnegative trace (the same map of the plane).
    pub fn normalized(&self) -> Mobius {
        if self.trace() < 0.0 {
            Mobius::from_raw(self.m.map(|r| r.map(|v| -v)))
        } else {
            *self
        }
    }

    /// Max-norm distance between the maps, up to the sign ambiguity.
    pub fn dist(&self, o: &Mobius) -> f64 {
        let mut plus: f64 = 0.0;
        let mut minus: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                plus = plus.max((self.m[i][j] - o.m[i][j]).abs());
                minus = minus.max((self.m[i][j] + o.m[i][j]).abs());
            }
        }
        plus.min(minus)
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let m = &self.m;
        (z * m[0][0] + m[0][1]) / (z * m[1][0] + m[1][1])
    }

    /// Complex derivative `1/(cz + d)²`.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let d = z * self.m[1][0] + self.m[1][1];
        (d * d).inv()
    }

    /// Image of a Euclidean direction angle at `z`.
    pub fn apply_angle(&self, z: Complex64, theta: f64) -> f64 {
        let d = z * self.m[1][0] + self.m[1][1];
        theta - 2.0 * d.arg()
    }

    pub fn apply_jet(&self, z: &CJet) -> CJet {
        let m = &self.m;
        let order = z.order();
        let num = z.scale(m[0][0]) + CJet::constant(m[0][1], 0.0, order);
        let den = z.scale(m[1][0]) + CJet::constant(m[1][1], 0.0, order);
        num / den
    }

    /// Jet of `1/(cz + d)²`.
    pub fn derivative_jet(&self, z: &CJet) -> CJet {
        let den = z.scale(self.m[1][0]) + CJet::constant(self.m[1][1], 0.0, z.order());
        (den * den).recip()
    }

    pub fn translation_length(&self) -> Result<f64> {
        length_of(self)
    }

    pub fn axis(&self) -> Result<Axis> {
        if !self.is_hyperbolic() {
            return Err(Error::NotHyperbolic { trace: self.trace() });
        }
        let n = self.normalized();
        let [[a, b], [c, d]] = n.m;
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
        if c.abs() <= 1e-14 * scale {
            // fixed points xi = b/(d - a) and infinity; infinity attracts when a > d
            let xi = b / (d - a);
            let dir = if a > d { 1.0 } else { -1.0 };
            return Ok(Axis::Vertical { xi, dir });
        }
        let disc = ((a + d) * (a + d) - 4.0).sqrt();
        let z1 = ((a - d) + disc) / (2.0 * c);
        let z2 = ((a - d) - disc) / (2.0 * c);
        // attracting fixed point has |cz + d| > 1
        let (rep, att) = if (c * z1 + d).abs() > 1.0 { (z2, z1) } else { (z1, z2) };
        let center = 0.5 * (rep + att);
        let radius = 0.5 * (att - rep).abs();
        let dir = (att - rep).signum();
        Ok(Axis::Circle { center, radius, dir })
    }
}

/// Translation length `2 arccosh(|tr|/2)` of a hyperbolic element.
pub fn length_of(e: &Mobius) -> Result<f64> {
    length_from_trace(e.trace())
}

pub fn length_from_trace(trace: f64) -> Result<f64> {
    let t = trace.abs();
    if !(t > 2.0) {
        return Err(Error::NotHyperbolic { trace });
    }
    Ok(2.0 * (0.5 * t).acosh())
}

/// Hyperbolic distance in the upper half-plane.
pub fn hyp_cosh_dist(z: Complex64, w: Complex64) -> f64 {
    1.0 + (z - w).norm_sqr() / (2.0 * z.im * w.im)
}

pub fn hyp_dist(z: Complex64, w: Complex64) -> f64 {
    hyp_cosh_dist(z, w).acosh()
}

/// Exact unit-speed geodesic of the half-plane from `(x, y)` with Euclidean
/// direction angle `theta`, evaluated at arclength `s`.
pub fn half_plane_geodesic(x: f64, y: f64, theta: f64, s: f64) -> (f64, f64, f64) {
    let sy = y.sqrt();
    let m = Mobius::from_raw([[sy, x / sy], [0.0, 1.0 / sy]]);
    let psi = 0.5 * (theta - std::f64::consts::FRAC_PI_2);
    let (sn, cs) = psi.sin_cos();
    let k = Mobius::from_raw([[cs, sn], [-sn, cs]]);
    let g = m.mul(&k);
    let w = Complex64::new(0.0, s.exp());
    let z = g.apply(w);
    let th = g.apply_angle(w, std::f64::consts::FRAC_PI_2);
    (z.re, z.im, th)
}
