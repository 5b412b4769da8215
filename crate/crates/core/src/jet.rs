//! Truncated bivariate Taylor polynomials.
//!
//! A [`Jet`] stores the normalized Taylor coefficients of a scalar function of
//! the chart coordinates `(x, y)` about a base point, up to total degree
//! [`MAX_ORDER`]. Arithmetic on jets is truncated polynomial arithmetic, so any
//! field built from jet operations carries exact partial derivatives up to its
//! order. Differentiating a jet lowers its order by one.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Highest total derivative order a jet can carry.
pub const MAX_ORDER: usize = 3;

const LEN: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

/// `(i, j)` exponents of the monomial `x^i y^j` stored at each slot.
const MONO: [(usize, usize); LEN] = {
    let mut out = [(0usize, 0usize); LEN];
    let mut d = 0;
    let mut k = 0;
    while d <= MAX_ORDER {
        let mut j = 0;
        while j <= d {
            out[k] = (d - j, j);
            k += 1;
            j += 1;
        }
        d += 1;
    }
    out
};

#[inline]
const fn slot(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[inline]
const fn slots(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

const FACT: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
    order: u8,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; LEN];
        c[0] = value;
        Self { c, order: order as u8 }
    }

    /// The coordinate function `x` expanded about `x0`.
    pub fn var_x(x0: f64, order: usize) -> Self {
        let mut j = Self::constant(x0, order);
        if order > 0 {
            j.c[slot(1, 0)] = 1.0;
        }
        j
    }

    /// The coordinate function `y` expanded about `y0`.
    pub fn var_y(y0: f64, order: usize) -> Self {
        let mut j = Self::constant(y0, order);
        if order > 0 {
            j.c[slot(0, 1)] = 1.0;
        }
        j
    }

    /// Builds a jet from partial derivatives `d[(i, j)] = ∂x^i ∂y^j f`.
    pub fn from_partials(order: usize, partial: impl Fn(usize, usize) -> f64) -> Self {
        let mut j = Self::constant(0.0, order);
        for k in 0..slots(order) {
            let (a, b) = MONO[k];
            j.c[k] = partial(a, b) / (FACT[a] * FACT[b]);
        }
        j
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `∂x^i ∂y^j` of the represented function at the base point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= self.order(), "partial ({i},{j}) beyond jet order {}", self.order);
        self.c[slot(i, j)] * FACT[i] * FACT[j]
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.partial(1, 0), self.partial(0, 1)]
    }

    pub fn laplacian(&self) -> f64 {
        self.partial(2, 0) + self.partial(0, 2)
    }

    pub fn is_finite(&self) -> bool {
        self.c[..slots(self.order())].iter().all(|v| v.is_finite())
    }

    /// Drops coefficients above `order`.
    pub fn truncate(mut self, order: usize) -> Self {
        let order = order.min(self.order());
        for v in self.c.iter_mut().skip(slots(order)) {
            *v = 0.0;
        }
        self.order = order as u8;
        self
    }

    pub fn dx(&self) -> Self {
        self.derivative(true)
    }

    pub fn dy(&self) -> Self {
        self.derivative(false)
    }

    fn derivative(&self, along_x: bool) -> Self {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let order = self.order() - 1;
        let mut out = Self::zero(order);
        for k in 0..slots(order) {
            let (i, j) = MONO[k];
            out.c[k] = if along_x {
                (i + 1) as f64 * self.c[slot(i + 1, j)]
            } else {
                (j + 1) as f64 * self.c[slot(i, j + 1)]
            };
        }
        out
    }

    /// Composes a univariate function with this jet given its derivatives
    /// `f, f', f'', f'''` at the base value.
    pub fn compose(&self, derivs: [f64; MAX_ORDER + 1]) -> Self {
        let order = self.order();
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Self::constant(derivs[0], order);
        let mut power = Self::constant(1.0, order);
        for (n, d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = power * delta;
            out = out + power * (d / FACT[n]);
        }
        out
    }

    /// Substitutes jets for the coordinates: `Σ c_ij (x - x0)^i (y - y0)^j`
    /// with `x0, y0` the values of `x, y`.
    pub fn substitute(&self, x: &Jet, y: &Jet) -> Self {
        let order = self.order().min(x.order()).min(y.order());
        let mut dx = x.truncate(order);
        dx.c[0] = 0.0;
        let mut dy = y.truncate(order);
        dy.c[0] = 0.0;
        let mut px = [Self::constant(1.0, order); MAX_ORDER + 1];
        let mut py = [Self::constant(1.0, order); MAX_ORDER + 1];
        for n in 1..=order {
            px[n] = px[n - 1] * dx;
            py[n] = py[n - 1] * dy;
        }
        let mut out = Self::zero(order);
        for k in 0..slots(order) {
            let (i, j) = MONO[k];
            if self.c[k] != 0.0 {
                out = out + px[i] * py[j] * self.c[k];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        self.compose([a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a)])
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn powf(&self, p: f64) -> Self {
        let a = self.value();
        self.compose([
            a.powf(p),
            p * a.powf(p - 1.0),
            p * (p - 1.0) * a.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * a.powf(p - 3.0),
        ])
    }

    pub fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0, self.order());
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = *self;
        for _ in 1..n {
            out = out * *self;
        }
        out
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let r = 1.0 / a;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn sinh(&self) -> Self {
        let a = self.value();
        let (s, c) = (a.sinh(), a.cosh());
        self.compose([s, c, s, c])
    }

    pub fn cosh(&self) -> Self {
        let a = self.value();
        let (s, c) = (a.sinh(), a.cosh());
        self.compose([c, s, c, s])
    }

    pub fn tanh(&self) -> Self {
        let t = self.value().tanh();
        let s = 1.0 - t * t;
        self.compose([t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)])
    }

    /// Smooth compactly supported profile `exp(1 - 1/(1 - q))` for `q < 1`,
    /// identically zero for `q >= 1`. Takes the squared normalized radius.
    pub fn bump(&self) -> Self {
        if self.value() >= 1.0 {
            return Self::zero(self.order());
        }
        let one = Self::constant(1.0, self.order());
        (one - (one - *self).recip()).exp()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        for k in 0..slots(order as usize) {
            self.c[k] += rhs.c[k];
        }
        self.truncate(order as usize)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order().min(rhs.order());
        let mut out = Jet::zero(order);
        for k1 in 0..slots(order) {
            let a = self.c[k1];
            if a == 0.0 {
                continue;
            }
            let (i1, j1) = MONO[k1];
            let rest = order - (i1 + j1);
            for k2 in 0..slots(rest) {
                let (i2, j2) = MONO[k2];
                out.c[slot(i1 + i2, j1 + j2)] += a * rhs.c[k2];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for v in self.c.iter_mut() {
            *v *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * rhs.recip()
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

/// Complex-valued jet, used for mode coefficients and Möbius maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CJet {
    pub re: Jet,
    pub im: Jet,
}

impl CJet {
    pub fn new(re: Jet, im: Jet) -> Self {
        Self { re, im }
    }

    pub fn real(re: Jet) -> Self {
        let im = Jet::zero(re.order());
        Self { re, im }
    }

    pub fn zero(order: usize) -> Self {
        Self::real(Jet::zero(order))
    }

    pub fn constant(re: f64, im: f64, order: usize) -> Self {
        Self::new(Jet::constant(re, order), Jet::constant(im, order))
    }

    pub fn order(&self) -> usize {
        self.re.order().min(self.im.order())
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    /// Multiplies by the complex constant `a + ib`.
    pub fn mul_c(self, a: f64, b: f64) -> Self {
        Self::new(self.re * a - self.im * b, self.re * b + self.im * a)
    }

    pub fn mul_real(self, r: Jet) -> Self {
        Self::new(self.re * r, self.im * r)
    }

    pub fn norm_sqr(self) -> Jet {
        self.re * self.re + self.im * self.im
    }

    pub fn recip(self) -> Self {
        let inv = self.norm_sqr().recip();
        Self::new(self.re * inv, -self.im * inv)
    }

    /// Wirtinger derivative `½(∂x − i∂y)`.
    pub fn d_holo(&self) -> Self {
        let (px, py) = (self.re.dx(), self.re.dy());
        let (qx, qy) = (self.im.dx(), self.im.dy());
        Self::new((px + qy) * 0.5, (qx - py) * 0.5)
    }

    /// Wirtinger derivative `½(∂x + i∂y)`.
    pub fn d_antiholo(&self) -> Self {
        let (px, py) = (self.re.dx(), self.re.dy());
        let (qx, qy) = (self.im.dx(), self.im.dy());
        Self::new((px - qy) * 0.5, (qx + py) * 0.5)
    }

    pub fn truncate(self, order: usize) -> Self {
        Self::new(self.re.truncate(order), self.im.truncate(order))
    }

    pub fn value(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.value(), self.im.value())
    }
}

impl Add for CJet {
    type Output = CJet;
    fn add(self, rhs: CJet) -> CJet {
        CJet::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for CJet {
    type Output = CJet;
    fn sub(self, rhs: CJet) -> CJet {
        CJet::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for CJet {
    type Output = CJet;
    fn neg(self) -> CJet {
        CJet::new(-self.re, -self.im)
    }
}

impl Mul for CJet {
    type Output = CJet;
    fn mul(self, rhs: CJet) -> CJet {
        CJet::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl Div for CJet {
    type Output = CJet;
    fn div(self, rhs: CJet) -> CJet {
        self * rhs.recip()
    }
}
