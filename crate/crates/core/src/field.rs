//! Smooth fields on a chart, evaluated as jets.
//!
//! Fields are closures from coordinate jets to value jets. With
//! [`DerivativeMode::Analytic`] the closure is called on the coordinate
//! variables directly and every partial is exact; with
//! [`DerivativeMode::FiniteDifference`] only point values are used and partials
//! come from central differences with one Richardson level.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{CJet, Jet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { step: f64 },
}

impl Default for DerivativeMode {
    fn default() -> Self {
        DerivativeMode::Analytic
    }
}

impl DerivativeMode {
    pub const DEFAULT_STEP: f64 = 1e-5;

    pub fn finite_difference() -> Self {
        DerivativeMode::FiniteDifference { step: Self::DEFAULT_STEP }
    }
}

/// Highest partial order the finite-difference backend produces.
pub const FD_MAX_ORDER: usize = 2;

/// Jet of `f` at `(x, y)` from finite differences.
pub fn fd_jet(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, order: usize, step: f64) -> Result<Jet> {
    if order > FD_MAX_ORDER {
        return Err(Error::DerivativeOrder { requested: order, max: FD_MAX_ORDER });
    }
    let f0 = f(x, y);
    if order == 0 {
        return Ok(Jet::constant(f0, 0));
    }
    let rich = |d: &dyn Fn(f64) -> f64, h: f64| (4.0 * d(0.5 * h) - d(h)) / 3.0;
    let dx1 = |h: f64| (f(x + h, y) - f(x - h, y)) / (2.0 * h);
    let dy1 = |h: f64| (f(x, y + h) - f(x, y - h)) / (2.0 * h);
    let fx = rich(&dx1, step);
    let fy = rich(&dy1, step);
    let (mut fxx, mut fxy, mut fyy) = (0.0, 0.0, 0.0);
    if order == 2 {
        let h2 = step.sqrt().max(step) * 0.5;
        let dxx = |h: f64| (f(x + h, y) - 2.0 * f0 + f(x - h, y)) / (h * h);
        let dyy = |h: f64| (f(x, y + h) - 2.0 * f0 + f(x, y - h)) / (h * h);
        let dxy = |h: f64| {
            (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h)
        };
        fxx = rich(&dxx, h2);
        fyy = rich(&dyy, h2);
        fxy = rich(&dxy, h2);
    }
    Ok(Jet::from_partials(order, |i, j| match (i, j) {
        (0, 0) => f0,
        (1, 0) => fx,
        (0, 1) => fy,
        (2, 0) => fxx,
        (1, 1) => fxy,
        (0, 2) => fyy,
        _ => 0.0,
    }))
}

type ScalarFn = dyn Fn(&Jet, &Jet) -> Jet + Send + Sync;
type VectorFn = dyn Fn(&Jet, &Jet) -> CJet + Send + Sync;
type TensorFn = dyn Fn(&Jet, &Jet) -> [Jet; 3] + Send + Sync;

/// Scalar function of the chart coordinates.
#[derive(Clone)]
pub struct ScalarField {
    f: Arc<ScalarFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField")
    }
}

impl ScalarField {
    pub fn new(f: impl Fn(&Jet, &Jet) -> Jet + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |x, y| Jet::constant(c, x.order().min(y.order())))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn from_expr(e: Expr) -> Self {
        Self::new(move |x, y| e.eval(x, y))
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::from_expr(Expr::parse(src)?))
    }

    /// Evaluates on arbitrary coordinate jets (composition).
    #[inline]
    pub fn compose(&self, x: &Jet, y: &Jet) -> Jet {
        (self.f)(x, y)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.compose(&Jet::constant(x, 0), &Jet::constant(y, 0)).value()
    }

    pub fn jet(&self, x: f64, y: f64, order: usize) -> Jet {
        self.compose(&Jet::var_x(x, order), &Jet::var_y(y, order))
    }

    pub fn jet_with(&self, mode: DerivativeMode, x: f64, y: f64, order: usize) -> Result<Jet> {
        match mode {
            DerivativeMode::Analytic => Ok(self.jet(x, y, order)),
            DerivativeMode::FiniteDifference { step } => {
                fd_jet(&|a, b| self.value(a, b), x, y, order, step)
            }
        }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(move |x, y| a.compose(x, y) + b.compose(x, y))
    }

    pub fn scale(&self, s: f64) -> Self {
        let a = self.clone();
        Self::new(move |x, y| a.compose(x, y) * s)
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(move |x, y| a.compose(x, y) * b.compose(x, y))
    }

    pub fn sum(fields: &[ScalarField]) -> Self {
        let fields = fields.to_vec();
        Self::new(move |x, y| {
            let mut acc = Jet::zero(x.order().min(y.order()));
            for f in &fields {
                acc += f.compose(x, y);
            }
            acc
        })
    }
}

/// Vector field `v = v¹∂x + v²∂y`, carried as the complex number `v¹ + i v²`.
#[derive(Clone)]
pub struct VectorField {
    f: Arc<VectorFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorField")
    }
}

impl VectorField {
    pub fn new(f: impl Fn(&Jet, &Jet) -> CJet + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn from_components(v1: ScalarField, v2: ScalarField) -> Self {
        Self::new(move |x, y| CJet::new(v1.compose(x, y), v2.compose(x, y)))
    }

    pub fn zero() -> Self {
        Self::new(|x, y| CJet::zero(x.order().min(y.order())))
    }

    #[inline]
    pub fn compose(&self, x: &Jet, y: &Jet) -> CJet {
        (self.f)(x, y)
    }

    pub fn value(&self, x: f64, y: f64) -> [f64; 2] {
        let v = self.compose(&Jet::constant(x, 0), &Jet::constant(y, 0));
        [v.re.value(), v.im.value()]
    }

    pub fn jet(&self, x: f64, y: f64, order: usize) -> CJet {
        self.compose(&Jet::var_x(x, order), &Jet::var_y(y, order))
    }

    pub fn jet_with(&self, mode: DerivativeMode, x: f64, y: f64, order: usize) -> Result<CJet> {
        match mode {
            DerivativeMode::Analytic => Ok(self.jet(x, y, order)),
            DerivativeMode::FiniteDifference { step } => Ok(CJet::new(
                fd_jet(&|a, b| self.value(a, b)[0], x, y, order, step)?,
                fd_jet(&|a, b| self.value(a, b)[1], x, y, order, step)?,
            )),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let a = self.clone();
        Self::new(move |x, y| a.compose(x, y).scale(s))
    }

    pub fn add(&self, other: &VectorField) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(move |x, y| a.compose(x, y) + b.compose(x, y))
    }
}

/// Symmetric 2-tensor in coordinate components `(h11, h12, h22)`.
#[derive(Clone)]
pub struct TensorField {
    f: Arc<TensorFn>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TensorField")
    }
}

impl TensorField {
    pub fn new(f: impl Fn(&Jet, &Jet) -> [Jet; 3] + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn from_components(h11: ScalarField, h12: ScalarField, h22: ScalarField) -> Self {
        Self::new(move |x, y| [h11.compose(x, y), h12.compose(x, y), h22.compose(x, y)])
    }

    pub fn zero() -> Self {
        Self::new(|x, y| [Jet::zero(x.order().min(y.order())); 3])
    }

    #[inline]
    pub fn compose(&self, x: &Jet, y: &Jet) -> [Jet; 3] {
        (self.f)(x, y)
    }

    pub fn value(&self, x: f64, y: f64) -> [f64; 3] {
        let h = self.compose(&Jet::constant(x, 0), &Jet::constant(y, 0));
        [h[0].value(), h[1].value(), h[2].value()]
    }

    pub fn jet(&self, x: f64, y: f64, order: usize) -> [Jet; 3] {
        self.compose(&Jet::var_x(x, order), &Jet::var_y(y, order))
    }

    pub fn jet_with(&self, mode: DerivativeMode, x: f64, y: f64, order: usize) -> Result<[Jet; 3]> {
        match mode {
            DerivativeMode::Analytic => Ok(self.jet(x, y, order)),
            DerivativeMode::FiniteDifference { step } => {
                let c = |k: usize| fd_jet(&|a, b| self.value(a, b)[k], x, y, order, step);
                Ok([c(0)?, c(1)?, c(2)?])
            }
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let a = self.clone();
        Self::new(move |x, y| a.compose(x, y).map(|h| h * s))
    }

    pub fn add(&self, other: &TensorField) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(move |x, y| {
            let (p, q) = (a.compose(x, y), b.compose(x, y));
            [p[0] + q[0], p[1] + q[1], p[2] + q[2]]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn finite_differences_match_analytic_partials() {
        let f = ScalarField::parse("exp(x*y) + sin(x)*y^2").unwrap();
        let (x, y) = (0.4, 0.9);
        let a = f.jet(x, y, 2);
        let d = f.jet_with(DerivativeMode::finite_difference(), x, y, 2).unwrap();
        for (i, j) in [(1, 0), (0, 1)] {
            assert_relative_eq!(a.partial(i, j), d.partial(i, j), epsilon = 1e-10);
        }
        for (i, j) in [(2, 0), (1, 1), (0, 2)] {
            assert_relative_eq!(a.partial(i, j), d.partial(i, j), epsilon = 1e-8);
        }
    }

    #[test]
    fn finite_difference_order_is_bounded() {
        let f = ScalarField::constant(1.0);
        let r = f.jet_with(DerivativeMode::finite_difference(), 0.0, 0.0, 3);
        assert!(matches!(r, Err(Error::DerivativeOrder { requested: 3, max: 2 })));
    }

    #[test]
    fn combinators() {
        let a = ScalarField::parse("x").unwrap();
        let b = ScalarField::parse("y").unwrap();
        let s = ScalarField::sum(&[a.clone(), b.scale(2.0), a.mul(&b)]);
        assert_relative_eq!(s.value(2.0, 3.0), 2.0 + 6.0 + 6.0);
        let v = VectorField::from_components(a.clone(), b.clone()).scale(0.5);
        assert_eq!(v.value(2.0, 4.0), [1.0, 2.0]);
        let h = TensorField::from_components(a.clone(), ScalarField::zero(), b).add(&TensorField::zero());
        assert_eq!(h.value(1.0, 2.0), [1.0, 0.0, 2.0]);
    }
}
