//! Conformal charts, metric families and pointwise geometry.
//!
//! A chart carries `g = e^{2φ}(dx² + dy²)` with the oriented orthonormal frame
//! `e1 = e^{-φ}∂x`, `e2 = e^{-φ}∂y`; fiber angles are measured from `e1` toward
//! `e2`. Deformations `g_t` are either linear (`g + t h`) or conformal
//! (`e^{2tu} g`); the former leaves the conformal class, so the [`Metric`]
//! trait also covers general symmetric metrics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{DerivativeMode, ScalarField, TensorField};
use crate::jet::Jet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Plane,
    UpperHalfPlane,
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { cx: f64, cy: f64, r: f64 },
}

impl Domain {
    /// True when the closed ball of radius `margin` about the point lies inside.
    pub fn contains(&self, x: f64, y: f64, margin: f64) -> bool {
        if !(x.is_finite() && y.is_finite()) {
            return false;
        }
        match *self {
            Domain::Plane => true,
            Domain::UpperHalfPlane => y - margin > 0.0,
            Domain::Rect { x0, x1, y0, y1 } => {
                x - margin > x0 && x + margin < x1 && y - margin > y0 && y + margin < y1
            }
            Domain::Disk { cx, cy, r } => (x - cx).hypot(y - cy) + margin < r,
        }
    }
}

/// Symmetric 2×2 matrix stored as `[m11, m12, m22]`.
pub type Sym2 = [f64; 3];

pub fn sym_det(m: &Sym2) -> f64 {
    m[0] * m[2] - m[1] * m[1]
}

/// `m(u, v)` for the symmetric bilinear form `m`.
#[inline]
pub fn sym_form(m: &Sym2, u: [f64; 2], v: [f64; 2]) -> f64 {
    m[0] * u[0] * v[0] + m[1] * (u[0] * v[1] + u[1] * v[0]) + m[2] * u[1] * v[1]
}

/// A Riemannian metric on a planar domain given by component jets.
pub trait Metric: Send + Sync {
    /// Jets of `(g11, g12, g22)` at a point.
    fn tensor_jet(&self, x: f64, y: f64, order: usize) -> Result<[Jet; 3]>;

    fn domain(&self) -> Domain;

    fn tensor(&self, x: f64, y: f64) -> Result<Sym2> {
        let g = self.tensor_jet(x, y, 0)?;
        Ok([g[0].value(), g[1].value(), g[2].value()])
    }

    /// Christoffel symbols `Γ^k_ij` indexed `[k][i][j]`.
    fn christoffel(&self, x: f64, y: f64) -> Result<[[[f64; 2]; 2]; 2]> {
        let g = self.tensor_jet(x, y, 1)?;
        Ok(christoffel_from_jets(&g))
    }

    /// Gaussian curvature from the metric components (Brioschi formula).
    fn curvature(&self, x: f64, y: f64) -> Result<f64> {
        let g = self.tensor_jet(x, y, 2)?;
        Ok(brioschi(&g))
    }
}

pub fn christoffel_from_jets(g: &[Jet; 3]) -> [[[f64; 2]; 2]; 2] {
    let gm = [[g[0].value(), g[1].value()], [g[1].value(), g[2].value()]];
    // dg[l][i][j] = ∂_l g_ij
    let comp = |i: usize, j: usize| -> &Jet {
        match (i, j) {
            (0, 0) => &g[0],
            (1, 1) => &g[2],
            _ => &g[1],
        }
    };
    let mut dg = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let [gx, gy] = comp(i, j).grad();
            dg[0][i][j] = gx;
            dg[1][i][j] = gy;
        }
    }
    let det = gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0];
    let inv = [[gm[1][1] / det, -gm[0][1] / det], [-gm[1][0] / det, gm[0][0] / det]];
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += inv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                }
                gamma[k][i][j] = 0.5 * s;
            }
        }
    }
    gamma
}

pub fn brioschi(g: &[Jet; 3]) -> f64 {
    let (e, f, gg) = (&g[0], &g[1], &g[2]);
    let (e0, f0, g0) = (e.value(), f.value(), gg.value());
    let (eu, ev) = (e.partial(1, 0), e.partial(0, 1));
    let (fu, fv) = (f.partial(1, 0), f.partial(0, 1));
    let (gu, gv) = (gg.partial(1, 0), gg.partial(0, 1));
    let evv = e.partial(0, 2);
    let fuv = f.partial(1, 1);
    let guu = gg.partial(2, 0);
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let a = det3([
        [-0.5 * evv + fuv - 0.5 * guu, 0.5 * eu, fu - 0.5 * ev],
        [fv - 0.5 * gu, e0, f0],
        [0.5 * gv, f0, g0],
    ]);
    let b = det3([[0.0, 0.5 * ev, 0.5 * gu], [0.5 * ev, e0, f0], [0.5 * gu, f0, g0]]);
    let w = e0 * g0 - f0 * f0;
    (a - b) / (w * w)
}

/// `g = e^{2φ}(dx² + dy²)` on a planar domain.
#[derive(Clone, Debug)]
pub struct ConformalChart {
    pub name: String,
    pub phi: ScalarField,
    pub domain: Domain,
    pub mode: DerivativeMode,
    pub negatively_curved: bool,
}

impl ConformalChart {
    pub fn new(name: &str, phi: ScalarField, domain: Domain) -> Self {
        Self {
            name: name.to_string(),
            phi,
            domain,
            mode: DerivativeMode::Analytic,
            negatively_curved: false,
        }
    }

    pub fn flat(domain: Domain) -> Self {
        Self::new("flat", ScalarField::zero(), domain)
    }

    /// Upper half-plane model, `φ = -ln y`.
    pub fn half_plane() -> Self {
        let mut c = Self::new("half-plane", ScalarField::new(|_, y| -y.ln()), Domain::UpperHalfPlane);
        c.negatively_curved = true;
        c
    }

    /// Unit disk model, `φ = ln(2 / (1 - x² - y²))`.
    pub fn disk() -> Self {
        let phi = ScalarField::new(|x, y| {
            let one = Jet::constant(1.0, x.order().min(y.order()));
            (2.0 * (one - *x * *x - *y * *y).recip()).ln()
        });
        let mut c = Self::new("disk", phi, Domain::Disk { cx: 0.0, cy: 0.0, r: 1.0 });
        c.negatively_curved = true;
        c
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    /// Distance from the point to the domain boundary needed by the
    /// derivative stencil.
    pub fn stencil_margin(&self, order: usize) -> f64 {
        match self.mode {
            DerivativeMode::Analytic => 0.0,
            DerivativeMode::FiniteDifference { step } => {
                if order >= 2 {
                    step.sqrt().max(step)
                } else if order == 1 {
                    step
                } else {
                    0.0
                }
            }
        }
    }

    pub fn check(&self, x: f64, y: f64, order: usize) -> Result<()> {
        if self.domain.contains(x, y, self.stencil_margin(order)) {
            Ok(())
        } else {
            Err(Error::Domain { x, y })
        }
    }

    pub fn phi_jet(&self, x: f64, y: f64, order: usize) -> Result<Jet> {
        self.check(x, y, order)?;
        let j = self.phi.jet_with(self.mode, x, y, order)?;
        if !j.is_finite() {
            return Err(Error::Domain { x, y });
        }
        Ok(j)
    }

    pub fn metric_at(&self, x: f64, y: f64) -> Result<[[f64; 2]; 2]> {
        let s = (2.0 * self.phi_jet(x, y, 0)?.value()).exp();
        Ok([[s, 0.0], [0.0, s]])
    }

    pub fn gauss_curvature(&self, x: f64, y: f64) -> Result<f64> {
        let p = self.phi_jet(x, y, 2)?;
        Ok(-(-2.0 * p.value()).exp() * p.laplacian())
    }

    /// Checks positivity of the conformal factor and, when flagged, negative
    /// curvature on a sample grid.
    pub fn validate(&self, points: &[(f64, f64)]) -> Result<()> {
        for &(x, y) in points {
            let m = self.metric_at(x, y)?;
            if !(m[0][0] > 0.0 && m[0][0].is_finite()) {
                return Err(Error::Model(format!("conformal factor not positive at ({x}, {y})")));
            }
            if self.negatively_curved {
                let k = self.gauss_curvature(x, y)?;
                if k.is_nan() || k >= 0.0 {
                    return Err(Error::Model(format!("curvature {k} >= 0 at ({x}, {y})")));
                }
            }
        }
        Ok(())
    }
}

impl Metric for ConformalChart {
    fn tensor_jet(&self, x: f64, y: f64, order: usize) -> Result<[Jet; 3]> {
        let s = (self.phi_jet(x, y, order)? * 2.0).exp();
        Ok([s, Jet::zero(order), s])
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn christoffel(&self, x: f64, y: f64) -> Result<[[[f64; 2]; 2]; 2]> {
        let [px, py] = self.phi_jet(x, y, 1)?.grad();
        let mut g = [[[0.0; 2]; 2]; 2];
        g[0][0][0] = px;
        g[0][0][1] = py;
        g[0][1][0] = py;
        g[0][1][1] = -px;
        g[1][0][0] = -py;
        g[1][0][1] = px;
        g[1][1][0] = px;
        g[1][1][1] = py;
        Ok(g)
    }

    fn curvature(&self, x: f64, y: f64) -> Result<f64> {
        self.gauss_curvature(x, y)
    }
}

#[derive(Clone, Debug)]
pub enum Law {
    /// `g_t = g + t h`
    LinearTensor(TensorField),
    /// `g_t = e^{2tu} g`
    ConformalExp(ScalarField),
}

#[derive(Clone, Debug)]
pub struct MetricFamily {
    pub base: ConformalChart,
    pub law: Law,
}

impl MetricFamily {
    pub fn new(base: ConformalChart, law: Law) -> Self {
        Self { base, law }
    }

    pub fn at(&self, t: f64) -> FamilyMetric<'_> {
        FamilyMetric { family: self, t }
    }

    /// Jets of `∂_t g_t |_{t=0}` in coordinate components.
    pub fn dot_metric_jet(&self, x: f64, y: f64, order: usize) -> Result<[Jet; 3]> {
        self.base.check(x, y, order)?;
        match &self.law {
            Law::LinearTensor(h) => h.jet_with(self.base.mode, x, y, order),
            Law::ConformalExp(u) => {
                let u = u.jet_with(self.base.mode, x, y, order)?;
                let s = (self.base.phi_jet(x, y, order)? * 2.0).exp() * u * 2.0;
                Ok([s, Jet::zero(order), s])
            }
        }
    }

    pub fn family_dot_metric(&self, x: f64, y: f64) -> Result<Sym2> {
        let h = self.dot_metric_jet(x, y, 0)?;
        Ok([h[0].value(), h[1].value(), h[2].value()])
    }

    /// Frame components `e^{-2φ} h` of the first-order deformation.
    pub fn frame_dot_metric(&self, x: f64, y: f64) -> Result<Sym2> {
        let h = self.family_dot_metric(x, y)?;
        let s = (-2.0 * self.base.phi_jet(x, y, 0)?.value()).exp();
        Ok([h[0] * s, h[1] * s, h[2] * s])
    }

    /// `ṗ = -½ h(T, T)` with `T` at fiber angle `θ`.
    pub fn dot_p(&self, x: f64, y: f64, theta: f64) -> Result<f64> {
        let hf = self.frame_dot_metric(x, y)?;
        let (s, c) = theta.sin_cos();
        Ok(-0.5 * sym_form(&hf, [c, s], [c, s]))
    }

    /// Fourier coefficients `(c0, c2, c-2)` of `θ ↦ ṗ(x, θ)`.
    pub fn dot_p_mode_coeffs(&self, x: f64, y: f64) -> Result<[Complex64; 3]> {
        Ok(dot_p_modes_from_frame(&self.frame_dot_metric(x, y)?))
    }
}

pub fn dot_p_modes_from_frame(hf: &Sym2) -> [Complex64; 3] {
    let c0 = Complex64::new(-0.25 * (hf[0] + hf[2]), 0.0);
    let c2 = Complex64::new(-0.125 * (hf[0] - hf[2]), 0.25 * hf[1]);
    [c0, c2, c2.conj()]
}

/// The metric `g_t` of a family at a fixed parameter.
#[derive(Clone, Copy, Debug)]
pub struct FamilyMetric<'a> {
    pub family: &'a MetricFamily,
    pub t: f64,
}

impl Metric for FamilyMetric<'_> {
    fn tensor_jet(&self, x: f64, y: f64, order: usize) -> Result<[Jet; 3]> {
        let base = &self.family.base;
        match &self.family.law {
            Law::LinearTensor(h) => {
                let g = base.tensor_jet(x, y, order)?;
                if self.t == 0.0 {
                    return Ok(g);
                }
                let h = h.jet_with(base.mode, x, y, order)?;
                Ok([g[0] + h[0] * self.t, g[1] + h[1] * self.t, g[2] + h[2] * self.t])
            }
            Law::ConformalExp(u) => {
                let phi = base.phi_jet(x, y, order)?;
                let phi_t = if self.t == 0.0 {
                    phi
                } else {
                    phi + u.jet_with(base.mode, x, y, order)? * self.t
                };
                let s = (phi_t * 2.0).exp();
                Ok([s, Jet::zero(order), s])
            }
        }
    }

    fn domain(&self) -> Domain {
        self.family.base.domain
    }

    fn christoffel(&self, x: f64, y: f64) -> Result<[[[f64; 2]; 2]; 2]> {
        if self.t == 0.0 {
            return self.family.base.christoffel(x, y);
        }
        Ok(christoffel_from_jets(&self.tensor_jet(x, y, 1)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn model_metrics() {
        let flat = ConformalChart::flat(Domain::Plane);
        assert_eq!(flat.metric_at(3.0, -1.0).unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
        let h = ConformalChart::half_plane();
        let m = h.metric_at(0.0, 2.0).unwrap();
        assert_relative_eq!(m[0][0], 0.25, epsilon = 1e-15);
        assert_eq!(m[0][1], 0.0);
        let d = ConformalChart::disk();
        assert_relative_eq!(d.metric_at(0.0, 0.0).unwrap()[1][1], 4.0, epsilon = 1e-15);
        assert!(matches!(h.metric_at(0.0, -1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn model_curvatures() {
        assert_eq!(ConformalChart::flat(Domain::Plane).gauss_curvature(0.2, 0.1).unwrap(), 0.0);
        // Δ(-ln y) = 1/y², so K = -y² · 1/y².
        let h = ConformalChart::half_plane();
        assert_relative_eq!(h.gauss_curvature(1.0, 1.0).unwrap(), -1.0, epsilon = 1e-14);
        let d = ConformalChart::disk();
        assert_relative_eq!(d.gauss_curvature(0.3, 0.1).unwrap(), -1.0, epsilon = 1e-13);
        let hf = ConformalChart::half_plane().with_mode(DerivativeMode::finite_difference());
        assert_relative_eq!(hf.gauss_curvature(0.4, 1.3).unwrap(), -1.0, epsilon = 1e-6);
    }

    #[test]
    fn brioschi_agrees_with_conformal_formula() {
        let phi = ScalarField::parse("-log(y) + 0.1*sin(x)*cos(2*y)").unwrap();
        let c = ConformalChart::new("p", phi, Domain::UpperHalfPlane);
        for &(x, y) in &[(0.1, 0.7), (1.3, 2.0), (-0.4, 1.1)] {
            let g = c.tensor_jet(x, y, 2).unwrap();
            assert_relative_eq!(brioschi(&g), c.gauss_curvature(x, y).unwrap(), epsilon = 1e-11);
            let a = christoffel_from_jets(&c.tensor_jet(x, y, 1).unwrap());
            let b = c.christoffel(x, y).unwrap();
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert_relative_eq!(a[k][i][j], b[k][i][j], epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn dot_metric_laws() {
        let flat = ConformalChart::flat(Domain::Plane);
        let fam = MetricFamily::new(flat, Law::ConformalExp(ScalarField::constant(1.0)));
        assert_eq!(fam.family_dot_metric(0.3, 0.2).unwrap(), [2.0, 0.0, 2.0]);

        let u = ScalarField::parse("0.3*sin(x)+y").unwrap();
        let fam = MetricFamily::new(ConformalChart::half_plane(), Law::ConformalExp(u.clone()));
        let (x, y, t) = (0.2, 1.4, 1e-4);
        let gp = fam.at(t).tensor(x, y).unwrap();
        let gm = fam.at(-t).tensor(x, y).unwrap();
        let h = fam.family_dot_metric(x, y).unwrap();
        for k in 0..3 {
            assert_relative_eq!((gp[k] - gm[k]) / (2.0 * t), h[k], epsilon = 1e-7);
        }
        assert_relative_eq!(fam.dot_p(x, y, 0.7).unwrap(), -u.value(x, y), epsilon = 1e-14);
    }

    #[test]
    fn dot_p_mode_example() {
        let modes = dot_p_modes_from_frame(&[1.0, 0.0, -1.0]);
        assert_eq!(modes[0], Complex64::new(0.0, 0.0));
        assert_eq!(modes[1], Complex64::new(-0.25, 0.0));
        assert_eq!(modes[2], Complex64::new(-0.25, 0.0));
    }
}
