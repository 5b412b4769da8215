//! Group-invariant scalar, vector and tensor fields on the half-plane.
//!
//! A field given on the fundamental domain is extended to the whole plane by
//! reducing each point `z = γ(w)` into the domain and transporting the value
//! at `w` with `γ`. The composition is carried out on jets, so derivatives
//! are those of the invariant extension. Fields supported strictly inside
//! the domain extend smoothly.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use super::bolza::{bolza_generators, inradius, FundamentalDomain};
use super::mobius::{hyp_dist, Mobius};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::jet::{CJet, Jet};

#[derive(Clone, Debug)]
pub struct Invariance {
    fd: Arc<FundamentalDomain>,
}

impl Default for Invariance {
    fn default() -> Self {
        Self::bolza()
    }
}

impl Invariance {
    pub fn bolza() -> Self {
        Self { fd: Arc::new(FundamentalDomain::new(&bolza_generators())) }
    }

    pub fn domain(&self) -> &FundamentalDomain {
        &self.fd
    }

    /// Returns `γ` with `z = γ(w)`, `w` in the domain, and the jet of `w = γ⁻¹(z)`.
    fn pull(&self, x: &Jet, y: &Jet) -> (Mobius, CJet) {
        let (_, g) = self.fd.reduce(Complex64::new(x.value(), y.value()));
        let z = CJet::new(*x, *y);
        let w = if g.dist(&Mobius::identity()) == 0.0 { z } else { g.inverse().apply_jet(&z) };
        (g, w)
    }

    pub fn scalar(&self, f: &ScalarField) -> ScalarField {
        let (inv, f) = (self.clone(), f.clone());
        ScalarField::new(move |x, y| {
            let (_, w) = inv.pull(x, y);
            f.compose(&w.re, &w.im)
        })
    }

    /// Push-forward `γ_* v`: `ṽ(z) = γ'(w) v(w)`.
    pub fn vector(&self, v: &VectorField) -> VectorField {
        let (inv, v) = (self.clone(), v.clone());
        VectorField::new(move |x, y| {
            let (g, w) = inv.pull(x, y);
            let val = v.compose(&w.re, &w.im);
            g.derivative_jet(&w) * val
        })
    }

    /// Pull-back `(γ⁻¹)^* h`.
    pub fn tensor(&self, h: &TensorField) -> TensorField {
        let (inv, h) = (self.clone(), h.clone());
        TensorField::new(move |x, y| {
            let (g, w) = inv.pull(x, y);
            let [h11, h12, h22] = h.compose(&w.re, &w.im);
            let j = g.inverse().derivative_jet(&CJet::new(*x, *y));
            let (p, q) = (j.re, j.im);
            let pq = p * q;
            let (pp, qq) = (p * p, q * q);
            [
                pp * h11 + pq * h12 * 2.0 + qq * h22,
                -(pq * h11) + (pp - qq) * h12 + pq * h22,
                qq * h11 - pq * h12 * 2.0 + pp * h22,
            ]
        })
    }
}

/// Smooth bump of hyperbolic radius `rho` about `c` in the half-plane.
pub fn hyperbolic_bump(c: Complex64, rho: f64) -> ScalarField {
    let denom = 2.0 * c.im * (rho.cosh() - 1.0);
    ScalarField::new(move |x, y| {
        let dx = *x - c.re;
        let dy = *y - c.im;
        let q = (dx * dx + dy * dy) / (*y * denom);
        q.bump()
    })
}

/// A bump placed well inside the inscribed disk of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpSite {
    pub center: Complex64,
    pub radius: f64,
}

impl BumpSite {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let limit = 0.9 * inradius();
        let radius = rng.gen_range(0.3..0.55);
        let r = rng.gen_range(0.0..(limit - radius));
        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
        // disk point tanh(r/2) e^{i ang}, sent to the half-plane with 0 -> i
        let w = Complex64::from_polar((0.5 * r).tanh(), ang);
        let center = Complex64::i() * (Complex64::new(1.0, 0.0) + w) / (Complex64::new(1.0, 0.0) - w);
        Self { center, radius }
    }

    pub fn field(&self) -> ScalarField {
        hyperbolic_bump(self.center, self.radius)
    }

    /// Hyperbolic distance from the support to the domain's inscribed circle.
    pub fn clearance(&self) -> f64 {
        inradius() - hyp_dist(self.center, Complex64::new(0.0, 1.0)) - self.radius
    }
}

/// Invariant scalar `c0 + Σ a_k B_k` with `c0 ∈ [0.5, 1]`, `|a_k| <= 0.4`,
/// hence bounded below by `0.1`.
pub fn random_scalar<R: Rng + ?Sized>(rng: &mut R, inv: &Invariance, with_offset: bool) -> ScalarField {
    let c0 = if with_offset { rng.gen_range(0.5..1.0) } else { 0.0 };
    let n = rng.gen_range(2..=3);
    let mut parts = vec![ScalarField::constant(c0)];
    for _ in 0..n {
        let a = rng.gen_range(-0.4..0.4);
        parts.push(BumpSite::random(rng).field().scale(a));
    }
    inv.scalar(&ScalarField::sum(&parts))
}

/// Invariant vector field `Σ B_k (a_k¹ e1 + a_k² e2)` in the half-plane frame
/// `e1 = y∂x`, `e2 = y∂y`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, inv: &Invariance) -> VectorField {
    let n = rng.gen_range(1..=3);
    let mut sites = Vec::with_capacity(n);
    for _ in 0..n {
        let a = Complex64::from_polar(rng.gen_range(0.2..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        sites.push((BumpSite::random(rng).field(), a));
    }
    let local = VectorField::new(move |x, y| {
        let mut acc = CJet::zero(x.order().min(y.order()));
        for (b, a) in &sites {
            acc = acc + CJet::real(b.compose(x, y) * *y).mul_c(a.re, a.im);
        }
        acc
    });
    inv.vector(&local)
}

/// Infinitesimal rotation about `c`, a Killing field of the half-plane
/// metric: `v(z) = (1 + T(z)²) / T'(z)` where `T` sends `c` to `i`.
pub fn killing_rotation(c: Complex64) -> VectorField {
    let s = c.im.sqrt();
    let to_i = Mobius::from_raw([[1.0 / s, -c.re / s], [0.0, s]]);
    VectorField::new(move |x, y| {
        let z = CJet::new(*x, *y);
        let u = to_i.apply_jet(&z);
        let one = CJet::constant(1.0, 0.0, z.order());
        (one + u * u) * to_i.derivative_jet(&z).recip()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::sym_form;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bump_sites_are_inside_the_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = BumpSite::random(&mut rng);
            assert!(s.clearance() > 0.1 * inradius() - 1e-12);
        }
    }

    #[test]
    fn scalar_is_invariant_with_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inv = Invariance::bolza();
        let f = random_scalar(&mut rng, &inv, true);
        let g = bolza_generators();
        let w = Complex64::new(0.13, 0.8);
        let base = f.jet(w.re, w.im, 2);
        for l in 0..8u8 {
            let gm = g.letter(l);
            let z = gm.apply(w);
            let moved = f.jet(z.re, z.im, 2);
            assert_relative_eq!(moved.value(), base.value(), epsilon = 1e-12);
            // the hyperbolic gradient norm y²|∇f|² is invariant
            let n0 = w.im * w.im * (base.partial(1, 0).powi(2) + base.partial(0, 1).powi(2));
            let n1 = z.im * z.im * (moved.partial(1, 0).powi(2) + moved.partial(0, 1).powi(2));
            assert_relative_eq!(n0, n1, epsilon = 1e-10, max_relative = 1e-9);
        }
    }

    #[test]
    fn vector_push_forward_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inv = Invariance::bolza();
        let v = random_vector(&mut rng, &inv);
        let g = bolza_generators();
        let w = Complex64::new(-0.2, 1.1);
        let v0 = v.value(w.re, w.im);
        for l in 0..8u8 {
            let gm = g.letter(l);
            let z = gm.apply(w);
            let v1 = v.value(z.re, z.im);
            let n0 = (v0[0] * v0[0] + v0[1] * v0[1]) / (w.im * w.im);
            let n1 = (v1[0] * v1[0] + v1[1] * v1[1]) / (z.im * z.im);
            assert_relative_eq!(n0, n1, epsilon = 1e-12, max_relative = 1e-10);
            // and equals γ'(w) v(w)
            let expect = gm.derivative(w) * Complex64::new(v0[0], v0[1]);
            assert!((expect - Complex64::new(v1[0], v1[1])).norm() < 1e-10 * (1.0 + expect.norm()));
        }
    }

    #[test]
    fn tensor_pull_back_is_invariant() {
        let inv = Invariance::bolza();
        let b = BumpSite { center: Complex64::new(0.1, 1.2), radius: 0.4 }.field();
        let h = TensorField::from_components(b.clone(), b.scale(0.3), b.scale(-0.5));
        let ht = inv.tensor(&h);
        let g = bolza_generators();
        let w = Complex64::new(0.05, 1.15);
        let gm = g.letter(2);
        let z = gm.apply(w);
        let hw = ht.value(w.re, w.im);
        let hz = ht.value(z.re, z.im);
        // h_z(dγ X, dγ X) = h_w(X, X)
        let d = gm.derivative(w);
        for &(a, bb) in &[(1.0, 0.0), (0.3, -0.7)] {
            let x = Complex64::new(a, bb);
            let px = d * x;
            assert_relative_eq!(
                sym_form(&hz, [px.re, px.im], [px.re, px.im]),
                sym_form(&hw, [a, bb], [a, bb]),
                epsilon = 1e-12
            );
        }
    }
}
