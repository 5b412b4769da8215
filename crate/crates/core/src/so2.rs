//! Frame operators on the unit tangent bundle of a conformal chart.
//!
//! A function on the bundle is a finite Fourier series `Σ a_m(x) e^{imθ}` in
//! the fiber angle, with coefficients given as complex jet closures. The
//! operators `V`, `X`, `X⊥` and the ladders `η±` act modewise:
//!
//! - `V` multiplies mode `m` by `im`;
//! - `X` sends `a e^{imθ}` to `e^{-φ}(∂a - m ∂φ a) e^{i(m+1)θ} + e^{-φ}(∂̄a + m ∂̄φ a) e^{i(m-1)θ}`;
//! - `X⊥ = VX - XV` and `η± = ½(X ∓ iX⊥)`.
//!
//! A second, direct route samples `X f` pointwise in `θ` and recovers modes by
//! FFT.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{fd_jet, DerivativeMode, ScalarField, VectorField};
use crate::fuchsian::invariant::hyperbolic_bump;
use crate::jet::{CJet, Jet, MAX_ORDER};
use crate::metric::{ConformalChart, Domain, MetricFamily};
use crate::par::{self, ExecPolicy};
use crate::variation::lie_derivative_metric;

pub const DEFAULT_CUTOFF: usize = 8;
pub const DEFAULT_LIMIT: usize = 10;
/// Threshold for a mode coefficient to count as vanishing.
pub const MODE_TOL: f64 = 1e-12;
/// Relative change at which the area quadrature stops refining.
pub const QUAD_TOL: f64 = 1e-8;
/// Sign `s` in the bracket relation `[X, X⊥] = s K V` under test. The chart
/// realization of the frame satisfies the relation with `s = +1`.
pub const STATED_BRACKET_SIGN: f64 = -1.0;

pub type Coefficient = Arc<dyn Fn(&Jet, &Jet) -> CJet + Send + Sync>;

pub fn coefficient(f: impl Fn(&Jet, &Jet) -> CJet + Send + Sync + 'static) -> Coefficient {
    Arc::new(f)
}

fn subst(c: CJet, x: &Jet, y: &Jet) -> CJet {
    CJet::new(c.re.substitute(x, y), c.im.substitute(x, y))
}

fn nan_jet(order: usize) -> Jet {
    Jet::constant(f64::NAN, order)
}

/// One summand of a mode coefficient. Operator outputs are `derived`: they
/// respect jet inputs whatever the backend, so only leaf data is ever
/// differenced and finite differences never nest.
#[derive(Clone)]
struct Term {
    f: Coefficient,
    derived: bool,
}

impl Term {
    fn leaf(f: Coefficient) -> Self {
        Self { f, derived: false }
    }

    fn map(&self, g: impl Fn(CJet) -> CJet + Send + Sync + 'static) -> Self {
        let f = self.f.clone();
        Self { f: coefficient(move |x, y| g(f(x, y))), derived: self.derived }
    }

    fn jet(&self, mode: DerivativeMode, x0: f64, y0: f64, order: usize) -> CJet {
        let mode = if self.derived { DerivativeMode::Analytic } else { mode };
        coefficient_jet(&self.f, mode, x0, y0, order)
    }
}

fn terms_jet(terms: &[Term], mode: DerivativeMode, x0: f64, y0: f64, order: usize) -> CJet {
    terms.iter().fold(CJet::zero(order), |acc, t| acc + t.jet(mode, x0, y0, order))
}

/// Jet of a coefficient at a point, through the chosen derivative backend.
fn coefficient_jet(a: &Coefficient, mode: DerivativeMode, x0: f64, y0: f64, order: usize) -> CJet {
    match mode {
        DerivativeMode::Analytic => a(&Jet::var_x(x0, order), &Jet::var_y(y0, order)),
        DerivativeMode::FiniteDifference { step } => {
            let val = |x: f64, y: f64| a(&Jet::constant(x, 0), &Jet::constant(y, 0)).value();
            let re = fd_jet(&|x, y| val(x, y).re, x0, y0, order, step).unwrap_or_else(|_| nan_jet(order));
            let im = fd_jet(&|x, y| val(x, y).im, x0, y0, order, step).unwrap_or_else(|_| nan_jet(order));
            CJet::new(re, im)
        }
    }
}

/// Finite Fourier series in the fiber angle.
#[derive(Clone)]
pub struct SphereBundleFunction {
    modes: BTreeMap<i32, Vec<Term>>,
    cutoff: usize,
}

impl fmt::Debug for SphereBundleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereBundleFunction")
            .field("modes", &self.modes.keys().collect::<Vec<_>>())
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

impl Default for SphereBundleFunction {
    fn default() -> Self {
        Self::zero()
    }
}

impl SphereBundleFunction {
    pub fn new(cutoff: usize) -> Self {
        Self { modes: BTreeMap::new(), cutoff }
    }

    pub fn zero() -> Self {
        Self::new(DEFAULT_CUTOFF)
    }

    /// `a(x) e^{imθ}`.
    pub fn single(m: i32, a: Coefficient) -> Result<Self> {
        Self::zero().with_mode(m, a)
    }

    /// Pullback of a base function, a pure mode-0 series.
    pub fn from_scalar(f: &ScalarField) -> Self {
        let f = f.clone();
        let mut out = Self::zero();
        out.push(0, coefficient(move |x, y| CJet::real(f.compose(x, y))));
        out
    }

    pub fn constant(c: f64) -> Self {
        Self::from_scalar(&ScalarField::constant(c))
    }

    /// Adds `a e^{imθ}` to the series.
    pub fn with_mode(mut self, m: i32, a: Coefficient) -> Result<Self> {
        if m.unsigned_abs() as usize > self.cutoff {
            return Err(Error::Truncation { cutoff: m.unsigned_abs() as usize, limit: self.cutoff });
        }
        self.push(m, a);
        Ok(self)
    }

    fn push(&mut self, m: i32, a: Coefficient) {
        self.push_term(m, Term::leaf(a));
    }

    fn push_term(&mut self, m: i32, t: Term) {
        self.modes.entry(m).or_default().push(t);
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff.max(self.max_mode());
        self
    }

    pub fn modes(&self) -> Vec<i32> {
        self.modes.keys().copied().collect()
    }

    fn max_mode(&self) -> usize {
        self.modes.keys().map(|m| m.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// The coefficient of mode `m` as a single closure.
    pub fn coefficient(&self, m: i32) -> Option<Coefficient> {
        let terms = self.modes.get(&m)?.clone();
        Some(coefficient(move |x, y| {
            let o = x.order().min(y.order());
            terms.iter().fold(CJet::zero(o), |acc, t| acc + (t.f)(x, y))
        }))
    }

    pub fn coefficient_value(&self, m: i32, x: f64, y: f64) -> Complex64 {
        let (xj, yj) = (Jet::constant(x, 0), Jet::constant(y, 0));
        self.modes
            .get(&m)
            .map(|ts| ts.iter().map(|t| (t.f)(&xj, &yj).value()).sum())
            .unwrap_or_default()
    }

    pub fn eval(&self, x: f64, y: f64, theta: f64) -> Complex64 {
        self.modes
            .keys()
            .map(|&m| self.coefficient_value(m, x, y) * Complex64::from_polar(1.0, m as f64 * theta))
            .sum()
    }

    fn combine(&self, other: &Self, s: Complex64) -> Self {
        let mut out = Self::new(self.cutoff.max(other.cutoff));
        for (&m, ts) in &self.modes {
            for t in ts {
                out.push_term(m, t.clone());
            }
        }
        for (&m, ts) in &other.modes {
            for t in ts {
                out.push_term(m, t.map(move |c| c.mul_c(s.re, s.im)));
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.cutoff).combine(self, s)
    }

    /// Keeps the modes selected by `keep`.
    pub fn restrict(&self, keep: impl Fn(i32) -> bool) -> Self {
        let modes = self.modes.iter().filter(|(m, _)| keep(**m)).map(|(m, a)| (*m, a.clone())).collect();
        Self { modes, cutoff: self.cutoff }
    }

    /// `max |a_m|` over the grid for modes outside `allowed`.
    pub fn off_mode_residual(&self, allowed: &[i32], grid: &[(f64, f64)]) -> f64 {
        let mut r: f64 = 0.0;
        for (&m, _) in self.modes.iter().filter(|(m, _)| !allowed.contains(m)) {
            for &(x, y) in grid {
                r = r.max(self.coefficient_value(m, x, y).norm());
            }
        }
        r
    }

    /// `max |a_{-m} - conj(a_m)|` over the grid; zero for real functions.
    pub fn reality_residual(&self, grid: &[(f64, f64)]) -> f64 {
        let mut r: f64 = 0.0;
        for &m in self.modes.keys() {
            for &(x, y) in grid {
                let d = self.coefficient_value(-m, x, y) - self.coefficient_value(m, x, y).conj();
                r = r.max(d.norm());
            }
        }
        r
    }

    /// `max_x Σ_m |a_m(x)|`, an upper bound for the sup over the bundle.
    pub fn sup_norm(&self, grid: &[(f64, f64)]) -> f64 {
        grid.iter()
            .map(|&(x, y)| self.modes.keys().map(|&m| self.coefficient_value(m, x, y).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Even and odd parts under `(x, θ) ↦ (x, θ + π)`.
pub fn flip_decompose(f: &SphereBundleFunction) -> (SphereBundleFunction, SphereBundleFunction) {
    (f.restrict(|m| m % 2 == 0), f.restrict(|m| m % 2 != 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
}

/// The frame `(X, X⊥, V)` of a conformal chart. Coefficient derivatives use
/// the chart's derivative backend.
#[derive(Clone, Debug)]
pub struct FrameOperatorSet {
    pub chart: ConformalChart,
    pub limit: usize,
    /// Reverses the fiber orientation, negating `X⊥`. Used as a negative
    /// control for the commutator checks.
    pub flip_orientation: bool,
}

impl FrameOperatorSet {
    pub fn new(chart: ConformalChart) -> Self {
        Self { chart, limit: DEFAULT_LIMIT, flip_orientation: false }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn with_flipped_orientation(mut self) -> Self {
        self.flip_orientation = true;
        self
    }

    fn grown_cutoff(&self, f: &SphereBundleFunction) -> Result<usize> {
        let c = f.cutoff + 1;
        if c > self.limit {
            return Err(Error::Truncation { cutoff: c, limit: self.limit });
        }
        Ok(c)
    }

    pub fn apply_v(&self, f: &SphereBundleFunction) -> SphereBundleFunction {
        let mut out = SphereBundleFunction::new(f.cutoff);
        for (&m, ts) in &f.modes {
            if m != 0 {
                for t in ts {
                    out.push_term(m, t.map(move |c| c.mul_c(0.0, m as f64)));
                }
            }
        }
        out
    }

    /// One half of `X` on mode `m`: the raising part lands in `m + 1`, the
    /// lowering part in `m - 1`.
    fn ladder_term(&self, terms: &[Term], m: i32, dir: Ladder) -> Term {
        let phi = self.chart.phi.clone();
        let mode = self.chart.mode;
        let terms = terms.to_vec();
        let mf = m as f64;
        let f = coefficient(move |x, y| {
            let n = x.order().min(y.order()).min(MAX_ORDER - 1);
            let (x, y) = (x.truncate(n), y.truncate(n));
            let (x0, y0) = (x.value(), y.value());
            let p = phi.jet_with(mode, x0, y0, n + 1).unwrap_or_else(|_| nan_jet(n + 1));
            let aj = terms_jet(&terms, mode, x0, y0, n + 1);
            let pc = CJet::real(p);
            let core = match dir {
                Ladder::Raise => aj.d_holo() - pc.d_holo() * aj.truncate(n).scale(mf),
                Ladder::Lower => aj.d_antiholo() + pc.d_antiholo() * aj.truncate(n).scale(mf),
            };
            subst(core.mul_real((-p.truncate(n)).exp()), &x, &y)
        });
        Term { f, derived: true }
    }

    pub fn apply_x(&self, f: &SphereBundleFunction) -> Result<SphereBundleFunction> {
        let mut out = SphereBundleFunction::new(self.grown_cutoff(f)?);
        for (&m, ts) in &f.modes {
            out.push_term(m + 1, self.ladder_term(ts, m, Ladder::Raise));
            out.push_term(m - 1, self.ladder_term(ts, m, Ladder::Lower));
        }
        Ok(out)
    }

    /// `X⊥ = VX - XV`.
    pub fn apply_xperp(&self, f: &SphereBundleFunction) -> Result<SphereBundleFunction> {
        let vx = self.apply_v(&self.apply_x(f)?);
        let xv = self.apply_x(&self.apply_v(f))?;
        let out = vx.sub(&xv);
        Ok(if self.flip_orientation { out.scale(Complex64::new(-1.0, 0.0)) } else { out })
    }

    /// `η⁺ = ½(X - iX⊥)`, `η⁻ = ½(X + iX⊥)`.
    pub fn eta(&self, f: &SphereBundleFunction, dir: Ladder) -> Result<SphereBundleFunction> {
        let x = self.apply_x(f)?;
        let xp = self.apply_xperp(f)?;
        let s = match dir {
            Ladder::Raise => -0.5,
            Ladder::Lower => 0.5,
        };
        Ok(x.scale(Complex64::new(0.5, 0.0)).combine(&xp, Complex64::new(0.0, s)))
    }

    /// Modes of `X f` at a point by sampling the vector field in `θ` and
    /// transforming back.
    pub fn direct_x_modes(&self, f: &SphereBundleFunction, x: f64, y: f64) -> Result<BTreeMap<i32, Complex64>> {
        let p = self.chart.phi_jet(x, y, 1)?;
        let [px, py] = p.grad();
        let e = (-p.value()).exp();
        let n = (4 * (f.cutoff + 2)).next_power_of_two();
        let coeffs: Vec<(i32, CJet)> =
            f.modes.iter().map(|(&m, ts)| (m, terms_jet(ts, self.chart.mode, x, y, 1))).collect();
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let th = TAU * j as f64 / n as f64;
                let (s, c) = th.sin_cos();
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, a) in &coeffs {
                    let ph = Complex64::from_polar(1.0, *m as f64 * th);
                    let ax = Complex64::new(a.re.partial(1, 0), a.im.partial(1, 0));
                    let ay = Complex64::new(a.re.partial(0, 1), a.im.partial(0, 1));
                    let ath = a.value() * Complex64::new(0.0, *m as f64);
                    acc += (ax * c + ay * s + ath * (py * c - px * s)) * ph;
                }
                acc * e
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let half = (n / 2) as i32;
        let mut out = BTreeMap::new();
        for (k, v) in buf.into_iter().enumerate() {
            let m = if (k as i32) < half { k as i32 } else { k as i32 - n as i32 };
            out.insert(m, v / n as f64);
        }
        Ok(out)
    }

    /// `max |(X f)_m - direct_m|` over the grid and all sampled modes.
    pub fn ladder_vs_direct(&self, f: &SphereBundleFunction, grid: &[(f64, f64)]) -> Result<f64> {
        let xf = self.apply_x(f)?;
        let mut r: f64 = 0.0;
        for &(x, y) in grid {
            for (m, d) in self.direct_x_modes(f, x, y)? {
                r = r.max((xf.coefficient_value(m, x, y) - d).norm());
            }
        }
        Ok(r)
    }

    fn check_grid(&self, grid: &[(f64, f64)], order: usize) -> Result<()> {
        grid.iter().try_for_each(|&(x, y)| self.chart.check(x, y, order))
    }

    /// Sup-norms of `([V,X⊥] + X) f` and `([X,X⊥] + K V) f` on the grid.
    pub fn commutator_residuals(&self, f: &SphereBundleFunction, grid: &[(f64, f64)]) -> Result<(f64, f64)> {
        self.check_grid(grid, 2)?;
        let g1 = self
            .apply_v(&self.apply_xperp(f)?)
            .sub(&self.apply_xperp(&self.apply_v(f))?)
            .add(&self.apply_x(f)?);
        Ok((g1.sup_norm(grid), self.bracket_residual(f, grid, STATED_BRACKET_SIGN)?))
    }

    /// Sup-norm of `([X,X⊥] - s K V) f`.
    pub fn bracket_residual(&self, f: &SphereBundleFunction, grid: &[(f64, f64)], s: f64) -> Result<f64> {
        self.check_grid(grid, 2)?;
        let g = self.apply_x(&self.apply_xperp(f)?)?.sub(&self.apply_xperp(&self.apply_x(f)?)?);
        self.curvature_corrected_sup(&g, f, Complex64::new(-s, 0.0), grid)
    }

    /// Sup-norm of `([η⁻,η⁺] + s (i/2) K V) f`; `s = -1` is the ladder form
    /// of `[X,X⊥] = -K V`.
    pub fn eta_bracket_residual(&self, f: &SphereBundleFunction, grid: &[(f64, f64)], s: f64) -> Result<f64> {
        self.check_grid(grid, 2)?;
        let a = self.eta(&self.eta(f, Ladder::Raise)?, Ladder::Lower)?;
        let b = self.eta(&self.eta(f, Ladder::Lower)?, Ladder::Raise)?;
        self.curvature_corrected_sup(&a.sub(&b), f, Complex64::new(0.0, 0.5 * s), grid)
    }

    /// `max_x Σ_m |g_m + c K (im) f_m|`.
    fn curvature_corrected_sup(
        &self,
        g: &SphereBundleFunction,
        f: &SphereBundleFunction,
        c: Complex64,
        grid: &[(f64, f64)],
    ) -> Result<f64> {
        let mut r: f64 = 0.0;
        for &(x, y) in grid {
            let k = self.chart.gauss_curvature(x, y)?;
            let mut s = 0.0;
            for m in mode_union(g, f) {
                let kv = f.coefficient_value(m, x, y) * Complex64::new(0.0, m as f64) * k * c;
                s += (g.coefficient_value(m, x, y) + kv).norm();
            }
            r = r.max(s);
        }
        Ok(r)
    }
}

fn mode_union(a: &SphereBundleFunction, b: &SphereBundleFunction) -> Vec<i32> {
    let mut m: Vec<i32> = a.modes.keys().chain(b.modes.keys()).copied().collect();
    m.sort_unstable();
    m.dedup();
    m
}

/// Axis-aligned rectangle in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// `n × n` nodes including the edges.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        let mut g = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let u = i as f64 / (n - 1) as f64;
                let v = j as f64 / (n - 1) as f64;
                g.push((self.x0 + u * (self.x1 - self.x0), self.y0 + v * (self.y1 - self.y0)));
            }
        }
        g
    }

    pub fn boundary(&self, n: usize) -> Vec<(f64, f64)> {
        let mut b = Vec::with_capacity(4 * n);
        for k in 0..n {
            let u = k as f64 / n as f64;
            let x = self.x0 + u * (self.x1 - self.x0);
            let y = self.y0 + u * (self.y1 - self.y0);
            b.extend([(x, self.y0), (x, self.y1), (self.x0, y), (self.x1, y)]);
        }
        b
    }

    fn inside(&self, domain: &Domain) -> bool {
        [(self.x0, self.y0), (self.x0, self.y1), (self.x1, self.y0), (self.x1, self.y1)]
            .iter()
            .all(|&(x, y)| domain.contains(x, y, 0.0))
            && match *domain {
                Domain::Disk { cx, cy, r } => {
                    let nx = cx.clamp(self.x0, self.x1);
                    let ny = cy.clamp(self.y0, self.y1);
                    let far = (self.x0 - cx).abs().max((self.x1 - cx).abs()).hypot((self.y0 - cy).abs().max((self.y1 - cy).abs()));
                    far < r && (nx - cx).hypot(ny - cy) < r
                }
                _ => true,
            }
    }
}

/// Euclidean bounding box of the bump of hyperbolic radius `rho` about `c`,
/// padded by one percent.
pub fn bump_support(c: Complex64, rho: f64) -> Rect {
    let (yc, r) = (c.im * rho.cosh(), c.im * rho.sinh() * 1.01);
    Rect::new(c.re - r, c.re + r, yc - r, yc + r)
}

/// `∫∫ f dx dy` over the rectangle for vector-valued integrands vanishing
/// with all derivatives on its edges. For such integrands the trapezoid rule
/// converges faster than any fixed order; the grid is doubled until every
/// component changes by less than [`QUAD_TOL`] relative.
pub fn area_quadrature<const N: usize, F>(rect: &Rect, f: F) -> Result<[f64; N]>
where
    F: Fn(f64, f64) -> Result<[f64; N]> + Send + Sync,
{
    let trap = |n: usize| -> Result<[f64; N]> {
        let (hx, hy) = ((rect.x1 - rect.x0) / n as f64, (rect.y1 - rect.y0) / n as f64);
        let rows = par::map_range(ExecPolicy::Parallel, n - 1, |i| -> Result<[f64; N]> {
            let x = rect.x0 + (i + 1) as f64 * hx;
            let mut cols = vec![Vec::with_capacity(n - 1); N];
            for j in 1..n {
                let v = f(x, rect.y0 + j as f64 * hy)?;
                for c in 0..N {
                    cols[c].push(v[c]);
                }
            }
            Ok(std::array::from_fn(|c| par::pairwise_sum(&cols[c])))
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(std::array::from_fn(|c| {
            par::pairwise_sum(&rows.iter().map(|r| r[c]).collect::<Vec<_>>()) * hx * hy
        }))
    };
    let mut n = 32;
    let mut prev = trap(n)?;
    let mut change = f64::INFINITY;
    while n < 1024 {
        n *= 2;
        let t = trap(n)?;
        let scale = t.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        change = t.iter().zip(prev.iter()).fold(0.0f64, |a, (u, v)| a.max((u - v).abs())) / scale;
        if change < QUAD_TOL {
            return Ok(t);
        }
        prev = t;
    }
    Err(Error::Convergence { iters: n, residual: change })
}

/// `⟨f, g⟩ = Σ_m 2π ∫ f_m conj(g_m) e^{2φ} dx dy` over the rectangle.
pub fn pairing(
    chart: &ConformalChart,
    f: &SphereBundleFunction,
    g: &SphereBundleFunction,
    rect: &Rect,
) -> Result<Complex64> {
    let modes: Vec<i32> = mode_union(f, g).into_iter().filter(|m| f.modes.contains_key(m) && g.modes.contains_key(m)).collect();
    let [re, im] = area_quadrature(rect, |x, y| {
        let w = (2.0 * chart.phi_jet(x, y, 0)?.value()).exp();
        let s: Complex64 = modes
            .iter()
            .map(|&m| f.coefficient_value(m, x, y) * g.coefficient_value(m, x, y).conj())
            .sum();
        Ok([s.re * w, s.im * w])
    })?;
    Ok(Complex64::new(re, im) * TAU)
}

fn check_support(chart: &ConformalChart, a: &Coefficient, rect: &Rect) -> Result<()> {
    if !rect.inside(&chart.domain) {
        return Err(Error::Precondition("integration rectangle leaves the chart".into()));
    }
    let val = |x: f64, y: f64| a(&Jet::constant(x, 0), &Jet::constant(y, 0)).value().norm();
    let peak = rect.grid(48).iter().map(|&(x, y)| val(x, y)).fold(0.0, f64::max);
    let edge = rect.boundary(256).iter().map(|&(x, y)| val(x, y)).fold(0.0, f64::max);
    if edge > 1e-14 * peak.max(1e-300) {
        return Err(Error::Precondition(format!("coefficient does not vanish on the rectangle edge ({edge:.3e})")));
    }
    Ok(())
}

/// Pointwise `η±f` sharing `Xf` and `XVf`.
struct EtaPair {
    x: SphereBundleFunction,
    xv: SphereBundleFunction,
    orientation: f64,
}

impl EtaPair {
    fn new(ops: &FrameOperatorSet, f: &SphereBundleFunction) -> Result<Self> {
        Ok(Self {
            x: ops.apply_x(f)?,
            xv: ops.apply_x(&ops.apply_v(f))?,
            orientation: if ops.flip_orientation { -1.0 } else { 1.0 },
        })
    }

    /// `(k, (η⁺f)_k, (η⁻f)_k)` for every output mode.
    fn values(&self, x: f64, y: f64) -> Vec<(i32, Complex64, Complex64)> {
        mode_union(&self.x, &self.xv)
            .into_iter()
            .map(|k| {
                let xk = self.x.coefficient_value(k, x, y);
                let xp = (xk * Complex64::new(0.0, k as f64) - self.xv.coefficient_value(k, x, y)) * self.orientation;
                let ixp = xp * Complex64::new(0.0, 1.0);
                (k, 0.5 * (xk - ixp), 0.5 * (xk + ixp))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub m: i32,
    pub norm_w: f64,
    pub norm_eta_plus: f64,
    pub norm_eta_minus: f64,
    /// `∫ K |w|² dμ`
    pub curvature_integral: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub relative: f64,
    /// `|lhs + rhs|`, the residual with the bracket sign reversed.
    pub opposite_residual: f64,
    pub opposite_relative: f64,
}

/// Squared norms entering `‖η⁺w‖² - ‖η⁻w‖² = (m/2) ∫ K |w|² dμ` for
/// `w = a e^{imθ}`.
pub fn energy_identity_residual(
    ops: &FrameOperatorSet,
    a: &Coefficient,
    m: i32,
    rect: &Rect,
) -> Result<EnergyReport> {
    check_support(&ops.chart, a, rect)?;
    let w = SphereBundleFunction::single(m, a.clone())?;
    let pair = EtaPair::new(ops, &w)?;
    let chart = &ops.chart;
    let [nw, np, nm, kw] = area_quadrature(rect, |x, y| {
        // η±w depends on the 1-jet of a only
        let aj = a(&Jet::var_x(x, 1), &Jet::var_y(y, 1));
        if [aj.re, aj.im].iter().all(|j| j.value() == 0.0 && j.grad() == [0.0, 0.0]) {
            return Ok([0.0; 4]);
        }
        let e2 = (2.0 * chart.phi_jet(x, y, 0)?.value()).exp();
        let aw = w.coefficient_value(m, x, y).norm_sqr() * e2;
        let k = chart.gauss_curvature(x, y)?;
        let (mut up, mut dn) = (0.0, 0.0);
        for (_, u, d) in pair.values(x, y) {
            up += u.norm_sqr();
            dn += d.norm_sqr();
        }
        Ok([aw, up * e2, dn * e2, k * aw])
    })?;
    let (nw, np, nm, kw) = (TAU * nw, TAU * np, TAU * nm, TAU * kw);
    let lhs = np - nm;
    let rhs = -STATED_BRACKET_SIGN * 0.5 * m as f64 * kw;
    let residual = (lhs - rhs).abs();
    let opposite_residual = (lhs + rhs).abs();
    let scale = np.max(nm).max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok(EnergyReport {
        m,
        norm_w: nw,
        norm_eta_plus: np,
        norm_eta_minus: nm,
        curvature_integral: kw,
        lhs,
        rhs,
        residual,
        relative: residual / scale,
        opposite_residual,
        opposite_relative: opposite_residual / scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub holds: bool,
    pub slack: f64,
    /// Slack of `‖η⁻w‖² <= ‖η⁺w‖² - (κ0 m / 2)‖w‖²`.
    pub opposite_slack: f64,
    pub opposite_holds: bool,
    pub kappa0: f64,
    pub energy: EnergyReport,
}

/// `‖η⁺w‖² <= ‖η⁻w‖² - (κ0 m / 2)‖w‖²` with `κ0 = inf(-K)` on the rectangle.
pub fn coercivity_check(ops: &FrameOperatorSet, a: &Coefficient, m: i32, rect: &Rect) -> Result<CoercivityReport> {
    if m <= 0 {
        return Err(Error::Precondition(format!("coercivity needs m > 0, got {m}")));
    }
    let mut kappa0 = f64::INFINITY;
    for (x, y) in rect.grid(64) {
        kappa0 = kappa0.min(-ops.chart.gauss_curvature(x, y)?);
    }
    if !(kappa0 > 0.0) {
        return Err(Error::Model(format!("curvature bound kappa0 = {kappa0} is not positive")));
    }
    let e = energy_identity_residual(ops, a, m, rect)?;
    let slack = e.norm_eta_minus - e.norm_eta_plus - 0.5 * kappa0 * m as f64 * e.norm_w;
    let opposite_slack = e.norm_eta_plus - e.norm_eta_minus - 0.5 * kappa0 * m as f64 * e.norm_w;
    let tol = 1e-8 * e.norm_eta_minus.max(e.norm_eta_plus).max(e.norm_w);
    Ok(CoercivityReport {
        holds: slack >= -tol,
        slack,
        opposite_slack,
        opposite_holds: opposite_slack >= -tol,
        kappa0,
        energy: e,
    })
}

/// `u(x, ξ) = ⟨ξ, v(x)⟩_g`: modes `±1` with `a_{±1} = ½(V¹ ∓ iV²)`, where
/// `V = e^{φ} v` are the frame components.
pub fn fiber_linear_from_vector(chart: &ConformalChart, v: &VectorField) -> SphereBundleFunction {
    let mut out = SphereBundleFunction::zero();
    for sign in [1, -1] {
        let (phi, v) = (chart.phi.clone(), v.clone());
        out.push(
            sign,
            coefficient(move |x, y| {
                let vc = v.compose(x, y).mul_real(phi.compose(x, y).exp()).scale(0.5);
                if sign > 0 {
                    vc.conj()
                } else {
                    vc
                }
            }),
        );
    }
    out
}

/// `ṗ = -½ h(T, T)` of a family as a series in modes `0, ±2`.
pub fn dot_p_function(family: &MetricFamily) -> SphereBundleFunction {
    let mut out = SphereBundleFunction::zero();
    for m in [0, 2, -2] {
        let fam = family.clone();
        out.push(
            m,
            coefficient(move |x, y| {
                let n = x.order().min(y.order());
                let (x0, y0) = (x.value(), y.value());
                let (h, p) = match (fam.dot_metric_jet(x0, y0, n), fam.base.phi_jet(x0, y0, n)) {
                    (Ok(h), Ok(p)) => (h, p),
                    _ => return CJet::new(nan_jet(n), nan_jet(n)),
                };
                let s = (p * -2.0).exp();
                let (a, b, c) = (h[0] * s, h[1] * s, h[2] * s);
                let v = match m {
                    0 => CJet::real((a + c) * -0.25),
                    2 => CJet::new((a - c) * -0.125, b * 0.25),
                    _ => CJet::new((a - c) * -0.125, b * -0.25),
                };
                subst(v, x, y)
            }),
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeEquationReport {
    /// Modes of `Xu` outside `{0, ±2}`, from the direct route.
    pub off_modes: f64,
    pub f2: f64,
    pub f_minus2: f64,
    pub f0: f64,
    pub ladder_vs_direct: f64,
    /// `f₀` against `¼ e^{-2φ} tr(ℒ_v g)`.
    pub f0_vs_lie: f64,
}

impl ModeEquationReport {
    pub fn max(&self) -> f64 {
        [self.off_modes, self.f2, self.f_minus2, self.f0, self.ladder_vs_direct, self.f0_vs_lie]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn mode_equation_check(ops: &FrameOperatorSet, v: &VectorField, grid: &[(f64, f64)]) -> Result<ModeEquationReport> {
    ops.check_grid(grid, 2)?;
    let u = fiber_linear_from_vector(&ops.chart, v);
    let f = ops.apply_x(&u)?;
    let u1 = u.restrict(|m| m == 1);
    let um1 = u.restrict(|m| m == -1);
    let up1 = ops.eta(&u1, Ladder::Raise)?;
    let dn1 = ops.eta(&u1, Ladder::Lower)?;
    let upm1 = ops.eta(&um1, Ladder::Raise)?;
    let dnm1 = ops.eta(&um1, Ladder::Lower)?;
    let h = lie_derivative_metric(&ops.chart, v);
    let mut r = ModeEquationReport { off_modes: 0.0, f2: 0.0, f_minus2: 0.0, f0: 0.0, ladder_vs_direct: 0.0, f0_vs_lie: 0.0 };
    for &(x, y) in grid {
        let direct = ops.direct_x_modes(&u, x, y)?;
        for (&m, d) in &direct {
            if ![0, 2, -2].contains(&m) {
                r.off_modes = r.off_modes.max(d.norm());
            }
            r.ladder_vs_direct = r.ladder_vs_direct.max((f.coefficient_value(m, x, y) - d).norm());
        }
        let fv = |m| f.coefficient_value(m, x, y);
        r.f2 = r.f2.max((fv(2) - up1.coefficient_value(2, x, y)).norm());
        r.f_minus2 = r.f_minus2.max((fv(-2) - dnm1.coefficient_value(-2, x, y)).norm());
        let f0 = upm1.coefficient_value(0, x, y) + dn1.coefficient_value(0, x, y);
        r.f0 = r.f0.max((fv(0) - f0).norm());
        let hv = h.value(x, y);
        let s = (-2.0 * ops.chart.phi_jet(x, y, 0)?.value()).exp();
        r.f0_vs_lie = r.f0_vs_lie.max((fv(0) - Complex64::new(0.25 * s * (hv[0] + hv[2]), 0.0)).norm());
    }
    r.off_modes = r.off_modes.max(f.off_mode_residual(&[0, 2, -2], grid));
    Ok(r)
}

/// `B(z) (c₀ + c₁ x + c₂ y)` with `B` the hyperbolic bump of radius `rho`.
pub fn bump_coefficient(center: Complex64, rho: f64, c: [Complex64; 3]) -> Coefficient {
    let b = hyperbolic_bump(center, rho);
    coefficient(move |x, y| {
        let o = x.order().min(y.order());
        let lin = CJet::constant(c[0].re, c[0].im, o)
            + CJet::real(*x).mul_c(c[1].re, c[1].im)
            + CJet::real(*y).mul_c(c[2].re, c[2].im);
        lin.mul_real(b.compose(x, y))
    })
}

fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_coefficient<R: Rng + ?Sized>(rng: &mut R, center: Complex64, rho: f64) -> Coefficient {
    bump_coefficient(center, rho, [random_complex(rng), random_complex(rng), random_complex(rng)])
}

/// Series with every mode `|m| <= m_max` populated by bump coefficients.
pub fn random_function<R: Rng + ?Sized>(rng: &mut R, m_max: usize, center: Complex64, rho: f64) -> SphereBundleFunction {
    let mut f = SphereBundleFunction::zero().with_cutoff(m_max);
    for m in -(m_max as i32)..=(m_max as i32) {
        f.push(m, random_coefficient(rng, center, rho));
    }
    f
}

/// Half-plane chart with `φ = -ln y + ε B(z)`; curvature varies on the bump.
pub fn perturbed_half_plane(eps: f64, center: Complex64, rho: f64) -> ConformalChart {
    let b = hyperbolic_bump(center, rho);
    let phi = ScalarField::new(move |x, y| -y.ln() + b.compose(x, y) * eps);
    let mut c = ConformalChart::new("perturbed-half-plane", phi, Domain::UpperHalfPlane);
    c.negatively_curved = true;
    c
}

/// Residual report for the frame-operator checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct So2Report {
    pub test: String,
    pub chart: String,
    #[serde(rename = "M_max")]
    pub m_max: usize,
    pub grid: usize,
    pub residuals: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flat() -> FrameOperatorSet {
        FrameOperatorSet::new(ConformalChart::flat(Domain::Plane))
    }

    fn hyp() -> FrameOperatorSet {
        FrameOperatorSet::new(ConformalChart::half_plane())
    }

    const CENTER: Complex64 = Complex64::new(0.1, 1.2);

    fn grid() -> Vec<(f64, f64)> {
        bump_support(CENTER, 0.6).grid(7)
    }

    #[test]
    fn v_is_diagonal() {
        let f = SphereBundleFunction::single(-2, bump_coefficient(CENTER, 0.6, [c(1.0, 0.5), c(0.0, 0.0), c(0.0, 0.0)])).unwrap();
        let vf = hyp().apply_v(&f);
        let (x, y) = (0.2, 1.3);
        assert_relative_eq!((vf.coefficient_value(-2, x, y) - f.coefficient_value(-2, x, y) * c(0.0, -2.0)).norm(), 0.0);
        assert!(hyp().apply_v(&SphereBundleFunction::constant(3.0)).modes().is_empty());
    }

    #[test]
    fn flat_base_function() {
        // f = x² y + sin(y)
        let f = SphereBundleFunction::from_scalar(&ScalarField::new(|x, y| *x * *x * *y + y.sin()));
        let ops = flat();
        let xf = ops.apply_x(&f).unwrap();
        let xp = ops.apply_xperp(&f).unwrap();
        let (x, y): (f64, f64) = (0.7, -0.3);
        let (fx, fy) = (2.0 * x * y, x * x + y.cos());
        let dh = c(0.5 * fx, -0.5 * fy);
        let da = c(0.5 * fx, 0.5 * fy);
        assert!((xf.coefficient_value(1, x, y) - dh).norm() < 1e-14);
        assert!((xf.coefficient_value(-1, x, y) - da).norm() < 1e-14);
        assert!((xp.coefficient_value(1, x, y) - dh * c(0.0, 1.0)).norm() < 1e-14);
        assert!((xp.coefficient_value(-1, x, y) - da * c(0.0, -1.0)).norm() < 1e-14);
        assert!(xf.off_mode_residual(&[1, -1], &[(x, y)]) < 1e-14);
    }

    #[test]
    fn constants_are_annihilated() {
        let ops = hyp();
        let one = SphereBundleFunction::constant(1.0);
        let g = grid();
        assert_eq!(ops.apply_x(&one).unwrap().sup_norm(&g), 0.0);
        assert_eq!(ops.apply_xperp(&one).unwrap().sup_norm(&g), 0.0);
        let (r1, r2) = ops.commutator_residuals(&one, &g).unwrap();
        assert_eq!((r1, r2), (0.0, 0.0));
    }

    #[test]
    fn structure_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_function(&mut rng, 4, CENTER, 0.6);
        let g = grid();
        for ops in [hyp(), FrameOperatorSet::new(perturbed_half_plane(0.1, CENTER, 0.5))] {
            let (r1, r2) = ops.commutator_residuals(&f, &g).unwrap();
            assert!(r1 < 1e-10, "{} {r1:e}", ops.chart.name);
            // the chart frame satisfies [X, X⊥] = +K V
            assert!(r2 > 1.0, "{r2:e}");
            assert!(ops.bracket_residual(&f, &g, 1.0).unwrap() < 1e-10);
            assert!(ops.eta_bracket_residual(&f, &g, 1.0).unwrap() < 1e-10);
            assert!(ops.eta_bracket_residual(&f, &g, -1.0).unwrap() > 0.5);
        }
        let (r1, r2) = flat().commutator_residuals(&f, &g).unwrap();
        assert!(r1 < 1e-12 && r2 < 1e-12);
        let fd = FrameOperatorSet::new(ConformalChart::half_plane().with_mode(DerivativeMode::finite_difference()));
        let (r1, _) = fd.commutator_residuals(&f, &g).unwrap();
        assert!(r1 < 1e-4, "{r1:e}");
        let rb = fd.bracket_residual(&f, &g, 1.0).unwrap();
        assert!(rb < 1e-4, "{rb:e}");
        // negating X⊥ alone trades the first relation for the bracket
        let (r1, r2) = hyp().with_flipped_orientation().commutator_residuals(&f, &g).unwrap();
        assert!(r1 > 1e-3 && r2 < 1e-10, "{r1:e} {r2:e}");
    }

    #[test]
    fn ladders_shift_by_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = FrameOperatorSet::new(perturbed_half_plane(0.1, CENTER, 0.5));
        let g = grid();
        for m in [-2, 0, 1, 3] {
            let w = SphereBundleFunction::single(m, random_coefficient(&mut rng, CENTER, 0.6)).unwrap();
            let up = ops.eta(&w, Ladder::Raise).unwrap();
            let dn = ops.eta(&w, Ladder::Lower).unwrap();
            assert!(up.off_mode_residual(&[m + 1], &g) < MODE_TOL);
            assert!(dn.off_mode_residual(&[m - 1], &g) < MODE_TOL);
            let sum = up.add(&dn).sub(&ops.apply_x(&w).unwrap());
            assert!(sum.sup_norm(&g) < 1e-12);
            let vu = ops.apply_v(&up).sub(&up.scale(c(0.0, (m + 1) as f64)));
            assert!(vu.sup_norm(&g) < 1e-12);
            let pair = EtaPair::new(&ops, &w).unwrap();
            for &(x, y) in &g {
                for (k, u, d) in pair.values(x, y) {
                    assert!((u - up.coefficient_value(k, x, y)).norm() < 1e-13);
                    assert!((d - dn.coefficient_value(k, x, y)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn direct_route_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_function(&mut rng, 3, CENTER, 0.6);
        let ops = FrameOperatorSet::new(perturbed_half_plane(0.1, CENTER, 0.5));
        assert!(ops.ladder_vs_direct(&f, &grid()).unwrap() < 1e-12);
    }

    #[test]
    fn cutoff_growth_is_tracked() {
        let f = SphereBundleFunction::constant(1.0).with_cutoff(9);
        let ops = hyp();
        let xf = ops.apply_x(&f).unwrap();
        assert_eq!(xf.cutoff(), 10);
        assert!(matches!(ops.apply_x(&xf), Err(Error::Truncation { cutoff: 11, limit: 10 })));
        assert!(SphereBundleFunction::single(9, bump_coefficient(CENTER, 0.5, [c(1.0, 0.0); 3])).is_err());
    }

    #[test]
    fn fiber_linear_modes() {
        let chart = ConformalChart::flat(Domain::Plane);
        let u = fiber_linear_from_vector(&chart, &VectorField::from_components(ScalarField::constant(1.0), ScalarField::zero()));
        assert_eq!(u.coefficient_value(1, 0.3, 0.2), c(0.5, 0.0));
        assert_eq!(u.coefficient_value(-1, 0.3, 0.2), c(0.5, 0.0));
        assert_relative_eq!(u.eval(0.3, 0.2, 0.4).re, 0.4f64.cos(), epsilon = 1e-15);
        let (even, odd) = flip_decompose(&u);
        assert!(even.modes().is_empty());
        assert_eq!(odd.modes(), vec![-1, 1]);
        assert_eq!(u.reality_residual(&[(0.3, 0.2)]), 0.0);
    }

    #[test]
    fn energy_identity_constant_curvature() {
        let a = bump_coefficient(CENTER, 0.6, [c(1.0, 0.2), c(0.3, -0.1), c(0.0, 0.4)]);
        let rect = bump_support(CENTER, 0.6);
        let e = energy_identity_residual(&hyp(), &a, 1, &rect).unwrap();
        assert!(e.opposite_relative < 1e-6, "{e:?}");
        assert_relative_eq!(e.lhs, 0.5 * e.norm_w, max_relative = 1e-6);
        assert_relative_eq!(e.relative, e.norm_w / e.norm_eta_plus.max(e.norm_eta_minus), max_relative = 1e-5);
        let e0 = energy_identity_residual(&hyp(), &a, 0, &rect).unwrap();
        assert!(e0.lhs.abs() < 1e-6 * e0.norm_eta_plus);
        assert!(e0.residual < 1e-6 * e0.norm_eta_plus);
        let co = coercivity_check(&hyp(), &a, 2, &rect).unwrap();
        assert!(!co.holds && co.opposite_holds, "{co:?}");
        assert!(co.opposite_slack.abs() < 1e-6 * co.energy.norm_w, "{co:?}");
    }

    #[test]
    fn support_must_stay_inside() {
        let a = bump_coefficient(CENTER, 0.6, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let mut rect = bump_support(CENTER, 0.6);
        rect.x1 = CENTER.re;
        assert!(matches!(energy_identity_residual(&hyp(), &a, 1, &rect), Err(Error::Precondition(_))));
        let flat = FrameOperatorSet::new(ConformalChart::flat(Domain::Plane));
        assert!(matches!(coercivity_check(&flat, &a, 1, &bump_support(CENTER, 0.6)), Err(Error::Model(_))));
    }
}
