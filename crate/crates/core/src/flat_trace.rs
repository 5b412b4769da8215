//! The flat trace of the geodesic flow as a weighted atomic measure on the
//! length axis, its pairings with test functions, and its first variation.

use std::ops::Range;

use serde::Serialize;

use crate::dynamics::orbit::{line_integral_sym, OrbitPolyline};
use crate::dynamics::{find_closed_geodesic, jacobi_monodromy, FinderOptions};
use crate::error::{Error, Result};
use crate::fuchsian::GeodesicRecord;
use crate::metric::{Metric, MetricFamily, Sym2};
use crate::par::{self, ExecPolicy};
use crate::variation::first_variation_length;

/// Atoms closer than this are grouped into one cluster.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Isolation margin in units of the cluster tolerance.
pub const ISOLATION_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub l: f64,
    pub w: f64,
    /// Word of the conjugacy class of the iterate.
    pub class: String,
    pub m: usize,
    #[serde(skip)]
    pub primitive_length: f64,
    #[serde(skip)]
    pub det_weight: f64,
}

/// Input row for assembly: a class, its lengths and, when known, the
/// Poincaré determinant `|det(I - P^m)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomInput {
    pub class: String,
    pub m: usize,
    pub length: f64,
    pub primitive_length: f64,
    pub det_weight: Option<f64>,
}

impl AtomInput {
    /// Row with the constant-curvature determinant of a catalog record.
    pub fn from_record(r: &GeodesicRecord) -> Self {
        Self {
            class: r.cls.word.to_string(),
            m: r.m,
            length: r.length,
            primitive_length: r.primitive_length,
            det_weight: crate::fuchsian::det_weight_constant_curvature(r.length).ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    /// Mean location of the member atoms.
    pub l: f64,
    #[serde(skip)]
    pub range: Range<usize>,
    pub total_weight: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    pub cluster_tol: f64,
}

pub fn assemble_flat_trace(entries: &[AtomInput], l_max: f64) -> Result<AtomicMeasure> {
    let mut atoms = Vec::with_capacity(entries.len());
    for e in entries {
        if e.length > l_max + CLUSTER_TOL {
            continue;
        }
        let det = e.det_weight.ok_or_else(|| {
            Error::IncompleteCatalog(format!("class {} (m = {}) has no monodromy weight", e.class, e.m))
        })?;
        if !(e.length > 0.0 && e.primitive_length > 0.0 && det > 0.0) {
            return Err(Error::IncompleteCatalog(format!("class {} has a non-positive length or weight", e.class)));
        }
        atoms.push(Atom {
            l: e.length,
            w: e.primitive_length / det,
            class: e.class.clone(),
            m: e.m,
            primitive_length: e.primitive_length,
            det_weight: det,
        });
    }
    atoms.sort_by(|a, b| a.l.total_cmp(&b.l).then_with(|| a.class.cmp(&b.class)));
    Ok(AtomicMeasure { atoms, cluster_tol: CLUSTER_TOL })
}

/// Flat trace of a catalog computed in curvature `-1`.
pub fn assemble_from_records(records: &[GeodesicRecord], l_max: f64) -> Result<AtomicMeasure> {
    let rows: Vec<AtomInput> = records.iter().map(AtomInput::from_record).collect();
    assemble_flat_trace(&rows, l_max)
}

impl AtomicMeasure {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn clusters(&self) -> Vec<Cluster> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.atoms.len() {
            if i == self.atoms.len() || self.atoms[i].l - self.atoms[i - 1].l > self.cluster_tol {
                if i > start {
                    let members = &self.atoms[start..i];
                    out.push(Cluster {
                        l: members.iter().map(|a| a.l).sum::<f64>() / members.len() as f64,
                        range: start..i,
                        total_weight: members.iter().map(|a| a.w).sum(),
                        size: members.len(),
                    });
                }
                start = i;
            }
        }
        out
    }

    /// The cluster whose location lies within the tolerance of `l`.
    pub fn cluster_at(&self, l: f64) -> Result<Cluster> {
        self.clusters()
            .into_iter()
            .find(|c| (c.l - l).abs() <= self.cluster_tol)
            .ok_or_else(|| Error::Precondition(format!("no atom at length {l}")))
    }

    /// Distance from the cluster to the nearest foreign atom.
    pub fn gap(&self, c: &Cluster) -> f64 {
        let below = c.range.start.checked_sub(1).map(|i| c.l - self.atoms[i].l);
        let above = self.atoms.get(c.range.end).map(|a| a.l - c.l);
        below.into_iter().chain(above).fold(f64::INFINITY, f64::min)
    }

    pub fn check_isolated(&self, c: &Cluster) -> Result<()> {
        let gap = self.gap(c);
        if gap > ISOLATION_FACTOR * self.cluster_tol {
            Ok(())
        } else {
            Err(Error::Isolation { ell: c.l, gap })
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "atoms": self.atoms.iter().map(|a| serde_json::json!({"l": a.l, "w": a.w, "class": a.class, "m": a.m})).collect::<Vec<_>>(),
            "cluster_tol": self.cluster_tol,
        })
    }
}

/// `ψ(τ) = B((τ - ℓ0)/r)` (plain) or `(τ - ℓ0) B((τ - ℓ0)/r)` (calibrated),
/// with `B(s) = exp(1 - 1/(1 - s²))` on `|s| < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub center: f64,
    pub half_width: f64,
    pub calibrated: bool,
}

fn bump(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let b = (1.0 - 1.0 / q).exp();
    (b, b * (-2.0 * s / (q * q)))
}

impl TestFunction {
    pub fn new(center: f64, half_width: f64, calibrated: bool) -> Result<Self> {
        if !(half_width > 0.0 && center - half_width > 0.0) {
            return Err(Error::Precondition(format!(
                "test function support ({}, {}) must lie in (0, ∞)",
                center - half_width,
                center + half_width
            )));
        }
        Ok(Self { center, half_width, calibrated })
    }

    pub fn plain(center: f64, half_width: f64) -> Result<Self> {
        Self::new(center, half_width, false)
    }

    pub fn calibrated(center: f64, half_width: f64) -> Result<Self> {
        Self::new(center, half_width, true)
    }

    pub fn in_support(&self, tau: f64) -> bool {
        (tau - self.center).abs() < self.half_width
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let d = tau - self.center;
        let (b, _) = bump(d / self.half_width);
        if self.calibrated {
            d * b
        } else {
            b
        }
    }

    pub fn deriv(&self, tau: f64) -> f64 {
        let d = tau - self.center;
        let (b, db) = bump(d / self.half_width);
        if self.calibrated {
            b + d * db / self.half_width
        } else {
            db / self.half_width
        }
    }

    /// Errors unless `ψ(ℓ0) = 0` and `ψ'(ℓ0) = 1`.
    pub fn check_calibration(&self) -> Result<()> {
        let (v, d) = (self.eval(self.center), self.deriv(self.center));
        if v.abs() <= 1e-12 && (d - 1.0).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(Error::Contract(format!("test function not calibrated: ψ = {v}, ψ' = {d}")))
        }
    }
}

/// `Σ w ψ(ℓ)` over the atoms in the support of `ψ`.
pub fn pair(measure: &AtomicMeasure, psi: &TestFunction) -> f64 {
    let terms: Vec<f64> = measure.atoms.iter().filter(|a| psi.in_support(a.l)).map(|a| a.w * psi.eval(a.l)).collect();
    par::pairwise_sum(&terms)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contributor {
    pub class: String,
    pub m: usize,
    pub primitive_length: f64,
    pub det_weight: f64,
    pub l_dot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportReport {
    pub l: f64,
    pub value: f64,
    pub contributors: Vec<Contributor>,
}

/// `𝒯(ℓ) = -Σ (L#/|det(I - P^m)|) L̇` over the isolated cluster at `l`;
/// `l_dots` is aligned with the cluster's atoms.
pub fn transport_coefficient(measure: &AtomicMeasure, l: f64, l_dots: &[f64]) -> Result<TransportReport> {
    let c = measure.cluster_at(l)?;
    measure.check_isolated(&c)?;
    if l_dots.len() != c.size {
        return Err(Error::Precondition(format!("expected {} length derivatives, got {}", c.size, l_dots.len())));
    }
    let contributors: Vec<Contributor> = measure.atoms[c.range.clone()]
        .iter()
        .zip(l_dots)
        .map(|(a, &l_dot)| Contributor {
            class: a.class.clone(),
            m: a.m,
            primitive_length: a.primitive_length,
            det_weight: a.det_weight,
            l_dot,
        })
        .collect();
    let terms: Vec<f64> = contributors.iter().map(|k| k.primitive_length / k.det_weight * k.l_dot).collect();
    Ok(TransportReport { l: c.l, value: -par::pairwise_sum(&terms), contributors })
}

/// First-variation lengths `L̇_{γ^m}` of the given orbits.
pub fn cluster_l_dots(family: &MetricFamily, orbits: &[OrbitPolyline], policy: ExecPolicy) -> Result<Vec<f64>> {
    par::try_map(policy, orbits, |o| first_variation_length(family, o))
}

/// `Σ w L̇` over the cluster at the centre of a calibrated `ψ`; the cluster
/// must be the only part of the measure inside the support of `ψ`.
pub fn first_variation_pairing(measure: &AtomicMeasure, psi: &TestFunction, l_dots: &[f64]) -> Result<f64> {
    psi.check_calibration()?;
    let c = measure.cluster_at(psi.center)?;
    measure.check_isolated(&c)?;
    for (i, a) in measure.atoms.iter().enumerate() {
        if psi.in_support(a.l) && !c.range.contains(&i) {
            return Err(Error::Isolation { ell: c.l, gap: (a.l - c.l).abs() });
        }
    }
    if l_dots.len() != c.size {
        return Err(Error::Precondition(format!("expected {} length derivatives, got {}", c.size, l_dots.len())));
    }
    let terms: Vec<f64> = measure.atoms[c.range].iter().zip(l_dots).map(|(a, d)| a.w * d).collect();
    Ok(par::pairwise_sum(&terms))
}

/// `Σ w ∫_{γ^m} h(T, T) ds` over the cluster at `l`, with orbits aligned to
/// the cluster's atoms.
pub fn delta_prime_constraint_residual<M, H>(
    measure: &AtomicMeasure,
    l: f64,
    metric: &M,
    h: H,
    orbits: &[OrbitPolyline],
) -> Result<f64>
where
    M: Metric + ?Sized,
    H: Fn(f64, f64) -> Result<Sym2>,
{
    let c = measure.cluster_at(l)?;
    measure.check_isolated(&c)?;
    if orbits.len() != c.size {
        return Err(Error::Precondition(format!("expected {} orbits, got {}", c.size, orbits.len())));
    }
    let mut terms = Vec::with_capacity(c.size);
    for (a, o) in measure.atoms[c.range].iter().zip(orbits) {
        terms.push(a.w * line_integral_sym(metric, o, &h)?);
    }
    Ok(par::pairwise_sum(&terms))
}

/// A class to follow under deformation: its primitive closed orbit at the
/// base parameter and the iterate exponent.
#[derive(Clone, Debug)]
pub struct TrackedClass {
    pub class: String,
    pub m: usize,
    pub primitive: OrbitPolyline,
}

/// Flat trace of `g_t` restricted to the tracked classes, with lengths from
/// the closed-geodesic finder and weights from Jacobi monodromy in `g_t`.
pub fn perturbed_measure(
    family: &MetricFamily,
    t: f64,
    classes: &[TrackedClass],
    opts: &FinderOptions,
    policy: ExecPolicy,
) -> Result<AtomicMeasure> {
    let rows = par::try_map(policy, classes, |c| -> Result<AtomInput> {
        let o = find_closed_geodesic(family, t, &c.primitive, opts)?;
        let p = jacobi_monodromy(&family.at(t), &o)?.pow(c.m);
        Ok(AtomInput {
            class: c.class.clone(),
            m: c.m,
            length: o.period * c.m as f64,
            primitive_length: o.period,
            det_weight: Some(p.det_i_minus()),
        })
    })?;
    assemble_flat_trace(&rows, f64::INFINITY)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairingOracle {
    pub value: f64,
    pub central: f64,
    pub error: f64,
}

/// `(⟨Tr_t, ψ⟩ - ⟨Tr_{-t}, ψ⟩) / 2t` with perturbed measures, optionally with
/// one Richardson level.
pub fn fd_pairing_oracle(
    family: &MetricFamily,
    classes: &[TrackedClass],
    psi: &TestFunction,
    dt: f64,
    richardson: bool,
    opts: &FinderOptions,
    policy: ExecPolicy,
) -> Result<PairingOracle> {
    let at = |t: f64| -> Result<f64> { Ok(pair(&perturbed_measure(family, t, classes, opts, policy)?, psi)) };
    let d1 = (at(dt)? - at(-dt)?) / (2.0 * dt);
    if !richardson {
        return Ok(PairingOracle { value: d1, central: d1, error: f64::NAN });
    }
    let d2 = (at(2.0 * dt)? - at(-2.0 * dt)?) / (4.0 * dt);
    let r = (4.0 * d1 - d2) / 3.0;
    Ok(PairingOracle { value: r, central: d1, error: (r - d1).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::systole;
    use approx::assert_relative_eq;

    fn row(class: &str, m: usize, lp: f64) -> AtomInput {
        let l = lp * m as f64;
        AtomInput {
            class: class.into(),
            m,
            length: l,
            primitive_length: lp,
            det_weight: crate::fuchsian::det_weight_constant_curvature(l).ok(),
        }
    }

    #[test]
    fn systolic_atoms() {
        let l0 = systole();
        let mu = assemble_flat_trace(&[row("a", 1, l0), row("aa", 2, l0)], 10.0).unwrap();
        // L0 / 19.313708498984763 and L0 / 450.27416997969526
        assert_relative_eq!(mu.atoms[0].w, 0.15828870147453541, max_relative = 1e-13);
        assert_relative_eq!(mu.atoms[1].w, 0.006789511908044505, max_relative = 1e-13);
        assert!((mu.atoms[0].w - 0.1582886).abs() < 2e-7 && (mu.atoms[1].w - 0.0067895).abs() < 1e-7);
        assert!(assemble_flat_trace(&[], 5.0).unwrap().is_empty());
        let mut missing = row("a", 1, l0);
        missing.det_weight = None;
        assert!(matches!(assemble_flat_trace(&[missing], 5.0), Err(Error::IncompleteCatalog(_))));
    }

    #[test]
    fn test_function_calibration() {
        let psi = TestFunction::calibrated(3.0, 0.5).unwrap();
        psi.check_calibration().unwrap();
        let h = 1e-6;
        let fd = (psi.eval(3.2 + h) - psi.eval(3.2 - h)) / (2.0 * h);
        assert_relative_eq!(psi.deriv(3.2), fd, epsilon = 1e-8);
        assert!(TestFunction::plain(3.0, 0.5).unwrap().check_calibration().is_err());
        assert!(TestFunction::plain(0.3, 0.5).is_err());
        assert_eq!(psi.eval(3.5), 0.0);
    }

    #[test]
    fn pairing_and_transport() {
        let l0 = systole();
        let mu = assemble_flat_trace(&[row("a", 1, l0), row("b", 1, l0), row("aa", 2, l0)], 10.0).unwrap();
        let w = mu.atoms[0].w;
        let psi = TestFunction::plain(l0, 0.5).unwrap();
        assert_relative_eq!(pair(&mu, &psi), 2.0 * w, epsilon = 1e-15);
        assert_eq!(pair(&mu, &TestFunction::plain(4.5, 0.5).unwrap()), 0.0);
        let t = transport_coefficient(&mu, l0, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(t.value, -w, epsilon = 1e-15);
        assert_eq!(transport_coefficient(&mu, l0, &[0.0, 0.0]).unwrap().value, 0.0);
        let cal = TestFunction::calibrated(l0, 0.5).unwrap();
        assert_relative_eq!(first_variation_pairing(&mu, &cal, &[0.3, -0.1]).unwrap(), 0.2 * w, epsilon = 1e-15);
        assert!(matches!(
            first_variation_pairing(&mu, &TestFunction::plain(l0, 0.5).unwrap(), &[0.0, 0.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn isolation_is_enforced() {
        let mu = assemble_flat_trace(&[row("a", 1, 3.0), row("b", 1, 3.0 + 5e-7)], 10.0).unwrap();
        assert_eq!(mu.clusters().len(), 2);
        assert!(matches!(transport_coefficient(&mu, 3.0, &[0.0]), Err(Error::Isolation { .. })));
    }
}
