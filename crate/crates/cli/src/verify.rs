//! Verification suites run by the `verify` command.
//!
//! Each suite returns its measured residuals next to the tolerance it was
//! judged against. The report is a pure function of the configuration: no
//! timings or timestamps are written.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use flatlab_core::dynamics::orbit::line_integral_h_tt;
use flatlab_core::dynamics::{fd_length_derivative, find_closed_geodesic, jacobi_monodromy, FinderOptions, OrbitPolyline};
use flatlab_core::field::{DerivativeMode, ScalarField, VectorField};
use flatlab_core::flat_trace::{
    assemble_from_records, delta_prime_constraint_residual, fd_pairing_oracle, first_variation_pairing,
    transport_coefficient, AtomicMeasure, TrackedClass,
};
use flatlab_core::fuchsian::invariant::{random_vector, Invariance};
use flatlab_core::fuchsian::words::inverse_letter;
use flatlab_core::fuchsian::{
    bolza_generators, det_weight_constant_curvature, enumerate_classes, length_of, systole, EnumOptions,
    GeodesicRecord, GroupPresentation, Word,
};
use flatlab_core::metric::{ConformalChart, Domain, Law, MetricFamily};
use flatlab_core::par::{self, ExecPolicy};
use flatlab_core::so2::{
    bump_support, coercivity_check, dot_p_function, energy_identity_residual, mode_equation_check,
    perturbed_half_plane, random_coefficient, random_function, FrameOperatorSet, So2Report, STATED_BRACKET_SIGN,
};
use flatlab_core::variation::{
    dot_l_from_dot_p, first_variation_length, gk_strip_residual, lie_derivative_metric, metric_tensor,
    pullback_family, random_family, vector_scale, xu_lie_identity_residual, FamilyKind,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{cluster_test_function, ORBIT_POINTS};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::report;

type CoreResult<T> = flatlab_core::Result<T>;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub pass: bool,
    pub tolerance: f64,
    /// Largest residual judged against `tolerance`.
    pub worst: f64,
    pub checks: usize,
    pub metrics: BTreeMap<String, f64>,
    pub failures: Vec<String>,
    pub rows: Vec<Value>,
    /// Wall-clock seconds of the slowest job; not part of the report.
    #[serde(skip)]
    pub slowest_job: f64,
}

impl SuiteResult {
    fn new(suite: &str, tolerance: f64) -> Self {
        Self {
            suite: suite.into(),
            pass: true,
            tolerance,
            worst: 0.0,
            checks: 0,
            metrics: BTreeMap::new(),
            failures: Vec::new(),
            rows: Vec::new(),
            slowest_job: 0.0,
        }
    }

    /// Records `value < tol`; values judged against the suite tolerance feed
    /// `worst`.
    fn check(&mut self, label: impl Into<String>, value: f64, tol: f64) {
        self.checks += 1;
        if tol == self.tolerance {
            self.worst = self.worst.max(value);
        }
        if !(value < tol) {
            self.pass = false;
            self.failures.push(format!("{}: {value:.3e} not below {tol:.1e}", label.into()));
        }
    }

    fn require(&mut self, label: impl Into<String>, ok: bool) {
        self.checks += 1;
        if !ok {
            self.pass = false;
            self.failures.push(label.into());
        }
    }

    fn error(&mut self, label: &str, e: impl std::fmt::Display) {
        self.pass = false;
        self.failures.push(format!("{label}: {e}"));
    }

    /// Running maximum of a diagnostic.
    fn metric(&mut self, key: &str, v: f64) {
        let e = self.metrics.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        *e = e.max(v);
    }

    /// Running minimum of a diagnostic.
    fn metric_min(&mut self, key: &str, v: f64) {
        let e = self.metrics.entry(key.to_string()).or_insert(f64::INFINITY);
        *e = e.min(v);
    }
}

fn rng(cfg: &ExperimentConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt))
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// `|value| / scale`, zero when both vanish.
fn normalized(value: f64, scale: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value.abs() / scale
    }
}

fn unoriented(l_max: f64) -> CoreResult<Vec<GeodesicRecord>> {
    enumerate_classes(&bolza_generators(), l_max, &EnumOptions { unoriented: true, ..Default::default() })
}

fn primitive_axis(group: &GroupPresentation, r: &GeodesicRecord) -> CoreResult<OrbitPolyline> {
    OrbitPolyline::from_axis(&r.primitive_matrix(group), ORBIT_POINTS, Some(r.cls.primitive_root.to_string()))
}

fn axis_orbit(group: &GroupPresentation, r: &GeodesicRecord) -> CoreResult<OrbitPolyline> {
    let prim = primitive_axis(group, r)?;
    if r.m == 1 {
        Ok(prim)
    } else {
        prim.iterate(r.m)
    }
}

/// Primitive systolic orbits, one per unoriented class.
fn systolic_orbits() -> CoreResult<Vec<(String, OrbitPolyline)>> {
    let g = bolza_generators();
    unoriented(systole() + 1e-6)?
        .iter()
        .map(|r| Ok((r.cls.word.to_string(), axis_orbit(&g, r)?)))
        .collect()
}

fn test_fields(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, n: usize) -> Vec<VectorField> {
    let inv = Invariance::bolza();
    (0..n)
        .map(|_| if cfg.verify.zero_vector_field { VectorField::zero() } else { random_vector(rng, &inv) })
        .collect()
}

fn random_word(rng: &mut ChaCha8Rng, n: usize) -> Word {
    let mut w: Vec<u8> = Vec::with_capacity(n);
    while w.len() < n {
        let l = rng.gen_range(0..8u8);
        let cancels = w.last().is_some_and(|&p| inverse_letter(p) == l);
        let wraps = w.len() + 1 == n && n > 1 && inverse_letter(l) == w[0];
        if !(cancels || wraps) {
            w.push(l);
        }
    }
    Word(w)
}

/// Jacobi monodromy against `4 sinh²(L/2)` for systolic iterates and sampled
/// primitive classes up to `monodromy_factor · systole`.
pub fn suite_monodromy(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.monodromy;
    let mut s = SuiteResult::new("monodromy", tol);
    let g = bolza_generators();
    let l0 = systole();
    let l_top = cfg.verify.monodromy_factor * l0 * (1.0 + 1e-12);
    let mut words: Vec<(String, usize)> = Vec::new();
    match unoriented(l0 + 1e-6) {
        Ok(recs) => {
            for r in &recs {
                for m in 1..=3 {
                    if m as f64 * r.length <= l_top {
                        words.push((r.cls.word.to_string(), m));
                    }
                }
            }
        }
        Err(e) => s.error("enumeration", e),
    }
    let mut r = rng(cfg, 1);
    let mut seen: Vec<f64> = Vec::new();
    let mut tries = 0;
    while seen.len() < cfg.verify.monodromy_samples && tries < 10_000 {
        tries += 1;
        let n = r.gen_range(2..=4);
        let w = random_word(&mut r, n);
        let Ok(len) = length_of(&g.eval(&w)) else { continue };
        if len > l0 + 1e-6 && len <= l_top && !seen.iter().any(|&x| (x - len).abs() < 1e-9) {
            seen.push(len);
            words.push((w.to_string(), 1));
        }
    }
    let chart = ConformalChart::half_plane();
    let jobs = par::map(ExecPolicy::Parallel, &words, |(w, m)| -> CoreResult<(f64, f64, f64, f64)> {
        let start = Instant::now();
        let e = g.eval(&Word::parse(w)?).pow(*m as u32);
        let orbit = OrbitPolyline::from_axis(&e, 256, None)?;
        let det = jacobi_monodromy(&chart, &orbit)?.det_i_minus().abs();
        let secs = start.elapsed().as_secs_f64();
        Ok((orbit.period, det, det_weight_constant_curvature(orbit.period)?, secs))
    });
    for ((w, m), j) in words.iter().zip(jobs) {
        match j {
            Ok((l, det, exact, secs)) => {
                s.slowest_job = s.slowest_job.max(secs);
                let e = rel(det, exact);
                s.check(format!("{w}^{m}"), e, tol);
                s.metric("max_length", l);
                s.rows.push(json!({"class": w, "m": m, "L": l, "det_jacobi": det, "det_closed_form": exact, "rel_err": e}));
            }
            Err(e) => s.error(w, e),
        }
    }
    s.metrics.insert("orbits".into(), words.len() as f64);
    s
}

/// `½∫ḣ(T,T)ds` against a Richardson-extrapolated finite difference of the
/// closed-geodesic length, over random families and the systolic orbits.
pub fn suite_first_variation(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.variation;
    let mut s = SuiteResult::new("first_variation", tol);
    let orbits = match systolic_orbits() {
        Ok(o) => o,
        Err(e) => {
            s.error("orbits", e);
            return s;
        }
    };
    let chart = cfg.surface_chart();
    let inv = Invariance::bolza();
    let mut r = rng(cfg, 2);
    let families: Vec<MetricFamily> = (0..cfg.verify.families)
        .map(|i| {
            let kind = if i % 2 == 0 { FamilyKind::Conformal } else { FamilyKind::Tensor };
            random_family(&mut r, &chart, &inv, kind)
        })
        .collect();
    let pairs: Vec<(usize, usize)> =
        (0..families.len()).flat_map(|f| (0..orbits.len()).map(move |o| (f, o))).collect();
    let opts = FinderOptions::default();
    let jobs = par::map(ExecPolicy::Parallel, &pairs, |&(f, o)| -> CoreResult<(f64, f64, f64, f64)> {
        let start = Instant::now();
        let (fam, orbit) = (&families[f], &orbits[o].1);
        let formula = first_variation_length(fam, orbit)?;
        let chain = dot_l_from_dot_p(fam, orbit)?;
        let fd = fd_length_derivative(fam, orbit, cfg.dt, true, &opts)?.value;
        Ok((formula, chain, fd, start.elapsed().as_secs_f64()))
    });
    for (&(f, o), j) in pairs.iter().zip(jobs) {
        let label = format!("family {f} / {}", orbits[o].0);
        match j {
            Ok((formula, chain, fd, secs)) => {
                s.slowest_job = s.slowest_job.max(secs);
                let e = rel(formula, fd);
                s.check(&label, e, tol);
                let l = orbits[o].1.period;
                s.check(format!("{label} identity chain"), (formula - chain).abs() / l, 1e-10);
                s.metric("identity_chain", (formula - chain).abs() / l);
                s.rows.push(json!({"family": f, "class": orbits[o].0, "dL_formula": formula, "dL_fd": fd, "rel_err": e}));
            }
            Err(e) => s.error(&label, e),
        }
    }
    s.metrics.insert("families".into(), families.len() as f64);
    s.metrics.insert("orbits".into(), orbits.len() as f64);
    s
}

/// `ConformalExp(u ≡ 1)`: lengths follow `e^t L(0)`; the first variation is
/// compared with the stated value `L/2`.
pub fn suite_homothety(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.homothety;
    let mut s = SuiteResult::new("homothety", tol);
    let orbits = match systolic_orbits() {
        Ok(o) => o,
        Err(e) => {
            s.error("orbits", e);
            return s;
        }
    };
    let chart = cfg.surface_chart();
    let fam = MetricFamily::new(chart.clone(), Law::ConformalExp(ScalarField::constant(1.0)));
    let metric_dir = MetricFamily::new(chart.clone(), Law::LinearTensor(metric_tensor(&chart)));
    let opts = FinderOptions::default();
    let ts = [-0.05, -0.025, 0.025, 0.05];
    for (w, o) in orbits.iter().take(2) {
        for t in ts {
            match find_closed_geodesic(&fam, t, o, &opts) {
                Ok(p) => {
                    let e = rel(p.period, t.exp() * o.period);
                    s.check(format!("{w} at t = {t}"), e, tol);
                    s.rows.push(json!({"class": w, "t": t, "L_t": p.period, "law": t.exp() * o.period, "rel_err": e}));
                }
                Err(e) => s.error(w, e),
            }
        }
        match first_variation_length(&fam, o) {
            Ok(fv) => {
                let l = o.period;
                // stated: first_variation_length = L/2
                s.check(format!("{w} first variation against L/2"), rel(fv, 0.5 * l), tol);
                s.metric("first_variation_over_L", fv / l);
                s.metric("first_variation_vs_law_derivative", rel(fv, l));
            }
            Err(e) => s.error(w, e),
        }
        match first_variation_length(&metric_dir, o) {
            Ok(fv) => {
                s.metric("metric_direction_vs_half_length", rel(fv, 0.5 * o.period));
                s.check(format!("{w} h = g gives L/2"), rel(fv, 0.5 * o.period), tol);
            }
            Err(e) => s.error(w, e),
        }
    }
    s
}

/// `|∫(ℒ_v g)(T,T) ds| / (max|v| L)` on the systolic orbits, plus the pointwise
/// identity `X u = ½(ℒ_v g)(T,T)` on a few of them.
pub fn suite_coboundary(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.coboundary;
    let mut s = SuiteResult::new("coboundary", tol);
    let orbits = match systolic_orbits() {
        Ok(o) => o,
        Err(e) => {
            s.error("orbits", e);
            return s;
        }
    };
    let chart = cfg.surface_chart();
    let fields = test_fields(cfg, &mut rng(cfg, 4), cfg.verify.vector_fields);
    let pairs: Vec<(usize, usize)> = (0..fields.len()).flat_map(|f| (0..orbits.len()).map(move |o| (f, o))).collect();
    let jobs = par::map(ExecPolicy::Parallel, &pairs, |&(f, o)| -> CoreResult<(f64, f64)> {
        let orbit = &orbits[o].1;
        let h = lie_derivative_metric(&chart, &fields[f]);
        Ok((line_integral_h_tt(&chart, &h, orbit)?, vector_scale(&chart, &fields[f], orbit)? * orbit.period))
    });
    for (&(f, o), j) in pairs.iter().zip(jobs) {
        let label = format!("field {f} / {}", orbits[o].0);
        match j {
            Ok((v, scale)) => {
                let n = normalized(v, scale);
                s.check(&label, n, tol);
                s.rows.push(json!({"field": f, "class": orbits[o].0, "integral": v, "scale": scale, "normalized": n}));
            }
            Err(e) => s.error(&label, e),
        }
    }
    for v in fields.iter().take(2) {
        for (w, o) in orbits.iter().take(3) {
            match xu_lie_identity_residual(&chart, v, o, 1024) {
                Ok(rep) => {
                    let n = normalized(rep.residual, rep.scale.max(1.0));
                    s.metric("xu_identity", n);
                    s.check(format!("{w} X u identity"), n, tol);
                }
                Err(e) => s.error(w, e),
            }
        }
    }
    s
}

struct ClusterData {
    measure: AtomicMeasure,
    /// Orbit of every atom, aligned with `measure.atoms`.
    orbits: Vec<OrbitPolyline>,
    tracked: Vec<TrackedClass>,
}

fn cluster_data(cfg: &ExperimentConfig) -> CoreResult<ClusterData> {
    let g = bolza_generators();
    let recs = unoriented(cfg.l_max)?;
    let measure = assemble_from_records(&recs, cfg.l_max)?;
    let mut orbits = Vec::with_capacity(measure.atoms.len());
    let mut tracked = Vec::with_capacity(measure.atoms.len());
    for a in &measure.atoms {
        let r = recs.iter().find(|r| r.cls.word.to_string() == a.class).expect("atoms come from the records");
        let prim = primitive_axis(&g, r)?;
        orbits.push(if r.m == 1 { prim.clone() } else { prim.iterate(r.m)? });
        tracked.push(TrackedClass { class: a.class.clone(), m: r.m, primitive: prim });
    }
    Ok(ClusterData { measure, orbits, tracked })
}

/// First-variation pairing against the finite-difference pairing oracle on
/// every isolated cluster, and `𝒯(ℓ)` for isometric families.
pub fn suite_pairing(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.pairing;
    let mut s = SuiteResult::new("pairing", tol);
    let data = match cluster_data(cfg) {
        Ok(d) => d,
        Err(e) => {
            s.error("catalog", e);
            return s;
        }
    };
    let chart = cfg.surface_chart();
    let inv = Invariance::bolza();
    let mut r = rng(cfg, 5);
    let families: Vec<MetricFamily> = (0..cfg.verify.pairing_families)
        .map(|_| random_family(&mut r, &chart, &inv, FamilyKind::Tensor))
        .collect();
    let iso: Vec<MetricFamily> =
        test_fields(cfg, &mut r, cfg.verify.vector_fields.min(3)).iter().map(|v| pullback_family(&chart, v)).collect();
    let opts = FinderOptions::default();
    let mu = &data.measure;
    for c in mu.clusters() {
        let label = format!("cluster {:.6}", c.l);
        if let Err(e) = mu.check_isolated(&c) {
            s.error(&label, e);
            continue;
        }
        let orbits = &data.orbits[c.range.clone()];
        let tracked = &data.tracked[c.range.clone()];
        let psi = match cluster_test_function(mu, &c, cfg.test_function.half_width) {
            Ok(p) => p,
            Err(e) => {
                s.error(&label, e);
                continue;
            }
        };
        for (k, fam) in families.iter().enumerate() {
            let res = (|| -> CoreResult<(f64, f64)> {
                let l_dots = par::try_map(ExecPolicy::Parallel, orbits, |o| first_variation_length(fam, o))?;
                let p = first_variation_pairing(mu, &psi, &l_dots)?;
                let fd = fd_pairing_oracle(fam, tracked, &psi, cfg.dt, true, &opts, ExecPolicy::Parallel)?;
                Ok((p, fd.value))
            })();
            match res {
                Ok((p, fd)) => {
                    let e = rel(p, fd);
                    s.check(format!("{label} family {k}"), e, tol);
                    s.rows.push(json!({"l": c.l, "size": c.size, "family": k, "pairing": p, "pairing_fd": fd, "rel_err": e}));
                }
                Err(e) => s.error(&label, e),
            }
        }
        for (k, fam) in iso.iter().enumerate() {
            let res = par::try_map(ExecPolicy::Parallel, orbits, |o| first_variation_length(fam, o))
                .and_then(|l_dots| transport_coefficient(mu, c.l, &l_dots));
            match res {
                Ok(t) => {
                    s.check(format!("{label} isometric {k}"), t.value.abs(), cfg.tolerances.transport);
                    s.metric("isometric_transport", t.value.abs());
                    s.rows.push(json!({"l": c.l, "isometric": k, "transport": t.value}));
                }
                Err(e) => s.error(&label, e),
            }
        }
    }
    s.metrics.insert("clusters".into(), mu.clusters().len() as f64);
    s
}

/// `Σ w ∫ h(T,T) ds` per cluster: small for `h = ℒ_v g`, equal to `Σ w ℓ` for
/// `h = g`.
pub fn suite_delta_prime(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.delta_prime;
    let mut s = SuiteResult::new("delta_prime", tol);
    let data = match cluster_data(cfg) {
        Ok(d) => d,
        Err(e) => {
            s.error("catalog", e);
            return s;
        }
    };
    let chart = cfg.surface_chart();
    let fields = test_fields(cfg, &mut rng(cfg, 6), cfg.verify.vector_fields.min(3));
    let g = metric_tensor(&chart);
    let mu = &data.measure;
    for c in mu.clusters() {
        let label = format!("cluster {:.6}", c.l);
        let orbits = &data.orbits[c.range.clone()];
        let atoms = &mu.atoms[c.range.clone()];
        for (k, v) in fields.iter().enumerate() {
            let h = lie_derivative_metric(&chart, v);
            let res = (|| -> CoreResult<(f64, f64)> {
                let val = delta_prime_constraint_residual(mu, c.l, &chart, |x, y| Ok(h.value(x, y)), orbits)?;
                let mut scale = 0.0;
                for (a, o) in atoms.iter().zip(orbits) {
                    scale += a.w * vector_scale(&chart, v, o)? * o.period;
                }
                Ok((val, scale))
            })();
            match res {
                Ok((val, scale)) => {
                    let n = normalized(val, scale);
                    s.check(format!("{label} field {k}"), n, tol);
                    s.rows.push(json!({"l": c.l, "field": k, "residual": val, "scale": scale, "normalized": n}));
                }
                Err(e) => s.error(&label, e),
            }
        }
        let predicted: f64 = atoms.iter().map(|a| a.w * a.l).sum();
        match delta_prime_constraint_residual(mu, c.l, &chart, |x, y| Ok(g.value(x, y)), orbits) {
            Ok(val) => {
                s.check(format!("{label} h = g against Σ w ℓ"), rel(val, predicted), tol);
                s.require(format!("{label} h = g residual is nonzero"), val.abs() > 0.5 * predicted.abs());
                s.rows.push(json!({"l": c.l, "control": "h = g", "residual": val, "predicted": predicted}));
            }
            Err(e) => s.error(&label, e),
        }
    }
    s
}

/// Bump site of the frame suites inside the chart's domain.
fn site(domain: Domain) -> (Complex64, f64) {
    match domain {
        Domain::UpperHalfPlane => (Complex64::new(-0.1, 1.1), 0.55),
        _ => (Complex64::new(0.05, 0.45), 0.3),
    }
}

fn frame_ops(cfg: &ExperimentConfig, chart: ConformalChart) -> FrameOperatorSet {
    let ops = FrameOperatorSet::new(chart);
    if cfg.verify.flip_xperp {
        ops.with_flipped_orientation()
    } else {
        ops
    }
}

fn frame_charts(cfg: &ExperimentConfig) -> CliResult<Vec<ConformalChart>> {
    let base = cfg.chart()?.with_mode(DerivativeMode::Analytic);
    Ok(vec![base, perturbed_half_plane(0.05, Complex64::new(0.0, 1.0), 1.0)])
}

/// Sup residuals of `[V,X⊥] = -X` and `[X,X⊥] = -K V` with analytic and
/// finite-difference derivatives.
pub fn suite_commutator(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.commutator;
    let mut s = SuiteResult::new("commutator", tol);
    let charts = match frame_charts(cfg) {
        Ok(c) => c,
        Err(e) => {
            s.error("chart", e);
            return s;
        }
    };
    let mut r = rng(cfg, 7);
    let m_max = cfg.verify.m_max;
    for chart in charts {
        let (center, rho) = site(chart.domain);
        let grid = bump_support(center, rho).grid(cfg.verify.grid);
        let fs: Vec<_> = (0..2).map(|_| random_function(&mut r, m_max, center, rho)).collect();
        for (backend, mode, t) in [
            ("analytic", DerivativeMode::Analytic, tol),
            ("finite_difference", DerivativeMode::finite_difference(), cfg.tolerances.commutator_fd),
        ] {
            let ops = frame_ops(cfg, chart.clone().with_mode(mode));
            for (k, f) in fs.iter().enumerate() {
                let label = format!("{} {backend} f{k}", chart.name);
                let res = ops.commutator_residuals(f, &grid).and_then(|(r1, r2)| {
                    Ok((r1, r2, ops.bracket_residual(f, &grid, -STATED_BRACKET_SIGN)?))
                });
                match res {
                    Ok((r1, r2, opp)) => {
                        s.check(format!("{label} r1"), r1, t);
                        s.check(format!("{label} r2"), r2, t);
                        s.metric(&format!("r1_{backend}"), r1);
                        s.metric(&format!("r2_{backend}"), r2);
                        s.metric(&format!("r2_opposite_sign_{backend}"), opp);
                        let residuals = BTreeMap::from([
                            ("r1".to_string(), r1),
                            ("r2".to_string(), r2),
                            ("r2_opposite_sign".to_string(), opp),
                        ]);
                        let rep = So2Report {
                            test: format!("commutators/{backend}"),
                            chart: chart.name.clone(),
                            m_max,
                            grid: grid.len(),
                            residuals,
                        };
                        s.rows.push(serde_json::to_value(rep).expect("report serializes"));
                    }
                    Err(e) => s.error(&label, e),
                }
            }
        }
    }
    s
}

/// Energy identity for modes `m = 1, 2, 3` at constant curvature and the
/// coercive bound on a chart with variable negative curvature.
pub fn suite_energy(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.energy;
    let mut s = SuiteResult::new("energy", tol);
    let (center, rho) = site(Domain::UpperHalfPlane);
    let rect = bump_support(center, rho);
    let a = random_coefficient(&mut rng(cfg, 8), center, rho);
    let hyp = frame_ops(cfg, ConformalChart::half_plane());
    let var = frame_ops(cfg, perturbed_half_plane(0.05, center, 1.0));
    for m in 1..=3 {
        match energy_identity_residual(&hyp, &a, m, &rect) {
            Ok(e) => {
                s.check(format!("identity m = {m}"), e.relative, tol);
                s.metric("opposite_sign_relative", e.opposite_relative);
                let mut row = serde_json::to_value(e).expect("report serializes");
                row["test"] = json!("energy_identity");
                s.rows.push(row);
            }
            Err(e) => s.error(&format!("identity m = {m}"), e),
        }
        match coercivity_check(&var, &a, m, &rect) {
            Ok(c) => {
                let e = &c.energy;
                let scale = e.norm_eta_minus.max(e.norm_eta_plus).max(e.norm_w);
                s.check(format!("coercivity m = {m}"), (-c.slack / scale).max(0.0), cfg.tolerances.coercivity);
                s.metric_min("slack", c.slack / scale);
                s.metric_min("opposite_sign_slack", c.opposite_slack / scale);
                s.rows.push(json!({
                    "test": "coercivity", "m": m, "kappa0": c.kappa0, "slack": c.slack,
                    "opposite_slack": c.opposite_slack, "norm_w": e.norm_w,
                    "norm_eta_plus": e.norm_eta_plus, "norm_eta_minus": e.norm_eta_minus,
                }));
            }
            Err(e) => s.error(&format!("coercivity m = {m}"), e),
        }
    }
    s
}

/// Fourier support of `ṗ` and of `X u` for fiber-linear `u`, and the ladder
/// route against the direct route.
pub fn suite_modes(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.modes;
    let lt = cfg.tolerances.ladder;
    let mut s = SuiteResult::new("modes", tol);
    let (center, rho) = site(Domain::UpperHalfPlane);
    let grid = bump_support(center, rho).grid(cfg.verify.grid);
    let chart = cfg.surface_chart().with_mode(DerivativeMode::Analytic);
    let inv = Invariance::bolza();
    let mut r = rng(cfg, 9);
    let families = [
        random_family(&mut r, &chart, &inv, FamilyKind::Tensor),
        random_family(&mut r, &chart, &inv, FamilyKind::Tensor),
        random_family(&mut r, &chart, &inv, FamilyKind::Conformal),
    ];
    let n = 16;
    let plan = FftPlanner::new().plan_fft_forward(n);
    for (k, fam) in families.iter().enumerate() {
        let series = dot_p_function(fam);
        let mut off: f64 = 0.0;
        let mut vs_series: f64 = 0.0;
        for &(x, y) in &grid {
            let vals: CoreResult<Vec<Complex64>> =
                (0..n).map(|j| Ok(Complex64::new(fam.dot_p(x, y, TAU * j as f64 / n as f64)?, 0.0))).collect();
            let mut buf = match vals {
                Ok(b) => b,
                Err(e) => {
                    s.error(&format!("family {k}"), e);
                    break;
                }
            };
            plan.process(&mut buf);
            for (i, c) in buf.iter().enumerate() {
                let m = if i < n / 2 { i as i32 } else { i as i32 - n as i32 };
                let c = c / n as f64;
                if [0, 2, -2].contains(&m) {
                    vs_series = vs_series.max((c - series.coefficient_value(m, x, y)).norm());
                } else {
                    off = off.max(c.norm());
                }
            }
        }
        s.check(format!("dot_p family {k} off-mode"), off, tol);
        s.check(format!("dot_p family {k} modes against series"), vs_series, lt);
        s.metric("dot_p_off_modes", off);
        s.rows.push(json!({"test": "dot_p_modes", "family": k, "off_modes": off, "series": vs_series}));
    }
    let charts = [chart.clone(), perturbed_half_plane(0.05, Complex64::new(0.0, 1.0), 1.0)];
    for ch in charts {
        let ops = frame_ops(cfg, ch);
        for k in 0..2 {
            let v = random_vector(&mut r, &inv);
            match mode_equation_check(&ops, &v, &grid) {
                Ok(m) => {
                    let label = format!("{} field {k}", ops.chart.name);
                    s.check(format!("{label} X u off-mode"), m.off_modes, tol);
                    s.check(format!("{label} ladder vs direct"), m.ladder_vs_direct, lt);
                    for (name, val) in [("f2", m.f2), ("f-2", m.f_minus2), ("f0", m.f0), ("f0 vs Lie", m.f0_vs_lie)] {
                        s.check(format!("{label} {name}"), val, lt);
                    }
                    s.metric("xu_off_modes", m.off_modes);
                    s.metric("ladder_vs_direct", m.ladder_vs_direct);
                    let mut row = serde_json::to_value(m).expect("report serializes");
                    row["test"] = json!("mode_equation");
                    row["chart"] = json!(ops.chart.name);
                    s.rows.push(row);
                }
                Err(e) => s.error(&ops.chart.name, e),
            }
        }
    }
    s
}

/// `|∫ ṗ ds|` for first-order isometric families on every catalog orbit.
pub fn suite_gk_strip(cfg: &ExperimentConfig) -> SuiteResult {
    let tol = cfg.tolerances.gk_strip;
    let mut s = SuiteResult::new("gk_strip", tol);
    let g = bolza_generators();
    let orbits: CoreResult<Vec<(String, OrbitPolyline)>> = unoriented(cfg.l_max)
        .and_then(|recs| recs.iter().map(|r| Ok((r.cls.word.to_string(), axis_orbit(&g, r)?))).collect());
    let orbits = match orbits {
        Ok(o) => o,
        Err(e) => {
            s.error("catalog", e);
            return s;
        }
    };
    let chart = cfg.surface_chart();
    let fields = test_fields(cfg, &mut rng(cfg, 10), cfg.verify.vector_fields);
    let pairs: Vec<(usize, usize)> = (0..fields.len()).flat_map(|f| (0..orbits.len()).map(move |o| (f, o))).collect();
    let jobs = par::map(ExecPolicy::Parallel, &pairs, |&(f, o)| -> CoreResult<(f64, f64)> {
        let orbit = &orbits[o].1;
        let fam = pullback_family(&chart, &fields[f]);
        Ok((gk_strip_residual(&fam, orbit)?, vector_scale(&chart, &fields[f], orbit)? * orbit.period))
    });
    for (&(f, o), j) in pairs.iter().zip(jobs) {
        let label = format!("field {f} / {}", orbits[o].0);
        match j {
            Ok((v, scale)) => {
                let n = normalized(v, scale);
                s.check(&label, n, tol);
                s.rows.push(json!({"field": f, "class": orbits[o].0, "residual": v, "scale": scale, "normalized": n}));
            }
            Err(e) => s.error(&label, e),
        }
    }
    s.metrics.insert("orbits".into(), orbits.len() as f64);
    s
}

pub const SUITES: [(&str, fn(&ExperimentConfig) -> SuiteResult); 10] = [
    ("monodromy", suite_monodromy),
    ("first_variation", suite_first_variation),
    ("homothety", suite_homothety),
    ("coboundary", suite_coboundary),
    ("pairing", suite_pairing),
    ("delta_prime", suite_delta_prime),
    ("commutator", suite_commutator),
    ("energy", suite_energy),
    ("modes", suite_modes),
    ("gk_strip", suite_gk_strip),
];

pub fn run_suites(cfg: &ExperimentConfig, only: Option<&[String]>) -> CliResult<Vec<SuiteResult>> {
    if let Some(names) = only {
        for n in names {
            if !SUITES.iter().any(|(s, _)| s == n) {
                return Err(CliError::Config(format!("unknown suite `{n}`")));
            }
        }
    }
    Ok(SUITES
        .iter()
        .filter(|(name, _)| only.is_none_or(|o| o.iter().any(|n| n == name)))
        .map(|(_, f)| f(cfg))
        .collect())
}

pub fn verify_path(out: &Path) -> PathBuf {
    out.join("verify.jsonl")
}

/// Report body: one line per suite.
pub fn render(results: &[SuiteResult]) -> String {
    report::json_lines(results)
}

/// Runs the suites and writes the report; suite failures are returned in the
/// results, not as an error.
pub fn run_verify(cfg: &ExperimentConfig, only: Option<&[String]>) -> CliResult<(PathBuf, Vec<SuiteResult>)> {
    let results = run_suites(cfg, only)?;
    let path = verify_path(&cfg.out);
    report::write(&path, &render(&results))?;
    Ok((path, results))
}

pub fn cmd_verify(cfg: &ExperimentConfig, only: Option<&[String]>) -> CliResult<PathBuf> {
    let (path, results) = run_verify(cfg, only)?;
    let failing: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.suite.clone()).collect();
    if failing.is_empty() {
        Ok(path)
    } else {
        Err(CliError::Suite(failing))
    }
}
