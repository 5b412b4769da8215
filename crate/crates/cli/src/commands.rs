//! The `catalog`, `trace` and `deform` commands.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use flatlab_core::dynamics::{fd_length_derivative, FinderOptions, OrbitPolyline};
use flatlab_core::flat_trace::{
    assemble_flat_trace, first_variation_pairing, fd_pairing_oracle, transport_coefficient, AtomInput,
    AtomicMeasure, Cluster, TestFunction, TrackedClass,
};
use flatlab_core::fuchsian::{bolza_generators, enumerate_classes, CatalogEntry, EnumOptions, GroupPresentation};
use flatlab_core::metric::MetricFamily;
use flatlab_core::par::{self, ExecPolicy};
use flatlab_core::variation::{dot_l_from_dot_p, first_variation_length};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Orientation};
use crate::error::{data_err, CliError, CliResult};
use crate::report;

/// Samples of the axis polylines used as finder seeds and quadrature nodes.
pub const ORBIT_POINTS: usize = 1024;

pub fn catalog_path(out: &Path) -> PathBuf {
    out.join("catalog.json")
}

/// Closed-geodesic classes up to `l_max` with constant-curvature weights.
pub fn build_catalog(cfg: &ExperimentConfig) -> CliResult<Vec<CatalogEntry>> {
    let opts = EnumOptions { unoriented: cfg.orientation == Orientation::Unoriented, ..Default::default() };
    let recs = enumerate_classes(&bolza_generators(), cfg.l_max, &opts).map_err(data_err)?;
    Ok(recs.iter().map(CatalogEntry::from_record).collect())
}

pub fn cmd_catalog(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let rows = build_catalog(cfg)?;
    let path = catalog_path(&cfg.out);
    report::write(&path, &report::json_array(&rows))?;
    Ok(path)
}

/// Catalog row as read back from disk; every field must be present.
#[derive(Debug, Deserialize)]
struct RawEntry {
    word: Option<String>,
    trace: Option<f64>,
    #[serde(rename = "L")]
    length: Option<f64>,
    #[serde(rename = "L_primitive")]
    primitive_length: Option<f64>,
    m: Option<usize>,
    weight: Option<f64>,
}

/// Reads a catalog, dropping repeated words; the dropped words are returned
/// as warnings.
pub fn load_catalog(path: &Path) -> CliResult<(Vec<CatalogEntry>, Vec<String>)> {
    let src = report::read(path)?;
    let raw: Vec<RawEntry> =
        serde_json::from_str(&src).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut seen = BTreeSet::new();
    let mut rows = Vec::with_capacity(raw.len());
    let mut warnings = Vec::new();
    for (i, r) in raw.into_iter().enumerate() {
        let incomplete = |field: &str| CliError::Data(format!("incomplete catalog: row {i} has no valid `{field}`"));
        let finite = |v: Option<f64>, field: &str| v.filter(|v| v.is_finite()).ok_or_else(|| incomplete(field));
        let e = CatalogEntry {
            word: r.word.ok_or_else(|| incomplete("word"))?,
            trace: finite(r.trace, "trace")?,
            length: finite(r.length, "L")?,
            primitive_length: finite(r.primitive_length, "L_primitive")?,
            m: r.m.filter(|&m| m > 0).ok_or_else(|| incomplete("m"))?,
            weight: finite(r.weight, "weight").and_then(|w| if w > 0.0 { Ok(w) } else { Err(incomplete("weight")) })?,
        };
        if seen.insert(e.word.clone()) {
            rows.push(e);
        } else {
            warnings.push(format!("duplicate catalog entry {} ignored", e.word));
        }
    }
    Ok((rows, warnings))
}

pub fn atom_inputs(rows: &[CatalogEntry]) -> Vec<AtomInput> {
    rows.iter()
        .map(|e| AtomInput {
            class: e.word.clone(),
            m: e.m,
            length: e.length,
            primitive_length: e.primitive_length,
            det_weight: Some(e.primitive_length / e.weight),
        })
        .collect()
}

pub fn measure_path(out: &Path) -> PathBuf {
    out.join("measure.json")
}

/// Atomic measure of a catalog, truncated at `l_max`.
pub fn build_measure(cfg: &ExperimentConfig, rows: &[CatalogEntry]) -> CliResult<AtomicMeasure> {
    assemble_flat_trace(&atom_inputs(rows), cfg.l_max).map_err(data_err)
}

pub fn cmd_trace(cfg: &ExperimentConfig, catalog: &Path) -> CliResult<(PathBuf, Vec<String>)> {
    let (rows, warnings) = load_catalog(catalog)?;
    let mu = build_measure(cfg, &rows)?;
    let path = measure_path(&cfg.out);
    report::write(&path, &(report::to_line(&mu.to_json()) + "\n"))?;
    Ok((path, warnings))
}

/// Primitive axis orbit of a catalog class, tagged with its word.
pub fn primitive_orbit(group: &GroupPresentation, e: &CatalogEntry) -> CliResult<OrbitPolyline> {
    let rec = e.to_record(group).map_err(data_err)?;
    OrbitPolyline::from_axis(&rec.primitive_matrix(group), ORBIT_POINTS, Some(rec.cls.primitive_root.to_string()))
        .map_err(data_err)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitRow {
    pub kind: &'static str,
    pub class: String,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "dL_formula")]
    pub dl_formula: f64,
    #[serde(rename = "dL_fd")]
    pub dl_fd: f64,
    pub rel_err: f64,
    /// `|L̇ + ∫ ṗ ds|`, the gap in the identity chain.
    pub coboundary_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterRow {
    pub kind: &'static str,
    pub l: f64,
    pub size: usize,
    pub total_weight: f64,
    pub transport: f64,
    pub pairing: f64,
    pub pairing_fd: f64,
    pub rel_err: f64,
    pub half_width: f64,
    pub flag: &'static str,
}

/// Calibrated test function at the cluster, narrowed to stay clear of its
/// neighbours.
pub fn cluster_test_function(mu: &AtomicMeasure, c: &Cluster, half_width: f64) -> CliResult<TestFunction> {
    let r = half_width.min(0.9 * mu.gap(c));
    TestFunction::calibrated(c.l, r).map_err(data_err)
}

struct ClassResult {
    dl_formula: f64,
    row: Value,
}

fn class_result(
    fam: &MetricFamily,
    group: &GroupPresentation,
    e: &CatalogEntry,
    dt: f64,
    opts: &FinderOptions,
) -> CliResult<ClassResult> {
    let prim = primitive_orbit(group, e)?;
    let orbit = if e.m == 1 { prim.clone() } else { prim.iterate(e.m).map_err(data_err)? };
    let dl_formula = first_variation_length(fam, &orbit).map_err(data_err)?;
    let chain = dot_l_from_dot_p(fam, &orbit).map_err(data_err)?;
    let fd = fd_length_derivative(fam, &prim, dt, true, opts).map_err(data_err)?.value * e.m as f64;
    let row = OrbitRow {
        kind: "orbit",
        class: e.word.clone(),
        length: e.length,
        dl_formula,
        dl_fd: fd,
        rel_err: (dl_formula - fd).abs() / fd.abs(),
        coboundary_residual: (dl_formula - chain).abs(),
    };
    Ok(ClassResult { dl_formula, row: serde_json::to_value(row).expect("row serializes") })
}

/// Per-class length variations and per-cluster transport and pairing rows.
pub fn deform_rows(cfg: &ExperimentConfig, rows: &[CatalogEntry], fam: &MetricFamily) -> CliResult<Vec<Value>> {
    let group = bolza_generators();
    let rows: Vec<CatalogEntry> = rows.iter().filter(|e| e.length <= cfg.l_max + 1e-7).cloned().collect();
    let mu = build_measure(cfg, &rows)?;
    let opts = FinderOptions::default();
    let results = par::map(ExecPolicy::Parallel, &rows, |e| class_result(fam, &group, e, cfg.dt, &opts));
    let mut out = Vec::new();
    let mut by_class: BTreeMap<String, &ClassResult> = BTreeMap::new();
    for (e, r) in rows.iter().zip(&results) {
        match r {
            Ok(r) => {
                out.push(r.row.clone());
                by_class.insert(e.word.clone(), r);
            }
            Err(err) => out.push(json!({"kind": "orbit", "class": e.word, "L": e.length, "error": err.to_string()})),
        }
    }
    for c in mu.clusters() {
        out.push(cluster_row(cfg, fam, &group, &mu, &c, &rows, &by_class, &opts));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cluster_row(
    cfg: &ExperimentConfig,
    fam: &MetricFamily,
    group: &GroupPresentation,
    mu: &AtomicMeasure,
    c: &Cluster,
    rows: &[CatalogEntry],
    by_class: &BTreeMap<String, &ClassResult>,
    opts: &FinderOptions,
) -> Value {
    let run = || -> CliResult<ClusterRow> {
        let atoms = &mu.atoms[c.range.clone()];
        let mut l_dots = Vec::with_capacity(atoms.len());
        let mut tracked = Vec::with_capacity(atoms.len());
        for a in atoms {
            let r = by_class
                .get(&a.class)
                .ok_or_else(|| CliError::Data(format!("class {} has no length variation", a.class)))?;
            l_dots.push(r.dl_formula);
            let e = rows.iter().find(|e| e.word == a.class).expect("atoms come from the catalog");
            tracked.push(TrackedClass { class: a.class.clone(), m: a.m, primitive: primitive_orbit(group, e)? });
        }
        let transport = transport_coefficient(mu, c.l, &l_dots).map_err(data_err)?.value;
        let psi = cluster_test_function(mu, c, cfg.test_function.half_width)?;
        let pairing = first_variation_pairing(mu, &psi, &l_dots).map_err(data_err)?;
        let fd = fd_pairing_oracle(fam, &tracked, &psi, cfg.dt, true, opts, ExecPolicy::Parallel)
            .map_err(data_err)?
            .value;
        let constant = transport.abs() < cfg.tolerances.transport;
        Ok(ClusterRow {
            kind: "cluster",
            l: c.l,
            size: c.size,
            total_weight: c.total_weight,
            transport,
            pairing,
            pairing_fd: fd,
            rel_err: (pairing - fd).abs() / fd.abs(),
            half_width: psi.half_width,
            flag: if constant { "PASS" } else { "FAIL-constancy" },
        })
    };
    match run() {
        Ok(r) => serde_json::to_value(r).expect("row serializes"),
        Err(e) => json!({"kind": "cluster", "l": c.l, "size": c.size, "error": e.to_string()}),
    }
}

pub fn deform_path(out: &Path) -> PathBuf {
    out.join("deform.jsonl")
}

pub fn cmd_deform(cfg: &ExperimentConfig, catalog: &Path) -> CliResult<(PathBuf, Vec<String>)> {
    let (rows, warnings) = load_catalog(catalog)?;
    let fam = cfg.family()?;
    let out = deform_rows(cfg, &rows, &fam)?;
    let path = deform_path(&cfg.out);
    report::write(&path, &report::json_lines(&out))?;
    Ok((path, warnings))
}
