use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const L0: f64 = 3.0571418389619964;

fn flatlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatlab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env_remove("THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("experiment.toml");
    fs::write(&p, body).unwrap();
    p
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn json_lines(p: &Path) -> Vec<Value> {
    fs::read_to_string(p).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn systolic_weight() -> f64 {
    L0 / (4.0 * (L0 / 2.0).sinh().powi(2))
}

#[test]
fn catalog_lists_the_systolic_classes_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let o = flatlab(tmp.path(), &["catalog"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(tmp.path().join("catalog.json")).unwrap();
    let rows = serde_json::from_str::<Value>(&text).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 24);
    for r in rows {
        assert!((r["L"].as_f64().unwrap() - L0).abs() < 1e-12);
        assert_eq!(r["m"].as_u64(), Some(1));
        assert!((r["weight"].as_f64().unwrap() - systolic_weight()).abs() < 1e-12);
    }

    // a second run reproduces the file byte for byte
    let o = flatlab(tmp.path(), &["catalog"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(tmp.path().join("catalog.json")).unwrap(), text);
}

#[test]
fn catalog_below_the_systole_is_empty() {
    let tmp = TempDir::new().unwrap();
    let o = flatlab(tmp.path(), &["--lmax", "0.5", "catalog"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(tmp.path().join("catalog.json")).unwrap(), "[]\n");

    let o = flatlab(tmp.path(), &["--lmax", "0.5", "trace"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mu = json_file(&tmp.path().join("measure.json"));
    assert!(mu["atoms"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_expression_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[family]\nlaw = \"conformal\"\nu = \"1 + * y\"\n");
    let o = flatlab(tmp.path(), &["--config", cfg.to_str().unwrap(), "catalog"]);
    assert_eq!(code(&o), 2);
    let err: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["exit_code"].as_i64(), Some(2));
}

#[test]
fn bad_overrides_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&flatlab(tmp.path(), &["--dt", "0", "catalog"])), 2);
    assert_eq!(code(&flatlab(tmp.path(), &["--lmax", "-1", "catalog"])), 2);
    assert_eq!(code(&flatlab(tmp.path(), &["verify", "--suite", "nope"])), 2);
}

#[test]
fn trace_weights_match_the_closed_form() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&flatlab(tmp.path(), &["catalog"])), 0);
    let o = flatlab(tmp.path(), &["trace"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mu = json_file(&tmp.path().join("measure.json"));
    let atoms = mu["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 24);
    for a in atoms {
        assert!((a["l"].as_f64().unwrap() - L0).abs() < 1e-12);
        let w = a["w"].as_f64().unwrap();
        assert!(((w - systolic_weight()) / systolic_weight()).abs() < 1e-12, "{w}");
    }
}

#[test]
fn duplicate_entries_warn_and_count_once() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&flatlab(tmp.path(), &["catalog"])), 0);
    let path = tmp.path().join("catalog.json");
    let mut rows: Vec<Value> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    rows.push(rows[0].clone());
    rows.push(rows[3].clone());
    let dup = tmp.path().join("dup.json");
    fs::write(&dup, serde_json::to_string(&rows).unwrap()).unwrap();

    let o = flatlab(tmp.path(), &["trace", "--catalog", dup.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let warnings: Vec<Value> = stderr(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(warnings.len(), 2);
    assert!(warnings.iter().all(|w| w["warning"].as_str().unwrap().contains("duplicate")));
    let mu = json_file(&tmp.path().join("measure.json"));
    assert_eq!(mu["atoms"].as_array().unwrap().len(), 24);
}

#[test]
fn incomplete_catalog_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&flatlab(tmp.path(), &["catalog"])), 0);
    let path = tmp.path().join("catalog.json");
    let mut rows: Vec<Value> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    rows[5].as_object_mut().unwrap().remove("weight");
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&rows).unwrap()).unwrap();
    let o = flatlab(tmp.path(), &["trace", "--catalog", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("incomplete catalog"));

    let o = flatlab(tmp.path(), &["trace", "--catalog", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn isometric_deformation_has_constant_clusters() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "orientation = \"unoriented\"\n\n[family]\nlaw = \"pullback\"\n\
         v1 = \"0.05*bump(((x-0.1)^2 + (y-1.2)^2)/(0.306*y))\"\nv2 = \"0.025*y*bump(((x-0.1)^2 + (y-1.2)^2)/(0.306*y))\"\n",
    );
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&flatlab(tmp.path(), &["--config", c, "catalog"])), 0);
    let o = flatlab(tmp.path(), &["--config", c, "deform"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_lines(&tmp.path().join("deform.jsonl"));
    let orbits: Vec<_> = rows.iter().filter(|r| r["kind"] == "orbit").collect();
    let clusters: Vec<_> = rows.iter().filter(|r| r["kind"] == "cluster").collect();
    assert_eq!(orbits.len(), 12);
    assert_eq!(clusters.len(), 1);
    for r in &orbits {
        assert!(r["dL_formula"].as_f64().unwrap().abs() < 1e-8, "{r}");
        assert!(r["dL_fd"].as_f64().unwrap().abs() < 1e-6, "{r}");
    }
    let c = clusters[0];
    assert_eq!(c["flag"], "PASS");
    assert!(c["transport"].as_f64().unwrap().abs() < 1e-6);
    assert!(c["pairing_fd"].as_f64().unwrap().abs() < 1e-8, "{c}");
}

#[test]
fn metric_direction_fails_constancy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "orientation = \"unoriented\"\n\n[family]\nlaw = \"metric\"\n");
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&flatlab(tmp.path(), &["--config", c, "catalog"])), 0);
    let o = flatlab(tmp.path(), &["--config", c, "deform"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_lines(&tmp.path().join("deform.jsonl"));
    for r in rows.iter().filter(|r| r["kind"] == "orbit") {
        let l = r["L"].as_f64().unwrap();
        assert!((r["dL_formula"].as_f64().unwrap() - 0.5 * l).abs() < 1e-9 * l, "{r}");
        assert!(r["rel_err"].as_f64().unwrap() < 1e-5, "{r}");
    }
    let c = rows.iter().find(|r| r["kind"] == "cluster").unwrap();
    assert_eq!(c["flag"], "FAIL-constancy");
    let expected = -0.5 * c["total_weight"].as_f64().unwrap() * c["l"].as_f64().unwrap();
    assert!((c["transport"].as_f64().unwrap() - expected).abs() < 1e-9 * expected.abs(), "{c}");
    assert!(c["rel_err"].as_f64().unwrap() < 1e-4, "{c}");
}

#[test]
fn zero_vector_field_has_zero_coboundary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[verify]\nzero_vector_field = true\n");
    let o = flatlab(tmp.path(), &["--config", cfg.to_str().unwrap(), "verify", "--suite", "coboundary"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json_lines(&tmp.path().join("verify.jsonl"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["pass"], true);
    for r in rows[0]["rows"].as_array().unwrap() {
        assert_eq!(r["integral"].as_f64(), Some(0.0), "{r}");
    }
}

#[test]
fn flipped_frame_breaks_the_first_commutator() {
    let tmp = TempDir::new().unwrap();
    let o = flatlab(tmp.path(), &["verify", "--suite", "commutator", "--flip-xperp"]);
    assert_eq!(code(&o), 1);
    let err: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["failing"], serde_json::json!(["commutator"]));
    let rows = json_lines(&tmp.path().join("verify.jsonl"));
    let r1 = rows[0]["metrics"]["r1_analytic"].as_f64().unwrap();
    assert!(r1 > 1e-2, "{r1}");
}

#[test]
fn thread_count_from_flag_or_environment() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = flatlab(&a, &["--threads", "2", "catalog"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_flatlab"))
        .arg("--out")
        .arg(&b)
        .arg("catalog")
        .env("THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(a.join("catalog.json")).unwrap(), fs::read(b.join("catalog.json")).unwrap());
    assert_eq!(code(&flatlab(tmp.path(), &["--threads", "0", "catalog"])), 2);
}
