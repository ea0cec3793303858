//! Writing run artifacts: CSV tables, JSON documents, the manifest and the
//! top-level summary.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ScenarioConfig, EXPERIMENTS};
use crate::run::{hex, scenario_hash, FileEntry, RunError, RunResult, Table};

pub const SUMMARY: &str = "summary.json";
pub const ERROR: &str = "error.json";

/// Bytes of a table: `# key=value` comment lines, the header, the rows.
pub fn table_bytes(t: &Table) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    for c in &t.comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

fn write(dir: &Path, name: &str, bytes: &[u8], rows: Option<usize>) -> io::Result<FileEntry> {
    fs::write(dir.join(name), bytes)?;
    Ok(FileEntry {
        path: name.into(),
        sha256: hex(&Sha256::digest(bytes)),
        bytes: bytes.len() as u64,
        rows,
    })
}

/// Writes every artifact of `result` into `dir`, fills the manifest and
/// writes `summary.json` last.
pub fn emit_tables(result: &mut RunResult, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let _ = fs::remove_file(dir.join(ERROR));
    let mut files = Vec::new();
    for t in &result.artifacts.tables {
        files.push(write(dir, &t.file, &table_bytes(t)?, Some(t.rows.len()))?);
    }
    for (name, v) in &result.artifacts.documents {
        let bytes = serde_json::to_vec_pretty(v).map_err(io::Error::other)?;
        files.push(write(dir, name, &bytes, None)?);
    }
    for (name, text) in &result.artifacts.texts {
        files.push(write(dir, name, text.as_bytes(), None)?);
    }
    result.files = files;
    let summary = serde_json::to_vec_pretty(result).map_err(io::Error::other)?;
    fs::write(dir.join(SUMMARY), summary)
}

/// Structured record of a failed run, written to `error.json`.
pub fn error_record(cfg: Option<&ScenarioConfig>, e: &RunError) -> Value {
    let (kind, context, errors) = match e {
        RunError::Config(errs) => (
            "config",
            String::new(),
            serde_json::to_value(&errs.0).unwrap(),
        ),
        RunError::Lab { context, .. } => ("module", context.clone(), json!([])),
    };
    json!({
        "status": "error",
        "scenario": cfg.map(|c| c.name.clone()),
        "experiment": cfg.map(|c| c.experiment.kind()),
        "scenario_hash": cfg.map(scenario_hash),
        "error": {
            "kind": kind,
            "context": context,
            "message": e.to_string(),
            "errors": errors,
        }
    })
}

pub fn write_error(dir: &Path, cfg: Option<&ScenarioConfig>, e: &RunError) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let _ = fs::remove_file(dir.join(SUMMARY));
    let bytes = serde_json::to_vec_pretty(&error_record(cfg, e)).map_err(io::Error::other)?;
    fs::write(dir.join(ERROR), bytes)
}

fn object<'a>(v: &'a Value, at: &str, keys: &[&str]) -> Result<&'a Map<String, Value>, String> {
    let m = v
        .as_object()
        .ok_or_else(|| format!("{at}: expected an object"))?;
    for k in keys {
        if !m.contains_key(*k) {
            return Err(format!("{at}: missing key {k}"));
        }
    }
    if let Some(k) = m.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(format!("{at}: unexpected key {k}"));
    }
    Ok(m)
}

fn is_digest(v: &Value) -> bool {
    v.as_str().is_some_and(|s| {
        s.len() == 64
            && s.bytes()
                .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
    })
}

fn expect(ok: bool, at: &str, what: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(format!("{at}: expected {what}"))
    }
}

/// Checks a `summary.json` document against its schema.
pub fn validate_summary(v: &Value) -> Result<(), String> {
    let m = object(
        v,
        "summary",
        &[
            "scenario",
            "experiment",
            "scenario_hash",
            "seed",
            "status",
            "verdicts",
            "metrics",
            "tolerances",
            "files",
            "wall_clock_seconds",
        ],
    )?;
    expect(m["scenario"].is_string(), "scenario", "a string")?;
    let kind = m["experiment"].as_str().unwrap_or_default();
    expect(
        EXPERIMENTS.iter().any(|e| e.0 == kind),
        "experiment",
        "a known experiment kind",
    )?;
    expect(
        is_digest(&m["scenario_hash"]),
        "scenario_hash",
        "a sha256 hex digest",
    )?;
    expect(m["seed"].is_u64(), "seed", "an unsigned integer")?;
    expect(
        matches!(m["status"].as_str(), Some("pass" | "fail")),
        "status",
        "\"pass\" or \"fail\"",
    )?;
    let verdicts = m["verdicts"]
        .as_array()
        .ok_or("verdicts: expected an array")?;
    for (i, v) in verdicts.iter().enumerate() {
        let at = format!("verdicts[{i}]");
        let o = object(v, &at, &["name", "outcome", "pass", "gating"])?;
        expect(
            o["name"].is_string() && o["outcome"].is_string(),
            &at,
            "string name and outcome",
        )?;
        expect(
            o["pass"].is_boolean() && o["gating"].is_boolean(),
            &at,
            "boolean pass and gating",
        )?;
    }
    let gating_fail = verdicts
        .iter()
        .any(|v| v["gating"] == true && v["pass"] == false);
    expect(
        (m["status"] == "fail") == gating_fail,
        "status",
        "fail exactly when a gating verdict fails",
    )?;
    let metrics = m["metrics"]
        .as_object()
        .ok_or("metrics: expected an object")?;
    for (k, v) in metrics {
        expect(
            v.is_number() || v.is_null(),
            &format!("metrics.{k}"),
            "a number or null",
        )?;
    }
    let tol = object(
        &m["tolerances"],
        "tolerances",
        &[
            "poo",
            "residual",
            "exponent_envelope",
            "conjugacy",
            "linear",
            "generator_match",
            "leaf",
            "groupoid",
        ],
    )?;
    for (k, v) in tol {
        expect(
            v.as_f64().is_some_and(|x| x > 0.0),
            &format!("tolerances.{k}"),
            "a positive number",
        )?;
    }
    let files = m["files"].as_array().ok_or("files: expected an array")?;
    for (i, f) in files.iter().enumerate() {
        let at = format!("files[{i}]");
        let o = object(f, &at, &["path", "sha256", "bytes", "rows"])?;
        expect(o["path"].is_string(), &at, "a string path")?;
        expect(is_digest(&o["sha256"]), &at, "a sha256 hex digest")?;
        expect(o["bytes"].is_u64(), &at, "a byte count")?;
        let csv = o["path"].as_str().unwrap().ends_with(".csv");
        expect(
            if csv {
                o["rows"].is_u64()
            } else {
                o["rows"].is_null()
            },
            &at,
            "rows exactly for CSV files",
        )?;
    }
    expect(
        m["wall_clock_seconds"].as_f64().is_some_and(|s| s >= 0.0),
        "wall_clock_seconds",
        "a nonnegative number",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("sweep.csv", &["id", "type"]);
        assert_eq!(table_bytes(&t).unwrap(), b"id,type\n");
    }

    #[test]
    fn comments_precede_the_header() {
        let mut t = Table::new("t.csv", &["cell", "value"]);
        t.comments = vec!["G=16".into()];
        t.push(vec!["0".into(), "0.5".into()]);
        assert_eq!(
            String::from_utf8(table_bytes(&t).unwrap()).unwrap(),
            "# G=16\ncell,value\n0,0.5\n"
        );
    }

    #[test]
    fn schema_rejects_extra_and_missing_keys() {
        let ok = json!({
            "scenario": "s", "experiment": "poo", "scenario_hash": "a".repeat(64), "seed": 1,
            "status": "pass", "verdicts": [{"name": "poo", "outcome": "x", "pass": true, "gating": true}],
            "metrics": {"m": 1.0, "n": null},
            "tolerances": {"poo": 1e-4, "residual": 5e-3, "exponent_envelope": 1e-2, "conjugacy": 1e-2,
                           "linear": 1e-3, "generator_match": 5e-3, "leaf": 1e-6, "groupoid": 1e-2},
            "files": [{"path": "poo.csv", "sha256": "0".repeat(64), "bytes": 10, "rows": 2}],
            "wall_clock_seconds": 0.5
        });
        validate_summary(&ok).unwrap();
        let mut extra = ok.clone();
        extra["colour"] = json!(1);
        assert!(validate_summary(&extra).unwrap_err().contains("colour"));
        let mut missing = ok.clone();
        missing.as_object_mut().unwrap().remove("files");
        assert!(validate_summary(&missing).unwrap_err().contains("files"));
        let mut wrong = ok.clone();
        wrong["verdicts"][0]["pass"] = json!(false);
        assert!(validate_summary(&wrong).unwrap_err().starts_with("status"));
        let mut rows = ok;
        rows["files"][0]["rows"] = Value::Null;
        assert!(validate_summary(&rows).is_err());
    }
}
