//! Output files. Every file carries the SHA-256 of the config bytes: CSV on
//! a leading `# config_sha256=` line, JSON in a `config_digest` field.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Number, Value};
use sha2::{Digest, Sha256};

use fockprobe::response::Spectrum;

use crate::config::to_mhz;
use crate::error::{CliError, CliResult};

pub const CSV_DIGEST_PREFIX: &str = "# config_sha256=";
pub const SPECTRUM_HEADER: &str = "axis_value,re,im,magnitude";
pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn json_num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    // arbitrary_precision keeps the digits exactly as written.
    Value::Number(num(x).parse::<Number>().expect("formatted float is a JSON number"))
}

/// Rewrites every floating-point number in `v` with [`num`].
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(json_num).unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonical(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Value {
    canonical(serde_json::to_value(v).expect("serializable"))
}

pub fn spectrum_csv(digest: &str, s: &Spectrum<f64>) -> String {
    let mut out = format!("{CSV_DIGEST_PREFIX}{digest}\n{SPECTRUM_HEADER}\n");
    for (x, v) in s.axis.iter().zip(&s.values) {
        let _ = writeln!(out, "{},{},{},{}", num(to_mhz(*x)), num(v.re), num(v.im), num(v.norm()));
    }
    out
}

pub fn spectrum_json(s: &Spectrum<f64>) -> Value {
    let points: Vec<Value> = s
        .axis
        .iter()
        .zip(&s.values)
        .map(|(x, v)| json!({ "axis_value": to_mhz(*x), "re": v.re, "im": v.im, "magnitude": v.norm() }))
        .collect();
    canonical(json!({
        "axis_unit": "MHz",
        "metadata": s.metadata,
        "normalization": s.normalization,
        "points": points,
    }))
}

/// Table with a digest line and a header, for non-spectrum data.
pub fn table_csv(digest: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("{CSV_DIGEST_PREFIX}{digest}\n{}\n", header.join(","));
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Embedded digest of an output file, if it has one.
pub fn embedded_digest(name: &str, bytes: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(bytes).ok()?;
    if name.ends_with(".csv") {
        return text.lines().next()?.strip_prefix(CSV_DIGEST_PREFIX).map(str::to_string);
    }
    let v: Value = serde_json::from_str(text).ok()?;
    v.get("config_digest")?.as_str().map(str::to_string)
}

/// Files written by one command, plus the manifest describing them.
pub struct OutputSet {
    dir: PathBuf,
    pub digest: String,
    files: Vec<(String, String)>,
    steps: Vec<Value>,
}

impl OutputSet {
    pub fn new(dir: &Path, digest: &str) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), digest: digest.to_string(), files: Vec::new(), steps: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.files.push((name.to_string(), sha256_hex(text.as_bytes())));
        Ok(())
    }

    /// Writes `body` with `config_digest` added at the top level.
    pub fn write_json(&mut self, name: &str, body: Value) -> CliResult<()> {
        let mut body = canonical(body);
        if let Value::Object(map) = &mut body {
            map.insert("config_digest".into(), json!(self.digest));
        }
        let mut text = serde_json::to_string_pretty(&body).expect("serializable");
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn step(&mut self, name: &str, diagnostics: Value) {
        self.steps.push(json!({ "step": name, "diagnostics": canonical(diagnostics) }));
    }

    pub fn finish(self, command: &str, seed: u64, timestamp: &str) -> CliResult<PathBuf> {
        let outputs: Vec<Value> = self.files.iter().map(|(f, h)| json!({ "file": f, "sha256": h })).collect();
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_digest": self.digest,
            "seed": seed,
            "timestamp": timestamp,
            "outputs": outputs,
            "steps": self.steps,
        });
        let path = self.dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_bitwise() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 8794.1, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn canonical_keeps_integers() {
        let v = canonical(json!({ "n": 3, "x": 0.5, "list": [1.0, 2] }));
        assert_eq!(v["n"].to_string(), "3");
        assert_eq!(v["x"].to_string(), "5.0000000000000000e-1");
        assert_eq!(v["list"][1].to_string(), "2");
    }

    #[test]
    fn digest_is_found_in_both_encodings() {
        assert_eq!(embedded_digest("a.csv", b"# config_sha256=abc\nx\n").as_deref(), Some("abc"));
        assert_eq!(embedded_digest("a.json", br#"{"config_digest": "abc"}"#).as_deref(), Some("abc"));
        assert_eq!(embedded_digest("a.csv", b"x\n"), None);
    }
}
