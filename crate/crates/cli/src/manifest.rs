//! Provenance block embedded in every output file.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

pub struct Manifest {
    pub command: String,
    /// Input label and its SHA-256.
    pub inputs: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub tolerances: Vec<(&'static str, f64)>,
    pub version: &'static str,
    /// RFC 3339; taken from `SOURCE_DATE_EPOCH` when set.
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> String {
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|s| OffsetDateTime::from_unix_timestamp(s).ok())
        .unwrap_or_else(OffsetDateTime::now_utc);
    t.format(&Rfc3339).unwrap_or_default()
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            seed: None,
            tolerances: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            timestamp: now(),
        }
    }

    pub fn input(&mut self, label: &str, bytes: &[u8]) {
        self.inputs.push((label.to_string(), sha256_hex(bytes)));
    }

    pub fn tol(&mut self, name: &'static str, value: f64) {
        self.tolerances.push((name, value));
    }

    pub fn to_json(&self) -> Value {
        let inputs: Map<String, Value> = self.inputs.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let tols: Map<String, Value> = self.tolerances.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        json!({
            "command": self.command,
            "inputs_sha256": inputs,
            "seed": self.seed,
            "tolerances": tols,
            "version": self.version,
            "timestamp": self.timestamp,
        })
    }

    /// `# key: value` lines; CSV readers skip them as comments.
    pub fn csv_preamble(&self) -> String {
        let mut s = format!("# mrdprice {} {}\n", self.version, self.command);
        for (k, v) in &self.inputs {
            s.push_str(&format!("# input {k} sha256 {v}\n"));
        }
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed {seed}\n"));
        }
        for (k, v) in &self.tolerances {
            s.push_str(&format!("# tol {k} {v:e}\n"));
        }
        s.push_str(&format!("# timestamp {}\n", self.timestamp));
        s
    }

    pub fn write_csv(&self, dir: &Path, name: &str, body: &str) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), format!("{}{}", self.csv_preamble(), body))
    }

    pub fn write_json(&self, dir: &Path, name: &str, value: &Value) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), serde_json::to_string_pretty(&self.wrap(value)).unwrap_or_default() + "\n")
    }

    pub fn wrap(&self, value: &Value) -> Value {
        json!({ "manifest": self.to_json(), "result": value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn preamble_lines_are_comments() {
        let mut m = Manifest::new("solve");
        m.input("dist", b"{}");
        m.seed = Some(7);
        m.tol("root", 1e-10);
        assert!(m.csv_preamble().lines().all(|l| l.starts_with("# ")));
    }
}
