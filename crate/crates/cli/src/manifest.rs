//! Run manifests: resolved settings plus input and output file hashes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Columns and keys that carry wall-clock measurements.
pub const TIMING_KEYS: &[&str] = &["ms", "wall_ms", "total_ms", "iteration_ms"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    /// Hash with timing columns blanked, for files that have any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// Every setting of the run with defaults filled in.
    pub config: Value,
    /// Absolute input paths.
    pub inputs: Vec<FileRecord>,
    /// Output paths relative to the output directory.
    pub outputs: Vec<FileRecord>,
    pub wall_ms: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// `bytes` with timing fields blanked, or `None` if the file has none.
pub fn mask_timing(name: &str, bytes: &[u8]) -> Option<Vec<u8>> {
    let ext = Path::new(name).extension()?.to_str()?;
    let text = std::str::from_utf8(bytes).ok()?;
    match ext {
        "csv" | "tsv" => {
            let sep = if ext == "csv" { ',' } else { '\t' };
            let mut lines = text.lines();
            let header: Vec<&str> = lines.next()?.split(sep).collect();
            let cols: Vec<usize> = (0..header.len()).filter(|&i| TIMING_KEYS.contains(&header[i])).collect();
            if cols.is_empty() {
                return None;
            }
            let mut out = header.join(&sep.to_string());
            out.push('\n');
            for line in lines {
                let fields: Vec<&str> = line
                    .split(sep)
                    .enumerate()
                    .map(|(i, f)| if cols.contains(&i) { "" } else { f })
                    .collect();
                out.push_str(&fields.join(&sep.to_string()));
                out.push('\n');
            }
            Some(out.into_bytes())
        }
        "json" => {
            let mut v: Value = serde_json::from_str(text).ok()?;
            mask_json(&mut v).then(|| serde_json::to_vec(&v).expect("json"))
        }
        _ => None,
    }
}

fn mask_json(v: &mut Value) -> bool {
    match v {
        Value::Object(map) => {
            let mut hit = false;
            for (k, x) in map.iter_mut() {
                if TIMING_KEYS.contains(&k.as_str()) {
                    *x = Value::Null;
                    hit = true;
                } else {
                    hit |= mask_json(x);
                }
            }
            hit
        }
        Value::Array(a) => a.iter_mut().fold(false, |h, x| mask_json(x) | h),
        _ => false,
    }
}

pub fn record_input(path: &Path) -> Result<FileRecord> {
    let abs = fs::canonicalize(path).with_context(|| format!("input {} not found", path.display()))?;
    Ok(FileRecord {
        path: abs.to_string_lossy().into_owned(),
        sha256: hash_file(&abs)?,
        masked_sha256: None,
    })
}

pub fn record_output(out_dir: &Path, name: &str) -> Result<FileRecord> {
    let bytes = fs::read(out_dir.join(name)).with_context(|| format!("reading output {name}"))?;
    Ok(FileRecord {
        path: name.to_string(),
        sha256: sha256_hex(&bytes),
        masked_sha256: mask_timing(name, &bytes).map(|m| sha256_hex(&m)),
    })
}

impl RunManifest {
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Errors if an input file changed since the run.
    pub fn check_inputs(&self) -> Result<()> {
        for rec in &self.inputs {
            let now = hash_file(Path::new(&rec.path))?;
            if now != rec.sha256 {
                bail!("input {} changed since the recorded run", rec.path);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Match {
    Identical,
    /// Equal once timing fields are blanked.
    TimingOnly,
    Differs,
    Missing,
}

/// Compares the outputs of two runs file by file, in the original order.
pub fn compare(original: &RunManifest, rerun: &RunManifest) -> Vec<(String, Match)> {
    original
        .outputs
        .iter()
        .map(|a| {
            let m = match rerun.outputs.iter().find(|b| b.path == a.path) {
                None => Match::Missing,
                Some(b) if b.sha256 == a.sha256 => Match::Identical,
                Some(b) if a.masked_sha256.is_some() && a.masked_sha256 == b.masked_sha256 => Match::TimingOnly,
                Some(_) => Match::Differs,
            };
            (a.path.clone(), m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_timing_columns_only() {
        let a = b"iteration\tcd\tms\n0\t1e-3\t12.5\n1\t5e-4\t11.0\n";
        let b = b"iteration\tcd\tms\n0\t1e-3\t99.0\n1\t5e-4\t3.0\n";
        let c = b"iteration\tcd\tms\n0\t2e-3\t12.5\n1\t5e-4\t11.0\n";
        let m = |x: &[u8]| mask_timing("fit_log.tsv", x).unwrap();
        assert_eq!(m(a), m(b));
        assert_ne!(m(a), m(c));
        assert_eq!(mask_timing("frame.xyz", b"0 0 0\n"), None);
        assert_eq!(mask_timing("t.csv", b"cd,emd\n1,2\n"), None);
    }

    #[test]
    fn masks_nested_json_keys() {
        let a = br#"{"final": {"cd": 1.0}, "total_ms": 4.0, "rows": [{"wall_ms": 2}]}"#;
        let b = br#"{"final": {"cd": 1.0}, "total_ms": 9.0, "rows": [{"wall_ms": 7}]}"#;
        assert_eq!(mask_timing("s.json", a), mask_timing("s.json", b));
        assert_eq!(mask_timing("s.json", br#"{"cd": 1}"#), None);
    }

    #[test]
    fn comparison_outcomes() {
        let rec = |p: &str, h: &str, m: Option<&str>| FileRecord {
            path: p.into(),
            sha256: h.into(),
            masked_sha256: m.map(String::from),
        };
        let run = |outputs| RunManifest {
            command: "x".into(),
            tool_version: "0".into(),
            seed: 0,
            config: Value::Null,
            inputs: vec![],
            outputs,
            wall_ms: 0.0,
        };
        let a = run(vec![rec("a", "1", None), rec("b", "2", Some("m")), rec("c", "3", None), rec("d", "4", None)]);
        let b = run(vec![rec("a", "1", None), rec("b", "9", Some("m")), rec("c", "8", None)]);
        let got: Vec<Match> = compare(&a, &b).into_iter().map(|x| x.1).collect();
        assert_eq!(got, vec![Match::Identical, Match::TimingOnly, Match::Differs, Match::Missing]);
    }
}
