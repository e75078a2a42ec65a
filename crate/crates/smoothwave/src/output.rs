//! CSV and JSON files, and the manifest that records a run.

use crate::config::Config;
use crate::error::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use smoothwave_core::particles::Snapshot;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct FileDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<Config>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub version: String,
    pub started: String,
    pub finished: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// An output directory that remembers what was written to it.
pub struct OutDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root.display(), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        self.written.retain(|d| d.file != name);
        self.written.push(FileDigest {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Numeric CSV with a header row.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::io(name, e);
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row.as_ref().iter().map(|x| x.to_string())).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(name, e))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::io(name, e))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn finish(self, manifest: ManifestInfo<'_>) -> Result<RunManifest, CliError> {
        let m = RunManifest {
            command: manifest.command.to_string(),
            config: manifest.config.cloned(),
            seed: manifest.config.map(|c| c.seed),
            workers: manifest.workers,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: manifest.started,
            finished: now(),
            inputs: manifest.inputs,
            outputs: self.written,
        };
        let mut bytes = serde_json::to_vec_pretty(&m).map_err(|e| CliError::io(MANIFEST, e))?;
        bytes.push(b'\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, bytes).map_err(|e| CliError::io(path.display(), e))?;
        Ok(m)
    }
}

pub struct ManifestInfo<'a> {
    pub command: &'a str,
    pub config: Option<&'a Config>,
    pub workers: usize,
    pub started: String,
    pub inputs: BTreeMap<String, String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    csv::Reader::from_path(path).map_err(|e| CliError::io(path.display(), e))
}

/// Reads the named numeric columns of a CSV file.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = open_csv(path)?;
    let headers = r.headers().map_err(|e| CliError::io(path.display(), e))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers.iter().position(|h| h.trim() == *n).ok_or_else(|| CliError::Validation {
                field: path.display().to_string(),
                message: format!("missing column {n:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path.display(), e))?;
        for (c, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| CliError::Validation {
                field: path.display().to_string(),
                message: format!("row {}: column {:?} is not a number: {cell:?}", line + 2, names[c]),
            })?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// Snapshots from a `t,particle,position` CSV.
pub fn read_snapshots(path: &Path) -> Result<Vec<Snapshot>, CliError> {
    let cols = read_columns(path, &["t", "position"])?;
    let mut out: Vec<Snapshot> = Vec::new();
    for (&t, &x) in cols[0].iter().zip(&cols[1]) {
        match out.last_mut() {
            Some(s) if s.t == t => s.positions.push(x),
            _ => out.push(Snapshot {
                t,
                positions: vec![x],
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use smoothwave_core::dispersion::Model;

    #[test]
    fn csv_round_trip_and_digests() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write_csv("a.csv", &["x", "h"], [[0.5, 1.0], [1.5, 0.25]]).unwrap();
        let cfg = Config::new(Model::Power2);
        let m = out
            .finish(ManifestInfo {
                command: "test",
                config: Some(&cfg),
                workers: 1,
                started: now(),
                inputs: BTreeMap::new(),
            })
            .unwrap();
        let bytes = fs::read(dir.path().join("a.csv")).unwrap();
        assert_eq!(m.outputs[0].sha256, sha256_hex(&bytes));
        assert_eq!(String::from_utf8(bytes).unwrap(), "x,h\n0.5,1\n1.5,0.25\n");
        let cols = read_columns(&dir.path().join("a.csv"), &["h"]).unwrap();
        assert_eq!(cols[0], vec![1.0, 0.25]);
        assert!(read_columns(&dir.path().join("a.csv"), &["y"]).is_err());
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
