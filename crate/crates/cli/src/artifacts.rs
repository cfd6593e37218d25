//! Output directory handling. Every file is written to a temporary sibling
//! and renamed into place; `manifest.json` is written last and lists the
//! SHA-256 of everything else.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Experiment;

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

/// One pass/fail line of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub config_hash: String,
    pub headline: Vec<Headline>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn line(&mut self, label: impl Into<String>, value: impl Into<String>) {
        self.headline.push(Headline {
            label: label.into(),
            value: value.into(),
        });
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub struct Artifacts {
    dir: PathBuf,
    config_hash: String,
    files: Vec<FileEntry>,
}

impl Artifacts {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            files: Vec::new(),
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes a CSV whose first column is the config hash.
    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_field("config_hash")?;
        w.write_record(header)?;
        for row in rows {
            w.write_field(&self.config_hash)?;
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().context("flushing csv")?;
        self.write_bytes(name, &bytes)
    }

    /// Writes `summary.json` and then the manifest.
    pub fn finish(mut self, exp: &Experiment, summary: &Summary) -> Result<Manifest> {
        self.json(SUMMARY, summary)?;
        let manifest = Manifest {
            tool: "mdplab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: exp.kind.as_str().into(),
            config_hash: self.config_hash.clone(),
            config: serde_json::to_value(exp)?,
            files: self.files,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST), &bytes)?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads the manifest of `dir` and checks every listed file against it.
pub fn verify(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("no readable {MANIFEST} in {}", dir.display()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))?;
    for f in &manifest.files {
        let file = dir.join(&f.path);
        let bytes = std::fs::read(&file)
            .with_context(|| format!("{} is listed in the manifest but missing", f.path))?;
        let actual = sha256_hex(&bytes);
        if actual != f.sha256 {
            bail!(
                "checksum mismatch for {}: manifest {}, file {}",
                f.path,
                f.sha256,
                actual
            );
        }
    }
    Ok(manifest)
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn nums(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| num(*x))
}
