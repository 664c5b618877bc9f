//! `manifest.txt`: what a command wrote, with SHA-256 checksums.
//!
//! ```text
//! # fourier-head manifest v1
//! output-dir = run1
//! created = 1760000000
//! updated = 1760000131
//! config.seed = 42
//! ...
//! file = checkpoint.bin 272664 9f86d08...
//! ```
//!
//! Timestamps are Unix seconds. Each `file` line holds a path relative to the
//! output directory, its size in bytes and its hex SHA-256.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const FILE_NAME: &str = "manifest.txt";
const HEADER: &str = "# fourier-head manifest v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileEntry {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub output_dir: String,
    pub created: u64,
    pub updated: u64,
    /// Config key/value pairs the run used, if any.
    pub config: BTreeMap<String, String>,
    pub files: BTreeMap<String, FileEntry>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(output_dir: &Path) -> Self {
        let t = now();
        Self {
            output_dir: output_dir.display().to_string(),
            created: t,
            updated: t,
            ..Self::default()
        }
    }

    /// Loads `dir/manifest.txt`, or starts a fresh manifest if there is none.
    pub fn load_or_new(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE_NAME);
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
            Self::parse(&text)
        } else {
            Ok(Self::new(dir))
        }
    }

    /// Records `contents` under `name`, writing it to `dir/name`.
    pub fn write_file(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::io(parent))?;
        }
        fs::write(&path, contents).map_err(CliError::io(&path))?;
        self.files.insert(
            name.to_string(),
            FileEntry {
                bytes: contents.len() as u64,
                sha256: sha256_hex(contents),
            },
        );
        Ok(())
    }

    pub fn set_config(&mut self, kv_text: &str) {
        self.config = kv_text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
    }

    /// Stamps `updated` and writes `dir/manifest.txt`.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.updated = now().max(self.created);
        let path = dir.join(FILE_NAME);
        fs::write(&path, self.render()).map_err(CliError::io(&path))
    }

    pub fn render(&self) -> String {
        let mut s = format!("{HEADER}\n");
        let _ = writeln!(s, "output-dir = {}", self.output_dir);
        let _ = writeln!(s, "created = {}", self.created);
        let _ = writeln!(s, "updated = {}", self.updated);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for (name, e) in &self.files {
            let _ = writeln!(s, "file = {name} {} {}", e.bytes, e.sha256);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| CliError::Manifest(msg);
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad("missing manifest header".into()));
        }
        let mut m = Manifest::default();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("unparseable line `{line}`")))?;
            match key {
                "output-dir" => m.output_dir = value.to_string(),
                "created" => m.created = value.parse().map_err(|_| bad(format!("bad timestamp `{value}`")))?,
                "updated" => m.updated = value.parse().map_err(|_| bad(format!("bad timestamp `{value}`")))?,
                "file" => {
                    let mut parts = value.rsplitn(3, ' ');
                    let (Some(sha), Some(bytes), Some(name)) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(bad(format!("bad file entry `{value}`")));
                    };
                    let bytes = bytes.parse().map_err(|_| bad(format!("bad size in `{value}`")))?;
                    m.files.insert(
                        name.to_string(),
                        FileEntry {
                            bytes,
                            sha256: sha.to_string(),
                        },
                    );
                }
                k => match k.strip_prefix("config.") {
                    Some(ck) => {
                        m.config.insert(ck.to_string(), value.to_string());
                    }
                    None => return Err(bad(format!("unknown key `{k}`"))),
                },
            }
        }
        Ok(m)
    }

    /// Checks that every listed file exists under `dir` with the recorded
    /// size and checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, entry) in &self.files {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|_| CliError::Manifest(format!("{name} is missing")))?;
            if bytes.len() as u64 != entry.bytes || sha256_hex(&bytes) != entry.sha256 {
                return Err(CliError::Manifest(format!("{name} does not match its checksum")));
            }
        }
        Ok(())
    }
}

/// Loads and verifies the manifest in `dir`.
pub fn verify_dir(dir: &Path) -> Result<Manifest> {
    let path = dir.join(FILE_NAME);
    let text = fs::read_to_string(&path).map_err(|_| CliError::MissingFile(path.clone()))?;
    let m = Manifest::parse(&text)?;
    m.verify(dir)?;
    Ok(m)
}
