//! Run manifests and the output directory they describe.
//!
//! A manifest is written as `manifest.json` when a run starts and rewritten
//! when it ends, successfully or not. Every file the run creates is
//! registered through [`Outputs`], so the final manifest lists exactly the
//! files in the directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Running,
    Complete,
    Failed,
}

/// Seed identifier of one replicate: streams `(replicate << 16) | s` of the
/// master key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSeed {
    pub replicate: u32,
    pub master: u64,
    pub stream_base: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub model: String,
    pub master_seed: u64,
    pub replicates: Vec<ReplicateSeed>,
    /// Settings chosen by the tool rather than the config, e.g. figure defaults.
    pub defaults: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_secs: f64,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let p = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }
}

/// An output directory under construction.
pub struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
    manifest: RunManifest,
    started: Instant,
}

impl Outputs {
    /// Prepares `root` and writes the initial manifest.
    ///
    /// An existing directory must be empty or hold a previous run; the files
    /// listed by that run's manifest are removed first.
    pub fn begin(root: &Path, manifest: RunManifest) -> Result<Self> {
        if root.exists() {
            clear_previous_run(root)?;
        }
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let out = Self { root: root.to_path_buf(), files: Vec::new(), manifest, started: Instant::now() };
        out.write_manifest()?;
        Ok(out)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    /// Registers `rel` and returns its absolute path, creating parent dirs.
    pub fn file(&mut self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let p = self.root.join(rel.as_ref());
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.files.push(rel.as_ref().to_path_buf());
        Ok(p)
    }

    pub fn write_text(&mut self, rel: impl AsRef<Path>, text: &str) -> Result<()> {
        let p = self.file(rel)?;
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    /// Records the outcome and rewrites the manifest.
    pub fn finish<T>(mut self, result: Result<T>) -> Result<T> {
        self.manifest.wall_time_secs = self.started.elapsed().as_secs_f64();
        match &result {
            Ok(_) => self.manifest.status = Status::Complete,
            Err(e) => {
                self.manifest.status = Status::Failed;
                self.manifest.error = Some(format!("{e:#}"));
            }
        }
        let listed = self.list_files();
        let written = listed.and_then(|files| {
            self.manifest.files = files;
            self.write_manifest()
        });
        match (result, written) {
            (Ok(v), Ok(())) => Ok(v),
            (Err(e), _) => Err(e),
            (Ok(_), Err(e)) => Err(e),
        }
    }

    fn list_files(&self) -> Result<Vec<FileEntry>> {
        let mut rels = self.files.clone();
        rels.sort();
        rels.dedup();
        rels.into_iter()
            .filter(|rel| self.root.join(rel).is_file())
            .map(|rel| {
                let bytes = std::fs::read(self.root.join(&rel))?;
                Ok(FileEntry {
                    path: portable(&rel),
                    bytes: bytes.len() as u64,
                    sha256: format!("{:x}", Sha256::digest(&bytes)),
                })
            })
            .collect()
    }

    fn write_manifest(&self) -> Result<()> {
        let p = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }
}

fn portable(rel: &Path) -> String {
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn clear_previous_run(root: &Path) -> Result<()> {
    let mut entries = std::fs::read_dir(root).with_context(|| format!("reading {}", root.display()))?;
    if entries.next().is_none() {
        return Ok(());
    }
    if !root.join(MANIFEST).is_file() {
        bail!("output directory {} is not empty and holds no previous run", root.display());
    }
    let old = RunManifest::read(root)?;
    for f in &old.files {
        let p = root.join(&f.path);
        if p.is_file() {
            std::fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    std::fs::remove_file(root.join(MANIFEST))?;
    remove_empty_dirs(root)?;
    if std::fs::read_dir(root)?.next().is_some() {
        bail!("output directory {} holds files not listed by its manifest", root.display());
    }
    Ok(())
}

fn remove_empty_dirs(dir: &Path) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            remove_empty_dirs(&p)?;
            if std::fs::read_dir(&p)?.next().is_none() {
                std::fs::remove_dir(&p)?;
            }
        }
    }
    Ok(())
}

/// Files under `dir` other than the manifest, as sorted relative paths.
pub fn files_on_disk(dir: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                out.push(portable(p.strip_prefix(root)?));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.retain(|f| f != MANIFEST);
    out.sort();
    Ok(out)
}
