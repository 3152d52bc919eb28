//! Output sets written all-or-nothing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Files rendered in memory and written together once the command succeeds.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    /// Writes every file into `dir`. A missing directory is populated under
    /// a temporary name and renamed into place; in an existing directory
    /// each file is written to a temporary file and renamed over its target.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        let names: Vec<PathBuf> = self.files.iter().map(|(n, _)| dir.join(n)).collect();
        if dir.is_dir() {
            for (name, bytes) in &self.files {
                write_atomic(dir, name, bytes)?;
            }
            return Ok(names);
        }
        let parent = match dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".ponzi-out-")
            .tempdir_in(&parent)
            .with_context(|| format!("creating a staging directory in {}", parent.display()))?;
        for (name, bytes) in &self.files {
            fs::write(staging.path().join(name), bytes)
                .with_context(|| format!("writing {name}"))?;
        }
        let staged = staging.keep();
        if let Err(e) = fs::rename(&staged, dir) {
            let _ = fs::remove_dir_all(&staged);
            return Err(e).with_context(|| format!("moving outputs into {}", dir.display()));
        }
        Ok(names)
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(dir.join(name))
        .with_context(|| format!("writing {}", dir.join(name).display()))?;
    Ok(())
}
