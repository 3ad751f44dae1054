//! Output directory with atomic writes and an input-overwrite guard.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smilekit_core::{Error, Result};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Absolute, symlink-resolved form of `p`, resolving the parent only when
/// `p` does not exist yet.
fn resolve(p: &Path) -> Option<PathBuf> {
    if let Ok(c) = p.canonicalize() {
        return Some(c);
    }
    let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Some(parent.canonicalize().ok()?.join(p.file_name()?))
}

pub struct OutputDir {
    root: PathBuf,
    protected: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            protected: Vec::new(),
        })
    }

    /// Marks an input file or directory as never to be written.
    pub fn protect(&mut self, input: &Path) {
        if let Some(p) = resolve(input) {
            self.protected.push(p);
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn check(&self, target: &Path) -> Result<()> {
        let Some(t) = resolve(target) else {
            return Ok(());
        };
        if self.protected.contains(&t) {
            return Err(Error::Config(format!(
                "refusing to overwrite input file {}",
                target.display()
            )));
        }
        Ok(())
    }

    /// Writes `bytes` to `rel` through a temporary file in the same
    /// directory followed by a rename.
    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let target = self.path(rel);
        let dir = target.parent().unwrap_or(&self.root).to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        self.check(&target)?;
        let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(io_err(&target, e));
        }
        Ok(target)
    }

    /// Serializes with a trailing newline; struct fields and ordered maps
    /// keep the output byte-stable.
    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| io_err(&self.path(rel), std::io::Error::other(e)))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Renders through a CSV-style writer callback, then writes atomically.
    pub fn write_with(&self, rel: &str, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write(rel, &buf)
    }
}
