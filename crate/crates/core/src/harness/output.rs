use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Name of the marker file present while a run is unfinished or failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Output directory of one command. The marker file is written on creation
/// and removed only by [`OutputDir::finish`], so a failed run is
/// recognizable from its directory alone.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let marker = root.join(INCOMPLETE_MARKER);
        fs::write(&marker, "run in progress\n").map_err(|e| Error::io(&marker, e))?;
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `rel` below the root, creating parent directories.
    pub fn write(&self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn finish(self) -> Result<()> {
        let marker = self.root.join(INCOMPLETE_MARKER);
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))
    }

    /// Leaves the marker in place with the failure reason.
    pub fn fail(self, err: &Error) {
        let marker = self.root.join(INCOMPLETE_MARKER);
        if let Err(e) = fs::write(&marker, format!("run failed: {err}\n")) {
            log::error!("{}: cannot record failure: {e}", marker.display());
        }
    }

    /// Runs `body`, then finishes or fails the directory by its result.
    pub fn run<T>(root: &Path, body: impl FnOnce(&OutputDir) -> Result<T>) -> Result<T> {
        let out = OutputDir::create(root)?;
        match body(&out) {
            Ok(v) => {
                out.finish()?;
                Ok(v)
            }
            Err(e) => {
                out.fail(&e);
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_lifecycle() {
        let tmp = tempfile::tempdir().unwrap();
        let ok = tmp.path().join("ok");
        OutputDir::run(&ok, |o| o.write("a/b.txt", b"x").map(|_| ())).unwrap();
        assert!(ok.join("a/b.txt").exists());
        assert!(!ok.join(INCOMPLETE_MARKER).exists());

        let bad = tmp.path().join("bad");
        let r: Result<()> = OutputDir::run(&bad, |_| Err(Error::Data("broken input".into())));
        assert!(r.is_err());
        let text = fs::read_to_string(bad.join(INCOMPLETE_MARKER)).unwrap();
        assert!(text.contains("broken input"));
    }
}
