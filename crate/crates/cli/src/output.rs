//! Output directories owned by one process at a time.

use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::Usage;

pub const LOCK_FILE: &str = ".lock";
pub const CONFIG_ECHO: &str = "config.toml";
const DEFAULT_ROOT: &str = "rootseg-out";

/// `--out` if given, else `$ROOTSEG_OUT/<command>`, else `rootseg-out/<command>`.
pub fn resolve(out: Option<&Path>, command: &str) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os("ROOTSEG_OUT").map(PathBuf::from).unwrap_or_else(|| DEFAULT_ROOT.into());
            root.join(command)
        }
    }
}

/// Exclusive hold on an output directory; released on drop.
#[derive(Debug)]
pub struct OutputDir {
    path: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub fn acquire(path: PathBuf) -> Result<OutputDir> {
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let lock = path.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(Usage(format!(
                    "{} is in use by another run (delete {} if it is stale)",
                    path.display(),
                    lock.display()
                ))
                .into());
            }
            Err(e) => return Err(e).with_context(|| format!("creating {}", lock.display())),
        }
        Ok(OutputDir { path, lock })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn join(&self, name: impl AsRef<Path>) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_holder_is_refused_until_release() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutputDir::acquire(dir.path().join("o")).unwrap();
        let err = OutputDir::acquire(dir.path().join("o")).unwrap_err();
        assert!(err.is::<Usage>());
        drop(a);
        assert!(OutputDir::acquire(dir.path().join("o")).is_ok());
        assert!(!dir.path().join("o").join(LOCK_FILE).exists());
    }

    #[test]
    fn explicit_out_wins() {
        assert_eq!(resolve(Some(Path::new("x")), "train"), PathBuf::from("x"));
    }
}
