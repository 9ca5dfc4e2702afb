//! Exit-code classification and all-or-nothing file output.

use std::io::Write;
use std::path::Path;

use anyhow::Context;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, Failure>;

pub trait Classify<T> {
    fn usage(self) -> CliResult<T>;
    fn data(self) -> CliResult<T>;
    fn internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CliResult<T> {
        self.map_err(|e| Failure { code: EXIT_USAGE, error: e.into() })
    }

    fn data(self) -> CliResult<T> {
        self.map_err(|e| Failure { code: EXIT_DATA, error: e.into() })
    }

    fn internal(self) -> CliResult<T> {
        self.map_err(|e| Failure { code: EXIT_INTERNAL, error: e.into() })
    }
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so `path` is either absent, untouched or complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(())
}
