//! Command-line front end for the lpke engine: TOML configs, trajectory CSV,
//! run comparison, orbit sweeps and timing benchmarks.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 schema violation,
//! 3 numerical abort, 4 time-grid mismatch in `compare`.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use config::{ConfigFile, Overrides};
pub use error::CliError;

use std::io::Write;
use std::path::Path;

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
