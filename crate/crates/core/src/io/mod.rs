//! Persistence: binary tag files and CSV tables. Files are written to a
//! temporary sibling and renamed into place.

mod csv_table;
mod tagfile;

use std::io::Write;
use std::path::Path;

pub use csv_table::{CsvTable, fmt_f64};
pub use tagfile::{read_tag_file, read_tags, write_tag_file, write_tags, TagFileError, HEADER_LEN, MAGIC, RECORD_LEN, VERSION};

/// Writes `bytes` to `path` atomically: readers see either the old file or
/// the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = std::fs::metadata(path).map(|m| m.permissions().mode()).unwrap_or(0o644);
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(mode))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
