//! Output helpers. Every file is written to a temporary sibling and renamed
//! into place, so a failed command never leaves a partial file behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;
use usu_core::io::{grid_to_csv, write_grid, write_pgm16};
use usu_core::AttributionGrid;

use crate::error::{CliError, CliResult};
use crate::FileFormat;

pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf)?;
        buf.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn save_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, |w| Ok(w.write_all(bytes)?))
}

pub fn save_grid(path: &Path, grid: &AttributionGrid, format: FileFormat) -> CliResult<()> {
    write_atomic(path, |w| match format {
        FileFormat::Bin => Ok(write_grid(w, grid)?),
        FileFormat::Csv => Ok(w.write_all(grid_to_csv(grid).as_bytes())?),
    })
}

pub fn save_pgm(path: &Path, grid: &AttributionGrid) -> CliResult<()> {
    write_atomic(path, |w| Ok(write_pgm16(w, grid)?))
}

pub fn load_grid(path: &Path, format: FileFormat) -> CliResult<AttributionGrid> {
    match format {
        FileFormat::Bin => Ok(usu_core::io::load_grid(path)?),
        FileFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(usu_core::io::grid_from_csv(&text)?)
        }
    }
}
