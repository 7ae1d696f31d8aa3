//! Artifact files: atomic writes and boundary-table persistence.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use fbm_seqtest::BoundaryTable64;

use crate::Format;

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename, so readers never see a partial artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot move the artifact into place at {}", path.display()))?;
    Ok(())
}

/// Writes to `path` atomically, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Reads a JSON boundary table and checks its shape. The fingerprint is
/// checked against the model where the table is used.
pub fn load_boundary(path: &Path) -> Result<BoundaryTable64> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let table =
        BoundaryTable64::from_json(&text).with_context(|| format!("malformed boundary table {}", path.display()))?;
    table.validate_shape()?;
    Ok(table)
}

pub fn render_boundary(table: &BoundaryTable64, format: Format) -> String {
    match format {
        Format::Json => table.to_json(),
        Format::Csv => table.to_csv(),
    }
}

pub fn save_boundary(table: &BoundaryTable64, path: &Path, format: Format) -> Result<()> {
    write_atomic(path, &render_boundary(table, format))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fbm_seqtest::boundary::{solve_boundary, SolveOptions};
    use fbm_seqtest::Model64;

    fn table() -> (Model64, BoundaryTable64) {
        let m = Model64::from_values(0.0, 1.0, 0.6).unwrap();
        let opts = SolveOptions {
            check_residual: false,
            ..SolveOptions::default()
        };
        let t = solve_boundary(&m, 60, &opts).unwrap();
        (m, t)
    }

    #[test]
    fn save_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        let (m, t) = table();
        save_boundary(&t, &path, Format::Json).unwrap();
        let back = load_boundary(&path).unwrap();
        assert_eq!(back, t);
        back.check_fingerprint(&m).unwrap();
        let other = Model64::from_values(0.0, 2.0, 0.6).unwrap();
        assert!(back.check_fingerprint(&other).is_err());
    }

    #[test]
    fn csv_export_has_one_row_per_node() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let (_, t) = table();
        save_boundary(&t, &path, Format::Csv).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,A"));
        assert_eq!(lines.count(), t.grid.len());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\"sigma\": 1.0}").unwrap();
        assert!(load_boundary(&path).is_err());
        assert!(load_boundary(&dir.path().join("missing.json")).is_err());
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, "first").unwrap();
        write_atomic(&path, "second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
