//! Deterministic CSV/JSON output with atomic file replacement.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Full-precision float formatting used in every CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a header and numeric rows; `None` cells are left empty.
pub fn csv_string(header: &[String], rows: &[Vec<Option<f64>>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| c.map(fmt_f64).unwrap_or_default()).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_json(path: impl AsRef<Path>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_formatting() {
        let s = csv_string(&["t".into(), "x".into()], &[vec![Some(0.5), None]]);
        assert_eq!(s, "t,x\n5.0000000000000000e-1,\n");
    }
}
