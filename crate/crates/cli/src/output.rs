//! File and stdout emission. Files are written atomically (temp + rename) so
//! partially written reports never appear at the target path.

use gfdim_core::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

fn io_err(path: &Path, err: std::io::Error) -> Error {
    Error::InvalidConfig {
        field: "out".to_string(),
        reason: format!("{}: {err}", path.display()),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let mut name = tmp.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp~");
    tmp.set_file_name(name);
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Serialize to pretty JSON and write to the path, or to stdout when no path
/// is given.
pub fn emit_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidConfig {
        field: "out".to_string(),
        reason: format!("serialization failed: {e}"),
    })?;
    text.push('\n');
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

pub fn emit_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

pub fn series_csv(levels: &[gfdim_core::dim::LevelEntry]) -> String {
    let mut out = String::from("n,N,diam\n");
    for e in levels {
        out.push_str(&format!("{},{},{}\n", e.n, e.count, e.diam));
    }
    out
}

pub fn grid_csv(sweep: &gfdim_core::dim::SweepResult) -> String {
    let mut out = String::from("s,n,H\n");
    for (si, &s) in sweep.s_values.iter().enumerate() {
        for (ni, &n) in sweep.n_values.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", s, n, sweep.h[si][ni]));
        }
    }
    out
}

pub fn polyline_csv(points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for p in points {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
