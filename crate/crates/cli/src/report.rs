//! Report envelope, CSV rendering and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use critbif::continuation::Branch;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope<T> {
    pub version: String,
    /// Seconds since the Unix epoch; omitted with `--no-meta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub command: String,
    pub config: serde_json::Value,
    pub payload: T,
}

impl<T: Serialize> ReportEnvelope<T> {
    pub fn new(command: &str, config: serde_json::Value, payload: T, meta: bool) -> Self {
        let timestamp = meta.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        Self { version: env!("CARGO_PKG_VERSION").into(), timestamp, command: command.into(), config, payload }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::numeric(format!("serialization: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

pub const CSV_HEADER: &str = "alpha,eps,residual,min_margin,z1_remainder,z2_remainder";

/// One row per point, ordered by `ε`.
pub fn branch_csv(branch: &Branch) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in branch.ordered_points() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(p.alpha),
            num(p.eps),
            num(p.residual),
            num(p.min_margin),
            num(p.z1_remainder),
            num(p.z2_remainder)
        ));
    }
    out
}

/// Shortest round-trip digits; scientific notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::usage(format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::usage(format!("invalid output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(io)?;
    file.write_all(contents.as_bytes()).map_err(io)?;
    file.sync_all().map_err(io)?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// Writes to `out` or prints to stdout.
pub fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// `branch.csv` gets the sidecar `branch.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}
