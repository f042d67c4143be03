//! Writing reports and tables to the output directory.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Format;
use crate::error::{CliError, CliResult};
use crate::scenarios::Outcome;

/// Output directory used when neither the flag, the environment nor the
/// config names one.
pub const DEFAULT_DIR: &str = "mediator-out";

pub fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `report.json` and the CSV artifacts selected by `formats`, plus
/// the `timing.json` sidecar. Returns the paths written.
pub fn write_outcome(dir: &Path, outcome: &Outcome, formats: &[Format], seconds: f64) -> CliResult<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        let p = dir.join("report.json");
        write(&p, &to_json(&outcome.report))?;
        written.push(p);
    }
    if formats.contains(&Format::Csv) {
        for a in &outcome.artifacts {
            let p = dir.join(&a.file_name);
            write(&p, &a.contents)?;
            written.push(p);
        }
    }
    let p = dir.join("timing.json");
    write(&p, &to_json(&serde_json::json!({ "wall_seconds": seconds })))?;
    written.push(p);
    Ok(written)
}
