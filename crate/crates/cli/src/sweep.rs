//! One-parameter sweeps over a run configuration.

use std::collections::{BTreeMap, BTreeSet};

use mediator_core::table::format_g17;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::scenarios::execute;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    Fail,
    /// A capacity or guard error stopped this value.
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: RowStatus,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

/// Runs `base` once per value of the numeric parameter `name`, in parallel,
/// returning rows in input order. Schema errors abort the sweep; capacity
/// and guard errors are recorded per row.
pub fn sweep(base: &RunConfig, name: &str, values: &[f64]) -> CliResult<SweepTable> {
    // validate the parameter even for an empty list
    base.with_value(name, values.first().copied().unwrap_or(0.0))?;
    let rows = values
        .par_iter()
        .map(|&v| {
            let config = base.with_value(name, v)?;
            match execute(&config) {
                Ok(out) => Ok(SweepRow {
                    value: v,
                    status: if out.report.passed {
                        RowStatus::Pass
                    } else {
                        RowStatus::Fail
                    },
                    metrics: out.report.metrics,
                    error: None,
                }),
                Err(e) if e.exit_code() == 3 => Ok(SweepRow {
                    value: v,
                    status: RowStatus::Rejected,
                    metrics: BTreeMap::new(),
                    error: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SweepTable {
        parameter: name.to_string(),
        rows,
    })
}

impl SweepTable {
    pub fn columns(&self) -> Vec<String> {
        let keys: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.metrics.keys()).collect();
        keys.into_iter().cloned().collect()
    }

    /// One row per value; metric columns in sorted order, empty cells where a
    /// row has no value.
    pub fn to_csv(&self) -> String {
        let columns = self.columns();
        let mut out = String::from("value,status");
        for c in &columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format_g17(r.value));
            out.push(',');
            out.push_str(match r.status {
                RowStatus::Pass => "pass",
                RowStatus::Fail => "fail",
                RowStatus::Rejected => "rejected",
            });
            for c in &columns {
                out.push(',');
                if let Some(v) = r.metrics.get(c) {
                    out.push_str(&format_g17(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize")
    }
}

/// Parses `0, 0.5, 1` or an empty string.
pub fn parse_values(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CliError::schema("--values", format!("`{s}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_parse() {
        assert_eq!(parse_values("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_values("").unwrap().is_empty());
        assert!(parse_values("a").is_err());
    }

    #[test]
    fn empty_sweep_is_empty_table() {
        let base = RunConfig::from_toml(crate::presets::get("particles").unwrap()).unwrap();
        let t = sweep(&base, "g1", &[]).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.to_csv(), "value,status\n");
        assert!(sweep(&base, "no_such", &[]).is_err());
    }
}
