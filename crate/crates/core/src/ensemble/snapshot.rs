//! Columnar snapshot files.
//!
//! A snapshot is CSV with one row per grid point:
//!
//! ```text
//! index,z0,z1,...,P,S
//! ```
//!
//! `zN` is the coordinate along axis `N` (the label on a discrete axis).
//! Numbers carry 17 significant digits. The grid itself is not stored; the
//! reader checks the coordinates against the grid it is given.

use std::io::{Read, Write};

use super::{ConfigurationGrid, EnsembleState};
use crate::table::format_g17;
use crate::{Error, Result};

pub fn write_snapshot<W: Write>(state: &EnsembleState, out: W) -> Result<()> {
    let grid = state.grid();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend((0..grid.axes().len()).map(|a| format!("z{a}")));
    header.extend(["P".to_string(), "S".to_string()]);
    w.write_record(&header).map_err(csv_err)?;
    for z in 0..grid.len() {
        let mut row = vec![z.to_string()];
        row.extend(grid.coords(z).into_iter().map(format_g17));
        row.push(format_g17(state.p()[z]));
        row.push(format_g17(state.s()[z]));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(grid: &ConfigurationGrid, input: R) -> Result<EnsembleState> {
    let mut r = csv::Reader::from_reader(input);
    let naxes = grid.axes().len();
    let width = naxes + 3;
    let header = r.headers().map_err(csv_err)?;
    if header.len() != width || &header[0] != "index" || &header[width - 2] != "P" || &header[width - 1] != "S" {
        return Err(Error::Parse(format!("unexpected snapshot header {header:?}")));
    }
    let mut p = vec![f64::NAN; grid.len()];
    let mut s = vec![f64::NAN; grid.len()];
    let mut seen = 0;
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: `{}` is not a number", line + 2, &record[i])))
        };
        let z: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad index `{}`", line + 2, &record[0])))?;
        if z >= grid.len() {
            return Err(Error::Parse(format!("row {}: index {z} outside the grid", line + 2)));
        }
        for (a, c) in grid.coords(z).iter().enumerate() {
            let v = num(a + 1)?;
            if (v - c).abs() > 1e-9 * c.abs().max(1.0) {
                return Err(Error::Parse(format!(
                    "row {}: coordinate z{a} = {v}, grid has {c}",
                    line + 2
                )));
            }
        }
        p[z] = num(width - 2)?;
        s[z] = num(width - 1)?;
        seen += 1;
    }
    if seen != grid.len() {
        return Err(Error::Parse(format!(
            "snapshot has {seen} rows, grid has {} points",
            grid.len()
        )));
    }
    EnsembleState::new(grid.clone(), p, s)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
