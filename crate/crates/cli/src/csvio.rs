//! CSV writers and readers for the harness file formats.
//!
//! All floats are printed with Rust's shortest round-trip formatting, so a
//! dumped file reparsed with `str::parse::<f64>` reproduces the in-memory
//! values bit for bit.
//!
//! Schemas:
//! * solution dump — `x,y,w`
//! * experiment one — `M,n,theta,t_dir_s,t_tree_s,E_l2`
//! * experiment two — `n,level,ell,M,E_l2`

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rte_core::CollocationGrid;

use crate::config::CliError;
use crate::drivers::{Exp1Row, Exp2Row};

/// Writes a final-time solution as `x,y,w` rows in collocation order.
pub fn write_solution_csv(path: &Path, grid: &CollocationGrid, w: &[f64]) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "x,y,w")?;
    for (point, value) in grid.points().iter().zip(w) {
        writeln!(out, "{},{},{}", point[0], point[1], value)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a solution dump back as `(x, y, w)` triplets.
pub fn read_solution_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("x,y,w") => {}
        other => {
            return Err(CliError::Config(format!(
                "expected solution header 'x,y,w', got {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::Config(format!(
                "solution line {}: expected 3 fields",
                lineno + 2
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse()
                .map_err(|e| CliError::Config(format!("solution line {}: {e}", lineno + 2)))
        };
        rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    Ok(rows)
}

/// Incremental writer for the timing/accuracy sweep; rows are flushed as
/// they are produced so partial results survive an aborted sweep.
pub struct Exp1Writer {
    out: BufWriter<File>,
}

impl Exp1Writer {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "M,n,theta,t_dir_s,t_tree_s,E_l2")?;
        out.flush()?;
        Ok(Exp1Writer { out })
    }

    pub fn write_row(&mut self, row: &Exp1Row) -> Result<(), CliError> {
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            row.m, row.order, row.theta, row.t_dir_s, row.t_tree_s, row.e_l2
        )?;
        self.out.flush()?;
        Ok(())
    }
}

/// Incremental writer for the self-convergence study.
pub struct Exp2Writer {
    out: BufWriter<File>,
}

impl Exp2Writer {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "n,level,ell,M,E_l2")?;
        out.flush()?;
        Ok(Exp2Writer { out })
    }

    pub fn write_row(&mut self, row: &Exp2Row) -> Result<(), CliError> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            row.order, row.level, row.ell, row.m, row.e_l2
        )?;
        self.out.flush()?;
        Ok(())
    }
}

/// Writes run metadata as flat `key = value` lines.
pub fn write_meta(path: &Path, entries: &[(String, String)]) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    for (key, value) in entries {
        writeln!(out, "{key} = {value}")?;
    }
    out.flush()?;
    Ok(())
}
