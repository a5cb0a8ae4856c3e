//! Per-iteration metrics records and their CSV persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a solver trace. `opt_err` is the max of the relative objective
/// error and the constraint violation; `grad_components` is the cumulative
/// component-gradient count, nondecreasing along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub k: usize,
    pub obj_err: f64,
    pub equ_err: f64,
    pub opt_err: f64,
    pub grad_components: u64,
    pub wall_seconds: f64,
    /// Whether the errors are evaluated at the ergodic mean rather than the
    /// raw iterate.
    pub ergodic_flag: bool,
}

pub const CSV_HEADER: &str = "k,obj_err,equ_err,opt_err,grad_components,wall_seconds,ergodic_flag";

fn fmt(v: f64) -> String {
    // 13 significant digits; round-trips well within 1e-12 relative error
    format!("{v:.12e}")
}

/// Writes a trace as CSV with a fixed column order.
pub fn write_metrics_csv(trace: &[MetricsRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt(r.obj_err),
            fmt(r.equ_err),
            fmt(r.opt_err),
            r.grad_components,
            fmt(r.wall_seconds),
            r.ergodic_flag
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a trace written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected header: {line}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, name: &str| -> Result<f64> {
            s.parse().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad {name}: {e}"),
            })
        };
        out.push(MetricsRecord {
            k: fields[0].parse().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad k: {e}"),
            })?,
            obj_err: parse_f(fields[1], "obj_err")?,
            equ_err: parse_f(fields[2], "equ_err")?,
            opt_err: parse_f(fields[3], "opt_err")?,
            grad_components: fields[4].parse().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad grad_components: {e}"),
            })?,
            wall_seconds: parse_f(fields[5], "wall_seconds")?,
            ergodic_flag: fields[6].parse().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad ergodic_flag: {e}"),
            })?,
        });
    }
    Ok(out)
}
