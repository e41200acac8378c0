//! Plot-ready tables: the optimization path, the weights along it and the
//! step-size sweep.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::continuation::{ContinuationResult, ConvergenceTable};
use crate::error::{Error, Result};
use crate::io::scenario_file::format_value;

pub const PATH_COLUMNS: [&str; 13] = [
    "m",
    "c_m",
    "kappa1",
    "kappa2",
    "q",
    "Q",
    "cvar_rel",
    "return_rel",
    "revenue_rel",
    "di_rel",
    "re2ri_rel",
    "clamped_count",
    "rescale_factor",
];

fn write_file(path: &Path, render: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let io_error = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io_error)?;
    let mut out = BufWriter::new(file);
    render(&mut out).map_err(io_error)?;
    out.flush().map_err(io_error)
}

pub fn render_path(result: &ContinuationResult, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{}", PATH_COLUMNS.join(","))?;
    for r in &result.records {
        let reals = [
            r.cost,
            r.kappa1,
            r.kappa2,
            r.q,
            r.rate,
            r.cvar_rel,
            r.return_rel,
            r.revenue_rel,
            r.di_rel,
            r.re2ri_rel,
        ];
        let reals: Vec<String> = reals.iter().map(|&v| format_value(v)).collect();
        writeln!(
            out,
            "{},{},{},{}",
            r.step,
            reals.join(","),
            r.clamped.len(),
            format_value(r.rescale_factor)
        )?;
    }
    Ok(())
}

/// One row per record, 13 columns.
pub fn write_path(result: &ContinuationResult, path: &Path) -> Result<()> {
    write_file(path, |out| render_path(result, out))
}

pub fn render_weights(result: &ContinuationResult, group_ids: &[String], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "m,{}", group_ids.join(","))?;
    for r in &result.records {
        let w: Vec<String> = r.weights.iter().map(|&v| format_value(v)).collect();
        writeln!(out, "{},{}", r.step, w.join(","))?;
    }
    Ok(())
}

/// Companion to [`write_path`]: the weights of every record.
pub fn write_weights(result: &ContinuationResult, group_ids: &[String], path: &Path) -> Result<()> {
    write_file(path, |out| render_weights(result, group_ids, out))
}

pub fn render_convergence(table: &ConvergenceTable, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "delta_c,steps,terminal_cvar_rel,error,termination")?;
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), format_value);
    for row in &table.rows {
        let status = match (&row.reason, &row.failure) {
            (Some(reason), _) => reason.as_str().to_string(),
            (None, Some(msg)) => format!("failed: {}", msg.replace(',', ";")),
            (None, None) => "unknown".to_string(),
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            format_value(row.delta_c),
            row.steps,
            opt(row.terminal_cvar_rel),
            opt(row.error),
            status
        )?;
    }
    writeln!(out, "# slope={}", opt(table.slope))?;
    writeln!(out, "# residual={}", opt(table.residual))
}

pub fn write_convergence(table: &ConvergenceTable, path: &Path) -> Result<()> {
    write_file(path, |out| render_convergence(table, out))
}

/// A numeric table read back from one of the writers above.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_numeric_table(path: &Path) -> Result<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("cannot parse {c:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}
