//! Comma-separated scenario files.
//!
//! ```text
//! group,A,B,C
//! initial,100,250,80
//! 98.5,251.0,80.2
//! 0.1,97.0,240.0,75.5
//! ```
//!
//! Line 1 names the groups, line 2 holds the initial values and every
//! following line is one scenario. A scenario line with `N` cells uses
//! likelihood `1/K`; with `N + 1` cells the first is the likelihood. All
//! scenario lines must use the same width. Blank lines and lines starting
//! with `#` are skipped.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::risk::ScenarioMatrix;

/// Probability sums inside this band are normalized, outside it rejected.
pub const NORMALIZE_BAND: (f64, f64) = (0.999, 1.001);

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub path: PathBuf,
    pub matrix: ScenarioMatrix,
    pub rows: usize,
    pub columns: usize,
    pub has_probabilities: bool,
    /// The likelihoods were rescaled to sum to one.
    pub normalized: bool,
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

fn parse_number(cell: &str, line: u64, what: &str) -> Result<f64> {
    let value: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_error(line, format!("{what}: cannot parse {cell:?} as a number")))?;
    if !value.is_finite() {
        return Err(parse_error(line, format!("{what}: non-finite value {cell:?}")));
    }
    Ok(value)
}

pub fn read_scenarios(path: &Path) -> Result<ScenarioFile> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut parsed = parse_scenarios(&text)?;
    parsed.path = path.to_path_buf();
    Ok(parsed)
}

pub fn parse_scenarios(text: &str) -> Result<ScenarioFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut ids: Option<Vec<String>> = None;
    let mut initial: Option<Vec<f64>> = None;
    let mut values = Vec::new();
    let mut probabilities = Vec::new();
    let mut width: Option<usize> = None;
    let mut last_line = 0;

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(last_line + 1, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(last_line + 1, |p| p.line());
        last_line = line;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let cells: Vec<&str> = record.iter().collect();
        match (&ids, &initial) {
            (None, _) => {
                if cells[0] != "group" {
                    return Err(parse_error(line, "header must start with `group`"));
                }
                let names: Vec<String> = cells[1..].iter().map(|s| s.to_string()).collect();
                if names.len() < 2 {
                    return Err(parse_error(line, format!("need at least 2 groups, got {}", names.len())));
                }
                if let Some(blank) = names.iter().position(String::is_empty) {
                    return Err(parse_error(line, format!("group id {} is empty", blank + 1)));
                }
                ids = Some(names);
            }
            (Some(names), None) => {
                if cells[0] != "initial" {
                    return Err(parse_error(line, "second line must start with `initial`"));
                }
                if cells.len() != names.len() + 1 {
                    return Err(parse_error(
                        line,
                        format!("expected {} initial values, got {}", names.len(), cells.len() - 1),
                    ));
                }
                let x0 = cells[1..]
                    .iter()
                    .map(|c| parse_number(c, line, "initial value"))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(bad) = x0.iter().position(|&x| !(x > 0.0)) {
                    return Err(parse_error(
                        line,
                        format!("initial value of group {} must be positive", bad + 1),
                    ));
                }
                initial = Some(x0);
            }
            (Some(names), Some(_)) => {
                let n = names.len();
                let expected = *width.get_or_insert(cells.len());
                if cells.len() != expected || (expected != n && expected != n + 1) {
                    return Err(parse_error(
                        line,
                        format!("expected {} cells (or {} with a likelihood), got {}", n, n + 1, cells.len()),
                    ));
                }
                let (p, rest) = if expected == n + 1 {
                    let p = parse_number(cells[0], line, "likelihood")?;
                    if !(p > 0.0) {
                        return Err(parse_error(line, format!("likelihood must be positive, got {p}")));
                    }
                    (Some(p), &cells[1..])
                } else {
                    (None, &cells[..])
                };
                let row = rest
                    .iter()
                    .map(|c| parse_number(c, line, "scenario value"))
                    .collect::<Result<Vec<_>>>()?;
                probabilities.extend(p);
                values.push(row);
            }
        }
    }

    let ids = ids.ok_or_else(|| parse_error(1, "missing `group` header"))?;
    let initial = initial.ok_or_else(|| parse_error(last_line + 1, "missing `initial` line"))?;
    if values.is_empty() {
        return Err(parse_error(last_line + 1, "no scenario lines"));
    }
    let k = values.len();
    let has_probabilities = !probabilities.is_empty();
    let mut normalized = false;
    if has_probabilities {
        let sum: f64 = probabilities.iter().sum();
        if !(NORMALIZE_BAND.0..=NORMALIZE_BAND.1).contains(&sum) {
            return Err(parse_error(last_line, format!("likelihoods sum to {sum}, outside [0.999, 1.001]")));
        }
        if (sum - 1.0).abs() > crate::risk::PROB_SUM_TOL {
            for p in &mut probabilities {
                *p /= sum;
            }
            normalized = true;
        }
    } else {
        probabilities = vec![1.0 / k as f64; k];
    }
    let columns = ids.len();
    let matrix = ScenarioMatrix::new(ids, initial, values, probabilities)
        .map_err(|e| parse_error(last_line, e.to_string()))?;
    Ok(ScenarioFile {
        path: PathBuf::new(),
        matrix,
        rows: k,
        columns,
        has_probabilities,
        normalized,
    })
}

/// Seventeen significant digits; parses back to the same bits.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the likelihood column only when the likelihoods are not all `1/K`.
pub fn write_scenarios(matrix: &ScenarioMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    render_scenarios(matrix, &mut out).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    out.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn render_scenarios(matrix: &ScenarioMatrix, out: &mut dyn Write) -> std::io::Result<()> {
    for id in matrix.group_ids() {
        if id.contains([',', '\n', '\r', '"']) || id.trim() != id || id.starts_with('#') {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("group id {id:?} cannot be written"),
            ));
        }
    }
    let k = matrix.n_scenarios();
    let uniform = 1.0 / k as f64;
    let weighted = matrix.probabilities().iter().any(|&p| p != uniform);
    writeln!(out, "group,{}", matrix.group_ids().join(","))?;
    let join = |row: &[f64]| row.iter().map(|&v| format_value(v)).collect::<Vec<_>>().join(",");
    writeln!(out, "initial,{}", join(matrix.initial_values()))?;
    for s in 0..k {
        if weighted {
            write!(out, "{},", format_value(matrix.probabilities()[s]))?;
        }
        writeln!(out, "{}", join(matrix.row(s)))?;
    }
    Ok(())
}
