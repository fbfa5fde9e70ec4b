//! Plain-text matrix/vector files and the CSV schemas for traces and phase
//! tables.
//!
//! Matrix files: a header line `m N`, then m lines of N whitespace-separated
//! decimals. Vector files: a header line `N`, then one line of N decimals.
//! CSV floats are written with 17 significant digits.

use std::fmt::Write as _;

use thiserror::Error;

use crate::experiments::{PhaseRow, PhaseTransitionTable};
use crate::irls::IterationRecord;
use crate::linalg::{LinalgError, RealVector, SensingMatrix};

pub const TRACE_HEADER: &str = "n,surrogate,eps,step_l1,ref_error_l1";
pub const PHASE_HEADER: &str = "k,method,trials,successes,success_rate,mean_iters";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing column '{0}'")]
    SchemaMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

fn numbers(line: &str, lineno: usize) -> Result<Vec<f64>, FormatError> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad number '{t}'"))))
        .collect()
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn header(tokens: &str, lineno: usize, want: usize) -> Result<Vec<usize>, FormatError> {
    let dims: Result<Vec<usize>, _> = tokens.split_whitespace().map(str::parse::<usize>).collect();
    match dims {
        Ok(d) if d.len() == want => Ok(d),
        _ => Err(parse_err(lineno, format!("expected {want} dimension(s) in header"))),
    }
}

pub fn parse_matrix(text: &str) -> Result<SensingMatrix, FormatError> {
    let mut lines = content_lines(text);
    let (ln, head) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let dims = header(head, ln, 2)?;
    let (m, n) = (dims[0], dims[1]);
    let mut entries = Vec::with_capacity(m * n);
    for r in 0..m {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(ln + r + 1, format!("expected {m} rows, found {r}")))?;
        let row = numbers(line, ln)?;
        if row.len() != n {
            return Err(parse_err(ln, format!("expected {n} entries, found {}", row.len())));
        }
        entries.extend(row);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after matrix"));
    }
    Ok(SensingMatrix::from_row_major(m, n, &entries)?)
}

pub fn parse_vector(text: &str) -> Result<RealVector, FormatError> {
    let mut lines = content_lines(text);
    let (ln, head) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let n = header(head, ln, 1)?[0];
    let mut values = Vec::with_capacity(n);
    for (ln, line) in lines {
        values.extend(numbers(line, ln)?);
    }
    if values.len() != n {
        return Err(parse_err(ln, format!("expected {n} entries, found {}", values.len())));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(parse_err(ln, format!("non-finite entry at index {i}")));
    }
    Ok(RealVector::from_vec(values))
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
}

/// Shortest round-trip representation of every entry.
pub fn format_matrix(phi: &SensingMatrix) -> String {
    let mut out = format!("{} {}\n", phi.rows(), phi.cols());
    for r in 0..phi.rows() {
        out.push_str(&join(phi.as_matrix().row(r).iter().copied()));
        out.push('\n');
    }
    out
}

pub fn format_vector(v: &RealVector) -> String {
    format!("{}\n{}\n", v.len(), join(v.iter().copied()))
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let reference = r.ref_error_l1.map(fmt17).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            fmt17(r.surrogate_value),
            fmt17(r.eps),
            fmt17(r.step_l1),
            reference
        );
    }
    out
}

pub fn phase_csv(table: &PhaseTransitionTable) -> String {
    let mut out = String::from(PHASE_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            r.method,
            r.trials,
            r.successes,
            fmt17(r.success_rate),
            fmt17(r.mean_iters)
        );
    }
    out
}

/// A parsed CSV file: header names and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut lines = content_lines(text);
        let (_, head) = lines.next().ok_or_else(|| parse_err(1, "empty CSV"))?;
        let columns: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (ln, line) in lines {
            let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if cells.len() != columns.len() {
                return Err(parse_err(ln, format!("expected {} cells, found {}", columns.len(), cells.len())));
            }
            rows.push(cells);
        }
        Ok(Self { columns, rows })
    }

    pub fn require(&self, names: &[&str]) -> Result<(), FormatError> {
        match names.iter().find(|n| !self.columns.iter().any(|c| c == *n)) {
            Some(missing) => Err(FormatError::SchemaMismatch(missing.to_string())),
            None => Ok(()),
        }
    }

    pub fn index(&self, name: &str) -> Result<usize, FormatError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| FormatError::SchemaMismatch(name.to_string()))
    }

    /// Numeric column; empty cells become `None`.
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>, FormatError> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = &row[i];
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>()
                        .map(Some)
                        .map_err(|_| parse_err(r + 2, format!("bad number '{cell}' in column {name}")))
                }
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>, FormatError> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }
}

/// Reads a trace CSV back into records (τ-errors are not stored).
pub fn parse_trace_csv(text: &str) -> Result<Vec<IterationRecord>, FormatError> {
    let t = CsvTable::parse(text)?;
    t.require(&["n", "surrogate", "eps", "step_l1", "ref_error_l1"])?;
    let n = t.floats("n")?;
    let s = t.floats("surrogate")?;
    let e = t.floats("eps")?;
    let st = t.floats("step_l1")?;
    let r = t.floats("ref_error_l1")?;
    Ok((0..t.rows.len())
        .map(|i| IterationRecord {
            n: n[i].unwrap_or(0.0) as usize,
            surrogate_value: s[i].unwrap_or(f64::NAN),
            eps: e[i].unwrap_or(f64::NAN),
            step_l1: st[i].unwrap_or(f64::NAN),
            ref_error_l1: r[i],
            ref_error_tau: None,
            tau_effective: f64::NAN,
        })
        .collect())
}

pub fn parse_phase_csv(text: &str) -> Result<PhaseTransitionTable, FormatError> {
    let t = CsvTable::parse(text)?;
    t.require(&["k", "method", "trials", "successes", "success_rate", "mean_iters"])?;
    let k = t.floats("k")?;
    let method = t.strings("method")?;
    let trials = t.floats("trials")?;
    let succ = t.floats("successes")?;
    let rate = t.floats("success_rate")?;
    let iters = t.floats("mean_iters")?;
    let rows = (0..t.rows.len())
        .map(|i| PhaseRow {
            k: k[i].unwrap_or(0.0) as usize,
            method: method[i].clone(),
            trials: trials[i].unwrap_or(0.0) as usize,
            successes: succ[i].unwrap_or(0.0) as usize,
            success_rate: rate[i].unwrap_or(f64::NAN),
            mean_iters: iters[i].unwrap_or(f64::NAN),
        })
        .collect();
    Ok(PhaseTransitionTable {
        rng: String::new(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scientific_notation() {
        let phi = parse_matrix("2 3\n1e0 0 1.0\n0 1 1E+0\n").unwrap();
        assert_eq!(phi.row_major(), vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let v = parse_vector("3\n-2.5e-3 0 4\n").unwrap();
        assert_eq!(v.as_slice(), &[-2.5e-3, 0.0, 4.0]);
    }

    #[test]
    fn matrix_errors_report_lines() {
        let err = parse_matrix("2 3\n1 0 1\n0 1\n").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
        assert!(parse_matrix("2 3\n1 0 1\n").is_err());
        assert!(parse_matrix("2\n").is_err());
        assert!(parse_vector("2\n1 x\n").is_err());
        assert!(parse_vector("3\n1 2\n").is_err());
    }

    #[test]
    fn csv_schema_mismatch_names_column() {
        let err = parse_trace_csv("n,surrogate,eps,step_l1\n1,2,3,4\n").unwrap_err();
        match err {
            FormatError::SchemaMismatch(c) => assert_eq!(c, "ref_error_l1"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn seventeen_digits() {
        let s = fmt17(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }
}
