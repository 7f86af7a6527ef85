//! Run directories, CSV tables and the check summary.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// An in-memory table, written once when the run completes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    /// Renders the table; any NaN or infinity is an error.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Runtime(format!("cannot encode {}: {e}", self.name));
        w.write_record(&self.header).map_err(fail)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut record = Vec::with_capacity(row.len());
            for (j, cell) in row.iter().enumerate() {
                record.push(match cell {
                    Cell::Num(v) if !v.is_finite() => {
                        return Err(CliError::NonFinite {
                            file: self.name.clone(),
                            row: i,
                            column: self.header[j].to_string(),
                            value: *v,
                        })
                    }
                    Cell::Num(v) => format!("{v:e}"),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(t) => t.clone(),
                    Cell::Empty => String::new(),
                });
            }
            w.write_record(&record).map_err(fail)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Runtime(format!("cannot encode {}: {e}", self.name)))
    }
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {}: {}", self.name, self.detail)
    }
}

/// `summary.txt`: one line per check, notes, then a status line.
pub fn render_summary(subcommand: &str, checks: &[Check], notes: &[String]) -> String {
    let mut out = format!("subcommand: {subcommand}\n");
    for c in checks {
        out.push_str(&c.line());
        out.push('\n');
    }
    for n in notes {
        out.push_str("NOTE ");
        out.push_str(n);
        out.push('\n');
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if checks.is_empty() {
        out.push_str("status: pass (no checks requested)\n");
    } else if failed.is_empty() {
        out.push_str(&format!("status: pass ({} checks)\n", checks.len()));
    } else {
        out.push_str(&format!("status: fail ({} of {} checks)\n", failed.len(), checks.len()));
        for name in failed {
            out.push_str(&format!("failed: {name}\n"));
        }
    }
    out
}

/// `<output_dir>/<subcommand>/<run_name>/`, created empty.
pub fn create_run_dir(output_dir: &Path, subcommand: &str, run_name: &str) -> Result<PathBuf, CliError> {
    if run_name.is_empty() || run_name.contains(['/', '\\']) || run_name == "." || run_name == ".." {
        return Err(CliError::Usage(format!("invalid run name `{run_name}`")));
    }
    let dir = output_dir.join(subcommand).join(run_name);
    if dir.exists() {
        let mut entries = fs::read_dir(&dir).map_err(|e| CliError::io(format!("reading {}", dir.display()), e))?;
        if entries.next().is_some() {
            return Err(CliError::OutputExists(dir));
        }
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    Ok(dir)
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}
