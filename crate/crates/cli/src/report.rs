//! Human-readable tables on stdout and JSON reports on disk.

use std::fmt::Write as _;
use std::path::Path;

use lqgvar::Matrix;
use serde::Serialize;

use crate::error::CliError;

/// Two-column table with a title, printed with aligned labels.
#[derive(Debug, Default)]
pub struct Table {
    title: String,
    rows: Vec<(String, String)>,
}

impl Table {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, label: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.rows.push((label.into(), value.into()));
        self
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let mut out = format!("{}\n", self.title);
        for (label, value) in &self.rows {
            let _ = writeln!(out, "  {label:<width$}  {value}");
        }
        out
    }

    pub fn print(&self) {
        print!("{}", self.render());
    }
}

/// Seven significant digits, switching to exponent form far from 1.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10();
    if (-3.0..7.0).contains(&mag) {
        let decimals = (6 - mag.floor() as i32).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.6e}")
    }
}

pub fn percent(p: f64) -> String {
    format!("{:.4}%", 100.0 * p)
}

pub fn matrix(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| r.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

pub fn write_json<T: Serialize>(path: &Path, report: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Input(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
