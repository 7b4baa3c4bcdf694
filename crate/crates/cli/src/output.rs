//! Scenario results and their CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use qtraj_thermo::records::format_significant;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_significant(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Named columns of data.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Comparison performed by an assertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `observed ≤ target + tolerance`.
    AtMost,
    /// `observed ≥ target − tolerance`.
    AtLeast,
    /// `|observed − target| ≤ tolerance`.
    Near,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Near => "~=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub observed: f64,
    pub relation: Relation,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn new(
        name: impl Into<String>,
        observed: f64,
        relation: Relation,
        target: f64,
        tolerance: f64,
    ) -> Self {
        let passed = match relation {
            Relation::AtMost => observed <= target + tolerance,
            Relation::AtLeast => observed >= target - tolerance,
            Relation::Near => (observed - target).abs() <= tolerance,
        };
        Assertion {
            name: name.into(),
            observed,
            relation,
            target,
            tolerance,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: String,
    pub config_echo: String,
    pub tables: Vec<Table>,
    /// Raw text files written verbatim, as `(suffix, contents)`.
    pub attachments: Vec<(String, String)>,
    pub assertions: Vec<Assertion>,
}

impl ScenarioResult {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    fn header(&self) -> String {
        format!(
            "# qtraj-cli {}\n# scenario: {}\n# config: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.scenario,
            self.config_echo
        )
    }

    fn table_csv(&self, columns: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(self.header().into_bytes());
        w.write_record(columns)
            .map_err(|e| CliError::Io(e.to_string()))?;
        for row in rows {
            w.write_record(row)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }

    /// Contents of every output file, keyed by file name.
    pub fn render(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut files = Vec::new();
        for t in &self.tables {
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::render).collect())
                .collect();
            files.push((
                format!("{}-{}.csv", self.scenario, t.name),
                self.table_csv(&t.columns, &rows)?,
            ));
        }
        let columns: Vec<String> = [
            "assertion",
            "observed",
            "relation",
            "target",
            "tolerance",
            "pass",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let rows: Vec<Vec<String>> = self
            .assertions
            .iter()
            .map(|a| {
                vec![
                    a.name.clone(),
                    format_significant(a.observed),
                    a.relation.symbol().into(),
                    format_significant(a.target),
                    format_significant(a.tolerance),
                    if a.passed { "pass" } else { "fail" }.into(),
                ]
            })
            .collect();
        files.push((
            format!("{}-assertions.csv", self.scenario),
            self.table_csv(&columns, &rows)?,
        ));
        for (suffix, text) in &self.attachments {
            files.push((format!("{}-{suffix}", self.scenario), text.clone()));
        }
        Ok(files)
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        self.render()?
            .into_iter()
            .map(|(name, text)| {
                let path = dir.join(name);
                fs::write(&path, text)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                Ok(path)
            })
            .collect()
    }

    /// One line per assertion followed by a verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for a in &self.assertions {
            out.push_str(&format!(
                "{} {}: {} {} {} (tol {})\n",
                if a.passed { "PASS" } else { "FAIL" },
                a.name,
                format_significant(a.observed),
                a.relation.symbol(),
                format_significant(a.target),
                format_significant(a.tolerance)
            ));
        }
        let failed = self.assertions.iter().filter(|a| !a.passed).count();
        out.push_str(&format!(
            "{}: {} of {} assertions pass\n",
            self.scenario,
            self.assertions.len() - failed,
            self.assertions.len()
        ));
        out
    }
}
