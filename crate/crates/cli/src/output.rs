use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, RunConfig, MANIFEST_NAME};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// A numeric table written as CSV (with `#` metadata lines) or JSON.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub schema_version: u32,
    pub metadata: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            schema_version: SCHEMA_VERSION,
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, line: impl Into<String>) -> Self {
        self.metadata.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# schema_version: {}\n", self.schema_version));
        for line in &self.metadata {
            out.push_str(&format!("# {line}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| if v.is_nan() { String::new() } else { format!("{v:.15e}") })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One run's output directory.
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Output {
    /// Creates the directory and writes the manifest.
    pub fn create(cfg: &RunConfig, root: Option<&Path>) -> Result<Self, CliError> {
        let dir = cfg.output_dir(root);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let out = Output {
            dir,
            format: cfg.output.format,
        };
        out.write_text(MANIFEST_NAME, &cfg.to_toml()?)?;
        Ok(out)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(text.as_bytes())?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// `stem.csv` or `stem.json` by the configured format.
    pub fn write_table(&self, stem: &str, table: &Table) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => self.write_text(&format!("{stem}.csv"), &table.to_csv()),
            Format::Json => self.write_json(&format!("{stem}.json"), table),
        }
    }

    /// `summary.json` with the schema version and command name.
    pub fn write_summary<T: Serialize>(&self, cfg: &RunConfig, result: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Summary<'a, T> {
            schema_version: u32,
            command: &'static str,
            result: &'a T,
        }
        self.write_json(
            "summary.json",
            &Summary {
                schema_version: SCHEMA_VERSION,
                command: cfg.command.name(),
                result,
            },
        )
    }
}
