//! Per-run output tree: `config.toml`, `tables/*.csv`, `fields/*.bin` and `report.json`.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use translab::grid::Field;

/// Every table starts with `# schema: translab/<name>/v<SCHEMA_VERSION>`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| num(*v)).collect());
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "# schema: translab/{}/v{SCHEMA_VERSION}", self.name)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    /// Creates `<parent>/<stamp>-<command>`, adding a counter when the name is taken.
    pub fn create(parent: &Path, stamp: &str, command: &str) -> Result<Self> {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        let base = format!("{stamp}-{command}");
        for n in 0.. {
            let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
            let root = parent.join(name);
            match fs::create_dir(&root) {
                Ok(()) => {
                    fs::create_dir(root.join("tables"))?;
                    fs::create_dir(root.join("fields"))?;
                    return Ok(RunDir { root });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e).with_context(|| format!("creating {}", root.display())),
            }
        }
        unreachable!()
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.root.join(name), text).with_context(|| format!("writing {name}"))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_table(&self, table: &Table) -> Result<()> {
        let path = self.root.join("tables").join(format!("{}.csv", table.name));
        table.write_to(File::create(&path).with_context(|| format!("creating {}", path.display()))?)
    }

    pub fn write_field(&self, name: &str, field: &Field) -> Result<()> {
        let path = self.root.join("fields").join(format!("{name}.bin"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        field.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
