//! Human tables and JSON-lines records for reports.

use std::io::{self, Write};

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Jsonl,
    /// Tables, a blank line, then the records.
    Both,
}

pub struct Table {
    pub name: String,
    pub cols: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Left out of the human output; records only.
    pub records_only: bool,
}

impl Table {
    pub fn new(name: &str, cols: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            cols: cols.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            records_only: false,
        }
    }

    pub fn row(&mut self, r: Vec<Value>) {
        debug_assert_eq!(r.len(), self.cols.len());
        self.rows.push(r);
    }

    pub fn render(&self) -> String {
        let cell = |v: &Value| match v {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
        let width: Vec<usize> = (0..self.cols.len())
            .map(|i| cells.iter().map(|r| r[i].len()).chain([self.cols[i].len()]).max().unwrap())
            .collect();
        let line = |r: &[String]| {
            let parts: Vec<String> = r.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = format!("{}\n", self.name);
        out += &line(&self.cols);
        for r in &cells {
            out += &line(r);
        }
        out
    }

    pub fn records(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                m.insert("table".into(), Value::String(self.name.clone()));
                for (c, v) in self.cols.iter().zip(r) {
                    m.insert(c.clone(), v.clone());
                }
                Value::Object(m).to_string()
            })
            .collect()
    }
}

pub fn emit(tables: &[Table], format: Format) -> io::Result<()> {
    let mut out = io::stdout().lock();
    if format != Format::Jsonl {
        let human: Vec<String> = tables.iter().filter(|t| !t.records_only).map(Table::render).collect();
        write!(out, "{}", human.join("\n"))?;
    }
    if format == Format::Both {
        writeln!(out)?;
    }
    if format != Format::Table {
        for t in tables {
            for r in t.records() {
                writeln!(out, "{r}")?;
            }
        }
    }
    Ok(())
}
