//! Protocol pair tables: a directory of protocol files, a shared context and
//! a manifest of pairs with their expected verdicts.
//!
//! The manifest is `table.toml`:
//!
//! ```toml
//! context = "std.ctx"
//!
//! [[row]]
//! p1 = "iso9798.prot"
//! p2 = "x509v1.prot"
//! pe = "Y/Y"
//! pc = "Y/Y"
//! anchor = true
//! ```

use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::canonical::CanonError;
use crate::dsl::{parse_context_file, parse_protocol_file, DslError};
use crate::engine::{analyze_pair, CompositionReport};
use crate::model::{Context, ProtocolModel};

pub const MANIFEST: &str = "table.toml";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Manifest {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Canon(#[from] CanonError),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub p1: String,
    pub p2: String,
    pub pe: String,
    pub pc: String,
    #[serde(default)]
    pub anchor: bool,
    /// Why the row is expected to deviate, if it does.
    #[serde(default)]
    pub deviation: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    context: String,
    #[serde(default)]
    row: Vec<Row>,
}

pub fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_protocol(path: &Path) -> Result<ProtocolModel, CorpusError> {
    Ok(parse_protocol_file(&read_file(path)?, path)?)
}

pub fn load_context(path: &Path) -> Result<Context, CorpusError> {
    Ok(parse_context_file(&read_file(path)?, path)?)
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub ctx: Context,
    pub rows: Vec<Row>,
}

impl Corpus {
    pub fn load(dir: &Path) -> Result<Corpus, CorpusError> {
        let path = dir.join(MANIFEST);
        let manifest: Manifest = toml::from_str(&read_file(&path)?)
            .map_err(|source| CorpusError::Manifest { path, source })?;
        Ok(Corpus {
            dir: dir.to_owned(),
            ctx: load_context(&dir.join(&manifest.context))?,
            rows: manifest.row,
        })
    }

    pub fn protocol(&self, file: &str) -> Result<ProtocolModel, CorpusError> {
        load_protocol(&self.dir.join(file))
    }

    /// Both protocols of a row.
    pub fn pair(&self, row: &Row) -> Result<(ProtocolModel, ProtocolModel), CorpusError> {
        Ok((self.protocol(&row.p1)?, self.protocol(&row.p2)?))
    }

    pub fn run(&self) -> Result<Vec<TableRow>, CorpusError> {
        self.rows
            .iter()
            .map(|row| {
                let (x1, x2) = self.pair(row)?;
                Ok(TableRow {
                    row: row.clone(),
                    report: analyze_pair(&x1, &x2, &self.ctx)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub row: Row,
    pub report: CompositionReport,
}

impl TableRow {
    pub fn pe_matches(&self) -> bool {
        self.report.pe() == self.row.pe
    }

    pub fn pc_matches(&self) -> bool {
        self.report.pc() == self.row.pc
    }

    pub fn matches(&self) -> bool {
        self.pe_matches() && self.pc_matches()
    }
}

/// Aligned text grid of computed against expected verdicts.
pub fn render_table(rows: &[TableRow]) -> String {
    let head = ["Protocol 1", "Protocol 2", "PE", "PC", "expected", "match"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let mark = match (r.matches(), r.row.anchor) {
                (true, true) => "yes (anchor)",
                (true, false) => "yes",
                (false, true) => "NO (anchor)",
                (false, false) => "no",
            };
            [
                r.report.pair.0.clone(),
                r.report.pair.1.clone(),
                r.report.pe(),
                r.report.pc(),
                format!("{} {}", r.row.pe, r.row.pc),
                mark.to_owned(),
            ]
        })
        .collect();
    let mut widths = head.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, items: &[&str]| {
        let padded: Vec<String> = items
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, &head);
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    out
}
