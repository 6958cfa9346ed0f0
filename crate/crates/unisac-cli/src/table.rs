//! Result tables and their CSV form.
//!
//! Reals are printed with nine significant digits in scientific notation so
//! bodies are byte-stable; metadata rides in leading `#` comment lines.

use std::fmt::Write as _;

/// One table entry: counts and labels stay verbatim, measures are reals.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Real(f64),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Real(x) => format!("{x:.8e}"),
        }
    }
}

/// Ordered rows of named columns plus the reproducibility header.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    meta: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> ResultTable {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.push((key.to_string(), value.into()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Full CSV text: `#` metadata lines, header row, then data rows.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let _ = writeln!(out, "{}", self.columns.iter().map(|c| field(c)).collect::<Vec<_>>().join(","));
        for row in &self.rows {
            let line = row.iter().map(|c| field(&c.render())).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// RFC-4180-style field quoting: bare unless the value needs protection.
fn field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// FNV-1a over the canonical configuration text; the run fingerprint.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Parsed CSV: metadata pairs, header names, and rows of raw string fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Reads back an emitted table; the inverse of [`ResultTable::render`].
pub fn parse_csv(text: &str) -> Result<ParsedCsv, String> {
    let mut meta = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| format!("metadata line without '=': {line}"))?;
            meta.push((k.trim().to_string(), v.trim().to_string()));
            continue;
        }
        let fields = split_record(line)?;
        match header {
            None => header = Some(fields),
            Some(ref h) => {
                if fields.len() != h.len() {
                    return Err(format!("row width {} does not match header {}", fields.len(), h.len()));
                }
                rows.push(fields);
            }
        }
    }
    Ok(ParsedCsv { meta, header: header.ok_or("missing header row")?, rows })
}

fn split_record(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    cur.push('"');
                }
                '"' => quoted = false,
                _ => cur.push(c),
            }
        } else {
            match c {
                '"' if cur.is_empty() => quoted = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            }
        }
    }
    if quoted {
        return Err(format!("unterminated quote in record: {line}"));
    }
    fields.push(cur);
    Ok(fields)
}
