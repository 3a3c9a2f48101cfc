//! Deterministic file output.
//!
//! Every float written by the command line goes through [`fmt_sci`], including
//! the numbers inside JSON documents, so repeated runs produce identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::grid::{fmt_sci, Field};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// JSON formatter that writes floats in the fixed scientific form.
struct SciFormatter<F> {
    inner: F,
}

impl<F> SciFormatter<F> {
    fn float<W: ?Sized + Write>(writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_sci(value).as_bytes())
    }
}

macro_rules! delegate {
    ($($name:ident),* ; $($vname:ident($ty:ty)),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
            self.inner.$name(w)
        })*
        $(fn $vname<W: ?Sized + Write>(&mut self, w: &mut W, first: $ty) -> std::io::Result<()> {
            self.inner.$vname(w, first)
        })*
    };
}

impl<F: Formatter> Formatter for SciFormatter<F> {
    delegate!(begin_array, end_array, end_array_value, begin_object, end_object,
              begin_object_value, end_object_value;
              begin_array_value(bool), begin_object_key(bool));

    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        Self::float(writer, value)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        Self::float(writer, value as f64)
    }
}

/// Pretty-printed JSON with fixed float formatting and a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        SciFormatter {
            inner: PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Single-line JSON with fixed float formatting.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        SciFormatter {
            inner: serde_json::ser::CompactFormatter,
        },
    );
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_pretty(value)?)
}

#[derive(Clone, Copy, Debug)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

/// A plot-ready table with named columns.
#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Float(f) => fmt_sci(*f),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Array of objects keyed by column name.
    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .zip(row)
                    .map(|(k, c)| {
                        let v = match c {
                            Cell::Int(i) => serde_json::Value::from(*i),
                            Cell::Float(f) => serde_json::Value::from(*f),
                        };
                        (k.clone(), v)
                    })
                    .collect()
            })
            .collect();
        to_json_pretty(&rows)
    }

    /// Writes `<stem>.csv` or `<stem>.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf> {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        let text = match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json()?,
        };
        write_text(&path, &text)?;
        Ok(path)
    }
}

/// `index,coord1[,coord2],value`, matching [`Field::to_csv`].
pub fn field_table(f: &Field) -> Table {
    field_columns(f.grid().dim(), &[("value", f)])
}

/// Node coordinates followed by one column per named field.
pub fn field_columns(dim: usize, fields: &[(&str, &Field)]) -> Table {
    let mut cols = vec!["index", "coord1"];
    if dim == 2 {
        cols.push("coord2");
    }
    cols.extend(fields.iter().map(|(n, _)| *n));
    let mut t = Table::new(&cols);
    let Some((_, first)) = fields.first() else { return t };
    for i in 0..first.len() {
        let [x, y] = first.grid().coords(i);
        let mut row = vec![Cell::Int(i as i64), Cell::Float(x)];
        if dim == 2 {
            row.push(Cell::Float(y));
        }
        row.extend(fields.iter().map(|(_, f)| Cell::Float(f.values()[i])));
        t.push(row);
    }
    t
}
