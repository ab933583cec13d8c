//! Header-checked CSV reading with errors that name the offending column.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fsio;

/// A CSV file whose required columns have been located.
pub struct CsvTable {
    path: PathBuf,
    columns: Vec<(String, usize)>,
    records: Vec<(u64, csv::StringRecord)>,
}

impl CsvTable {
    /// Reads `path`, failing if any of `required` is missing from the header.
    pub fn read(path: impl AsRef<Path>, required: &[&str]) -> Result<Self> {
        let path = path.as_ref();
        Self::from_reader(path, fsio::open(path)?, required)
    }

    /// Like [`CsvTable::read`]; `path` only labels errors.
    pub fn from_reader<R: std::io::Read>(
        path: impl AsRef<Path>,
        reader: R,
        required: &[&str],
    ) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(&path, e))?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for col in required {
            let idx = headers
                .iter()
                .position(|h| h == *col)
                .ok_or_else(|| Error::Schema {
                    path: path.clone(),
                    column: (*col).to_string(),
                    message: "missing column".into(),
                })?;
            columns.push(((*col).to_string(), idx));
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(&path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            records.push((line, rec));
        }
        Ok(Self {
            path,
            columns,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.records.iter().map(move |(line, rec)| Row {
            table: self,
            line: *line,
            record: rec,
        })
    }
}

pub struct Row<'a> {
    table: &'a CsvTable,
    line: u64,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    pub fn line(&self) -> u64 {
        self.line
    }

    pub fn str(&self, column: &str) -> Result<&str> {
        let idx = self
            .table
            .columns
            .iter()
            .find(|(c, _)| c == column)
            .map(|(_, i)| *i)
            .unwrap_or_else(|| panic!("column `{column}` was not declared as required"));
        self.record
            .get(idx)
            .ok_or_else(|| self.schema(column, "missing value".into()))
    }

    pub fn parse<T>(&self, column: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let raw = self.str(column)?;
        raw.parse().map_err(|e: T::Err| {
            self.schema(
                column,
                format!("line {}: cannot parse `{raw}`: {e}", self.line),
            )
        })
    }

    /// A finite float.
    pub fn float(&self, column: &str) -> Result<f64> {
        let v: f64 = self.parse(column)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.schema(column, format!("line {}: value must be finite", self.line)))
        }
    }

    pub fn bool(&self, column: &str) -> Result<bool> {
        match self.str(column)?.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(self.schema(
                column,
                format!("line {}: `{other}` is not a boolean", self.line),
            )),
        }
    }

    pub fn schema(&self, column: &str, message: String) -> Error {
        Error::Schema {
            path: self.table.path.clone(),
            column: column.to_string(),
            message,
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(path, line, e.to_string())
}

/// A CSV writer into memory; rows are rendered as given.
pub fn to_csv<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
