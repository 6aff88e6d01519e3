//! Equal-length named numeric columns, with CSV ingestion.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::stats::NumericColumn;

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    columns: Vec<NumericColumn>,
}

impl DataTable {
    pub fn new(columns: Vec<NumericColumn>) -> Result<Self> {
        if let Some(first) = columns.first() {
            for c in &columns[1..] {
                if c.len() != first.len() {
                    return Err(Error::LengthMismatch {
                        left: first.len(),
                        right: c.len(),
                    });
                }
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name() == c.name()) {
                return Err(Error::DuplicateColumn(c.name().to_string()));
            }
        }
        Ok(Self { columns })
    }

    /// Single-column convenience constructor.
    pub fn single(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![NumericColumn::new(name, values)?])
    }

    pub fn column(&self, name: &str) -> Result<&NumericColumn> {
        self.columns
            .iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name).map(NumericColumn::values)
    }

    pub fn columns(&self) -> &[NumericColumn] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(NumericColumn::name)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, NumericColumn::len)
    }

    /// Keeps only the columns named in `mapping`, renaming `(source, target)`.
    pub fn select(&self, mapping: &[(String, String)]) -> Result<Self> {
        let cols = mapping
            .iter()
            .map(|(src, dst)| Ok(self.column(src)?.clone().rename(dst.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cols)
    }

    /// Reads a CSV with a header row. Every cell must parse as a number.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut data = vec![Vec::new(); headers.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for (j, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::CsvCell {
                    row: row + 1,
                    column: headers[j].clone(),
                    cell: cell.to_string(),
                })?;
                if v.is_nan() {
                    return Err(Error::CsvCell {
                        row: row + 1,
                        column: headers[j].clone(),
                        cell: cell.to_string(),
                    });
                }
                data[j].push(v);
            }
        }
        let cols = headers
            .into_iter()
            .zip(data)
            .map(|(h, v)| NumericColumn::new(h, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cols)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.names())?;
        for r in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| c.values()[r].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
