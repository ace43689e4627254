use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::schema::{ColumnKind, Schema};
use super::table::{CategoricalColumn, Column, ColumnData, NumericColumn, Table, NA_LEVEL};
use super::DataError;

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == NA_LEVEL
}

/// Header names of a CSV file, in file order.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>, DataError> {
    let mut rdr = csv::Reader::from_reader(open(path.as_ref())?);
    Ok(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

/// Reads a CSV file into a [`Table`] typed by `schema`.
///
/// The header must contain exactly the schema's names (any order). Empty and
/// `NA` cells are missing: numeric cells are flagged in the mask, categorical
/// cells get the NA level. Unparseable numeric cells are also flagged missing.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<Table, DataError> {
    schema.validate()?;
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let in_file: BTreeSet<&str> = header.iter().map(String::as_str).collect();
    let in_schema: BTreeSet<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    if in_file != in_schema || header.len() != schema.columns.len() {
        let missing: Vec<&str> = in_schema.difference(&in_file).copied().collect();
        let unexpected: Vec<&str> = in_file.difference(&in_schema).copied().collect();
        return Err(DataError::HeaderMismatch {
            missing: missing.join(", "),
            unexpected: unexpected.join(", "),
        });
    }

    // position of each schema column in the file
    let positions: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| header.iter().position(|h| *h == c.name).unwrap_or(0))
        .collect();

    let mut builders: Vec<ColumnData> = schema
        .columns
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numeric => ColumnData::Numeric(NumericColumn::from_values(Vec::new())),
            ColumnKind::Categorical => ColumnData::Categorical(CategoricalColumn::new()),
        })
        .collect();

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = i + 2;
        if record.len() != header.len() {
            return Err(DataError::RowLength {
                row: line,
                found: record.len(),
                expected: header.len(),
            });
        }
        for (builder, &pos) in builders.iter_mut().zip(&positions) {
            let cell = &record[pos];
            match builder {
                ColumnData::Numeric(col) => {
                    let parsed = if is_missing(cell) {
                        None
                    } else {
                        cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
                    };
                    col.values.push(parsed.unwrap_or(0.0));
                    col.missing.push(parsed.is_none());
                }
                ColumnData::Categorical(col) => {
                    col.push((!is_missing(cell)).then_some(cell));
                }
            }
        }
    }

    let columns = schema
        .columns
        .iter()
        .cloned()
        .zip(builders)
        .map(|(schema, data)| Column { schema, data })
        .collect();
    Table::new(columns)
}

/// Writes `table` as CSV with the same conventions `load_table` reads.
pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(table.columns().iter().map(|c| c.schema.name.as_str()))?;
    let mut row = Vec::with_capacity(table.n_columns());
    for r in 0..table.n_rows() {
        row.clear();
        for c in table.columns() {
            row.push(match &c.data {
                ColumnData::Numeric(n) => match n.get(r) {
                    Some(v) => format!("{v}"),
                    None => String::new(),
                },
                ColumnData::Categorical(k) => k.level(r).to_string(),
            });
        }
        w.write_record(&row)?;
    }
    let mut inner = w.into_inner().map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e.into_error(),
    })?;
    inner.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}
