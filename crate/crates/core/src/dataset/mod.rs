//! Tabular ingestion, the housing preprocessing recipe, and train/test splitting.

mod csv_io;
mod prep;
mod schema;
mod split;
mod table;

pub use csv_io::{load_table, read_header, write_table};
pub use prep::{clean_table, clean_table_with, derive_features, CleanConfig, DERIVED_COLUMNS};
pub use schema::{ames_categorical_columns, ColumnKind, ColumnRole, ColumnSchema, Schema};
pub use split::{split, SplitPair};
pub use table::{CategoricalColumn, CellValue, Column, ColumnData, NumericColumn, Table, NA_LEVEL};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header does not match schema (missing from file: [{missing}]; not in schema: [{unexpected}])")]
    HeaderMismatch { missing: String, unexpected: String },
    #[error("row {row} has {found} fields, expected {expected}")]
    RowLength { row: usize, found: usize, expected: usize },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("column `{name}` is {found}, expected {expected}")]
    WrongKind {
        name: String,
        found: &'static str,
        expected: &'static str,
    },
    #[error("invalid split: {0}")]
    Split(String),
    #[error("{0}")]
    Invalid(String),
}
