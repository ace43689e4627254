use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, ColumnRole, ColumnSchema, Schema};
use super::DataError;

/// Reserved level that every categorical dictionary carries at index 0.
pub const NA_LEVEL: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericColumn {
    /// Missing cells hold `0.0` here and `true` in `missing`.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl NumericColumn {
    pub fn from_values(values: Vec<f64>) -> Self {
        let missing = vec![false; values.len()];
        Self { values, missing }
    }

    pub fn from_options(cells: impl IntoIterator<Item = Option<f64>>) -> Self {
        let (values, missing) = cells
            .into_iter()
            .map(|c| match c {
                Some(v) => (v, false),
                None => (0.0, true),
            })
            .unzip();
        Self { values, missing }
    }

    pub fn get(&self, row: usize) -> Option<f64> {
        (!self.missing[row]).then(|| self.values[row])
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    fn select(&self, rows: &[usize]) -> Self {
        Self {
            values: rows.iter().map(|&r| self.values[r]).collect(),
            missing: rows.iter().map(|&r| self.missing[r]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub codes: Vec<u32>,
    /// `levels[0]` is always [`NA_LEVEL`].
    pub levels: Vec<String>,
}

impl CategoricalColumn {
    pub fn new() -> Self {
        Self {
            codes: Vec::new(),
            levels: vec![NA_LEVEL.to_string()],
        }
    }

    /// Builds a column from string cells; `None`, `""` and `"NA"` map to the NA level.
    pub fn from_strs<'a>(cells: impl IntoIterator<Item = Option<&'a str>>) -> Self {
        let mut col = Self::new();
        for c in cells {
            col.push(c);
        }
        col
    }

    pub fn push(&mut self, cell: Option<&str>) {
        let code = match cell.map(str::trim) {
            None | Some("") => 0,
            Some(s) => self.intern(s),
        };
        self.codes.push(code);
    }

    /// Returns the code for `level`, adding it to the dictionary if unseen.
    pub fn intern(&mut self, level: &str) -> u32 {
        match self.code_of(level) {
            Some(c) => c,
            None => {
                self.levels.push(level.to_string());
                (self.levels.len() - 1) as u32
            }
        }
    }

    pub fn code_of(&self, level: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == level).map(|p| p as u32)
    }

    pub fn level(&self, row: usize) -> &str {
        &self.levels[self.codes[row] as usize]
    }

    pub fn is_na(&self, row: usize) -> bool {
        self.codes[row] == 0
    }

    /// Number of rows per level code.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.levels.len()];
        for &c in &self.codes {
            counts[c as usize] += 1;
        }
        counts
    }

    fn select(&self, rows: &[usize]) -> Self {
        Self {
            codes: rows.iter().map(|&r| self.codes[r]).collect(),
            levels: self.levels.clone(),
        }
    }
}

impl Default for CategoricalColumn {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(NumericColumn),
    Categorical(CategoricalColumn),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(c) => c.values.len(),
            ColumnData::Categorical(c) => c.codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub schema: ColumnSchema,
    pub data: ColumnData,
}

/// A single cell used for interventions (`whatif`) and row edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellValue {
    Number(f64),
    Level(String),
}

impl CellValue {
    /// Interprets `raw` for a column of the given kind.
    pub fn parse(raw: &str, kind: ColumnKind) -> Result<Self, DataError> {
        match kind {
            ColumnKind::Categorical => Ok(CellValue::Level(raw.trim().to_string())),
            ColumnKind::Numeric => raw
                .trim()
                .parse::<f64>()
                .map(CellValue::Number)
                .map_err(|_| DataError::Invalid(format!("`{raw}` is not a number"))),
        }
    }
}

impl std::fmt::Display for CellValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellValue::Number(v) => write!(f, "{v}"),
            CellValue::Level(l) => f.write_str(l),
        }
    }
}

/// Column-major table. Immutable once built; edits return new tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Table {
    /// Assembles a table, checking lengths and categorical codes.
    pub fn new(columns: Vec<Column>) -> Result<Self, DataError> {
        let n_rows = columns.first().map_or(0, |c| c.data.len());
        for c in &columns {
            if c.data.len() != n_rows {
                return Err(DataError::Invalid(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    c.schema.name,
                    c.data.len()
                )));
            }
            if c.data.kind() != c.schema.kind {
                return Err(DataError::WrongKind {
                    name: c.schema.name.clone(),
                    found: c.data.kind().as_str(),
                    expected: c.schema.kind.as_str(),
                });
            }
            if let ColumnData::Categorical(cat) = &c.data {
                if cat.levels.first().map(String::as_str) != Some(NA_LEVEL) {
                    return Err(DataError::Invalid(format!(
                        "column `{}` lacks the reserved NA level",
                        c.schema.name
                    )));
                }
                if cat.codes.iter().any(|&k| k as usize >= cat.levels.len()) {
                    return Err(DataError::Invalid(format!(
                        "column `{}` has an out-of-range level code",
                        c.schema.name
                    )));
                }
            }
        }
        let mut names: Vec<&str> = columns.iter().map(|c| c.schema.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(DataError::Schema(format!("duplicate column `{}`", w[0])));
        }
        Ok(Self { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn schema(&self) -> Schema {
        Schema {
            columns: self.columns.iter().map(|c| c.schema.clone()).collect(),
        }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.schema.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column, DataError> {
        self.column(name).ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&NumericColumn, DataError> {
        match &self.require(name)?.data {
            ColumnData::Numeric(c) => Ok(c),
            ColumnData::Categorical(_) => Err(DataError::WrongKind {
                name: name.to_string(),
                found: "categorical",
                expected: "numeric",
            }),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<&CategoricalColumn, DataError> {
        match &self.require(name)?.data {
            ColumnData::Categorical(c) => Ok(c),
            ColumnData::Numeric(_) => Err(DataError::WrongKind {
                name: name.to_string(),
                found: "numeric",
                expected: "categorical",
            }),
        }
    }

    fn with_role(&self, role: ColumnRole) -> Option<&Column> {
        self.columns.iter().find(|c| c.schema.role == role)
    }

    pub fn target_name(&self) -> Option<&str> {
        self.with_role(ColumnRole::Target).map(|c| c.schema.name.as_str())
    }

    pub fn id_name(&self) -> Option<&str> {
        self.with_role(ColumnRole::Id).map(|c| c.schema.name.as_str())
    }

    /// Target values; fails if the column is absent, missing a cell, or non-finite.
    pub fn target(&self) -> Result<Vec<f64>, DataError> {
        let name = self.target_name().ok_or_else(|| DataError::MissingColumn("<target>".into()))?;
        let col = self.numeric(name)?;
        if let Some(r) = (0..self.n_rows).find(|&r| col.missing[r] || !col.values[r].is_finite()) {
            return Err(DataError::Invalid(format!("target `{name}` is missing or non-finite at row {r}")));
        }
        Ok(col.values.clone())
    }

    /// Feature columns in table order.
    pub fn features(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.schema.role == ColumnRole::Feature)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features().map(|c| c.schema.name.clone()).collect()
    }

    /// Row label: the id value when present, otherwise the row index.
    pub fn row_label(&self, row: usize) -> String {
        match self.with_role(ColumnRole::Id).map(|c| &c.data) {
            Some(ColumnData::Numeric(c)) => match c.get(row) {
                Some(v) => format!("{v}"),
                None => row.to_string(),
            },
            Some(ColumnData::Categorical(c)) => c.level(row).to_string(),
            None => row.to_string(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                schema: c.schema.clone(),
                data: match &c.data {
                    ColumnData::Numeric(n) => ColumnData::Numeric(n.select(rows)),
                    ColumnData::Categorical(k) => ColumnData::Categorical(k.select(rows)),
                },
            })
            .collect();
        Table {
            columns,
            n_rows: rows.len(),
        }
    }

    pub fn filter_rows(&self, keep: impl Fn(usize) -> bool) -> Table {
        let rows: Vec<usize> = (0..self.n_rows).filter(|&r| keep(r)).collect();
        self.select_rows(&rows)
    }

    pub fn push_column(&mut self, column: Column) -> Result<(), DataError> {
        if self.column(&column.schema.name).is_some() {
            return Err(DataError::Schema(format!("duplicate column `{}`", column.schema.name)));
        }
        if !self.columns.is_empty() && column.data.len() != self.n_rows {
            return Err(DataError::Invalid(format!(
                "column `{}` has {} rows, expected {}",
                column.schema.name,
                column.data.len(),
                self.n_rows
            )));
        }
        if self.columns.is_empty() {
            self.n_rows = column.data.len();
        }
        self.columns.push(column);
        Ok(())
    }

    /// Returns a copy without the named columns; unknown names are ignored.
    pub fn drop_columns<S: AsRef<str>>(&self, names: &[S]) -> Table {
        let columns = self
            .columns
            .iter()
            .filter(|c| !names.iter().any(|n| n.as_ref() == c.schema.name))
            .cloned()
            .collect();
        Table {
            columns,
            n_rows: self.n_rows,
        }
    }

    pub fn replace_data(&mut self, name: &str, data: ColumnData) -> Result<(), DataError> {
        let n_rows = self.n_rows;
        let col = self
            .columns
            .iter_mut()
            .find(|c| c.schema.name == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        if data.len() != n_rows || data.kind() != col.schema.kind {
            return Err(DataError::Invalid(format!("replacement for `{name}` has the wrong shape")));
        }
        col.data = data;
        Ok(())
    }

    /// Copy of the table with `value` written into `name` on `rows`.
    pub fn assign(&self, name: &str, rows: &[usize], value: &CellValue) -> Result<Table, DataError> {
        let mut out = self.clone();
        let col = out
            .columns
            .iter_mut()
            .find(|c| c.schema.name == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        match (&mut col.data, value) {
            (ColumnData::Numeric(n), CellValue::Number(v)) => {
                for &r in rows {
                    n.values[r] = *v;
                    n.missing[r] = false;
                }
            }
            (ColumnData::Categorical(k), CellValue::Level(l)) => {
                let code = if l.is_empty() || l == NA_LEVEL { 0 } else { k.intern(l) };
                for &r in rows {
                    k.codes[r] = code;
                }
            }
            (data, _) => {
                return Err(DataError::WrongKind {
                    name: name.to_string(),
                    found: data.kind().as_str(),
                    expected: match value {
                        CellValue::Number(_) => "numeric",
                        CellValue::Level(_) => "categorical",
                    },
                })
            }
        }
        Ok(out)
    }

    /// Whether the cell in `name` at `row` equals `value`.
    pub fn cell_equals(&self, name: &str, row: usize, value: &CellValue) -> Result<bool, DataError> {
        Ok(match (&self.require(name)?.data, value) {
            (ColumnData::Numeric(n), CellValue::Number(v)) => n.get(row) == Some(*v),
            (ColumnData::Categorical(k), CellValue::Level(l)) => {
                let l = if l.is_empty() { NA_LEVEL } else { l.as_str() };
                k.level(row) == l
            }
            (data, _) => {
                return Err(DataError::WrongKind {
                    name: name.to_string(),
                    found: data.kind().as_str(),
                    expected: match value {
                        CellValue::Number(_) => "numeric",
                        CellValue::Level(_) => "categorical",
                    },
                })
            }
        })
    }
}
