//! Derived housing features and the cleaning recipe.

use serde::{Deserialize, Serialize};

use super::schema::{ColumnRole, ColumnSchema};
use super::table::{CategoricalColumn, Column, ColumnData, NumericColumn, Table};
use super::DataError;

/// Columns appended by [`derive_features`], in order.
pub const DERIVED_COLUMNS: [&str; 6] = ["AgeAtSale", "YearsSinceRemodel", "HasDeck", "HasPorch", "HasFireplace", "HasFence"];

const PORCH_COLUMNS: [&str; 4] = ["OpenPorchSF", "EnclosedPorch", "3SsnPorch", "ScreenPorch"];

fn flag_column(name: &str, flags: impl Iterator<Item = bool>) -> Column {
    let mut col = CategoricalColumn::new();
    col.intern("0");
    col.intern("1");
    // codes: NA=0, "0"=1, "1"=2
    col.codes = flags.map(|f| if f { 2 } else { 1 }).collect();
    Column {
        schema: ColumnSchema::categorical(name),
        data: ColumnData::Categorical(col),
    }
}

fn positive(col: &NumericColumn, row: usize) -> bool {
    col.get(row).is_some_and(|v| v > 0.0)
}

/// Appends `AgeAtSale`, `YearsSinceRemodel` and the `HasDeck` / `HasPorch` /
/// `HasFireplace` / `HasFence` flags (categorical, levels `0`/`1`).
///
/// A missing year propagates as a missing derived value; a missing area or
/// count counts as "absent" for the flags.
pub fn derive_features(t: &Table) -> Result<Table, DataError> {
    let yr_sold = t.numeric("YrSold")?;
    let built = t.numeric("YearBuilt")?;
    let remod = t.numeric("YearRemodAdd")?;
    let deck = t.numeric("WoodDeckSF")?;
    let porches = PORCH_COLUMNS.iter().map(|c| t.numeric(c)).collect::<Result<Vec<_>, _>>()?;
    let fireplaces = t.numeric("Fireplaces")?;
    let fence = t.categorical("Fence")?;
    let n = t.n_rows();

    let age = NumericColumn::from_options((0..n).map(|r| Some(yr_sold.get(r)? - built.get(r)?)));
    let since_remodel = NumericColumn::from_options((0..n).map(|r| Some((yr_sold.get(r)? - remod.get(r)?).max(0.0))));

    let mut out = t.clone();
    out.push_column(Column {
        schema: ColumnSchema::numeric("AgeAtSale"),
        data: ColumnData::Numeric(age),
    })?;
    out.push_column(Column {
        schema: ColumnSchema::numeric("YearsSinceRemodel"),
        data: ColumnData::Numeric(since_remodel),
    })?;
    out.push_column(flag_column("HasDeck", (0..n).map(|r| positive(deck, r))))?;
    out.push_column(flag_column("HasPorch", (0..n).map(|r| porches.iter().any(|p| positive(p, r)))))?;
    out.push_column(flag_column("HasFireplace", (0..n).map(|r| positive(fireplaces, r))))?;
    out.push_column(flag_column("HasFence", (0..n).map(|r| !fence.is_na(r))))?;
    Ok(out)
}

/// Parameters of [`clean_table_with`]. `Default` is the housing recipe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanConfig {
    /// Rows missing any of these columns are removed.
    pub drop_rows_missing: Vec<String>,
    /// Numeric columns whose missing cells become `0`.
    pub zero_fill: Vec<String>,
    /// Also zero-fill every other numeric feature column.
    pub zero_fill_remaining: bool,
    /// Columns removed after imputation.
    pub drop_columns: Vec<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            drop_rows_missing: s(&["MasVnrType", "Electrical"]),
            zero_fill: s(&["LotFrontage"]),
            zero_fill_remaining: true,
            drop_columns: s(&[
                "GarageYrBlt",
                "YearBuilt",
                "YrSold",
                "YearRemodAdd",
                "MoSold",
                "WoodDeckSF",
                "OpenPorchSF",
                "EnclosedPorch",
                "3SsnPorch",
                "ScreenPorch",
                "Fireplaces",
                "Fence",
                "PoolArea",
                "MiscVal",
            ]),
        }
    }
}

/// [`clean_table_with`] using the default recipe.
pub fn clean_table(t: &Table) -> Table {
    clean_table_with(t, &CleanConfig::default())
}

/// Removes rows missing a required column, zero-fills numeric gaps, and drops
/// the configured columns. Categorical gaps already carry the NA level.
///
/// Columns named in the config but absent from `t` are skipped, so cleaning
/// an already-clean table is a no-op.
pub fn clean_table_with(t: &Table, cfg: &CleanConfig) -> Table {
    let required: Vec<&Column> = cfg.drop_rows_missing.iter().filter_map(|c| t.column(c)).collect();
    let kept = t.filter_rows(|r| {
        required.iter().all(|c| match &c.data {
            ColumnData::Numeric(n) => !n.missing[r],
            ColumnData::Categorical(k) => !k.is_na(r),
        })
    });

    let mut out = kept.clone();
    for col in kept.columns() {
        let fill = cfg.zero_fill.contains(&col.schema.name) || (cfg.zero_fill_remaining && col.schema.role == ColumnRole::Feature);
        if let ColumnData::Numeric(n) = &col.data {
            if fill && n.n_missing() > 0 {
                let filled = NumericColumn::from_values(n.values.clone());
                out.replace_data(&col.schema.name, ColumnData::Numeric(filled)).expect("same shape");
            }
        }
    }
    out.drop_columns(&cfg.drop_columns)
}
