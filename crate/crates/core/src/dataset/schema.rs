use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Target,
    Id,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Numeric, ColumnRole::Feature)
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Categorical, ColumnRole::Feature)
    }
}

/// Ordered column declarations for one table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    /// Builds and validates a schema: unique names, exactly one id and one target.
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self, DataError> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    /// Declares every name as a numeric feature except `id`, `target` and the
    /// names listed in `categorical`.
    pub fn from_names<S: AsRef<str>>(names: &[S], id: &str, target: &str, categorical: &[S]) -> Result<Self, DataError> {
        let categorical: BTreeSet<&str> = categorical.iter().map(|s| s.as_ref()).collect();
        let columns = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                let role = if n == id {
                    ColumnRole::Id
                } else if n == target {
                    ColumnRole::Target
                } else {
                    ColumnRole::Feature
                };
                let kind = if categorical.contains(n) {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Numeric
                };
                ColumnSchema::new(n, kind, role)
            })
            .collect();
        Self::new(columns)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        for role in [ColumnRole::Target, ColumnRole::Id] {
            let n = self.columns.iter().filter(|c| c.role == role).count();
            if n != 1 {
                return Err(DataError::Schema(format!("expected exactly one {role:?} column, found {n}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Text-valued columns of the Ames housing data.
pub fn ames_categorical_columns() -> Vec<String> {
    [
        "MSZoning",
        "Street",
        "Alley",
        "LotShape",
        "LandContour",
        "Utilities",
        "LotConfig",
        "LandSlope",
        "Neighborhood",
        "Condition1",
        "Condition2",
        "BldgType",
        "HouseStyle",
        "RoofStyle",
        "RoofMatl",
        "Exterior1st",
        "Exterior2nd",
        "MasVnrType",
        "ExterQual",
        "ExterCond",
        "Foundation",
        "BsmtQual",
        "BsmtCond",
        "BsmtExposure",
        "BsmtFinType1",
        "BsmtFinType2",
        "Heating",
        "HeatingQC",
        "CentralAir",
        "Electrical",
        "KitchenQual",
        "Functional",
        "FireplaceQu",
        "GarageType",
        "GarageFinish",
        "GarageQual",
        "GarageCond",
        "PavedDrive",
        "PoolQC",
        "Fence",
        "MiscFeature",
        "SaleType",
        "SaleCondition",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_and_missing_roles() {
        let dup = Schema::new(vec![
            ColumnSchema::new("Id", ColumnKind::Numeric, ColumnRole::Id),
            ColumnSchema::numeric("a"),
            ColumnSchema::numeric("a"),
            ColumnSchema::new("y", ColumnKind::Numeric, ColumnRole::Target),
        ]);
        assert!(matches!(dup, Err(DataError::Schema(_))));
        let no_target = Schema::new(vec![
            ColumnSchema::new("Id", ColumnKind::Numeric, ColumnRole::Id),
            ColumnSchema::numeric("a"),
        ]);
        assert!(no_target.is_err());
    }

    #[test]
    fn from_names_assigns_roles_and_kinds() {
        let names = ["Id", "Fence", "LotArea", "SalePrice"];
        let s = Schema::from_names(&names, "Id", "SalePrice", &["Fence"]).unwrap();
        assert_eq!(s.get("Id").unwrap().role, ColumnRole::Id);
        assert_eq!(s.get("Fence").unwrap().kind, ColumnKind::Categorical);
        assert_eq!(s.get("LotArea").unwrap().kind, ColumnKind::Numeric);
        assert_eq!(s.get("SalePrice").unwrap().role, ColumnRole::Target);
    }

    #[test]
    fn ames_has_43_text_columns() {
        assert_eq!(ames_categorical_columns().len(), 43);
    }
}
