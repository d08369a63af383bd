//! Dataset representation and exact stratification.
//!
//! A [`Dataset`] holds one sensitive column `S`, one observed target `Y`,
//! one prediction `Ŷ`, an optional numeric score, and an ordered list of
//! feature columns forming the non-sensitive representation `X` of each
//! record. Categorical columns are dictionary-encoded against a sorted,
//! deduplicated category table so two loads of the same data always agree
//! on codes.

mod io;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, load_schema, write_csv, LoadOptions, MissingPolicy, SchemaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sensitive,
    Target,
    Prediction,
    Feature,
    Score,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, role: Role, kind: Kind) -> Self {
        ColumnSchema {
            name: name.into(),
            role,
            kind,
            positive_label: None,
        }
    }

    pub fn with_positive_label(mut self, label: impl Into<String>) -> Self {
        self.positive_label = Some(label.into());
        self
    }
}

/// Dictionary-encoded categorical values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Categorical {
    categories: Vec<String>,
    codes: Vec<u32>,
}

impl Categorical {
    /// Encodes raw labels; the category table is the sorted set of observed labels.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let raw: Vec<S> = labels.into_iter().collect();
        let table: BTreeSet<&str> = raw.iter().map(|s| s.as_ref()).collect();
        let categories: Vec<String> = table.iter().map(|s| s.to_string()).collect();
        let codes = raw
            .iter()
            .map(|s| {
                categories
                    .binary_search_by(|c| c.as_str().cmp(s.as_ref()))
                    .expect("label is in its own table") as u32
            })
            .collect();
        Categorical { categories, codes }
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn arity(&self) -> usize {
        self.categories.len()
    }

    pub fn label(&self, record: usize) -> &str {
        &self.categories[self.codes[record] as usize]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(label))
            .ok()
    }

    fn len(&self) -> usize {
        self.codes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical(Categorical),
    Numeric(Vec<f64>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(c) => c.len(),
            ColumnData::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> Kind {
        match self {
            ColumnData::Categorical(_) => Kind::Categorical,
            ColumnData::Numeric(_) => Kind::Numeric,
        }
    }

    pub fn as_categorical(&self) -> Option<&Categorical> {
        match self {
            ColumnData::Categorical(c) => Some(c),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub role: Role,
    pub positive_label: Option<String>,
    pub data: ColumnData,
}

impl Column {
    pub fn categorical<I, S>(name: impl Into<String>, role: Role, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Column {
            name: name.into(),
            role,
            positive_label: None,
            data: ColumnData::Categorical(Categorical::from_labels(labels)),
        }
    }

    pub fn numeric(name: impl Into<String>, role: Role, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            role,
            positive_label: None,
            data: ColumnData::Numeric(values),
        }
    }

    pub fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            name: self.name.clone(),
            role: self.role,
            kind: self.data.kind(),
            positive_label: self.positive_label.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub rows_read: usize,
    pub dropped_rows: usize,
    pub threshold: Option<f64>,
}

/// A validated, immutable table of decision records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n: usize,
    sensitive: usize,
    target: usize,
    prediction: usize,
    score: Option<usize>,
    features: Vec<usize>,
    provenance: Provenance,
}

/// A variable of the dataset, addressed by role or by column position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Sensitive,
    Target,
    Prediction,
    Column(usize),
}

impl Dataset {
    /// Validates role cardinalities, column lengths and kinds.
    pub fn from_columns(columns: Vec<Column>, provenance: Provenance) -> Result<Self> {
        let mut sensitive = None;
        let mut target = None;
        let mut prediction = None;
        let mut score = None;
        let mut features = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, col) in columns.iter().enumerate() {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column `{}`",
                    col.name
                )));
            }
            let slot = match col.role {
                Role::Sensitive => &mut sensitive,
                Role::Target => &mut target,
                Role::Prediction => &mut prediction,
                Role::Score => &mut score,
                Role::Feature => {
                    features.push(i);
                    continue;
                }
                Role::Ignore => continue,
            };
            if slot.replace(i).is_some() {
                return Err(Error::RoleViolation(format!(
                    "more than one column has role {:?}",
                    col.role
                )));
            }
        }
        let require = |slot: Option<usize>, role: &str| {
            slot.ok_or_else(|| Error::RoleViolation(format!("no column has role {role}")))
        };
        let sensitive = require(sensitive, "sensitive")?;
        let target = require(target, "target")?;
        let prediction = require(prediction, "prediction")?;
        for &i in &[sensitive, target, prediction] {
            if columns[i].data.kind() != Kind::Categorical {
                return Err(Error::RoleViolation(format!(
                    "column `{}` with role {:?} must be categorical",
                    columns[i].name, columns[i].role
                )));
            }
        }

        let n = columns[sensitive].data.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if let Some(bad) = columns.iter().find(|c| c.data.len() != n) {
            return Err(Error::InvalidSchema(format!(
                "column `{}` has {} values, expected {n}",
                bad.name,
                bad.data.len()
            )));
        }
        for col in &columns {
            if let (Some(label), ColumnData::Categorical(cat)) = (&col.positive_label, &col.data) {
                if cat.index_of(label).is_none() {
                    return Err(Error::InvalidSchema(format!(
                        "positive label `{label}` does not occur in column `{}`",
                        col.name
                    )));
                }
            }
        }
        let s = columns[sensitive]
            .data
            .as_categorical()
            .expect("checked above");
        if s.arity() < 2 {
            return Err(Error::SensitiveArity(columns[sensitive].name.clone()));
        }

        Ok(Dataset {
            columns,
            n,
            sensitive,
            target,
            prediction,
            score,
            features,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn schema(&self) -> Vec<ColumnSchema> {
        self.columns.iter().map(Column::schema).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Column positions of the non-ignored feature columns, in schema order.
    pub fn feature_indices(&self) -> &[usize] {
        &self.features
    }

    pub fn score_index(&self) -> Option<usize> {
        self.score
    }

    pub fn resolve(&self, var: Var) -> usize {
        match var {
            Var::Sensitive => self.sensitive,
            Var::Target => self.target,
            Var::Prediction => self.prediction,
            Var::Column(i) => i,
        }
    }

    pub fn sensitive(&self) -> &Categorical {
        self.categorical(self.sensitive).expect("validated")
    }

    pub fn target(&self) -> &Categorical {
        self.categorical(self.target).expect("validated")
    }

    pub fn prediction(&self) -> &Categorical {
        self.categorical(self.prediction).expect("validated")
    }

    pub fn categorical(&self, index: usize) -> Option<&Categorical> {
        self.columns[index].data.as_categorical()
    }

    /// Category index treated as "positive" for rate reporting: the schema's
    /// positive label when given, else the second category of a binary column.
    pub fn positive_index(&self, index: usize) -> Option<usize> {
        let col = &self.columns[index];
        let cat = col.data.as_categorical()?;
        match &col.positive_label {
            Some(label) => cat.index_of(label),
            None if cat.arity() == 2 => Some(1),
            None => None,
        }
    }
}

/// Tuple of category codes over a conditioning column set. Ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StratumKey(pub Vec<u32>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub key: StratumKey,
    pub indices: Vec<usize>,
}

/// Partition of the records by exact value of the conditioning columns,
/// in ascending key order. Record indices within a stratum are ascending.
pub fn stratify(dataset: &Dataset, condition_columns: &[usize]) -> Result<Vec<Stratum>> {
    let mut code_columns = Vec::with_capacity(condition_columns.len());
    for &c in condition_columns {
        match &dataset.column(c).data {
            ColumnData::Categorical(cat) => code_columns.push(cat.codes()),
            ColumnData::Numeric(_) => {
                return Err(Error::NumericConditioning(dataset.column(c).name.clone()))
            }
        }
    }
    let key_of = |r: usize| StratumKey(code_columns.iter().map(|codes| codes[r]).collect());

    let mut order: Vec<usize> = (0..dataset.n()).collect();
    // stable sort keeps indices ascending within each stratum
    order.sort_by(|&a, &b| {
        code_columns
            .iter()
            .map(|codes| codes[a].cmp(&codes[b]))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut strata: Vec<Stratum> = Vec::new();
    for r in order {
        match strata.last_mut() {
            Some(last)
                if code_columns
                    .iter()
                    .all(|codes| codes[r] == codes[last.indices[0]]) =>
            {
                last.indices.push(r)
            }
            _ => strata.push(Stratum {
                key: key_of(r),
                indices: vec![r],
            }),
        }
    }
    Ok(strata)
}
