//! CSV ingestion and the JSON schema/config file.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Column, ColumnData, ColumnSchema, Dataset, Kind, Provenance, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Reject the file at the first empty field.
    #[default]
    Error,
    /// Drop incomplete rows and record how many were dropped.
    Drop,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    /// Binarization cut for a numeric prediction column: `value >= threshold` is "1".
    pub threshold: Option<f64>,
    pub missing: MissingPolicy,
    /// Free-form description of where the bytes came from.
    pub source: String,
}

/// Contents of a schema file: `{"columns": [...], "threshold": 0.5, "missing": "error"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub columns: Vec<ColumnSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub missing: MissingPolicy,
}

impl SchemaConfig {
    pub fn load_options(&self, source: impl Into<String>) -> LoadOptions {
        LoadOptions {
            threshold: self.threshold,
            missing: self.missing,
            source: source.into(),
        }
    }
}

pub fn load_schema(path: &Path) -> Result<SchemaConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))
}

fn validate_schema(schema: &[ColumnSchema], options: &LoadOptions) -> Result<()> {
    for role in [Role::Sensitive, Role::Target, Role::Prediction, Role::Score] {
        let count = schema.iter().filter(|c| c.role == role).count();
        let required = role != Role::Score;
        if count > 1 || (required && count == 0) {
            return Err(Error::RoleViolation(format!(
                "expected {} column with role {role:?}, schema has {count}",
                if required {
                    "exactly one"
                } else {
                    "at most one"
                }
            )));
        }
    }
    for col in schema {
        match (col.role, col.kind) {
            (Role::Sensitive | Role::Target, Kind::Numeric) => {
                return Err(Error::RoleViolation(format!(
                    "column `{}` with role {:?} must be categorical",
                    col.name, col.role
                )))
            }
            (Role::Prediction, Kind::Numeric) if options.threshold.is_none() => {
                return Err(Error::RoleViolation(format!(
                    "numeric prediction column `{}` requires a threshold",
                    col.name
                )))
            }
            _ => {}
        }
    }
    if let Some(t) = options.threshold {
        if !t.is_finite() {
            return Err(Error::InvalidSchema(format!("threshold {t} is not finite")));
        }
    }
    Ok(())
}

enum Cells {
    Text(Vec<String>),
    Number(Vec<f64>),
}

/// Reads a headered CSV and builds a validated [`Dataset`] in schema column order.
///
/// Header columns not named by the schema are ignored. Row numbers in errors
/// count data rows from 1.
pub fn load_dataset<R: Read>(
    source: R,
    schema: &[ColumnSchema],
    options: &LoadOptions,
) -> Result<Dataset> {
    validate_schema(schema, options)?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let positions: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut fields = Vec::with_capacity(schema.len());
    for col in schema {
        let pos = positions
            .get(col.name.as_str())
            .ok_or_else(|| Error::MissingColumn(col.name.clone()))?;
        fields.push(*pos);
    }

    let mut cells: Vec<Cells> = schema
        .iter()
        .map(|c| match c.kind {
            Kind::Categorical => Cells::Text(Vec::new()),
            Kind::Numeric => Cells::Number(Vec::new()),
        })
        .collect();
    let mut rows_read = 0;
    let mut dropped_rows = 0;
    let mut record = csv::StringRecord::new();
    let mut parsed: Vec<Option<f64>> = vec![None; schema.len()];
    while reader.read_record(&mut record)? {
        rows_read += 1;
        let row = rows_read;
        let mut incomplete = false;
        for (c, col) in schema.iter().enumerate() {
            let raw = record.get(fields[c]).unwrap_or("");
            if raw.trim().is_empty() {
                match options.missing {
                    MissingPolicy::Error => {
                        return Err(Error::MissingValue {
                            row,
                            column: col.name.clone(),
                        })
                    }
                    MissingPolicy::Drop => {
                        incomplete = true;
                        break;
                    }
                }
            }
            if col.kind == Kind::Numeric {
                let value = raw
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ParseError {
                        row,
                        column: col.name.clone(),
                        value: raw.to_string(),
                    })?;
                parsed[c] = Some(value);
            }
        }
        if incomplete {
            dropped_rows += 1;
            continue;
        }
        for (c, cell) in cells.iter_mut().enumerate() {
            match cell {
                Cells::Text(v) => v.push(record.get(fields[c]).unwrap_or("").to_string()),
                Cells::Number(v) => v.push(parsed[c].take().expect("parsed above")),
            }
        }
    }
    if rows_read == dropped_rows {
        return Err(Error::EmptyData);
    }

    let columns = schema
        .iter()
        .zip(cells)
        .map(|(col, cell)| {
            let data = match (cell, col.role) {
                (Cells::Number(values), Role::Prediction) => {
                    let t = options.threshold.expect("validated");
                    let labels = values.iter().map(|&v| if v >= t { "1" } else { "0" });
                    ColumnData::Categorical(super::Categorical::from_labels(labels))
                }
                (Cells::Number(values), _) => ColumnData::Numeric(values),
                (Cells::Text(labels), _) => {
                    ColumnData::Categorical(super::Categorical::from_labels(labels))
                }
            };
            Column {
                name: col.name.clone(),
                role: col.role,
                positive_label: col.positive_label.clone(),
                data,
            }
        })
        .collect();

    Dataset::from_columns(
        columns,
        Provenance {
            source: options.source.clone(),
            rows_read,
            dropped_rows,
            threshold: options.threshold,
        },
    )
}

/// Writes every column in dataset order. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(dataset: &Dataset, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(dataset.columns().iter().map(|c| c.name.as_str()))?;
    let mut row: Vec<String> = Vec::with_capacity(dataset.columns().len());
    for r in 0..dataset.n() {
        row.clear();
        for col in dataset.columns() {
            row.push(match &col.data {
                ColumnData::Categorical(cat) => cat.label(r).to_string(),
                ColumnData::Numeric(values) => values[r].to_string(),
            });
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
