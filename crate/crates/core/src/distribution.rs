//! Contingency tables and empirical joint distributions over two categorical
//! variables, optionally split by conditioning strata.

use serde::{Deserialize, Serialize};

use crate::data::{stratify, Dataset, StratumKey, Var};
use crate::error::{Error, Result};

/// Default minimum stratum size retained by [`stratified_contingency`].
pub const DEFAULT_MIN_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    /// Row-major cell counts.
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "table dimensions must be positive");
        ContingencyTable {
            rows,
            cols,
            counts: vec![0; rows * cols],
            total: 0,
        }
    }

    /// Builds a table from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut table = ContingencyTable::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged table");
            for (j, &c) in row.iter().enumerate() {
                table.add(i, j, c);
            }
        }
        table
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn add(&mut self, row: usize, col: usize, count: u64) {
        self.counts[row * self.cols + col] += count;
        self.total += count;
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0; self.cols];
        for row in self.counts.chunks(self.cols) {
            for (s, c) in sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        sums
    }

    pub fn transpose(&self) -> Self {
        let mut t = ContingencyTable::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.add(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scaled(&self, k: u64) -> Self {
        ContingencyTable {
            rows: self.rows,
            cols: self.cols,
            counts: self.counts.iter().map(|c| c * k).collect(),
            total: self.total * k,
        }
    }
}

/// Cell probabilities of a (possibly smoothed) empirical joint distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
    smoothing_alpha: f64,
}

impl JointTable {
    /// Wraps raw probabilities. Panics unless they are non-negative and sum to 1 within 1e-9.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(
            !rows.is_empty() && cols > 0,
            "table dimensions must be positive"
        );
        let probs: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), cols, "ragged table");
                r.iter().copied()
            })
            .collect();
        assert!(probs.iter().all(|&p| p >= 0.0), "negative probability");
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9, "probabilities sum to {sum}");
        JointTable {
            rows: rows.len(),
            cols,
            probs,
            smoothing_alpha: 0.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.cols + col]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    pub fn row_marginals(&self) -> Vec<f64> {
        self.probs
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_marginals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for row in self.probs.chunks(self.cols) {
            for (s, p) in m.iter_mut().zip(row) {
                *s += p;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut probs = vec![0.0; self.probs.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                probs[j * self.rows + i] = self.get(i, j);
            }
        }
        JointTable {
            rows: self.cols,
            cols: self.rows,
            probs,
            smoothing_alpha: self.smoothing_alpha,
        }
    }
}

/// `p(i,j) = (count(i,j) + alpha) / (total + alpha * cells)`.
pub fn normalize(table: &ContingencyTable, alpha: f64) -> Result<JointTable> {
    assert!(
        alpha >= 0.0 && alpha.is_finite(),
        "alpha must be non-negative"
    );
    let cells = (table.rows * table.cols) as f64;
    let denom = table.total as f64 + alpha * cells;
    if denom <= 0.0 {
        return Err(Error::EmptyTable);
    }
    let probs = table
        .counts
        .iter()
        .map(|&c| (c as f64 + alpha) / denom)
        .collect();
    Ok(JointTable {
        rows: table.rows,
        cols: table.cols,
        probs,
        smoothing_alpha: alpha,
    })
}

fn categorical_codes(dataset: &Dataset, var: Var) -> Result<(usize, &[u32], usize)> {
    let index = dataset.resolve(var);
    let col = dataset.column(index);
    let cat = col
        .data
        .as_categorical()
        .ok_or_else(|| Error::NumericConditioning(col.name.clone()))?;
    Ok((index, cat.codes(), cat.arity()))
}

fn fill<I: IntoIterator<Item = usize>>(
    rows: (&[u32], usize),
    cols: (&[u32], usize),
    records: I,
) -> ContingencyTable {
    let mut table = ContingencyTable::zeros(rows.1, cols.1);
    for r in records {
        table.add(rows.0[r] as usize, cols.0[r] as usize, 1);
    }
    table
}

/// Cross-tabulates two categorical variables over all records.
pub fn contingency(dataset: &Dataset, row_var: Var, col_var: Var) -> Result<ContingencyTable> {
    let (ri, rcodes, rarity) = categorical_codes(dataset, row_var)?;
    let (ci, ccodes, carity) = categorical_codes(dataset, col_var)?;
    if ri == ci {
        return Err(Error::SameVariable(dataset.column(ri).name.clone()));
    }
    Ok(fill((rcodes, rarity), (ccodes, carity), 0..dataset.n()))
}

/// Cross-tabulates a subset of records, keeping the full category arities.
pub fn contingency_over(
    dataset: &Dataset,
    row_var: Var,
    col_var: Var,
    records: &[usize],
) -> Result<ContingencyTable> {
    let (ri, rcodes, rarity) = categorical_codes(dataset, row_var)?;
    let (ci, ccodes, carity) = categorical_codes(dataset, col_var)?;
    if ri == ci {
        return Err(Error::SameVariable(dataset.column(ri).name.clone()));
    }
    Ok(fill(
        (rcodes, rarity),
        (ccodes, carity),
        records.iter().copied(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTable {
    pub key: StratumKey,
    pub table: ContingencyTable,
    /// Stratum count over total count.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedTables {
    pub strata: Vec<StratumTable>,
    /// Fraction of records in strata smaller than `min_count`.
    pub dropped_mass: f64,
    pub dropped_strata: usize,
    pub total: u64,
}

/// One contingency table per conditioning stratum with at least `min_count` records.
pub fn stratified_contingency(
    dataset: &Dataset,
    row_var: Var,
    col_var: Var,
    condition_columns: &[usize],
    min_count: usize,
) -> Result<StratifiedTables> {
    assert!(min_count >= 1, "min_count must be positive");
    let (ri, rcodes, rarity) = categorical_codes(dataset, row_var)?;
    let (ci, ccodes, carity) = categorical_codes(dataset, col_var)?;
    if ri == ci {
        return Err(Error::SameVariable(dataset.column(ri).name.clone()));
    }
    let n = dataset.n();
    let total = n as f64;
    let mut strata = Vec::new();
    let mut dropped = 0usize;
    let mut dropped_strata = 0usize;
    for stratum in stratify(dataset, condition_columns)? {
        if stratum.indices.len() < min_count {
            dropped += stratum.indices.len();
            dropped_strata += 1;
            continue;
        }
        let weight = stratum.indices.len() as f64 / total;
        strata.push(StratumTable {
            key: stratum.key,
            table: fill((rcodes, rarity), (ccodes, carity), stratum.indices),
            weight,
        });
    }
    if strata.is_empty() {
        return Err(Error::AllStrataDropped { min_count });
    }
    Ok(StratifiedTables {
        strata,
        dropped_mass: dropped as f64 / total,
        dropped_strata,
        total: n as u64,
    })
}
