//! Brute-force oracles and fixtures shared by the integration tests.
//!
//! The oracles deliberately avoid the crate's own code paths: they work on
//! plain nested vectors of counts and use the textbook formulas directly.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fairaudit::data::{write_csv, Column, Dataset, Provenance, Role, SchemaConfig};
use fairaudit::rng::CounterRng;

/// I(row; col) in nats by direct summation over the cells.
pub fn mi_oracle(counts: &[Vec<f64>]) -> f64 {
    let total: f64 = counts.iter().flatten().sum();
    let rows: Vec<f64> = counts
        .iter()
        .map(|r| r.iter().sum::<f64>() / total)
        .collect();
    let cols: Vec<f64> = (0..counts[0].len())
        .map(|j| counts.iter().map(|r| r[j]).sum::<f64>() / total)
        .collect();
    let mut mi = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                let p = c / total;
                mi += p * (p.ln() - rows[i].ln() - cols[j].ln());
            }
        }
    }
    mi
}

/// n (ad − bc)² / ((a+b)(c+d)(a+c)(b+d)).
pub fn chi2_closed_form(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let n = a + b + c + d;
    n * (a * d - b * c).powi(2) / ((a + b) * (c + d) * (a + c) * (b + d))
}

/// Pearson statistic from expected counts, tables without empty rows or columns.
pub fn chi2_pearson(counts: &[Vec<f64>]) -> f64 {
    let total: f64 = counts.iter().flatten().sum();
    let mut stat = 0.0;
    for row in counts {
        let ri: f64 = row.iter().sum();
        for (j, &o) in row.iter().enumerate() {
            let cj: f64 = counts.iter().map(|r| r[j]).sum();
            let e = ri * cj / total;
            stat += (o - e) * (o - e) / e;
        }
    }
    stat
}

/// Minimum balanced error over every deterministic map from rows to columns.
pub fn ber_enumeration(counts: &[Vec<f64>]) -> f64 {
    let r = counts.len();
    let c = counts[0].len();
    let class_totals: Vec<f64> = (0..c)
        .map(|j| counts.iter().map(|row| row[j]).sum())
        .collect();
    let mut best = f64::INFINITY;
    let maps = c.pow(r as u32);
    for code in 0..maps {
        let mut assign = Vec::with_capacity(r);
        let mut x = code;
        for _ in 0..r {
            assign.push(x % c);
            x /= c;
        }
        let mut err = 0.0;
        for j in 0..c {
            let wrong: f64 = (0..r)
                .filter(|&i| assign[i] != j)
                .map(|i| counts[i][j])
                .sum();
            err += wrong / class_totals[j];
        }
        best = best.min(err / c as f64);
    }
    best
}

/// Relative agreement with an absolute floor for values that are zero up to rounding.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    let diff = (a - b).abs();
    diff <= rel * a.abs().max(b.abs()) || diff <= 1e-14
}

/// Random count table with no empty row or column.
pub fn random_table(rng: &mut CounterRng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    loop {
        let t: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.below(40) as f64).collect())
            .collect();
        let rows_ok = t.iter().all(|r| r.iter().sum::<f64>() > 0.0);
        let cols_ok = (0..cols).all(|j| t.iter().map(|r| r[j]).sum::<f64>() > 0.0);
        if rows_ok && cols_ok {
            return t;
        }
    }
}

/// Categorical dataset with S-dependent predictions and `features` feature columns.
pub fn random_categorical(seed: u64, n: usize, features: usize) -> Dataset {
    let mut rng = CounterRng::stream(seed, 1000);
    let s_arity = 2 + rng.below(2) as usize;
    let bias = rng.uniform();
    let arities: Vec<u64> = (0..features).map(|_| 2 + rng.below(3)).collect();
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut yhat = Vec::with_capacity(n);
    let mut xs: Vec<Vec<String>> = vec![Vec::with_capacity(n); features];
    for i in 0..n {
        let si = if i < s_arity {
            i
        } else {
            rng.below(s_arity as u64) as usize
        };
        let mut score = 0.0;
        for (k, &a) in arities.iter().enumerate() {
            let v = rng.below(a);
            score += v as f64 / a as f64;
            xs[k].push(v.to_string());
        }
        let p = (0.2 + 0.6 * score / features.max(1) as f64 + bias * 0.2 * si as f64).min(1.0);
        let yh = rng.bernoulli(p);
        let yi = rng.bernoulli(if yh { 0.7 } else { 0.3 });
        s.push(si.to_string());
        y.push((yi as u8).to_string());
        yhat.push((yh as u8).to_string());
    }
    let mut cols = vec![
        Column::categorical("s", Role::Sensitive, &s),
        Column::categorical("y", Role::Target, &y),
        Column::categorical("yhat", Role::Prediction, &yhat),
    ];
    for (k, x) in xs.iter().enumerate() {
        cols.push(Column::categorical(format!("x{k}"), Role::Feature, x));
    }
    Dataset::from_columns(cols, Provenance::default()).unwrap()
}

/// Writes `dataset` and a matching schema file into `dir`; returns (csv, schema) paths.
pub fn write_dataset(dir: &Path, name: &str, dataset: &Dataset) -> (PathBuf, PathBuf) {
    let csv = dir.join(format!("{name}.csv"));
    let schema = dir.join(format!("{name}.schema.json"));
    write_csv(dataset, std::fs::File::create(&csv).unwrap()).unwrap();
    let config = SchemaConfig {
        columns: dataset.columns().iter().map(|c| c.schema()).collect(),
        threshold: None,
        missing: Default::default(),
    };
    std::fs::write(&schema, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
    (csv, schema)
}
