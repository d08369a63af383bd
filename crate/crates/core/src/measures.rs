//! Fairness measures: how far an empirical (conditional) independence is from holding.
//!
//! Every measure takes the "outcome" variable on rows and the sensitive
//! variable on columns. Mutual information is in nats throughout.

use serde::{Deserialize, Serialize};

use crate::distribution::{normalize, ContingencyTable, JointTable, StratifiedTables};
use crate::error::{Error, Result};
use crate::special::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    MutualInformation,
    ChiSquare,
    BalancedErrorRatio,
}

impl MeasureKind {
    /// MI: 0.01 nats; χ²: p-value 0.05; BER: 0.05 below the maximal normalized value.
    pub fn default_threshold(self) -> f64 {
        match self {
            MeasureKind::MutualInformation => 0.01,
            MeasureKind::ChiSquare => 0.05,
            MeasureKind::BalancedErrorRatio => 0.05,
        }
    }

    /// Decision rule: MI `value <= t`; χ² `p_value >= t`; BER `value / max_ber >= 1 - t`.
    pub fn passes(self, measure: &MeasureValue, threshold: f64) -> bool {
        match self {
            MeasureKind::MutualInformation => measure.value <= threshold,
            MeasureKind::ChiSquare => measure.aux.p_value.unwrap_or(1.0) >= threshold,
            MeasureKind::BalancedErrorRatio => {
                measure.aux.normalized.unwrap_or(1.0) >= 1.0 - threshold
            }
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MeasureKind::MutualInformation => "MI",
            MeasureKind::ChiSquare => "chi2",
            MeasureKind::BalancedErrorRatio => "BER",
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mi" | "cmi" | "mutual_information" => Ok(MeasureKind::MutualInformation),
            "chi2" | "chi_square" => Ok(MeasureKind::ChiSquare),
            "ber" | "balanced_error_ratio" => Ok(MeasureKind::BalancedErrorRatio),
            other => Err(Error::Config(format!("unknown measure `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureAux {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    /// MI over the smaller marginal entropy, or BER over its maximum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ber: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_stratum: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped_mass: Option<f64>,
    /// Set when the table carried no information about independence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub kind: MeasureKind,
    pub value: f64,
    #[serde(default)]
    pub aux: MeasureAux,
}

fn entropy(marginal: &[f64]) -> f64 {
    -marginal
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// I(row; col) = Σ p(i,j) ln(p(i,j) / (p(i) p(j))), with 0 ln 0 = 0.
pub fn mutual_information(joint: &JointTable) -> MeasureValue {
    let rm = joint.row_marginals();
    let cm = joint.col_marginals();
    let live_rows = rm.iter().filter(|&&p| p > 0.0).count();
    let live_cols = cm.iter().filter(|&&p| p > 0.0).count();
    let mut mi = 0.0;
    // a single live row or column means exact independence
    if live_rows >= 2 && live_cols >= 2 {
        // marginals carry rounding from their sums; a cell that matches the
        // product of its marginals to within that rounding is independent
        let tol = 2.0 * (joint.rows() + joint.cols() + 2) as f64 * f64::EPSILON;
        for (i, &pr) in rm.iter().enumerate() {
            for (j, &pc) in cm.iter().enumerate() {
                let p = joint.get(i, j);
                let q = pr * pc;
                if p > 0.0 && (p - q).abs() > tol * q {
                    mi += p * (p / q).ln();
                }
            }
        }
    }
    let mi = mi.max(0.0);
    let h = entropy(&rm).min(entropy(&cm));
    let normalized = if h > 0.0 { (mi / h).min(1.0) } else { 0.0 };
    MeasureValue {
        kind: MeasureKind::MutualInformation,
        value: mi,
        aux: MeasureAux {
            normalized: Some(normalized),
            ..Default::default()
        },
    }
}

/// I(A; B | C) = Σ_c w(c) I(A; B | C = c) over the retained strata, in stratum order.
pub fn conditional_mutual_information(strata: &StratifiedTables, alpha: f64) -> MeasureValue {
    let per_stratum: Vec<f64> = strata
        .strata
        .iter()
        .map(|s| {
            let joint = normalize(&s.table, alpha).expect("retained strata are non-empty");
            mutual_information(&joint).value
        })
        .collect();
    let value = strata
        .strata
        .iter()
        .zip(&per_stratum)
        .fold(0.0, |acc, (s, mi)| acc + s.weight * mi);
    MeasureValue {
        kind: MeasureKind::MutualInformation,
        value,
        aux: MeasureAux {
            per_stratum: Some(per_stratum),
            dropped_mass: Some(strata.dropped_mass),
            ..Default::default()
        },
    }
}

struct ChiSquareParts {
    statistic: f64,
    dof: u32,
}

fn chi_square_parts(table: &ContingencyTable) -> Option<ChiSquareParts> {
    let rs = table.row_sums();
    let cs = table.col_sums();
    let rows: Vec<usize> = (0..table.rows()).filter(|&i| rs[i] > 0).collect();
    let cols: Vec<usize> = (0..table.cols()).filter(|&j| cs[j] > 0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return None;
    }
    let n = table.total() as f64;
    let mut statistic = 0.0;
    for &i in &rows {
        for &j in &cols {
            let expected = rs[i] as f64 * cs[j] as f64 / n;
            let diff = table.get(i, j) as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    Some(ChiSquareParts {
        statistic,
        dof: ((rows.len() - 1) * (cols.len() - 1)) as u32,
    })
}

/// Pearson χ² test of independence after deleting all-zero rows and columns.
pub fn chi_square(table: &ContingencyTable) -> Result<MeasureValue> {
    let parts = chi_square_parts(table).ok_or(Error::DegenerateTable)?;
    Ok(MeasureValue {
        kind: MeasureKind::ChiSquare,
        value: parts.statistic,
        aux: MeasureAux {
            dof: Some(parts.dof),
            p_value: Some(chi_square_sf(parts.statistic, parts.dof)),
            ..Default::default()
        },
    })
}

/// χ² of one stratum; a degenerate table yields statistic 0 flagged `degenerate`.
pub fn chi_square_or_degenerate(table: &ContingencyTable) -> MeasureValue {
    chi_square(table).unwrap_or(MeasureValue {
        kind: MeasureKind::ChiSquare,
        value: 0.0,
        aux: MeasureAux {
            p_value: Some(1.0),
            degenerate: Some(true),
            ..Default::default()
        },
    })
}

/// Conditional χ²: statistics and degrees of freedom summed over the
/// non-degenerate strata. Degenerate strata contribute nothing.
pub fn conditional_chi_square(strata: &StratifiedTables) -> MeasureValue {
    let mut statistic = 0.0;
    let mut dof = 0u32;
    let mut per_stratum = Vec::with_capacity(strata.strata.len());
    for s in &strata.strata {
        match chi_square_parts(&s.table) {
            Some(p) => {
                statistic += p.statistic;
                dof += p.dof;
                per_stratum.push(p.statistic);
            }
            None => per_stratum.push(0.0),
        }
    }
    let degenerate = dof == 0;
    let dof = dof.max(1);
    MeasureValue {
        kind: MeasureKind::ChiSquare,
        value: statistic,
        aux: MeasureAux {
            dof: Some(dof),
            p_value: Some(chi_square_sf(statistic, dof)),
            per_stratum: Some(per_stratum),
            dropped_mass: Some(strata.dropped_mass),
            degenerate: degenerate.then_some(true),
            ..Default::default()
        },
    }
}

/// Balanced error of the best deterministic predictor of the column class
/// from the row value, over the given columns. Returns (ber, max_ber).
fn ber_over(joint: &JointTable, cols: &[usize], col_marginals: &[f64]) -> (f64, f64) {
    let k = cols.len() as f64;
    // likelihoods equal up to marginal rounding count as ties
    let tol = 2.0 * (joint.rows() + 2) as f64 * f64::EPSILON;
    let mut mass = vec![0.0; cols.len()];
    for i in 0..joint.rows() {
        // argmax of p(row | class); the first maximum wins ties
        let mut best = 0;
        let mut best_lik = joint.get(i, cols[0]) / col_marginals[cols[0]];
        for (slot, &j) in cols.iter().enumerate().skip(1) {
            let lik = joint.get(i, j) / col_marginals[j];
            if lik > best_lik * (1.0 + tol) {
                best = slot;
                best_lik = lik;
            }
        }
        mass[best] += joint.get(i, cols[best]);
    }
    // summed in row order like the marginals, so a class that takes every row hits exactly 1
    let ber = cols
        .iter()
        .zip(&mass)
        .map(|(&j, m)| 1.0 - m / col_marginals[j])
        .sum::<f64>()
        / k;
    (ber.max(0.0), (k - 1.0) / k)
}

/// Balanced error ratio of predicting the sensitive (column) variable from the row variable.
///
/// Independence gives the maximum `(|S| - 1) / |S|`, reported as `aux.max_ber`.
pub fn balanced_error_ratio(joint: &JointTable) -> Result<MeasureValue> {
    let cm = joint.col_marginals();
    if let Some(j) = cm.iter().position(|&p| p <= 0.0) {
        return Err(Error::MissingClass(j));
    }
    let cols: Vec<usize> = (0..joint.cols()).collect();
    let (ber, max_ber) = ber_over(joint, &cols, &cm);
    Ok(ber_value(ber, max_ber))
}

fn ber_value(ber: f64, max_ber: f64) -> MeasureValue {
    MeasureValue {
        kind: MeasureKind::BalancedErrorRatio,
        value: ber,
        aux: MeasureAux {
            normalized: Some(if max_ber > 0.0 {
                (ber / max_ber).min(1.0)
            } else {
                1.0
            }),
            max_ber: Some(max_ber),
            ..Default::default()
        },
    }
}

/// BER over the sensitive classes present in the table; `None` when fewer than two are.
pub fn ber_present_classes(joint: &JointTable) -> Option<MeasureValue> {
    let cm = joint.col_marginals();
    let cols: Vec<usize> = (0..joint.cols()).filter(|&j| cm[j] > 0.0).collect();
    if cols.len() < 2 {
        return None;
    }
    let (ber, max_ber) = ber_over(joint, &cols, &cm);
    Some(ber_value(ber, max_ber))
}

/// Weighted mean of per-stratum BER over strata where at least two sensitive
/// classes occur; strata with a single class are skipped.
pub fn conditional_balanced_error_ratio(strata: &StratifiedTables, alpha: f64) -> MeasureValue {
    let mut weight = 0.0;
    let mut ber = 0.0;
    let mut max_ber = 0.0;
    for s in &strata.strata {
        let joint = normalize(&s.table, alpha).expect("retained strata are non-empty");
        if let Some(m) = ber_present_classes(&joint) {
            weight += s.weight;
            ber += s.weight * m.value;
            max_ber += s.weight * m.aux.max_ber.expect("set by ber_value");
        }
    }
    let cols = strata.strata[0].table.cols() as f64;
    let mut value = if weight > 0.0 {
        ber_value(ber / weight, max_ber / weight)
    } else {
        let mut v = ber_value((cols - 1.0) / cols, (cols - 1.0) / cols);
        v.aux.degenerate = Some(true);
        v
    };
    value.aux.dropped_mass = Some(strata.dropped_mass);
    value
}

/// Largest difference in the rate of `positive_row` between any two sensitive
/// classes present in the table. With no positive row, the largest such
/// difference over all rows. Zero when fewer than two classes are present.
pub fn rate_gap(table: &ContingencyTable, positive_row: Option<usize>) -> f64 {
    let cs = table.col_sums();
    let live: Vec<usize> = (0..table.cols()).filter(|&j| cs[j] > 0).collect();
    if live.len() < 2 {
        return 0.0;
    }
    let rows: Vec<usize> = match positive_row {
        Some(r) => vec![r],
        None => (0..table.rows()).collect(),
    };
    let mut gap: f64 = 0.0;
    for i in rows {
        let rates = live.iter().map(|&j| table.get(i, j) as f64 / cs[j] as f64);
        let (lo, hi) = rates.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        });
        gap = gap.max(hi - lo);
    }
    gap
}
