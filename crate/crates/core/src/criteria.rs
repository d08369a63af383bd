//! The fairness criteria as (conditional) independence conditions.
//!
//! | id    | condition     | unit       | awareness |
//! |-------|---------------|------------|-----------|
//! | sp    | Ŷ ⊥ S         | group      | aware     |
//! | eo    | Ŷ ⊥ S \| Y    | group      | aware     |
//! | suff  | Y ⊥ S \| Ŷ    | group      | aware     |
//! | isp   | Ŷ ⊥ S \| X    | individual | unaware   |
//! | ieo   | Ŷ ⊥ S \| Y, X | individual | aware     |
//! | isuff | Y ⊥ S \| Ŷ, X | individual | aware     |
//!
//! Fairness through unawareness is the same formal condition as individual
//! statistical parity and gets its own entry point, [`evaluate_ftu`].
//! Situation testing conditions on a chosen subset of feature columns.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, Dataset, Role, StratumKey, Var};
use crate::distribution::{
    contingency, normalize, stratified_contingency, ContingencyTable, StratifiedTables,
    DEFAULT_MIN_COUNT,
};
use crate::error::{Error, Result};
use crate::measures::{
    balanced_error_ratio, ber_present_classes, chi_square, chi_square_or_degenerate,
    conditional_balanced_error_ratio, conditional_chi_square, conditional_mutual_information,
    mutual_information, rate_gap, MeasureAux, MeasureKind, MeasureValue,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionId {
    Sp,
    Eo,
    Suff,
    Isp,
    Ieo,
    Isuff,
    Ftu,
    SituationTesting,
}

impl CriterionId {
    pub const BUILTIN: [CriterionId; 6] = [
        CriterionId::Sp,
        CriterionId::Eo,
        CriterionId::Suff,
        CriterionId::Isp,
        CriterionId::Ieo,
        CriterionId::Isuff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::Sp => "sp",
            CriterionId::Eo => "eo",
            CriterionId::Suff => "suff",
            CriterionId::Isp => "isp",
            CriterionId::Ieo => "ieo",
            CriterionId::Isuff => "isuff",
            CriterionId::Ftu => "ftu",
            CriterionId::SituationTesting => "situation_testing",
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for CriterionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sp" => CriterionId::Sp,
            "eo" => CriterionId::Eo,
            "suff" => CriterionId::Suff,
            "isp" => CriterionId::Isp,
            "ieo" => CriterionId::Ieo,
            "isuff" => CriterionId::Isuff,
            "ftu" => CriterionId::Ftu,
            "situation_testing" | "st" => CriterionId::SituationTesting,
            other => return Err(Error::Config(format!("unknown criterion `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Prediction,
    Target,
    Sensitive,
    /// Every non-ignored feature column.
    Features,
    /// A named subset of the feature columns.
    Columns(Vec<String>),
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Prediction => f.write_str("Ŷ"),
            Variable::Target => f.write_str("Y"),
            Variable::Sensitive => f.write_str("S"),
            Variable::Features => f.write_str("X"),
            Variable::Columns(cols) => write!(f, "X[{}]", cols.join(",")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Group,
    Individual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Awareness {
    Aware,
    Unaware,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Unit::Group => "group",
            Unit::Individual => "individual",
        })
    }
}

impl fmt::Display for Awareness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Awareness::Aware => "aware",
            Awareness::Unaware => "unaware",
        })
    }
}

/// One criterion: `left ⊥ right | given`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub id: CriterionId,
    pub name: String,
    pub left: Variable,
    pub right: Variable,
    pub given: Vec<Variable>,
    pub unit: Unit,
    pub awareness: Awareness,
}

impl CriterionSpec {
    pub fn builtin(id: CriterionId) -> CriterionSpec {
        use Variable::{Features as X, Prediction as YHat, Sensitive as S, Target as Y};
        let (name, left, given, awareness) = match id {
            CriterionId::Sp => ("statistical parity", YHat, vec![], Awareness::Aware),
            CriterionId::Eo => ("equalized odds", YHat, vec![Y], Awareness::Aware),
            CriterionId::Suff => ("sufficiency", Y, vec![YHat], Awareness::Aware),
            CriterionId::Isp => (
                "individual statistical parity",
                YHat,
                vec![X],
                Awareness::Unaware,
            ),
            CriterionId::Ieo => (
                "individual equalized odds",
                YHat,
                vec![Y, X],
                Awareness::Aware,
            ),
            CriterionId::Isuff => ("individual sufficiency", Y, vec![YHat, X], Awareness::Aware),
            CriterionId::Ftu => (
                "fairness through unawareness",
                YHat,
                vec![X],
                Awareness::Unaware,
            ),
            CriterionId::SituationTesting => (
                "situation testing",
                YHat,
                vec![Variable::Columns(vec![])],
                Awareness::Unaware,
            ),
        };
        let unit = if given
            .iter()
            .any(|v| matches!(v, Variable::Features | Variable::Columns(_)))
        {
            Unit::Individual
        } else {
            Unit::Group
        };
        CriterionSpec {
            id,
            name: name.to_string(),
            left,
            right: S,
            given,
            unit,
            awareness,
        }
    }

    pub fn situation_testing(columns: Vec<String>) -> CriterionSpec {
        let mut spec = CriterionSpec::builtin(CriterionId::SituationTesting);
        spec.given = vec![Variable::Columns(columns)];
        spec
    }

    /// True when the feature vector (or a subset of it) is conditioned on.
    pub fn conditions_on_features(&self) -> bool {
        self.unit == Unit::Individual
    }

    /// Rendered condition, e.g. `Ŷ ⊥ S | Y, X`.
    pub fn condition(&self) -> String {
        let mut s = format!("{} ⊥ {}", self.left, self.right);
        if !self.given.is_empty() {
            let given: Vec<String> = self.given.iter().map(ToString::to_string).collect();
            s.push_str(" | ");
            s.push_str(&given.join(", "));
        }
        s
    }
}

/// The six criteria: three group-level and their individualized counterparts.
pub fn list_criteria() -> Vec<CriterionSpec> {
    CriterionId::BUILTIN
        .iter()
        .map(|&id| CriterionSpec::builtin(id))
        .collect()
}

/// Plain-text registry table, as printed by the `criteria` subcommand.
pub fn registry_table() -> String {
    let mut out = format!(
        "{:<6} {:<30} {:<14} {:<11} {}\n",
        "id", "criterion", "condition", "unit", "awareness"
    );
    for c in list_criteria() {
        out.push_str(&format!(
            "{:<6} {:<30} {:<14} {:<11} {}\n",
            c.id,
            c.name,
            c.condition(),
            c.unit,
            c.awareness
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    pub key: StratumKey,
    /// Category labels of the key, one per conditioning column.
    pub labels: Vec<String>,
    pub weight: f64,
    pub count: u64,
    pub measure: MeasureValue,
    pub passed: bool,
    /// Largest between-group difference in the positive rate of the left variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: CriterionSpec,
    pub condition: String,
    pub measure: MeasureValue,
    pub passed: bool,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_stratum: Option<Vec<StratumResult>>,
    pub dropped_mass: f64,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub measure: MeasureKind,
    pub threshold: f64,
    pub min_count: usize,
    /// Laplace smoothing added to every cell before MI and BER.
    pub alpha: f64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions::for_measure(MeasureKind::MutualInformation)
    }
}

impl EvaluateOptions {
    pub fn for_measure(measure: MeasureKind) -> Self {
        EvaluateOptions {
            measure,
            threshold: measure.default_threshold(),
            min_count: DEFAULT_MIN_COUNT,
            alpha: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidThreshold(self.threshold));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha {} must be non-negative",
                self.alpha
            )));
        }
        Ok(())
    }
}

pub(crate) fn variable_var(v: &Variable) -> Var {
    match v {
        Variable::Prediction => Var::Prediction,
        Variable::Target => Var::Target,
        Variable::Sensitive => Var::Sensitive,
        Variable::Features | Variable::Columns(_) => {
            panic!("feature sets are conditioning variables only")
        }
    }
}

/// Feature columns named by a situation-testing selection, validated as features.
pub(crate) fn selected_feature_columns(dataset: &Dataset, names: &[String]) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Err(Error::EmptySelection(
            "no legally-grounded columns selected".into(),
        ));
    }
    names
        .iter()
        .map(|name| {
            let i = dataset.column_index(name)?;
            if dataset.column(i).role != Role::Feature {
                return Err(Error::Config(format!(
                    "column `{name}` is not a feature column"
                )));
            }
            Ok(i)
        })
        .collect()
}

/// Column positions conditioned on, in the order given. Feature sets expand in schema order.
pub fn condition_columns(dataset: &Dataset, spec: &CriterionSpec) -> Result<Vec<usize>> {
    let mut cols = Vec::new();
    for v in &spec.given {
        match v {
            Variable::Features => cols.extend_from_slice(dataset.feature_indices()),
            Variable::Columns(names) => cols.extend(selected_feature_columns(dataset, names)?),
            other => cols.push(dataset.resolve(variable_var(other))),
        }
    }
    for &c in &cols {
        if let ColumnData::Numeric(_) = dataset.column(c).data {
            return Err(Error::ContinuousConditioning(
                dataset.column(c).name.clone(),
            ));
        }
    }
    Ok(cols)
}

fn stratum_measure(table: &ContingencyTable, kind: MeasureKind, alpha: f64) -> MeasureValue {
    let joint = normalize(table, alpha).expect("retained strata are non-empty");
    match kind {
        MeasureKind::MutualInformation => mutual_information(&joint),
        MeasureKind::ChiSquare => chi_square_or_degenerate(table),
        MeasureKind::BalancedErrorRatio => ber_present_classes(&joint).unwrap_or_else(|| {
            let k = table.cols() as f64;
            MeasureValue {
                kind,
                value: (k - 1.0) / k,
                aux: MeasureAux {
                    normalized: Some(1.0),
                    max_ber: Some((k - 1.0) / k),
                    degenerate: Some(true),
                    ..Default::default()
                },
            }
        }),
    }
}

fn unconditioned_measure(table: &ContingencyTable, opts: &EvaluateOptions) -> Result<MeasureValue> {
    match opts.measure {
        MeasureKind::MutualInformation => Ok(mutual_information(&normalize(table, opts.alpha)?)),
        MeasureKind::ChiSquare => chi_square(table),
        MeasureKind::BalancedErrorRatio => balanced_error_ratio(&normalize(table, opts.alpha)?),
    }
}

fn conditioned_measure(strata: &StratifiedTables, opts: &EvaluateOptions) -> MeasureValue {
    match opts.measure {
        MeasureKind::MutualInformation => conditional_mutual_information(strata, opts.alpha),
        MeasureKind::ChiSquare => conditional_chi_square(strata),
        MeasureKind::BalancedErrorRatio => conditional_balanced_error_ratio(strata, opts.alpha),
    }
}

/// Evaluates one criterion by exact stratification on its conditioning variables.
pub fn evaluate(
    dataset: &Dataset,
    spec: &CriterionSpec,
    opts: &EvaluateOptions,
) -> Result<CriterionResult> {
    opts.validate()?;
    let left = variable_var(&spec.left);
    let right = variable_var(&spec.right);
    let cond = condition_columns(dataset, spec)?;
    let positive = dataset.positive_index(dataset.resolve(left));

    if spec.given.is_empty() {
        let table = contingency(dataset, left, right)?;
        let measure = unconditioned_measure(&table, opts)?;
        return Ok(CriterionResult {
            criterion: spec.clone(),
            condition: spec.condition(),
            passed: opts.measure.passes(&measure, opts.threshold),
            measure,
            threshold: opts.threshold,
            per_stratum: None,
            dropped_mass: 0.0,
            mode: Mode::Exact,
            rate_gap: Some(rate_gap(&table, positive)),
        });
    }

    let strata = stratified_contingency(dataset, left, right, &cond, opts.min_count)?;
    let measure = conditioned_measure(&strata, opts);
    let per_stratum = strata
        .strata
        .iter()
        .map(|s| {
            let m = stratum_measure(&s.table, opts.measure, opts.alpha);
            StratumResult {
                labels: cond
                    .iter()
                    .zip(&s.key.0)
                    .map(|(&c, &code)| {
                        dataset.categorical(c).expect("categorical").categories()[code as usize]
                            .clone()
                    })
                    .collect(),
                key: s.key.clone(),
                weight: s.weight,
                count: s.table.total(),
                passed: opts.measure.passes(&m, opts.threshold),
                measure: m,
                rate_gap: Some(rate_gap(&s.table, positive)),
            }
        })
        .collect();
    Ok(CriterionResult {
        criterion: spec.clone(),
        condition: spec.condition(),
        passed: opts.measure.passes(&measure, opts.threshold),
        measure,
        threshold: opts.threshold,
        per_stratum: Some(per_stratum),
        dropped_mass: strata.dropped_mass,
        mode: Mode::Exact,
        rate_gap: None,
    })
}

/// Fairness through unawareness: `Ŷ ⊥ S | X`, the same condition as individual statistical parity.
pub fn evaluate_ftu(dataset: &Dataset, opts: &EvaluateOptions) -> Result<CriterionResult> {
    evaluate(dataset, &CriterionSpec::builtin(CriterionId::Ftu), opts)
}

/// `Ŷ ⊥ S | legally-grounded columns`.
pub fn situation_testing_evaluate(
    dataset: &Dataset,
    legally_grounded_columns: &[String],
    opts: &EvaluateOptions,
) -> Result<CriterionResult> {
    selected_feature_columns(dataset, legally_grounded_columns)?;
    evaluate(
        dataset,
        &CriterionSpec::situation_testing(legally_grounded_columns.to_vec()),
        opts,
    )
}
