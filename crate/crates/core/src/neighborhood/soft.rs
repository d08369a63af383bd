use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Backend, DistanceSpec, NeighborIndex, NeighborhoodSpec};
use crate::criteria::{selected_feature_columns, variable_var, CriterionSpec, Mode, Variable};
use crate::data::Dataset;
use crate::distribution::{normalize, ContingencyTable};
use crate::error::{Error, Result};
use crate::measures::{mutual_information, rate_gap};

/// Local dependence measure computed inside each neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftMeasure {
    #[default]
    MutualInformation,
    /// Largest difference in positive rate between sensitive groups.
    RateGap,
}

impl std::str::FromStr for SoftMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mi" | "mutual_information" => Ok(SoftMeasure::MutualInformation),
            "rate" | "rate_gap" => Ok(SoftMeasure::RateGap),
            other => Err(Error::Config(format!("unknown soft measure `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftOptions {
    pub measure: SoftMeasure,
    pub epsilon: f64,
    pub delta: f64,
    pub min_neighborhood: usize,
    pub alpha: f64,
}

impl Default for SoftOptions {
    fn default() -> Self {
        SoftOptions {
            measure: SoftMeasure::MutualInformation,
            epsilon: 0.05,
            delta: 0.05,
            min_neighborhood: 10,
            alpha: 0.0,
        }
    }
}

impl SoftOptions {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidSoftParams(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidSoftParams(format!(
                "delta {} must be in [0, 1)",
                self.delta
            )));
        }
        if self.min_neighborhood == 0 {
            return Err(Error::InvalidSoftParams(
                "min_neighborhood must be positive".into(),
            ));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidSoftParams(format!(
                "alpha {} must be non-negative",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    Satisfied,
    Violated,
    /// Too few neighbors after stratification to say anything.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub index: usize,
    pub neighborhood_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub status: InstanceStatus,
}

impl InstanceResult {
    pub fn violated(&self) -> bool {
        self.status == InstanceStatus::Violated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftResult {
    pub criterion: CriterionSpec,
    pub condition: String,
    pub mode: Mode,
    pub measure: SoftMeasure,
    pub neighborhood: NeighborhoodSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub min_neighborhood: usize,
    pub satisfied: usize,
    pub violated: usize,
    pub indeterminate: usize,
    /// Satisfied over determinate records.
    pub satisfied_fraction: f64,
    pub indeterminate_fraction: f64,
    pub passed: bool,
    pub per_instance: Vec<InstanceResult>,
}

impl SoftResult {
    pub fn violating_indices(&self) -> Vec<usize> {
        self.per_instance
            .iter()
            .filter(|r| r.violated())
            .map(|r| r.index)
            .collect()
    }
}

/// Feature weights for a criterion: situation testing zeroes unselected columns.
fn criterion_weights(
    dataset: &Dataset,
    spec: &CriterionSpec,
    dist: &DistanceSpec,
) -> Result<Vec<f64>> {
    let features = dataset.feature_indices();
    let mut weights = dist.resolve(features.len())?;
    for v in &spec.given {
        if let Variable::Columns(names) = v {
            let selected = selected_feature_columns(dataset, names)?;
            for (w, c) in weights.iter_mut().zip(features) {
                if !selected.contains(c) {
                    *w = 0.0;
                }
            }
        }
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidDistance(
            "selected columns all have zero weight".into(),
        ));
    }
    Ok(weights)
}

/// Builds the neighbor index a criterion conditions on.
pub(crate) fn criterion_index(
    dataset: &Dataset,
    spec: &CriterionSpec,
    dist: &DistanceSpec,
    backend: Backend,
) -> Result<NeighborIndex> {
    if dataset.feature_indices().is_empty() {
        return Err(Error::NoFeatures);
    }
    let weights = criterion_weights(dataset, spec, dist)?;
    NeighborIndex::from_weighted(dataset, dataset.feature_indices(), &weights, backend)
}

/// Evaluates an individual-level criterion with neighborhoods in place of exact strata.
pub fn soft_evaluate(
    dataset: &Dataset,
    spec: &CriterionSpec,
    nspec: &NeighborhoodSpec,
    dist: &DistanceSpec,
    opts: &SoftOptions,
) -> Result<SoftResult> {
    if !spec.conditions_on_features() {
        return Err(Error::GroupCriterion(spec.id.to_string()));
    }
    opts.validate()?;
    nspec.validate(dataset.n())?;
    let index = criterion_index(dataset, spec, dist, Backend::Auto)?;
    soft_evaluate_indexed(dataset, spec, &index, nspec, opts)
}

/// As [`soft_evaluate`], reusing an index built over the criterion's feature columns.
pub fn soft_evaluate_indexed(
    dataset: &Dataset,
    spec: &CriterionSpec,
    index: &NeighborIndex,
    nspec: &NeighborhoodSpec,
    opts: &SoftOptions,
) -> Result<SoftResult> {
    if !spec.conditions_on_features() {
        return Err(Error::GroupCriterion(spec.id.to_string()));
    }
    opts.validate()?;
    nspec.validate(dataset.n())?;

    let left_col = dataset.resolve(variable_var(&spec.left));
    let left = dataset
        .categorical(left_col)
        .expect("left variable is categorical");
    let sens = dataset.sensitive();
    let positive = dataset.positive_index(left_col);
    let strata_cols: Vec<&[u32]> = spec
        .given
        .iter()
        .filter(|v| !matches!(v, Variable::Features | Variable::Columns(_)))
        .map(|v| {
            dataset
                .categorical(dataset.resolve(variable_var(v)))
                .expect("categorical")
                .codes()
        })
        .collect();

    let per_instance: Vec<InstanceResult> = (0..dataset.n())
        .into_par_iter()
        .map(|i| {
            let mut table = ContingencyTable::zeros(left.arity(), sens.arity());
            for nb in index.neighbors(i, nspec) {
                let j = nb.index;
                if strata_cols.iter().all(|c| c[j] == c[i]) {
                    table.add(left.codes()[j] as usize, sens.codes()[j] as usize, 1);
                }
            }
            let size = table.total() as usize;
            if size < opts.min_neighborhood {
                return InstanceResult {
                    index: i,
                    neighborhood_size: size,
                    value: None,
                    status: InstanceStatus::Indeterminate,
                };
            }
            let value = match opts.measure {
                SoftMeasure::MutualInformation => {
                    mutual_information(&normalize(&table, opts.alpha).expect("non-empty")).value
                }
                SoftMeasure::RateGap => rate_gap(&table, positive),
            };
            InstanceResult {
                index: i,
                neighborhood_size: size,
                value: Some(value),
                status: if value > opts.epsilon {
                    InstanceStatus::Violated
                } else {
                    InstanceStatus::Satisfied
                },
            }
        })
        .collect();

    let count = |s: InstanceStatus| per_instance.iter().filter(|r| r.status == s).count();
    let satisfied = count(InstanceStatus::Satisfied);
    let violated = count(InstanceStatus::Violated);
    let indeterminate = count(InstanceStatus::Indeterminate);
    if satisfied + violated == 0 {
        return Err(Error::AllIndeterminate(dataset.n()));
    }
    let satisfied_fraction = satisfied as f64 / (satisfied + violated) as f64;
    Ok(SoftResult {
        criterion: spec.clone(),
        condition: spec.condition(),
        mode: Mode::Soft,
        measure: opts.measure,
        neighborhood: *nspec,
        epsilon: opts.epsilon,
        delta: opts.delta,
        min_neighborhood: opts.min_neighborhood,
        satisfied,
        violated,
        indeterminate,
        satisfied_fraction,
        indeterminate_fraction: indeterminate as f64 / dataset.n() as f64,
        passed: satisfied_fraction >= 1.0 - opts.delta,
        per_instance,
    })
}
