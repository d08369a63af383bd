//! Seeded scenario datasets whose fairness verdicts are known by construction.
//!
//! Every scenario has a sensitive column `s ~ Bernoulli(0.5)` (the first two
//! records are pinned to `0` and `1` so both groups always exist), a target `y`,
//! a prediction `yhat`, and features `x0, x1, ...`. Labels are `"0"`, `"1"`, ...
//! Records are drawn one after another from a single [`CounterRng`] stream keyed
//! by the seed and the scenario, so output is bit-identical across platforms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionId;
use crate::data::{Column, Dataset, Provenance, Role};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Independent,
    ProxyRedlining,
    DirectDiscrimination,
    GroupFairIndividualUnfair,
    PlantedUnfairCluster,
    SuffHoldsEoFails,
    IllegalProxy,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Independent,
        Scenario::ProxyRedlining,
        Scenario::DirectDiscrimination,
        Scenario::GroupFairIndividualUnfair,
        Scenario::PlantedUnfairCluster,
        Scenario::SuffHoldsEoFails,
        Scenario::IllegalProxy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Independent => "independent",
            Scenario::ProxyRedlining => "proxy_redlining",
            Scenario::DirectDiscrimination => "direct_discrimination",
            Scenario::GroupFairIndividualUnfair => "group_fair_individual_unfair",
            Scenario::PlantedUnfairCluster => "planted_unfair_cluster",
            Scenario::SuffHoldsEoFails => "suff_holds_eo_fails",
            Scenario::IllegalProxy => "illegal_proxy",
        }
    }

    fn stream_id(self) -> u64 {
        Scenario::ALL
            .iter()
            .position(|&s| s == self)
            .expect("listed") as u64
    }

    /// Default for the scenario's `gap` knob, if it has one.
    pub fn default_gap(self) -> Option<f64> {
        match self {
            Scenario::Independent | Scenario::PlantedUnfairCluster => None,
            Scenario::ProxyRedlining | Scenario::IllegalProxy => Some(0.6),
            Scenario::DirectDiscrimination => Some(0.5),
            Scenario::GroupFairIndividualUnfair => Some(0.4),
            Scenario::SuffHoldsEoFails => Some(0.3),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Optional knobs; unset fields take the scenario defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Effect size: proxy strength, discrimination rate or rate gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Share of feature space covered by the planted cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_fraction: Option<f64>,
    /// Number of numeric features in the planted-cluster scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: ScenarioParams,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            n,
            seed,
            params: ScenarioParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    /// The construction does not determine the outcome.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: Scenario,
    pub seed: u64,
    pub n: usize,
    pub params: ScenarioParams,
    pub verdicts: BTreeMap<CriterionId, Verdict>,
    pub planted_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legally_grounded_columns: Option<Vec<String>>,
}

fn verdicts(scenario: Scenario) -> BTreeMap<CriterionId, Verdict> {
    use CriterionId::*;
    use Verdict::{Satisfied as Y, Unconstrained as U, Violated as N};
    // sp, eo, suff, isp, ieo, isuff, ftu
    let row = match scenario {
        Scenario::Independent => [Y, Y, Y, Y, Y, Y, Y],
        Scenario::ProxyRedlining => [N, U, U, Y, Y, Y, Y],
        Scenario::DirectDiscrimination => [N, N, U, N, N, Y, N],
        Scenario::GroupFairIndividualUnfair => [Y, Y, Y, N, N, Y, N],
        Scenario::PlantedUnfairCluster => [U, U, U, N, N, Y, N],
        Scenario::SuffHoldsEoFails => [N, N, Y, N, N, Y, N],
        Scenario::IllegalProxy => [N, U, U, Y, Y, Y, Y],
    };
    let mut map: BTreeMap<CriterionId, Verdict> = [Sp, Eo, Suff, Isp, Ieo, Isuff, Ftu]
        .into_iter()
        .zip(row)
        .collect();
    if scenario == Scenario::IllegalProxy {
        map.insert(SituationTesting, N);
    }
    map
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

fn label(v: usize) -> String {
    v.to_string()
}

struct Builder {
    s: Vec<String>,
    y: Vec<String>,
    yhat: Vec<String>,
    cat: Vec<Vec<String>>,
    num: Vec<Vec<f64>>,
    score: Option<Vec<f64>>,
}

impl Builder {
    fn new(n: usize, cat: usize, num: usize) -> Self {
        Builder {
            s: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            yhat: Vec::with_capacity(n),
            cat: vec![Vec::with_capacity(n); cat],
            num: vec![Vec::with_capacity(n); num],
            score: None,
        }
    }

    fn finish(self, spec: &ScenarioSpec) -> Result<Dataset> {
        let mut cols = vec![
            Column::categorical("s", Role::Sensitive, &self.s),
            Column::categorical("y", Role::Target, &self.y),
            Column::categorical("yhat", Role::Prediction, &self.yhat),
        ];
        let mut k = 0;
        for values in self.cat {
            cols.push(Column::categorical(format!("x{k}"), Role::Feature, &values));
            k += 1;
        }
        for values in self.num {
            cols.push(Column::numeric(format!("x{k}"), Role::Feature, values));
            k += 1;
        }
        if let Some(score) = self.score {
            cols.push(Column::numeric("score", Role::Score, score));
        }
        Dataset::from_columns(
            cols,
            Provenance {
                source: format!("synth:{}:n={}:seed={}", spec.scenario, spec.n, spec.seed),
                rows_read: spec.n,
                dropped_rows: 0,
                threshold: None,
            },
        )
    }
}

/// Generates the scenario's dataset together with its ground truth.
pub fn generate(spec: &ScenarioSpec) -> Result<(Dataset, GroundTruth)> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "n = {n}; at least 2 records are needed"
        )));
    }
    let gap = match (spec.params.gap, spec.scenario.default_gap()) {
        (Some(g), Some(_)) if !(g > 0.0 && g <= 1.0) => {
            return Err(Error::InvalidParams(format!("gap {g} must be in (0, 1]")))
        }
        (Some(_), None) => {
            return Err(Error::InvalidParams(format!(
                "scenario `{}` takes no gap",
                spec.scenario
            )))
        }
        (g, d) => g.or(d).unwrap_or(0.0),
    };
    if spec.scenario != Scenario::PlantedUnfairCluster
        && (spec.params.cluster_fraction.is_some() || spec.params.dims.is_some())
    {
        return Err(Error::InvalidParams(format!(
            "scenario `{}` takes no cluster parameters",
            spec.scenario
        )));
    }

    let mut rng = CounterRng::stream(spec.seed, spec.scenario.stream_id());
    let mut planted = Vec::new();
    let draw_s = |rng: &mut CounterRng, i: usize| -> usize {
        match i {
            0 => 0,
            1 => 1,
            _ => rng.bernoulli(0.5) as usize,
        }
    };

    let b = match spec.scenario {
        Scenario::Independent => {
            let mut b = Builder::new(n, 2, 0);
            for i in 0..n {
                let s = draw_s(&mut rng, i);
                let x0 = rng.below(3) as usize;
                let x1 = rng.below(2) as usize;
                let p = 0.2 + 0.2 * x0 as f64 + 0.2 * x1 as f64;
                let y = rng.bernoulli(p) as usize;
                b.s.push(label(s));
                b.y.push(label(y));
                b.yhat.push(label((p >= 0.5) as usize));
                b.cat[0].push(label(x0));
                b.cat[1].push(label(x1));
            }
            b
        }
        Scenario::ProxyRedlining => {
            // with probability `gap` x0 encodes S as 0 or 2; the decision rule never sees S
            let mut b = Builder::new(n, 2, 0);
            for i in 0..n {
                let s = draw_s(&mut rng, i);
                let x0 = if rng.bernoulli(gap) {
                    2 * s
                } else {
                    rng.below(3) as usize
                };
                let x1 = rng.below(2) as usize;
                let yhat = x0 == 0 || (x0 == 1 && x1 == 1);
                let y = rng.bernoulli(0.2 + 0.2 * x0 as f64 + 0.2 * x1 as f64) as usize;
                b.s.push(label(s));
                b.y.push(label(y));
                b.yhat.push(label(yhat as usize));
                b.cat[0].push(label(x0));
                b.cat[1].push(label(x1));
            }
            b
        }
        Scenario::DirectDiscrimination => {
            // group 1 sees its decision flipped at rate `gap`
            let mut b = Builder::new(n, 2, 0);
            for i in 0..n {
                let s = draw_s(&mut rng, i);
                let x0 = rng.below(3) as usize;
                let x1 = rng.below(2) as usize;
                let f = x0 == 2 && x1 == 1;
                let flip = rng.bernoulli(gap);
                let yhat = if s == 1 { f ^ flip } else { f };
                let y = rng.bernoulli(0.2 + 0.2 * x0 as f64 + 0.2 * x1 as f64) as usize;
                b.s.push(label(s));
                b.y.push(label(y));
                b.yhat.push(label(yhat as usize));
                b.cat[0].push(label(x0));
                b.cat[1].push(label(x1));
            }
            b
        }
        Scenario::GroupFairIndividualUnfair => {
            // opposite rate gaps in the two x0 strata cancel in aggregate
            let mut b = Builder::new(n, 2, 0);
            for i in 0..n {
                let s = draw_s(&mut rng, i);
                let x0 = rng.below(2) as usize;
                let x1 = rng.below(3) as usize;
                let sign = if (x0 == 0) == (s == 1) { 1.0 } else { -1.0 };
                let yhat = rng.bernoulli(0.5 + sign * gap / 2.0) as usize;
                let y = rng.bernoulli(0.5) as usize;
                b.s.push(label(s));
                b.y.push(label(y));
                b.yhat.push(label(yhat));
                b.cat[0].push(label(x0));
                b.cat[1].push(label(x1));
            }
            b
        }
        Scenario::PlantedUnfairCluster => {
            let dims = spec.params.dims.unwrap_or(2);
            let fraction = spec.params.cluster_fraction.unwrap_or(0.1);
            if dims == 0 {
                return Err(Error::InvalidParams("dims must be positive".into()));
            }
            if !(fraction > 0.0 && fraction * factorial(dims) <= 1.0) {
                return Err(Error::InvalidParams(format!(
                    "cluster fraction {fraction} must be in (0, 1/{dims}!]"
                )));
            }
            // L1 ball of volume `fraction` centred in the unit cube
            let radius = (fraction * factorial(dims)).powf(1.0 / dims as f64) / 2.0;
            let mut b = Builder::new(n, 0, dims);
            for i in 0..n {
                let s = draw_s(&mut rng, i);
                let x: Vec<f64> = (0..dims).map(|_| rng.uniform()).collect();
                let inside = x.iter().map(|v| (v - 0.5).abs()).sum::<f64>() <= radius;
                let p = 0.3 + 0.4 * x[0];
                let y = rng.bernoulli(p) as usize;
                let noise = rng.bernoulli(0.1);
                let base = rng.bernoulli(p);
                let yhat = if inside {
                    planted.push(i);
                    (s == 1) ^ noise
                } else {
                    base
                };
                b.s.push(label(s));
                b.y.push(label(y));
                b.yhat.push(label(yhat as usize));
                for (col, v) in b.num.iter_mut().zip(x) {
                    col.push(v);
                }
            }
            b
        }
        Scenario::SuffHoldsEoFails => {
            // calibrated score per prediction, unequal prediction rates per group
            const CALIBRATION: [f64; 2] = [0.2, 0.75];
            let mut b = Builder::new(n, 1, 0);
            let mut score = Vec::with_capacity(n);
            for i in 0..n {
                let s = draw_s(&mut rng, i);
                let rate = if s == 0 {
                    0.5 + gap / 2.0
                } else {
                    0.5 - gap / 2.0
                };
                let yhat = rng.bernoulli(rate) as usize;
                let y = rng.bernoulli(CALIBRATION[yhat]) as usize;
                let x0 = rng.below(3) as usize;
                b.s.push(label(s));
                b.y.push(label(y));
                b.yhat.push(label(yhat));
                b.cat[0].push(label(x0));
                score.push(CALIBRATION[yhat]);
            }
            b.score = Some(score);
            b
        }
        Scenario::IllegalProxy => {
            // x0 is legitimate, x1 copies S with probability `gap`
            let mut b = Builder::new(n, 2, 0);
            for i in 0..n {
                let s = draw_s(&mut rng, i);
                let x0 = rng.below(3) as usize;
                let x1 = if rng.bernoulli(gap) {
                    s
                } else {
                    rng.below(2) as usize
                };
                let yhat = x1 == 0 || (x0 == 2 && x1 == 1);
                let y = rng.bernoulli(0.2 + 0.3 * x0 as f64) as usize;
                b.s.push(label(s));
                b.y.push(label(y));
                b.yhat.push(label(yhat as usize));
                b.cat[0].push(label(x0));
                b.cat[1].push(label(x1));
            }
            b
        }
    };

    let dataset = b.finish(spec)?;
    let truth = GroundTruth {
        scenario: spec.scenario,
        seed: spec.seed,
        n,
        params: spec.params,
        verdicts: verdicts(spec.scenario),
        planted_indices: planted,
        legally_grounded_columns: (spec.scenario == Scenario::IllegalProxy)
            .then(|| vec!["x0".to_string()]),
    };
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_spec_same_dataset() {
        for sc in Scenario::ALL {
            let spec = ScenarioSpec::new(sc, 500, 11);
            let (a, ta) = generate(&spec).unwrap();
            let (b, tb) = generate(&spec).unwrap();
            assert_eq!(a, b);
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn seeds_and_scenarios_differ() {
        let (a, _) = generate(&ScenarioSpec::new(Scenario::Independent, 200, 1)).unwrap();
        let (b, _) = generate(&ScenarioSpec::new(Scenario::Independent, 200, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn bad_parameters() {
        let mut spec = ScenarioSpec::new(Scenario::ProxyRedlining, 100, 0);
        spec.params.gap = Some(1.5);
        assert!(matches!(generate(&spec), Err(Error::InvalidParams(_))));
        let mut spec = ScenarioSpec::new(Scenario::PlantedUnfairCluster, 100, 0);
        spec.params.cluster_fraction = Some(0.6);
        assert!(matches!(generate(&spec), Err(Error::InvalidParams(_))));
        assert!(matches!(
            generate(&ScenarioSpec::new(Scenario::Independent, 1, 0)),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            "nope".parse::<Scenario>(),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn planted_cluster_has_the_requested_share() {
        let (d, truth) = generate(&ScenarioSpec::new(
            Scenario::PlantedUnfairCluster,
            20_000,
            5,
        ))
        .unwrap();
        let share = truth.planted_indices.len() as f64 / d.n() as f64;
        // three binomial standard deviations
        assert!((share - 0.1).abs() < 3.0 * (0.1f64 * 0.9 / 20_000.0).sqrt());
        assert_eq!(d.feature_indices().len(), 2);
    }

    #[test]
    fn sensitive_marginal_is_fair_coin() {
        for sc in Scenario::ALL {
            let (d, _) = generate(&ScenarioSpec::new(sc, 100_000, 7)).unwrap();
            let ones = d.sensitive().codes().iter().filter(|&&c| c == 1).count() as f64;
            assert!(
                (ones / 1e5 - 0.5).abs() < 3.0 * (0.25f64 / 1e5).sqrt(),
                "{sc}: {ones}"
            );
        }
    }

    #[test]
    fn truth_serializes_criterion_ids() {
        let (_, t) = generate(&ScenarioSpec::new(Scenario::IllegalProxy, 50, 0)).unwrap();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["verdicts"]["situation_testing"], "violated");
        assert_eq!(json["verdicts"]["isp"], "satisfied");
        assert_eq!(json["planted_indices"], serde_json::json!([]));
    }
}
