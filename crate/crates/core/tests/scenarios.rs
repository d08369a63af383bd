mod common;

use fairaudit::criteria::{evaluate, CriterionId, CriterionSpec, EvaluateOptions};
use fairaudit::data::{Dataset, Var};
use fairaudit::distribution::{contingency, normalize};
use fairaudit::measures::mutual_information;
use fairaudit::neighborhood::{
    soft_evaluate, DistanceSpec, NeighborhoodSpec, SoftMeasure, SoftOptions,
};
use fairaudit::synth::{generate, GroundTruth, Scenario, ScenarioParams, ScenarioSpec, Verdict};
use fairaudit::Error;

fn positive_rate(ds: &Dataset, records: impl Iterator<Item = usize>) -> f64 {
    let yhat = ds.prediction();
    let one = yhat.index_of("1").unwrap() as u32;
    let (mut pos, mut total) = (0usize, 0usize);
    for r in records {
        total += 1;
        pos += (yhat.codes()[r] == one) as usize;
    }
    pos as f64 / total as f64
}

fn group(ds: &Dataset, s: &str) -> Vec<usize> {
    let code = ds.sensitive().index_of(s).unwrap() as u32;
    (0..ds.n())
        .filter(|&i| ds.sensitive().codes()[i] == code)
        .collect()
}

#[test]
fn independent_scenario_has_negligible_prediction_dependence() {
    let (ds, _) = generate(&ScenarioSpec::new(Scenario::Independent, 100_000, 7)).unwrap();
    let table = contingency(&ds, Var::Prediction, Var::Sensitive).unwrap();
    let mi = mutual_information(&normalize(&table, 0.0).unwrap()).value;
    assert!(mi < 0.001, "MI = {mi}");
}

#[test]
fn group_fair_scenario_cancels_only_in_aggregate() {
    let spec = ScenarioSpec {
        params: ScenarioParams {
            gap: Some(0.4),
            ..Default::default()
        },
        ..ScenarioSpec::new(Scenario::GroupFairIndividualUnfair, 100_000, 11)
    };
    let (ds, _) = generate(&spec).unwrap();
    let (g0, g1) = (group(&ds, "0"), group(&ds, "1"));
    let aggregate = positive_rate(&ds, g0.iter().copied()) - positive_rate(&ds, g1.iter().copied());
    assert!(aggregate.abs() < 0.02, "aggregate gap {aggregate}");

    let x0 = ds.categorical(ds.column_index("x0").unwrap()).unwrap();
    let mut max_gap: f64 = 0.0;
    for v in 0..x0.arity() as u32 {
        let in_stratum = |g: &[usize]| -> Vec<usize> {
            g.iter().copied().filter(|&i| x0.codes()[i] == v).collect()
        };
        let gap = positive_rate(&ds, in_stratum(&g0).into_iter())
            - positive_rate(&ds, in_stratum(&g1).into_iter());
        max_gap = max_gap.max(gap.abs());
    }
    assert!(max_gap > 0.3, "max stratum gap {max_gap}");
}

#[test]
fn generation_is_deterministic_in_the_seed() {
    for scenario in Scenario::ALL {
        let spec = ScenarioSpec::new(scenario, 3_000, 42);
        let (a, ta) = generate(&spec).unwrap();
        let (b, tb) = generate(&spec).unwrap();
        assert_eq!(a, b, "{scenario}");
        assert_eq!(ta, tb, "{scenario}");
        let (c, _) = generate(&ScenarioSpec::new(scenario, 3_000, 43)).unwrap();
        assert_ne!(a.columns(), c.columns(), "{scenario}: seed ignored");
    }
}

#[test]
fn ground_truth_serializes_with_criterion_keys() {
    let (_, truth) = generate(&ScenarioSpec::new(Scenario::IllegalProxy, 100, 1)).unwrap();
    let json = serde_json::to_value(&truth).unwrap();
    assert_eq!(json["scenario"], "illegal_proxy");
    assert_eq!(json["verdicts"]["sp"], "violated");
    assert_eq!(json["verdicts"]["situation_testing"], "violated");
    let back: GroundTruth = serde_json::from_value(json).unwrap();
    assert_eq!(back, truth);
}

#[test]
fn planted_records_lie_in_the_cluster_and_only_there() {
    let (ds, truth) = generate(&ScenarioSpec::new(
        Scenario::PlantedUnfairCluster,
        20_000,
        5,
    ))
    .unwrap();
    assert_eq!(truth.verdicts[&CriterionId::Isp], Verdict::Violated);
    let fraction = truth.planted_indices.len() as f64 / ds.n() as f64;
    // volume 0.1 of the unit square, 3 binomial deviations
    assert!(
        (fraction - 0.1).abs() < 3.0 * (0.1f64 * 0.9 / 20_000.0).sqrt(),
        "{fraction}"
    );
    let xs: Vec<&[f64]> = ds
        .feature_indices()
        .iter()
        .map(|&c| ds.column(c).data.as_numeric().unwrap())
        .collect();
    let radius = (0.1f64 * 2.0).sqrt() / 2.0;
    let mut planted = truth.planted_indices.iter().peekable();
    for i in 0..ds.n() {
        let l1: f64 = xs.iter().map(|x| (x[i] - 0.5).abs()).sum();
        let is_planted = planted.peek() == Some(&&i);
        if is_planted {
            planted.next();
        }
        assert_eq!(is_planted, l1 <= radius, "record {i} at L1 {l1}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let with = |scenario, params| ScenarioSpec {
        params,
        ..ScenarioSpec::new(scenario, 1_000, 0)
    };
    let cases = [
        with(
            Scenario::DirectDiscrimination,
            ScenarioParams {
                gap: Some(1.5),
                ..Default::default()
            },
        ),
        with(
            Scenario::DirectDiscrimination,
            ScenarioParams {
                gap: Some(0.0),
                ..Default::default()
            },
        ),
        with(
            Scenario::Independent,
            ScenarioParams {
                gap: Some(0.2),
                ..Default::default()
            },
        ),
        with(
            Scenario::PlantedUnfairCluster,
            ScenarioParams {
                cluster_fraction: Some(0.6),
                dims: Some(2),
                ..Default::default()
            },
        ),
        with(
            Scenario::ProxyRedlining,
            ScenarioParams {
                dims: Some(3),
                ..Default::default()
            },
        ),
        ScenarioSpec::new(Scenario::Independent, 1, 0),
    ];
    for spec in cases {
        assert!(
            matches!(generate(&spec), Err(Error::InvalidParams(_))),
            "{spec:?}"
        );
    }
    assert!(matches!(
        "redlining".parse::<Scenario>(),
        Err(Error::UnknownScenario(_))
    ));
}

#[test]
fn soft_isp_passes_on_the_independent_scenario() {
    let (ds, _) = generate(&ScenarioSpec::new(Scenario::Independent, 5_000, 7)).unwrap();
    let spec = CriterionSpec::builtin(CriterionId::Isp);
    let nspec = NeighborhoodSpec::knn(50);
    for measure in [SoftMeasure::MutualInformation, SoftMeasure::RateGap] {
        let opts = SoftOptions {
            measure,
            epsilon: 0.05,
            delta: 0.1,
            ..SoftOptions::default()
        };
        let soft = soft_evaluate(&ds, &spec, &nspec, &DistanceSpec::default(), &opts).unwrap();
        assert!(
            soft.passed,
            "{measure:?}: satisfied fraction {}",
            soft.satisfied_fraction
        );
        assert_eq!(soft.indeterminate, 0);
    }

    // brute-force neighborhoods: fewest mismatching features, then lowest index
    let opts = SoftOptions {
        measure: SoftMeasure::RateGap,
        epsilon: 0.05,
        delta: 0.1,
        ..SoftOptions::default()
    };
    let soft = soft_evaluate(&ds, &spec, &nspec, &DistanceSpec::default(), &opts).unwrap();
    let feats: Vec<&[u32]> = ds
        .feature_indices()
        .iter()
        .map(|&c| ds.categorical(c).unwrap().codes())
        .collect();
    for q in (0..ds.n()).step_by(97) {
        let mut order: Vec<(usize, usize)> = (0..ds.n())
            .map(|j| (feats.iter().filter(|f| f[j] != f[q]).count(), j))
            .collect();
        order.sort();
        let members: Vec<usize> = order[..50].iter().map(|&(_, j)| j).collect();
        let members_in = |s: &str| -> Vec<usize> {
            let code = ds.sensitive().index_of(s).unwrap() as u32;
            members
                .iter()
                .copied()
                .filter(|&j| ds.sensitive().codes()[j] == code)
                .collect()
        };
        let (m0, m1) = (members_in("0"), members_in("1"));
        let expected = if m0.is_empty() || m1.is_empty() {
            0.0
        } else {
            (positive_rate(&ds, m0.into_iter()) - positive_rate(&ds, m1.into_iter())).abs()
        };
        let got = soft.per_instance[q].value.unwrap();
        assert!(
            (got - expected).abs() < 1e-12,
            "record {q}: {got} vs {expected}"
        );
    }
}

#[test]
fn default_effect_sizes_are_decidable_at_ten_thousand_records_with_tight_thresholds() {
    let opts = EvaluateOptions {
        threshold: 0.002,
        ..EvaluateOptions::default()
    };
    for scenario in Scenario::ALL {
        if scenario == Scenario::PlantedUnfairCluster {
            continue;
        }
        let (ds, truth) = generate(&ScenarioSpec::new(scenario, 10_000, 3)).unwrap();
        for (&id, &verdict) in &truth.verdicts {
            if verdict == Verdict::Unconstrained || id == CriterionId::SituationTesting {
                continue;
            }
            let result = evaluate(&ds, &CriterionSpec::builtin(id), &opts).unwrap();
            assert_eq!(
                result.passed,
                verdict == Verdict::Satisfied,
                "{scenario} {id}: value {}",
                result.measure.value
            );
        }
    }
}
