//! Audit of a representation map `M` against the Lipschitz condition
//! `d°(M(x₁), M(x₂)) ≤ d(x₁, x₂)`.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Largest `n` scanned exhaustively when no sampling is configured.
pub const EXHAUSTIVE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedPair {
    pub original: Vec<f64>,
    pub mapped: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    /// Mean of per-dimension absolute differences scaled by the dimension's range.
    Gower,
    /// Half the L1 distance between probability vectors.
    TotalVariation,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            "gower" => Ok(Metric::Gower),
            "total_variation" | "tv" => Ok(Metric::TotalVariation),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampling {
    Exhaustive,
    /// `count` pairs drawn uniformly with replacement.
    Sampled {
        count: u64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzOptions {
    pub d_original: Metric,
    pub d_mapped: Metric,
    /// `None` scans exhaustively up to [`EXHAUSTIVE_LIMIT`] records and refuses larger inputs.
    pub sampling: Option<Sampling>,
    pub tol: f64,
    /// Cap on listed violations; `violation_count` always has the full count.
    pub max_listed: Option<usize>,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        LipschitzOptions {
            d_original: Metric::Euclidean,
            d_mapped: Metric::Euclidean,
            sampling: None,
            tol: 1e-9,
            max_listed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub d_original: f64,
    pub d_mapped: f64,
    /// `None` when `d_original` is zero.
    pub ratio: Option<f64>,
    pub infinite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// Largest finite ratio among examined pairs.
    pub max_ratio: f64,
    /// Some pair at original distance zero was mapped apart.
    pub unbounded: bool,
    pub violations: Vec<Violation>,
    pub violation_count: usize,
    pub pairs_examined: u64,
    /// Examined pairs with both distances zero.
    pub pairs_skipped: u64,
    pub sampling: Sampling,
    pub tol: f64,
    pub passed: bool,
}

struct Dist {
    metric: Metric,
    /// Per-dimension range, for Gower.
    ranges: Vec<f64>,
}

impl Dist {
    fn new(metric: Metric, vectors: &[&[f64]]) -> Dist {
        let dims = vectors.first().map_or(0, |v| v.len());
        let ranges = if metric == Metric::Gower {
            (0..dims)
                .map(|k| {
                    let (lo, hi) = vectors
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                            (lo.min(v[k]), hi.max(v[k]))
                        });
                    hi - lo
                })
                .collect()
        } else {
            Vec::new()
        };
        Dist { metric, ranges }
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.metric {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::TotalVariation => {
                0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
            }
            Metric::Gower => {
                let total: f64 = a
                    .iter()
                    .zip(b)
                    .zip(&self.ranges)
                    .map(|((x, y), r)| if *r > 0.0 { (x - y).abs() / r } else { 0.0 })
                    .sum();
                total / a.len() as f64
            }
        }
    }
}

fn check_probability(v: &[f64], record: usize) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotAProbabilityVector(record));
    }
    Ok(())
}

#[derive(Default)]
struct Scan {
    max_ratio: f64,
    unbounded: bool,
    violations: Vec<Violation>,
    examined: u64,
    skipped: u64,
}

impl Scan {
    fn merge(mut self, other: Scan) -> Scan {
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        self.unbounded |= other.unbounded;
        self.violations.extend(other.violations);
        self.examined += other.examined;
        self.skipped += other.skipped;
        self
    }
}

/// Checks every examined pair `i < j` for `d° ≤ (1 + tol) · d`.
pub fn audit_map(pairs: &[MappedPair], opts: &LipschitzOptions) -> Result<LipschitzReport> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "{n} records; at least 2 are needed"
        )));
    }
    let p = pairs[0].original.len();
    let q = pairs[0].mapped.len();
    if p == 0 || q == 0 {
        return Err(Error::DegenerateInput("vectors must be non-empty".into()));
    }
    for (r, pair) in pairs.iter().enumerate() {
        if pair.original.len() != p || pair.mapped.len() != q {
            return Err(Error::DegenerateInput(format!(
                "record {r} has dimensions {}/{}, expected {p}/{q}",
                pair.original.len(),
                pair.mapped.len()
            )));
        }
        if pair
            .original
            .iter()
            .chain(&pair.mapped)
            .any(|v| !v.is_finite())
        {
            return Err(Error::DegenerateInput(format!(
                "record {r} has a non-finite value"
            )));
        }
        if opts.d_original == Metric::TotalVariation {
            check_probability(&pair.original, r)?;
        }
        if opts.d_mapped == Metric::TotalVariation {
            check_probability(&pair.mapped, r)?;
        }
    }
    if !(opts.tol >= 0.0 && opts.tol.is_finite()) {
        return Err(Error::Config(format!(
            "tolerance {} must be non-negative",
            opts.tol
        )));
    }
    let sampling = match opts.sampling {
        Some(s) => s,
        None if n <= EXHAUSTIVE_LIMIT => Sampling::Exhaustive,
        None => {
            return Err(Error::Config(format!(
                "{n} records exceed the exhaustive limit of {EXHAUSTIVE_LIMIT}; \
                 configure pair sampling with a seed"
            )))
        }
    };

    let originals: Vec<&[f64]> = pairs.iter().map(|p| p.original.as_slice()).collect();
    let mapped: Vec<&[f64]> = pairs.iter().map(|p| p.mapped.as_slice()).collect();
    let d = Dist::new(opts.d_original, &originals);
    let dm = Dist::new(opts.d_mapped, &mapped);
    let limit = 1.0 + opts.tol;

    let visit = |scan: &mut Scan, i: usize, j: usize| {
        scan.examined += 1;
        let a = d.eval(originals[i], originals[j]);
        let b = dm.eval(mapped[i], mapped[j]);
        if a == 0.0 {
            if b == 0.0 {
                scan.skipped += 1;
            } else {
                scan.unbounded = true;
                scan.violations.push(Violation {
                    i,
                    j,
                    d_original: a,
                    d_mapped: b,
                    ratio: None,
                    infinite: true,
                });
            }
            return;
        }
        let ratio = b / a;
        scan.max_ratio = scan.max_ratio.max(ratio);
        if ratio > limit {
            scan.violations.push(Violation {
                i,
                j,
                d_original: a,
                d_mapped: b,
                ratio: Some(ratio),
                infinite: false,
            });
        }
    };

    let scan = match sampling {
        Sampling::Exhaustive => (0..n)
            .into_par_iter()
            .map(|i| {
                let mut scan = Scan::default();
                for j in i + 1..n {
                    visit(&mut scan, i, j);
                }
                scan
            })
            .reduce(Scan::default, Scan::merge),
        Sampling::Sampled { count, seed } => {
            let mut rng = CounterRng::new(seed);
            let mut scan = Scan::default();
            for _ in 0..count {
                let (i, j) = loop {
                    let i = rng.below(n as u64) as usize;
                    let j = rng.below(n as u64) as usize;
                    if i != j {
                        break (i.min(j), i.max(j));
                    }
                };
                visit(&mut scan, i, j);
            }
            scan
        }
    };

    let mut violations = scan.violations;
    violations.sort_by(|a, b| {
        let ra = a.ratio.unwrap_or(f64::INFINITY);
        let rb = b.ratio.unwrap_or(f64::INFINITY);
        rb.total_cmp(&ra).then(a.i.cmp(&b.i)).then(a.j.cmp(&b.j))
    });
    let violation_count = violations.len();
    if let Some(cap) = opts.max_listed {
        violations.truncate(cap);
    }
    Ok(LipschitzReport {
        max_ratio: scan.max_ratio,
        unbounded: scan.unbounded,
        violations,
        violation_count,
        pairs_examined: scan.examined,
        pairs_skipped: scan.skipped,
        sampling,
        tol: opts.tol,
        passed: violation_count == 0,
    })
}

/// Reads a CSV with header `x_0..x_{p-1}, m_0..m_{q-1}` in any column order.
pub fn load_pairs<R: Read>(source: R) -> Result<Vec<MappedPair>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let mut xs: Vec<(usize, usize)> = Vec::new();
    let mut ms: Vec<(usize, usize)> = Vec::new();
    for (pos, name) in header.iter().enumerate() {
        let parsed = name
            .strip_prefix("x_")
            .map(|k| (k, &mut xs))
            .or_else(|| name.strip_prefix("m_").map(|k| (k, &mut ms)));
        match parsed.and_then(|(k, list)| k.parse::<usize>().ok().map(|k| (k, list))) {
            Some((k, list)) => list.push((k, pos)),
            None => {
                return Err(Error::InvalidSchema(format!(
                    "unexpected column `{name}`; expected x_<k> or m_<k>"
                )))
            }
        }
    }
    for (list, prefix) in [(&mut xs, "x_"), (&mut ms, "m_")] {
        list.sort_unstable();
        if list.is_empty() || list.iter().enumerate().any(|(e, &(k, _))| e != k) {
            return Err(Error::InvalidSchema(format!(
                "columns {prefix}0..{prefix}<k> must be present without gaps"
            )));
        }
    }
    let mut out = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let read = |cols: &[(usize, usize)]| -> Result<Vec<f64>> {
            cols.iter()
                .map(|&(_, pos)| {
                    let raw = &record[pos];
                    raw.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::ParseError {
                            row: r + 1,
                            column: header[pos].to_string(),
                            value: raw.to_string(),
                        })
                })
                .collect()
        };
        out.push(MappedPair {
            original: read(&xs)?,
            mapped: read(&ms)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<MappedPair> {
        let mut rng = CounterRng::new(3);
        (0..40)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.uniform() * 10.0 - 5.0).collect();
                MappedPair {
                    mapped: f(&x),
                    original: x,
                }
            })
            .collect()
    }

    #[test]
    fn identity_passes_with_ratio_one() {
        let r = audit_map(&pairs(|x| x.to_vec()), &LipschitzOptions::default()).unwrap();
        assert_eq!(r.max_ratio, 1.0);
        assert!(r.passed);
        assert_eq!(r.pairs_examined, 40 * 39 / 2);
    }

    #[test]
    fn doubling_violates_everywhere() {
        let r = audit_map(
            &pairs(|x| x.iter().map(|v| 2.0 * v).collect()),
            &LipschitzOptions::default(),
        )
        .unwrap();
        assert_eq!(r.max_ratio, 2.0);
        assert_eq!(r.violation_count, 40 * 39 / 2);
        assert!(r.violations.iter().all(|v| v.ratio == Some(2.0)));
        assert!(!r.passed);
    }

    #[test]
    fn constant_map_is_zero_lipschitz() {
        let r = audit_map(&pairs(|_| vec![1.0, 2.0]), &LipschitzOptions::default()).unwrap();
        assert_eq!(r.max_ratio, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn duplicate_inputs_mapped_apart_are_infinite_violations() {
        let data = vec![
            MappedPair {
                original: vec![0.0],
                mapped: vec![0.0],
            },
            MappedPair {
                original: vec![0.0],
                mapped: vec![1.0],
            },
            MappedPair {
                original: vec![0.0],
                mapped: vec![1.0],
            },
        ];
        let r = audit_map(&data, &LipschitzOptions::default()).unwrap();
        assert!(r.unbounded);
        assert_eq!(r.violation_count, 2);
        assert_eq!((r.violations[0].i, r.violations[0].j), (0, 1));
        assert!(r.violations.iter().all(|v| v.infinite && v.ratio.is_none()));
        assert_eq!(r.pairs_skipped, 1);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"ratio\":null") && !json.contains("Infinity"));
    }

    #[test]
    fn violations_sorted_by_descending_ratio() {
        let data: Vec<MappedPair> = [0.0, 1.0, 3.0]
            .iter()
            .zip([0.0, 2.0, 9.0])
            .map(|(&x, m)| MappedPair {
                original: vec![x],
                mapped: vec![m],
            })
            .collect();
        let r = audit_map(&data, &LipschitzOptions::default()).unwrap();
        let ratios: Vec<f64> = r.violations.iter().map(|v| v.ratio.unwrap()).collect();
        assert_eq!(ratios, vec![3.5, 3.0, 2.0]);
    }

    #[test]
    fn total_variation_requires_distributions() {
        let data = vec![
            MappedPair {
                original: vec![0.0],
                mapped: vec![0.5, 0.5],
            },
            MappedPair {
                original: vec![1.0],
                mapped: vec![0.7, 0.4],
            },
        ];
        let opts = LipschitzOptions {
            d_mapped: Metric::TotalVariation,
            ..LipschitzOptions::default()
        };
        assert!(matches!(
            audit_map(&data, &opts),
            Err(Error::NotAProbabilityVector(1))
        ));
    }

    #[test]
    fn input_errors() {
        let one = pairs(|x| x.to_vec())[..1].to_vec();
        assert!(matches!(
            audit_map(&one, &LipschitzOptions::default()),
            Err(Error::DegenerateInput(_))
        ));
        let big: Vec<MappedPair> = (0..EXHAUSTIVE_LIMIT + 1)
            .map(|i| MappedPair {
                original: vec![i as f64],
                mapped: vec![0.0],
            })
            .collect();
        assert!(matches!(
            audit_map(&big, &LipschitzOptions::default()),
            Err(Error::Config(_))
        ));
        let sampled = LipschitzOptions {
            sampling: Some(Sampling::Sampled {
                count: 500,
                seed: 1,
            }),
            ..LipschitzOptions::default()
        };
        assert_eq!(audit_map(&big, &sampled).unwrap().pairs_examined, 500);
    }

    #[test]
    fn csv_columns_in_any_order() {
        let csv = "m_0,x_1,x_0\n1,2,3\n4,5,6\n";
        let p = load_pairs(csv.as_bytes()).unwrap();
        assert_eq!(p[0].original, vec![3.0, 2.0]);
        assert_eq!(p[1].mapped, vec![4.0]);
        assert!(matches!(
            load_pairs("x_0,m_1\n1,2\n".as_bytes()),
            Err(Error::InvalidSchema(_))
        ));
        assert!(matches!(
            load_pairs("x_0,m_0\n1,oops\n".as_bytes()),
            Err(Error::ParseError { row: 1, .. })
        ));
    }
}
