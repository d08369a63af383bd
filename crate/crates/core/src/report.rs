//! Audit orchestration and the report format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::criteria::{
    evaluate, CriterionId, CriterionResult, CriterionSpec, EvaluateOptions, Variable,
};
use crate::data::{load_dataset, load_schema, ColumnData, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::measures::MeasureKind;
use crate::neighborhood::{
    criterion_index, soft_evaluate_indexed, Backend, DistanceSpec, NeighborIndex, NeighborhoodMode,
    NeighborhoodSpec, SoftMeasure, SoftOptions, SoftResult, DEFAULT_K,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub criteria: Vec<CriterionId>,
    /// Feature columns situation testing conditions on.
    #[serde(default)]
    pub legal_columns: Vec<String>,
    pub measure: MeasureKind,
    /// `None` uses the measure's default.
    pub threshold: Option<f64>,
    pub min_count: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub min_neighborhood: usize,
    pub soft_measure: SoftMeasure,
    pub neighborhood: NeighborhoodSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Keep every record in soft results, not just the violating ones.
    #[serde(default)]
    pub all_instances: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl AuditConfig {
    /// Defaults: the six criteria, MI at 0.01, ε = δ = 0.05, k = 200.
    pub fn new(data: impl Into<PathBuf>, schema: impl Into<PathBuf>) -> Self {
        let eval = EvaluateOptions::default();
        let soft = SoftOptions::default();
        AuditConfig {
            data: data.into(),
            schema: schema.into(),
            criteria: CriterionId::BUILTIN.to_vec(),
            legal_columns: Vec::new(),
            measure: eval.measure,
            threshold: None,
            min_count: eval.min_count,
            alpha: eval.alpha,
            epsilon: soft.epsilon,
            delta: soft.delta,
            min_neighborhood: soft.min_neighborhood,
            soft_measure: soft.measure,
            neighborhood: NeighborhoodSpec::knn(DEFAULT_K),
            weights: None,
            all_instances: false,
            output: None,
            format: Format::Json,
        }
    }

    fn evaluate_options(&self) -> EvaluateOptions {
        EvaluateOptions {
            measure: self.measure,
            threshold: self.threshold.unwrap_or(self.measure.default_threshold()),
            min_count: self.min_count,
            alpha: self.alpha,
        }
    }

    fn soft_options(&self) -> SoftOptions {
        SoftOptions {
            measure: self.soft_measure,
            epsilon: self.epsilon,
            delta: self.delta,
            min_neighborhood: self.min_neighborhood,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CriterionReport {
    Exact(CriterionResult),
    Soft(SoftResult),
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        match self {
            CriterionReport::Exact(r) => r.passed,
            CriterionReport::Soft(r) => r.passed,
        }
    }

    pub fn spec(&self) -> &CriterionSpec {
        match self {
            CriterionReport::Exact(r) => &r.criterion,
            CriterionReport::Soft(r) => &r.criterion,
        }
    }

    pub fn id(&self) -> CriterionId {
        self.spec().id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionTiming {
    pub criterion: CriterionId,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub criteria: Vec<CriterionTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: AuditConfig,
    pub provenance: Provenance,
    pub n: usize,
    pub results: Vec<CriterionReport>,
    pub passed: bool,
    pub warnings: Vec<String>,
    /// Wall-clock timings; the only non-deterministic part of a report.
    pub timing: Timing,
}

impl Report {
    pub fn result(&self, id: CriterionId) -> Option<&CriterionReport> {
        self.results.iter().find(|r| r.id() == id)
    }

    /// 0 when every criterion passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Loads the schema and data named in `config` and audits them.
pub fn run_audit(config: &AuditConfig) -> Result<Report> {
    if config.criteria.is_empty() {
        return Err(Error::EmptySelection("no criteria selected".into()));
    }
    let schema = load_schema(&config.schema)?;
    let file =
        std::fs::File::open(&config.data).map_err(|e| Error::from(e).in_file(&config.data))?;
    let dataset = load_dataset(
        std::io::BufReader::new(file),
        &schema.columns,
        &schema.load_options(config.data.display().to_string()),
    )
    .map_err(|e| e.in_file(&config.data))?;
    audit_dataset(&dataset, config)
}

fn numeric_names(dataset: &Dataset, cols: &[usize]) -> Vec<String> {
    cols.iter()
        .filter(|&&c| matches!(dataset.column(c).data, ColumnData::Numeric(_)))
        .map(|&c| dataset.column(c).name.clone())
        .collect()
}

/// Audits an already loaded dataset; `config.data` and `config.schema` are only echoed.
pub fn audit_dataset(dataset: &Dataset, config: &AuditConfig) -> Result<Report> {
    if config.criteria.is_empty() {
        return Err(Error::EmptySelection("no criteria selected".into()));
    }
    let started = Instant::now();
    let eval = config.evaluate_options();
    let soft = config.soft_options();
    let dist = DistanceSpec {
        weights: config.weights.clone(),
    };
    let mut warnings = Vec::new();
    let mut results = Vec::with_capacity(config.criteria.len());
    let mut timing = Timing::default();
    let mut indexes: HashMap<Vec<String>, NeighborIndex> = HashMap::new();
    let mut clamped = false;

    for &id in &config.criteria {
        let t0 = Instant::now();
        let spec = match id {
            CriterionId::SituationTesting => {
                if config.legal_columns.is_empty() {
                    return Err(Error::EmptySelection(
                        "situation testing needs legally-grounded columns".into(),
                    ));
                }
                CriterionSpec::situation_testing(config.legal_columns.clone())
            }
            other => CriterionSpec::builtin(other),
        };
        let mut conditioned = Vec::new();
        for v in &spec.given {
            match v {
                Variable::Features => conditioned.extend_from_slice(dataset.feature_indices()),
                Variable::Columns(names) => {
                    for name in names {
                        conditioned.push(dataset.column_index(name)?);
                    }
                }
                _ => {}
            }
        }
        let numeric = numeric_names(dataset, &conditioned);

        let result = if numeric.is_empty() {
            let r = evaluate(dataset, &spec, &eval)?;
            if r.dropped_mass > 0.0 {
                warnings.push(format!(
                    "{id}: {:.2}% of records fall in strata smaller than min_count {} and were left out",
                    100.0 * r.dropped_mass,
                    eval.min_count
                ));
            }
            CriterionReport::Exact(r)
        } else {
            let mut nspec = config.neighborhood;
            if let NeighborhoodMode::Knn { k } = nspec.mode {
                let available = if nspec.include_self {
                    dataset.n()
                } else {
                    dataset.n().saturating_sub(1)
                };
                if k > available {
                    nspec.mode = NeighborhoodMode::Knn { k: available };
                    if !clamped {
                        warnings.push(format!(
                            "k = {k} exceeds the {available} available neighbors; using k = {available}"
                        ));
                        clamped = true;
                    }
                }
            }
            warnings.push(format!(
                "{id}: conditioning set includes numeric columns [{}]; evaluated with soft conditioning",
                numeric.join(", ")
            ));
            let key = match &spec.given.last() {
                Some(Variable::Columns(names)) => names.clone(),
                _ => Vec::new(),
            };
            if !indexes.contains_key(&key) {
                let index = criterion_index(dataset, &spec, &dist, Backend::Auto)?;
                indexes.insert(key.clone(), index);
            }
            let mut r = soft_evaluate_indexed(dataset, &spec, &indexes[&key], &nspec, &soft)?;
            if r.indeterminate > 0 {
                warnings.push(format!(
                    "{id}: {:.2}% of records have fewer than {} comparable neighbors and are indeterminate",
                    100.0 * r.indeterminate_fraction,
                    soft.min_neighborhood
                ));
            }
            if !config.all_instances {
                r.per_instance.retain(|i| i.violated());
            }
            CriterionReport::Soft(r)
        };
        timing.criteria.push(CriterionTiming {
            criterion: id,
            seconds: t0.elapsed().as_secs_f64(),
        });
        results.push(result);
    }
    timing.total_seconds = started.elapsed().as_secs_f64();

    Ok(Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        // where the report goes is not part of what was audited
        config: AuditConfig {
            output: None,
            ..config.clone()
        },
        provenance: dataset.provenance().clone(),
        n: dataset.n(),
        passed: results.iter().all(CriterionReport::passed),
        results,
        warnings,
        timing,
    })
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}

fn markdown(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Fairness audit\n");
    let _ = writeln!(
        out,
        "Data: `{}` ({} records)\n",
        report.config.data.display(),
        report.n
    );
    out.push_str(
        "| criterion | condition | unit | awareness | mode | measure | value | verdict |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in &report.results {
        let spec = r.spec();
        let (mode, measure, value) = match r {
            CriterionReport::Exact(e) => {
                let measure = match e.measure.kind {
                    MeasureKind::MutualInformation => format!("MI ≤ {}", e.threshold),
                    MeasureKind::ChiSquare => format!("chi2, p ≥ {}", e.threshold),
                    MeasureKind::BalancedErrorRatio => format!("BER/max ≥ {}", 1.0 - e.threshold),
                };
                let value = match (e.measure.kind, &e.measure.aux) {
                    (MeasureKind::ChiSquare, aux) => format!(
                        "{} (p = {})",
                        fmt_num(e.measure.value),
                        fmt_num(aux.p_value.unwrap_or(1.0))
                    ),
                    (MeasureKind::BalancedErrorRatio, aux) => format!(
                        "{} (normalized {})",
                        fmt_num(e.measure.value),
                        fmt_num(aux.normalized.unwrap_or(1.0))
                    ),
                    _ => fmt_num(e.measure.value),
                };
                ("exact", measure, value)
            }
            CriterionReport::Soft(s) => {
                let name = match s.measure {
                    SoftMeasure::MutualInformation => "local MI",
                    SoftMeasure::RateGap => "local rate gap",
                };
                (
                    "soft",
                    format!("{name}, ε = {}, δ = {}", s.epsilon, s.delta),
                    format!("satisfied {}", fmt_num(s.satisfied_fraction)),
                )
            }
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            spec.id,
            spec.condition().replace('|', "\\|"),
            spec.unit,
            spec.awareness,
            mode,
            measure,
            value,
            verdict(r.passed())
        );
    }
    let _ = writeln!(out, "\nOverall: {}", verdict(report.passed));
    if !report.warnings.is_empty() {
        out.push_str("\n## Warnings\n\n");
        for w in &report.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

pub fn render(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(report).expect("reports serialize");
            bytes.push(b'\n');
            bytes
        }
        Format::Markdown => markdown(report).into_bytes(),
    }
}

pub fn from_json(text: &str) -> Result<Report> {
    Ok(serde_json::from_str(text)?)
}

/// Writes the rendered report to `path`, or to stdout when `None`.
pub fn write_report(report: &Report, format: Format, path: Option<&Path>) -> Result<()> {
    let bytes = render(report, format);
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::from(e).in_file(p)),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            Ok(stdout.flush()?)
        }
    }
}
