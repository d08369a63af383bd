use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairaudit::criteria::{registry_table, CriterionId};
use fairaudit::data::{write_csv, ColumnSchema, SchemaConfig};
use fairaudit::error::{Error, Result};
use fairaudit::lipschitz::{audit_map, load_pairs, LipschitzOptions, Metric, Sampling};
use fairaudit::measures::MeasureKind;
use fairaudit::neighborhood::{NeighborhoodSpec, SoftMeasure, DEFAULT_K};
use fairaudit::report::{run_audit, write_report, AuditConfig, Format};
use fairaudit::synth::{generate, Scenario, ScenarioParams, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "fairaudit",
    version,
    about = "Audit decision data against fairness criteria"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate fairness criteria on a CSV dataset.
    Audit(AuditArgs),
    /// Write a synthetic scenario dataset with its ground truth and schema.
    Generate(GenerateArgs),
    /// Check a representation map for the Lipschitz condition.
    Lipschitz(LipschitzArgs),
    /// Print the criterion registry.
    Criteria,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON schema file with `columns`, optional `threshold` and `missing`.
    #[arg(long)]
    schema: PathBuf,
    /// Comma-separated criterion ids, or `all` for the six registry criteria.
    #[arg(long, default_value = "all")]
    criteria: String,
    /// Feature columns for situation testing, comma-separated.
    #[arg(long, value_delimiter = ',')]
    legal_columns: Vec<String>,
    #[arg(long, default_value = "mi")]
    measure: MeasureKind,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    #[arg(long, default_value_t = 10)]
    min_neighborhood: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// k-nearest-neighbor soft conditioning (default k = 200).
    #[arg(long, conflicts_with = "ball")]
    knn: Option<usize>,
    /// Ball soft conditioning with this radius in (0, 1].
    #[arg(long)]
    ball: Option<f64>,
    #[arg(long)]
    exclude_self: bool,
    /// Per-feature distance weights, comma-separated, in schema order.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value = "mi")]
    soft_measure: SoftMeasure,
    /// Keep every record in soft results instead of only violating ones.
    #[arg(long)]
    all_instances: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    scenario: Scenario,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    cluster_fraction: Option<f64>,
    #[arg(long)]
    dims: Option<usize>,
    /// CSV path; `<stem>.truth.json` and `<stem>.schema.json` go next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct LipschitzArgs {
    /// CSV with columns x_0.. (original) and m_0.. (mapped).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "euclidean")]
    d_original: Metric,
    #[arg(long, default_value = "euclidean")]
    d_mapped: Metric,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Examine this many random pairs instead of all of them.
    #[arg(long, requires = "seed")]
    sample: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    max_listed: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_criteria(list: &str) -> Result<Vec<CriterionId>> {
    if list.trim() == "all" {
        return Ok(CriterionId::BUILTIN.to_vec());
    }
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn audit(args: AuditArgs) -> Result<i32> {
    let mut cfg = AuditConfig::new(&args.data, &args.schema);
    cfg.criteria = parse_criteria(&args.criteria)?;
    cfg.legal_columns = args.legal_columns;
    cfg.measure = args.measure;
    cfg.threshold = args.threshold;
    cfg.epsilon = args.epsilon;
    cfg.delta = args.delta;
    cfg.min_count = args.min_count;
    cfg.min_neighborhood = args.min_neighborhood;
    cfg.alpha = args.alpha;
    cfg.neighborhood = match (args.knn, args.ball) {
        (_, Some(r)) => NeighborhoodSpec::ball(r),
        (k, None) => NeighborhoodSpec::knn(k.unwrap_or(DEFAULT_K)),
    };
    if args.exclude_self {
        cfg.neighborhood = cfg.neighborhood.excluding_self();
    }
    cfg.weights = args.weights;
    cfg.soft_measure = args.soft_measure;
    cfg.all_instances = args.all_instances;
    cfg.output = args.output;
    cfg.format = args.format;

    let report = run_audit(&cfg)?;
    write_report(&report, cfg.format, cfg.output.as_deref())?;
    Ok(report.exit_code())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

fn generate_cmd(args: GenerateArgs) -> Result<i32> {
    let spec = ScenarioSpec {
        scenario: args.scenario,
        n: args.n,
        seed: args.seed,
        params: ScenarioParams {
            gap: args.gap,
            cluster_fraction: args.cluster_fraction,
            dims: args.dims,
        },
    };
    let (dataset, truth) = generate(&spec)?;
    let file = File::create(&args.output).map_err(|e| Error::from(e).in_file(&args.output))?;
    write_csv(&dataset, BufWriter::new(file)).map_err(|e| e.in_file(&args.output))?;
    write_json(&sibling(&args.output, "truth.json"), &truth)?;
    let schema = SchemaConfig {
        columns: dataset
            .columns()
            .iter()
            .map(|c| c.schema())
            .collect::<Vec<ColumnSchema>>(),
        threshold: None,
        missing: Default::default(),
    };
    write_json(&sibling(&args.output, "schema.json"), &schema)?;
    Ok(0)
}

fn lipschitz_cmd(args: LipschitzArgs) -> Result<i32> {
    let file = File::open(&args.data).map_err(|e| Error::from(e).in_file(&args.data))?;
    let pairs = load_pairs(std::io::BufReader::new(file)).map_err(|e| e.in_file(&args.data))?;
    let opts = LipschitzOptions {
        d_original: args.d_original,
        d_mapped: args.d_mapped,
        sampling: match (args.sample, args.seed) {
            (Some(count), Some(seed)) => Some(Sampling::Sampled { count, seed }),
            _ => None,
        },
        tol: args.tol,
        max_listed: Some(args.max_listed),
    };
    let report = audit_map(&pairs, &opts)?;
    match &args.output {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(if report.passed { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Audit(args) => audit(args),
        Command::Generate(args) => generate_cmd(args),
        Command::Lipschitz(args) => lipschitz_cmd(args),
        Command::Criteria => {
            print!("{}", registry_table());
            Ok(0)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
