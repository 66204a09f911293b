//! The `garling` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 parse error, 3 precondition
//! violated, 4 search cap exceeded, 5 verification failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::conditionality::{
    besov_sum_basis, gauge_report, greedy_set, is_greedy_set, log_conditionality_check,
    summing_basis, FiniteBasis, GaugeKind, GaugeReport, Mode, ProbeOptions, DEFAULT_LINEAR_FLOOR,
    DEFAULT_LOG_TREND_EPSILON,
};
use crate::construction::{build_kappa, make_v_chain, DEFAULT_K_CAP};
use crate::embedding::{
    build_embedding_plan, verify_embedding, EmbedCaps, EmbeddingPlan, PlanRecord, DEFAULT_SEED,
};
use crate::error::Error;
use crate::norms::{garling_norm, SpaceNorm};
use crate::report::{canonical_json, csv_table, envelope, format_float, to_value};
use crate::seq::FinSeq;
use crate::weights::{Weight, WeightSpec, DEFAULT_TREND_EPSILON};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_CAP: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "garling",
    version,
    about = "Exact norms, block constructions and conditionality gauges for Garling sequence spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate a sequence-space norm.
    Norm(NormArgs),
    /// Build a block tuple kappa with ||v[kappa]||_g <= t.
    Kappa(KappaArgs),
    /// Build an embedding plan and write it as JSON.
    Embed(EmbedArgs),
    /// Verify an embedding plan; exits 5 if any check fails.
    VerifyEmbed(VerifyArgs),
    /// Finite-horizon regularity profile of a weight.
    WeightReport(WeightReportArgs),
    /// Conditionality gauges L_m or k_m of a finite basis.
    Cond(CondArgs),
    /// Greedy set of a coefficient vector.
    Greedy(GreedyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long, global = false)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Garling,
    Lorentz,
    Ellp,
    Sup,
    Mixed,
}

#[derive(Debug, Args, Serialize)]
pub struct NormArgs {
    #[arg(long, value_enum, default_value = "garling")]
    pub space: SpaceKind,
    /// Weight spec: inline JSON or a file path.
    #[arg(long, default_value = r#"{"family":"power","alpha":1.0}"#)]
    pub weight: String,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Block sizes for the mixed norm, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub blocks: Vec<usize>,
    /// The vector: a JSON array, a `{"offset":..,"coeffs":[..]}` object, or a file path.
    #[arg(long = "vec")]
    pub vector: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct KappaArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value = r#"{"family":"power","alpha":1.0}"#)]
    pub weight: String,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub k_floor: usize,
    #[arg(long, default_value_t = DEFAULT_K_CAP)]
    pub k_cap: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = r#"{"family":"power","alpha":0.5}"#)]
    pub weight: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = DEFAULT_K_CAP)]
    pub k_cap: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Plan file written by `embed` (or a bare plan record).
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct WeightReportArgs {
    #[arg(long)]
    pub weight: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub horizon: usize,
    #[arg(long, default_value_t = DEFAULT_TREND_EPSILON)]
    pub trend_eps: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Summing,
    Besov,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum GaugeChoice {
    #[value(name = "L")]
    #[serde(rename = "L")]
    L,
    #[value(name = "k")]
    #[serde(rename = "k")]
    K,
    #[value(name = "both")]
    #[serde(rename = "both")]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Exact,
    Probe,
}

#[derive(Debug, Args, Serialize)]
pub struct CondArgs {
    #[arg(long, value_enum, default_value = "summing")]
    pub basis: BasisKind,
    /// Dimension of the summing or unit vector basis.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Number of levels of the besov basis.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Exponent of the mixed (besov) or Garling (unit) ambient.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Weight of the Garling ambient for the unit vector basis.
    #[arg(long, default_value = r#"{"family":"power","alpha":1.0}"#)]
    pub weight: String,
    #[arg(long, value_enum, default_value = "L")]
    pub gauge: GaugeChoice,
    /// Largest m (default: min(dimension, 8)).
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeChoice,
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub sweeps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_LINEAR_FLOOR)]
    pub linear_floor: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GreedyArgs {
    #[arg(long = "vec")]
    pub vector: String,
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) => EXIT_PARSE,
            Error::CapExceeded { .. } => EXIT_CAP,
            _ => EXIT_PRECONDITION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn parse_failure(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_PARSE,
        message: msg.into(),
    }
}

/// Inline JSON if the text starts with `{` or `[`, otherwise a file path.
fn read_json(text: &str, what: &str) -> Result<Value, Failure> {
    let trimmed = text.trim_start();
    let body = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        text.to_string()
    } else {
        std::fs::read_to_string(text)
            .map_err(|e| parse_failure(format!("cannot read {what} from {text}: {e}")))?
    };
    serde_json::from_str(&body).map_err(|e| parse_failure(format!("invalid {what} JSON: {e}")))
}

fn parse_weight(text: &str) -> Result<Weight, Failure> {
    let spec: WeightSpec = serde_json::from_value(read_json(text, "weight")?)
        .map_err(|e| parse_failure(format!("invalid weight spec: {e}")))?;
    Ok(Weight::new(spec)?)
}

fn parse_vector(text: &str) -> Result<FinSeq, Failure> {
    let v = read_json(text, "vector")?;
    let f = if v.is_array() {
        serde_json::from_value::<Vec<f64>>(v).map(FinSeq::new)
    } else {
        serde_json::from_value::<FinSeq>(v)
    };
    f.map_err(|e| parse_failure(format!("invalid vector: {e}")))
}

struct Output {
    json: Value,
    csv: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    failed: bool,
}

fn cell_json(v: &impl Serialize) -> String {
    crate::report::compact_json(&to_value(v))
}

fn run_norm(a: &NormArgs) -> Result<Output, Failure> {
    let f = parse_vector(&a.vector)?;
    let w = parse_weight(&a.weight)?;
    let space = match a.space {
        SpaceKind::Garling => SpaceNorm::garling(w.clone(), a.p)?,
        SpaceKind::Lorentz => SpaceNorm::lorentz(w, a.p)?,
        SpaceKind::Ellp => SpaceNorm::ellp(a.p)?,
        SpaceKind::Sup => SpaceNorm::Sup,
        SpaceKind::Mixed => SpaceNorm::mixed(a.p, a.blocks.clone())?,
    };
    let (value, witness) = match &space {
        SpaceNorm::Garling { weight, p } => {
            let g = garling_norm(&f, weight, *p)?;
            (g.value, to_value(&g.witness.indices))
        }
        other => (other.eval(&f)?, Value::Null),
    };
    let result = json!({
        "norm_kind": space.kind(),
        "space": to_value(&space.spec()),
        "value": value,
        "witness": witness,
    });
    let row = vec![
        space.kind().to_string(),
        format_float(value),
        crate::report::compact_json(&witness),
    ];
    Ok(Output {
        json: result,
        csv: Some((vec!["norm_kind", "value", "witness_json"], vec![row])),
        failed: false,
    })
}

fn run_kappa(a: &KappaArgs) -> Result<Output, Failure> {
    let w = parse_weight(&a.weight)?;
    let kappa = build_kappa(a.n, a.t, &w, a.p, a.k_floor, None, a.k_cap)?;
    let norm = garling_norm(&make_v_chain(&kappa.entries, &w, a.p), &w, a.p)?.value;
    let rows = kappa
        .entries
        .iter()
        .enumerate()
        .map(|(i, k)| vec![(i + 1).to_string(), k.to_string()])
        .collect();
    Ok(Output {
        json: json!({
            "kappa": to_value(&kappa),
            "norm_v_kappa": norm,
            "within_t": norm <= a.t,
        }),
        csv: Some((vec!["i", "k"], rows)),
        failed: false,
    })
}

fn run_embed(a: &EmbedArgs) -> Result<Output, Failure> {
    let w = parse_weight(&a.weight)?;
    let plan = build_embedding_plan(a.eps, a.n, &w, a.p, EmbedCaps { k_cap: a.k_cap })?;
    let rec = plan.to_record();
    let mut rows = Vec::new();
    for (n, row) in rec.intervals.iter().enumerate() {
        for (i, iv) in row.iter().enumerate() {
            rows.push(vec![
                (n + 1).to_string(),
                (i + 1).to_string(),
                rec.kappas[n][i].to_string(),
                iv[0].to_string(),
                iv[1].to_string(),
            ]);
        }
    }
    Ok(Output {
        json: to_value(&rec),
        csv: Some((vec!["n", "i", "k", "start", "end"], rows)),
        failed: false,
    })
}

fn load_plan(path: &PathBuf) -> Result<EmbeddingPlan, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_failure(format!("cannot read plan {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| parse_failure(format!("invalid plan JSON: {e}")))?;
    let body = v.get("plan").cloned().unwrap_or(v);
    let rec: PlanRecord =
        serde_json::from_value(body).map_err(|e| parse_failure(format!("invalid plan: {e}")))?;
    Ok(EmbeddingPlan::from_record(rec)?)
}

fn run_verify(a: &VerifyArgs) -> Result<Output, Failure> {
    let plan = load_plan(&a.plan)?;
    let report = verify_embedding(&plan, a.trials, a.seed);
    let rows = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.check.clone(),
                c.trials.to_string(),
                format_float(c.worst_slack),
                c.pass.to_string(),
            ]
        })
        .collect();
    Ok(Output {
        failed: !report.pass,
        json: to_value(&report),
        csv: Some((vec!["check", "trials", "worst_slack", "pass"], rows)),
    })
}

fn run_weight_report(a: &WeightReportArgs) -> Result<Output, Failure> {
    let w = parse_weight(&a.weight)?;
    if a.horizon < 2 {
        return Err(Error::PreconditionViolated("horizon must be at least 2".into()).into());
    }
    let r = w.regularity_report_with(a.horizon, a.trend_eps);
    let row = vec![
        r.horizon.to_string(),
        format_float(r.sup_value),
        r.argmax.to_string(),
        format_float(r.half_horizon_value),
        format_float(r.trend_epsilon),
        cell_json(&r.trend).trim_matches('"').to_string(),
    ];
    Ok(Output {
        json: json!({"weight": to_value(w.spec()), "report": to_value(&r)}),
        csv: Some((
            vec![
                "horizon",
                "sup_value",
                "argmax",
                "half_horizon_value",
                "trend_epsilon",
                "trend",
            ],
            vec![row],
        )),
        failed: false,
    })
}

fn run_cond(a: &CondArgs) -> Result<Output, Failure> {
    let basis: FiniteBasis = match a.basis {
        BasisKind::Summing => summing_basis(a.n)?,
        BasisKind::Besov => besov_sum_basis(a.levels, a.p)?,
        BasisKind::Unit => {
            let w = parse_weight(&a.weight)?;
            FiniteBasis::unit_vectors(a.n, SpaceNorm::garling(w, a.p)?, format!("unit({})", a.n))?
        }
    };
    let m_max = a.m_max.unwrap_or(basis.dim().min(8));
    let mode = match a.mode {
        ModeChoice::Exact => Mode::Exact,
        ModeChoice::Probe => Mode::Probe(ProbeOptions {
            restarts: a.restarts,
            sweeps: a.sweeps,
            seed: a.seed,
        }),
    };
    let kinds: &[GaugeKind] = match a.gauge {
        GaugeChoice::L => &[GaugeKind::L],
        GaugeChoice::K => &[GaugeKind::K],
        GaugeChoice::Both => &[GaugeKind::L, GaugeKind::K],
    };
    let reports: Vec<GaugeReport> = kinds
        .iter()
        .map(|&k| gauge_report(&basis, k, m_max, mode))
        .collect::<crate::Result<_>>()?;
    let mut rows = Vec::new();
    let mut tables = serde_json::Map::new();
    for r in &reports {
        for e in &r.entries {
            rows.push(vec![
                basis.label().to_string(),
                e.m.to_string(),
                e.kind.as_str().to_string(),
                format_float(e.value),
                e.method.as_str().to_string(),
                cell_json(&e.witness),
            ]);
        }
        let values: Vec<(usize, f64)> = r.entries.iter().map(|e| (e.m, e.value)).collect();
        let table = log_conditionality_check(&values, a.linear_floor, DEFAULT_LOG_TREND_EPSILON);
        let kind = r.entries.first().map(|e| e.kind.as_str()).unwrap_or("L");
        tables.insert(kind.to_string(), to_value(&table));
    }
    Ok(Output {
        json: json!({"reports": to_value(&reports), "log_conditionality": Value::Object(tables)}),
        csv: Some((
            vec![
                "basis",
                "m",
                "gauge_kind",
                "value",
                "method",
                "witness_json",
            ],
            rows,
        )),
        failed: false,
    })
}

fn run_greedy(a: &GreedyArgs) -> Result<Output, Failure> {
    let f = parse_vector(&a.vector)?;
    let coeffs = f.dense();
    if a.m > coeffs.len() {
        return Err(Error::PreconditionViolated(format!(
            "m = {} exceeds the vector length {}",
            a.m,
            coeffs.len()
        ))
        .into());
    }
    let set = greedy_set(&coeffs, a.m);
    let ok = is_greedy_set(&coeffs, &set);
    Ok(Output {
        json: json!({"m": a.m, "set": set, "is_greedy_set": ok}),
        csv: Some((
            vec!["m", "set_json"],
            vec![vec![a.m.to_string(), cell_json(&set)]],
        )),
        failed: false,
    })
}

/// Replaces weight and vector arguments by the JSON they resolved to.
fn resolve_inputs(config: &mut Value) {
    let Value::Object(map) = config else { return };
    if let Some(Value::String(text)) = map.get("weight") {
        if let Ok(w) = parse_weight(text) {
            map.insert("weight".into(), to_value(w.spec()));
        }
    }
    if let Some(Value::String(text)) = map.get("vector") {
        if let Ok(f) = parse_vector(text) {
            map.insert("vector".into(), to_value(&f));
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Norm(_) => "norm",
        Command::Kappa(_) => "kappa",
        Command::Embed(_) => "embed",
        Command::VerifyEmbed(_) => "verify-embed",
        Command::WeightReport(_) => "weight-report",
        Command::Cond(_) => "cond",
        Command::Greedy(_) => "greedy",
    }
}

fn output_args(c: &Command) -> &OutputArgs {
    match c {
        Command::Norm(a) => &a.output,
        Command::Kappa(a) => &a.output,
        Command::Embed(a) => &a.output,
        Command::VerifyEmbed(a) => &a.output,
        Command::WeightReport(a) => &a.output,
        Command::Cond(a) => &a.output,
        Command::Greedy(a) => &a.output,
    }
}

/// Runs the CLI on `args` (including the program name), writing reports to
/// `stdout` (or `--out`) and diagnostics to `stderr`. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let name = command_name(&cli.command);
    let outcome = match &cli.command {
        Command::Norm(a) => run_norm(a),
        Command::Kappa(a) => run_kappa(a),
        Command::Embed(a) => run_embed(a),
        Command::VerifyEmbed(a) => run_verify(a),
        Command::WeightReport(a) => run_weight_report(a),
        Command::Cond(a) => run_cond(a),
        Command::Greedy(a) => run_greedy(a),
    };
    let out = match outcome {
        Ok(o) => o,
        Err(f) => {
            let _ = writeln!(stderr, "garling {name}: {}", f.message);
            return f.code;
        }
    };
    let mut config = match to_value(&cli.command) {
        Value::Object(mut m) => m.remove(name).unwrap_or(Value::Null),
        other => other,
    };
    resolve_inputs(&mut config);
    let oa = output_args(&cli.command);
    let key = if name == "embed" { "plan" } else { "result" };
    let text = match oa.format {
        Format::Json => canonical_json(&envelope(name, config, key, out.json)),
        Format::Csv => {
            let (header, rows) = out.csv.expect("every command has a CSV projection");
            match csv_table(name, &config, &header, &rows) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(stderr, "garling {name}: {e}");
                    return EXIT_IO;
                }
            }
        }
    };
    let written = match &oa.out {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "garling {name}: cannot write output: {e}");
        return EXIT_IO;
    }
    if out.failed {
        let _ = writeln!(stderr, "garling {name}: verification failed");
        return EXIT_VERIFICATION;
    }
    EXIT_OK
}
