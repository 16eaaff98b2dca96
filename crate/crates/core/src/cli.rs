//! Command-line front end: `tradeoff <subcommand> [flags]`.
//!
//! Every subcommand draws randomness only from a ChaCha stream seeded by
//! `--seed` (default 42, or `TRADEOFF_SEED`), and echoes the seed in its
//! output. JSON reals are written with 12 significant digits; CSV reals with
//! six decimals.
//!
//! Exit status: 0 on success, 1 on a domain error (the message starts with
//! the error's name), 2 on a usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::accountant::BudgetLedger;
use crate::attack::{smoking_demo, Release, Scenario};
use crate::casestudy::{run_variant, run_variant_on, seed_sweep, write_seed_sweep_csv, CaseStudy, Variant};
use crate::fairness::LabeledDataset;
use crate::frontier::{
    critical_sample_size, fairness_bound, feasible, sweep, utility_bound, write_sweep_csv, BoundConstants,
    EmpiricalSettings, Evaluator, FeasibilitySpec, SweepGrid,
};
use crate::mechanisms::{gaussian_mechanism, laplace_mechanism, PrivacyBudget, SensitivityBound};
use crate::rng::{seeded, DEFAULT_SEED};
use crate::Error;

pub const SEED_ENV: &str = "TRADEOFF_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tradeoff", version, about = "Privacy, fairness and utility trade-off toolkit")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noisy count or mean of one CSV column.
    Mech(MechArgs),
    /// Load, charge and save a privacy ledger.
    Budget(BudgetArgs),
    /// Closed-form bounds, feasibility and critical sample size.
    Bounds(BoundsArgs),
    /// Sweep an (epsilon, n) grid and write the frontier CSV.
    Sweep(SweepArgs),
    /// Membership inference against a smoking-rate release.
    AttackDemo(AttackArgs),
    /// Train and evaluate one case-study variant.
    Casestudy(CaseStudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Query {
    /// Rows whose value is nonzero.
    Count,
    /// Mean of the values clamped to [lower, upper].
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MechanismChoice {
    Laplace,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct MechArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub column: String,
    #[arg(long, value_enum, default_value_t = Query::Count)]
    pub query: Query,
    #[arg(long, value_enum, default_value_t = MechanismChoice::Laplace)]
    pub mechanism: MechanismChoice,
    #[arg(long)]
    pub epsilon: f64,
    /// Required by the Gaussian mechanism.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Clamp range for `--query mean`.
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Ledger file; loaded when it exists, written after charging.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    /// Cap for a new ledger.
    #[arg(long)]
    pub cap_epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub cap_delta: f64,
    /// Charge `EPS` or `EPS:DELTA`; repeatable, applied in order.
    #[arg(long = "charge", value_parser = parse_charge)]
    pub charges: Vec<(f64, f64)>,
    /// Label prefix for new entries.
    #[arg(long, default_value = "charge")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    #[arg(long)]
    pub d: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub f_target: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub u0: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = FeasibilitySpec::DEFAULT_U_THRESHOLD)]
    pub u_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_utility: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_fairness: f64,
}

impl SpecArgs {
    fn spec(&self) -> FeasibilitySpec {
        FeasibilitySpec {
            u0: self.u0,
            u_threshold: self.u_threshold,
            f_target: self.f_target,
            d: self.d,
            p: self.p,
        }
    }

    fn constants(&self) -> BoundConstants {
        BoundConstants {
            c_utility: self.c_utility,
            c_fairness: self.c_fairness,
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub epsilon: f64,
    /// Also evaluate the bounds and feasibility at this sample size.
    #[arg(long)]
    pub n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorChoice {
    Analytic,
    Empirical,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON file `{"epsilon": [...], "n": [...]}`.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_enum, default_value_t = EvaluatorChoice::Analytic)]
    pub evaluator: EvaluatorChoice,
    /// Training runs averaged per cell by the empirical evaluator.
    #[arg(long, default_value_t = 3)]
    pub seeds: u32,
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReleaseChoice {
    Deterministic,
    Laplace,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, value_enum, default_value_t = ReleaseChoice::Deterministic)]
    pub release: ReleaseChoice,
    /// Required by the Laplace release.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1000)]
    pub population_size: u64,
    #[arg(long, default_value_t = 1000)]
    pub database_size: u64,
    #[arg(long, default_value_t = 0.99)]
    pub marker_rate: f64,
    #[arg(long, default_value_t = 0.30)]
    pub background_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub prior: f64,
    /// Records tied to the target; derived from `--release-rate` when absent.
    #[arg(long)]
    pub cohort_size: Option<u64>,
    /// Expected smoking rate of the table with the target present.
    #[arg(long, default_value_t = 0.52)]
    pub release_rate: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Training CSV (`x…,label,group`); synthetic data when absent.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Repeat over seeds `seed..seed+N` and write per-seed rows to `--sweep-csv`.
    #[arg(long, requires = "sweep_csv", conflicts_with = "train")]
    pub repeat: Option<u64>,
    #[arg(long, requires = "repeat")]
    pub sweep_csv: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_charge(s: &str) -> std::result::Result<(f64, f64), String> {
    let (eps, delta) = match s.split_once(':') {
        Some((e, d)) => (e, d),
        None => (s, "0"),
    };
    let eps = eps.trim().parse::<f64>().map_err(|e| format!("epsilon {eps:?}: {e}"))?;
    let delta = delta.trim().parse::<f64>().map_err(|e| format!("delta {delta:?}: {e}"))?;
    Ok((eps, delta))
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Domain(Error),
    /// Domain error after partial output was already written.
    DomainWithOutput(Error, Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome = std::result::Result<Value, Failure>;

/// Parses `args` (program name first) and runs the subcommand. JSON output
/// goes to `stdout`, diagnostics to `stderr`; returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let outcome = dispatch(&cli);
    let emit = |out: &mut dyn Write, mut value: Value| -> std::io::Result<()> {
        tidy(&mut value);
        writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("values serialise"))
    };
    match outcome {
        Ok(value) => match emit(stdout, value) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(stderr, "error: Io: {e}");
                EXIT_DOMAIN
            }
        },
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(stderr, "error: {}: {e}", e.name());
            EXIT_DOMAIN
        }
        Err(Failure::DomainWithOutput(e, value)) => {
            let _ = emit(stdout, value);
            let _ = writeln!(stderr, "error: {}: {e}", e.name());
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let seed = cli.seed;
    let body = match &cli.command {
        Command::Mech(a) => mech(a, seed)?,
        Command::Budget(a) => budget(a, seed)?,
        Command::Bounds(a) => bounds(a)?,
        Command::Sweep(a) => sweep_cmd(a, seed)?,
        Command::AttackDemo(a) => attack(a, seed)?,
        Command::Casestudy(a) => casestudy(a, seed)?,
    };
    Ok(with_seed(seed, body))
}

fn with_seed(seed: u64, body: Value) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("seed".into(), json!(seed));
    match body {
        Value::Object(map) => out.extend(map),
        other => {
            out.insert("result".into(), other);
        }
    }
    Value::Object(out)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serialises")
}

/// Rounds every real to 12 significant digits so that outputs stay stable
/// across platforms and read cleanly.
fn tidy(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("checked");
            let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
            *v = json!(rounded);
        }
        Value::Array(items) => items.iter_mut().for_each(tidy),
        Value::Object(map) => map.values_mut().for_each(tidy),
        _ => {}
    }
}

fn write_output(path: &Path, contents: &[u8]) -> std::result::Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Domain(Error::Io(e)))
}

fn write_json_file(path: &Path, seed: u64, body: &Value) -> std::result::Result<(), Failure> {
    let mut value = with_seed(seed, body.clone());
    tidy(&mut value);
    let mut text = serde_json::to_string_pretty(&value).map_err(Error::from)?;
    text.push('\n');
    write_output(path, text.as_bytes())
}

fn read_column(path: &Path, column: &str) -> std::result::Result<Vec<f64>, Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(Error::from)?;
    let headers = reader.headers().map_err(Error::from)?.clone();
    let idx = headers.iter().position(|h| h.trim() == column).ok_or_else(|| {
        Failure::Domain(Error::Dataset {
            path: path.to_owned(),
            reason: format!("no column named {column:?}"),
        })
    })?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(Error::from)?;
        let field = record.get(idx).unwrap_or("").trim();
        let x: f64 = field.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
            Failure::Domain(Error::Dataset {
                path: path.to_owned(),
                reason: format!("row {}: {column} = {field:?} is not a finite number", row + 1),
            })
        })?;
        values.push(x);
    }
    if values.is_empty() {
        return Err(Failure::Domain(Error::EmptyInput("CSV column")));
    }
    Ok(values)
}

fn mech(a: &MechArgs, seed: u64) -> Outcome {
    let values = read_column(&a.input, &a.column)?;
    let n = values.len() as f64;
    let (truth, sens) = match a.query {
        Query::Count => (values.iter().filter(|&&x| x != 0.0).count() as f64, SensitivityBound::COUNTING),
        Query::Mean => {
            let (Some(lo), Some(hi)) = (a.lower, a.upper) else {
                return Err(Failure::Usage("--query mean needs --lower and --upper".into()));
            };
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Failure::Domain(Error::invalid("--lower/--upper", "need lower < upper")));
            }
            let mean = values.iter().map(|x| x.clamp(lo, hi)).sum::<f64>() / n;
            (mean, SensitivityBound::new((hi - lo) / n)?)
        }
    };
    let mut rng = seeded(seed);
    let noisy = match a.mechanism {
        MechanismChoice::Laplace => {
            if a.delta.is_some() {
                return Err(Failure::Usage("--delta applies only to --mechanism gaussian".into()));
            }
            laplace_mechanism(truth, sens, a.epsilon, &mut rng)?
        }
        MechanismChoice::Gaussian => {
            let delta = a
                .delta
                .ok_or_else(|| Failure::Usage("--mechanism gaussian needs --delta".into()))?;
            gaussian_mechanism(truth, sens, PrivacyBudget::new(a.epsilon, delta)?, &mut rng)?
        }
    };
    let query = match a.query {
        Query::Count => "count",
        Query::Mean => "mean",
    };
    Ok(json!({
        "query": query,
        "column": a.column,
        "rows": values.len(),
        "sensitivity": sens.l1(),
        "noisy_value": to_value(&noisy),
    }))
}

fn ledger_body(ledger: &BudgetLedger) -> Value {
    json!({
        "ledger": to_value(ledger),
        "spent_epsilon": ledger.spent_epsilon(),
        "spent_delta": ledger.spent_delta(),
        "remaining_epsilon": ledger.remaining_epsilon(),
    })
}

fn budget(a: &BudgetArgs, seed: u64) -> Outcome {
    let existing = match &a.ledger {
        Some(path) if path.exists() => {
            let text = fs::read_to_string(path).map_err(Error::from)?;
            Some(serde_json::from_str::<BudgetLedger>(&text).map_err(Error::from)?)
        }
        _ => None,
    };
    let mut ledger = match (existing, a.cap_epsilon) {
        (Some(ledger), None) => ledger,
        (Some(ledger), Some(cap)) => {
            if ledger.cap().epsilon() != cap || ledger.cap().delta() != a.cap_delta {
                return Err(Failure::Usage(
                    "--cap-epsilon/--cap-delta disagree with the cap stored in --ledger".into(),
                ));
            }
            ledger
        }
        (None, Some(cap)) => BudgetLedger::new(PrivacyBudget::new(cap, a.cap_delta)?),
        (None, None) => return Err(Failure::Usage("--cap-epsilon is required for a new ledger".into())),
    };
    let mut failure = None;
    for &(eps, delta) in &a.charges {
        let label = format!("{}-{}", a.label, ledger.entries().len() + 1);
        match ledger.charge(eps, delta, label) {
            Ok(next) => ledger = next,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    if let Some(path) = &a.ledger {
        let mut text = serde_json::to_string_pretty(&ledger).map_err(Error::from)?;
        text.push('\n');
        write_output(path, text.as_bytes())?;
    }
    let body = ledger_body(&ledger);
    match failure {
        None => Ok(body),
        Some(e) => Err(Failure::DomainWithOutput(e, with_seed(seed, body))),
    }
}

fn bounds(a: &BoundsArgs) -> Outcome {
    let spec = a.spec.spec();
    let consts = a.spec.constants();
    spec.validate()?;
    let n_star = critical_sample_size(&spec, a.epsilon, consts)?;
    let mut body = json!({
        "epsilon": a.epsilon,
        "spec": to_value(&spec),
        "n_star": n_star,
    });
    if let Some(n) = a.n {
        body["n"] = json!(n);
        body["utility_bound"] = json!(utility_bound(spec.u0, spec.d as f64, a.epsilon, n, consts)?);
        body["fairness_bound"] = json!(fairness_bound(a.epsilon, n, spec.p, consts)?);
        body["feasible"] = json!(feasible(&spec, a.epsilon, n, consts)?);
    }
    Ok(body)
}

fn sweep_cmd(a: &SweepArgs, seed: u64) -> Outcome {
    let text = fs::read_to_string(&a.grid).map_err(Error::from)?;
    let grid: SweepGrid = serde_json::from_str(&text).map_err(Error::from)?;
    let evaluator = match a.evaluator {
        EvaluatorChoice::Analytic => Evaluator::Analytic,
        EvaluatorChoice::Empirical => Evaluator::Empirical(EmpiricalSettings {
            synthetic: Default::default(),
            train: Default::default(),
            target_delta: a.delta,
            seeds: a.seeds,
            master_seed: seed,
        }),
    };
    let rows = sweep(&grid, &a.spec.spec(), &evaluator, a.spec.constants())?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    write_output(&a.output, &buf)?;
    Ok(json!({
        "output": a.output.display().to_string(),
        "rows": rows.len(),
        "feasible": rows.iter().filter(|r| r.feasible).count(),
        "pareto": rows.iter().filter(|r| r.pareto).count(),
    }))
}

fn attack(a: &AttackArgs, seed: u64) -> Outcome {
    let release = match (a.release, a.epsilon) {
        (ReleaseChoice::Deterministic, None) => Release::Deterministic,
        (ReleaseChoice::Deterministic, Some(_)) => {
            return Err(Failure::Usage("--epsilon applies only to --release laplace".into()))
        }
        (ReleaseChoice::Laplace, Some(epsilon)) => Release::Laplace { epsilon },
        (ReleaseChoice::Laplace, None) => return Err(Failure::Usage("--release laplace needs --epsilon".into())),
    };
    let mut scenario = Scenario {
        population_size: a.population_size,
        marker_smoking_rate: a.marker_rate,
        background_smoking_rate: a.background_rate,
        database_size: a.database_size,
        target_in_database_prior: a.prior,
        cohort_size: a.cohort_size.unwrap_or(1),
    };
    if a.cohort_size.is_none() {
        scenario.cohort_size = scenario.cohort_for_release_rate(a.release_rate)?;
    }
    let report = smoking_demo(&scenario, release, &mut seeded(seed), a.trials)?;
    let body = json!({ "scenario": to_value(&scenario), "report": to_value(&report) });
    if let Some(path) = &a.output {
        write_json_file(path, seed, &body)?;
    }
    Ok(body)
}

fn casestudy(a: &CaseStudyArgs, seed: u64) -> Outcome {
    let mut study = CaseStudy {
        epsilon: a.epsilon,
        delta: a.delta,
        fairness_lambda: a.lambda,
        ..CaseStudy::default()
    };
    let train = &mut study.train;
    train.epochs = a.epochs.unwrap_or(train.epochs);
    train.learning_rate = a.learning_rate.unwrap_or(train.learning_rate);
    train.batch_size = a.batch_size.unwrap_or(train.batch_size);
    train.clip_norm = a.clip_norm.unwrap_or(train.clip_norm);

    let report = match (&a.train, &a.test) {
        (Some(train_path), Some(test_path)) => {
            let train = LabeledDataset::from_csv_path(train_path)?;
            let test = LabeledDataset::from_csv_path(test_path)?;
            run_variant_on(&study, a.variant, &train, &test, seed)?
        }
        _ => run_variant(&study, a.variant, seed)?,
    };
    let mut body = json!({
        "variant": a.variant.name(),
        "study": to_value(&study),
        "report": to_value(&report),
    });
    if let (Some(count), Some(path)) = (a.repeat, &a.sweep_csv) {
        let seeds: Vec<u64> = (0..count).map(|i| seed.wrapping_add(i)).collect();
        let rows = seed_sweep(&study, &[a.variant], &seeds)?;
        let mut buf = Vec::new();
        write_seed_sweep_csv(&rows, &mut buf)?;
        write_output(path, &buf)?;
        body["sweep_csv"] = json!(path.display().to_string());
    }
    if let Some(path) = &a.output {
        write_json_file(path, seed, &body)?;
    }
    Ok(body)
}
