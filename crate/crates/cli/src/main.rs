//! `santa`: settle shared expenses, run the private settlement protocols
//! and audit their privacy from the command line.
//!
//! Exit codes: 0 on success, 1 on bad input (an error JSON object goes to
//! stderr), 2 when a protocol invariant breaks, which is always a bug.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use santa_core::audit::{self, AuditError, DEFAULT_THRESHOLD};
use santa_core::protocol::{run_full, ProtocolError, RunOptions, ScenarioDocument, Variant};
use santa_core::sep::{self, Reduction, SepError};
use santa_core::trace::write_jsonl;
use santa_core::{BalanceVector, Cents, SettlementPlan};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "santa",
    version,
    about = "Private settlement of shared expenses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Settle a scenario's balances with explicit transfers.
    Settle {
        #[arg(value_enum)]
        method: Method,
        #[command(flatten)]
        input: BalanceInput,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Can the balances be settled in fewer than n - 1 transfers?
    Decide {
        #[command(flatten)]
        input: BalanceInput,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide subset-sum for a JSON list of integers via the settlement reduction.
    Reduce {
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a private settlement protocol and write its trace as JSON lines.
    SantaRun {
        /// Defaults to the scenario's `variant` field.
        #[arg(value_enum)]
        variant: Option<CliVariant>,
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Trace destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the run summary JSON here.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Relay arithmetic granularity in cents; overrides `unit_cents`.
        #[arg(long)]
        unit_cents: Option<Cents>,
        /// TEST ONLY: fix the first participant's random draw, in cents.
        /// Anyone who knows it can recover every balance.
        #[arg(long, requires = "unsafe_test")]
        force_t1: Option<Cents>,
        /// Acknowledge that --force-t1 breaks the privacy guarantee.
        #[arg(long)]
        unsafe_test: bool,
        /// Physical slow variant: debtors alone deposit money, others slide in dummies.
        #[arg(long)]
        simplified: bool,
    },
    /// Compare real and simulated views of one participant.
    Audit {
        #[arg(value_enum)]
        variant: CliVariant,
        #[arg(long)]
        participant: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct BalanceInput {
    /// Scenario JSON file to aggregate.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Balance vector as a JSON list of cents.
    #[arg(long)]
    balances: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Greedy,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliVariant {
    Slow,
    Fast,
    PhysicalSlow,
    PhysicalFast,
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Self {
        match v {
            CliVariant::Slow => Variant::Slow,
            CliVariant::Fast => Variant::Fast,
            CliVariant::PhysicalSlow => Variant::PhysicalSlow,
            CliVariant::PhysicalFast => Variant::PhysicalFast,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io { path: PathBuf, message: String },
    Parse(String),
    Invalid(String),
    Internal(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Failure::Usage(m) => json!({"error": "usage", "message": m}),
            Failure::Io { path, message } => {
                json!({"error": "io", "path": path.display().to_string(), "message": message})
            }
            Failure::Parse(m) => json!({"error": "parse", "message": m}),
            Failure::Invalid(m) => json!({"error": "validation", "message": m}),
            Failure::Internal(m) => json!({"error": "internal", "message": m}),
        }
    }
}

impl From<SepError> for Failure {
    fn from(e: SepError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<AuditError> for Failure {
    fn from(e: AuditError) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

fn load_document(path: &Path) -> Result<ScenarioDocument, Failure> {
    let doc = ScenarioDocument::from_json(&read(path)?)
        .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    doc.scenario.validate()?;
    Ok(doc)
}

fn parse_list(text: &str) -> Result<Vec<Cents>, Failure> {
    serde_json::from_str(text)
        .map_err(|e| Failure::Parse(format!("expected a JSON list of integers: {e}")))
}

fn load_balances(input: &BalanceInput) -> Result<BalanceVector, Failure> {
    match (&input.scenario, &input.balances) {
        (Some(path), _) => Ok(sep::aggregate_balances(&load_document(path)?.scenario)?),
        (None, Some(text)) => Ok(BalanceVector::new(parse_list(text)?)?),
        (None, None) => Err(Failure::Usage("pass --scenario or --balances".into())),
    }
}

/// Writes `bytes` to `path`, or to stdout.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    let result = match path {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|e| Failure::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_owned),
        message: e.to_string(),
    })
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    emit(path, text.as_bytes())
}

#[derive(Serialize)]
struct SettleOutput<'a> {
    method: &'static str,
    balances: &'a [Cents],
    count: usize,
    transfers: &'a SettlementPlan,
}

fn yes_no(answer: bool) -> &'static str {
    if answer {
        "yes"
    } else {
        "no"
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Settle { method, input, out } => {
            let balances = load_balances(&input)?;
            let (name, plan) = match method {
                Method::Greedy => ("greedy", sep::greedy_settle(&balances)),
                Method::Exact => ("exact", sep::min_transactions(&balances)?.1),
            };
            let output = SettleOutput {
                method: name,
                balances: balances.as_slice(),
                count: plan.len(),
                transfers: &plan,
            };
            emit_json(out.as_deref(), &output)
        }
        Command::Decide { input, out } => {
            let balances = load_balances(&input)?;
            let (count, _) = sep::min_transactions(&balances)?;
            let answer = sep::sep_decision(&balances)?;
            emit_json(
                out.as_deref(),
                &json!({"answer": yes_no(answer), "min_transactions": count, "n": balances.len()}),
            )
        }
        Command::Reduce { values, out } => {
            let values = parse_list(&values)?;
            let output = match sep::reduce_ssp_to_sep(&values) {
                Reduction::AnswerYes => json!({"answer": "yes", "instance": null}),
                Reduction::Instance(instance) => json!({
                    "answer": yes_no(sep::sep_decision(&instance)?),
                    "instance": instance.as_slice(),
                }),
            };
            emit_json(out.as_deref(), &output)
        }
        Command::SantaRun {
            variant,
            scenario,
            seed,
            out,
            summary,
            unit_cents,
            force_t1,
            unsafe_test: _,
            simplified,
        } => {
            let mut doc = load_document(&scenario)?;
            let variant = variant.map(Variant::from).or(doc.variant).ok_or_else(|| {
                Failure::Usage("no variant given on the command line or in the scenario".into())
            })?;
            if let Some(seed) = seed {
                doc.scenario.seed = seed;
            }
            let options = RunOptions {
                unit: unit_cents.or(doc.unit_cents).unwrap_or(1),
                forced_t1: force_t1,
                simplified_envelopes: simplified,
            };
            let run = run_full(&doc.scenario, variant, &options)?;
            let mut trace = Vec::new();
            write_jsonl(&run.trace_lines(), &mut trace).expect("writing to a Vec cannot fail");
            emit(out.as_deref(), &trace)?;
            if let Some(path) = summary {
                emit_json(Some(&path), &run.summary())?;
            }
            Ok(())
        }
        Command::Audit {
            variant,
            participant,
            trials,
            scenario,
            seed,
            threshold,
            out,
        } => {
            let doc = load_document(&scenario)?;
            let balances = sep::aggregate_balances(&doc.scenario)?;
            let report = audit::audit(
                &balances,
                doc.scenario.bound_b,
                variant.into(),
                participant,
                trials,
                seed.unwrap_or(doc.scenario.seed),
                threshold,
            )?;
            emit_json(out.as_deref(), &report)
        }
    }
}

fn fail(failure: &Failure) -> ExitCode {
    eprintln!("{}", failure.to_json());
    ExitCode::from(failure.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&Failure::Usage(e.render().to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => fail(&failure),
    }
}
