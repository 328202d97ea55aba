use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use xchain_core::checker::{binding_with, verify_with_jobs, Protocol, StrategyCatalog, COMPLIANT};
use xchain_core::report::{render_machine, render_text};
use xchain_core::scenario::{resolve_path, Scenario, ScenarioError, Severity};
use xchain_core::scheduler::{run_execution, DeliveryPolicy, Schedule};
use xchain_core::swap::build_swap_protocol;
use xchain_core::trace::to_json_lines;
use xchain_core::PartyId;

const JOBS_VAR: &str = "XCHAIN_VERIFY_JOBS";

#[derive(Parser)]
#[command(name = "xchain-verify", version, about = "Simulate and verify cross-chain protocol scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and cross-check a scenario without running it.
    Validate { scenario: PathBuf },
    /// Run one execution and print its trace.
    Simulate(SimulateArgs),
    /// Check feasibility, Safety, Liveness and Coalition Nash Equilibrium.
    Verify(VerifyArgs),
    /// Verify a built-in scenario.
    Demo {
        #[arg(value_enum)]
        which: Demo,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Demo {
    Swap,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(clap::Args)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Comma-separated compliant parties; defaults to every party without
    /// a --strategy.
    #[arg(long, value_delimiter = ',')]
    compliance: Option<Vec<String>>,
    /// Catalog entry for a deviating party, as PARTY=ENTRY. Also accepted
    /// as --<party>-strategy ENTRY, e.g. --bob-strategy no-escrow.
    #[arg(long = "strategy", value_name = "PARTY=ENTRY")]
    strategies: Vec<String>,
    #[arg(long, default_value = "immediate")]
    policy: String,
    /// Explore message orders within a round.
    #[arg(long)]
    exhaustive_order: bool,
    /// Choice sequence selecting one schedule under exhaustive policies.
    #[arg(long, value_delimiter = ',')]
    choices: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(clap::Args)]
struct VerifyArgs {
    scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads; overrides XCHAIN_VERIFY_JOBS.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also explore every delay in 0..=delta per message.
    #[arg(long)]
    exhaustive_delays: bool,
    /// Also explore every processing order of same-round messages.
    #[arg(long)]
    exhaustive_order: bool,
}

/// Failure that maps to exit status 2.
struct InputError(String);

impl From<String> for InputError {
    fn from(s: String) -> Self {
        InputError(s)
    }
}

fn scenario_error(path: &Path, e: ScenarioError) -> InputError {
    let path = resolve_path(path);
    match e {
        ScenarioError::Parse { .. } => InputError(format!("{}:{e}", path.display())),
        ScenarioError::Io { .. } => InputError(e.to_string()),
        ScenarioError::Invalid(diags) => {
            let lines: Vec<String> = diags.iter().map(|d| format!("{}: {d}", path.display())).collect();
            InputError(lines.join("\n"))
        }
    }
}

fn load(path: &Path) -> Result<(Protocol, StrategyCatalog), InputError> {
    let scenario = Scenario::load(path).map_err(|e| scenario_error(path, e))?;
    scenario.compile().map_err(|e| scenario_error(path, e))
}

/// Rewrites `--<party>-strategy X` into `--strategy <party>=X`.
fn normalise_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let alias = arg
            .strip_prefix("--")
            .and_then(|rest| {
                let (flag, value) = match rest.split_once('=') {
                    Some((f, v)) => (f, Some(v.to_string())),
                    None => (rest, None),
                };
                flag.strip_suffix("-strategy").map(|party| (party.to_string(), value))
            })
            .filter(|(party, _)| !party.is_empty());
        match alias {
            Some((party, Some(value))) => {
                out.push("--strategy".into());
                out.push(format!("{party}={value}"));
            }
            Some((party, None)) => {
                out.push("--strategy".into());
                out.push(format!("{party}={}", iter.next().unwrap_or_default()));
            }
            None => out.push(arg),
        }
    }
    out
}

fn party(protocol: &Protocol, name: &str) -> Result<PartyId, InputError> {
    protocol
        .system
        .party_index(name)
        .or_else(|| {
            protocol
                .system
                .parties
                .iter()
                .position(|p| p.display.eq_ignore_ascii_case(name) || p.name.eq_ignore_ascii_case(name))
                .map(PartyId)
        })
        .ok_or_else(|| InputError(format!("unknown party `{name}`")))
}

fn simulate(args: SimulateArgs) -> Result<String, InputError> {
    let (protocol, catalog) = load(&args.scenario)?;
    let names = protocol.system.party_names();
    let mut overrides: BTreeMap<PartyId, String> = BTreeMap::new();
    for s in &args.strategies {
        let (p, entry) = s
            .split_once('=')
            .ok_or_else(|| InputError(format!("--strategy expects PARTY=ENTRY, got `{s}`")))?;
        overrides.insert(party(&protocol, p)?, entry.to_string());
    }
    let compliance: BTreeSet<PartyId> = match &args.compliance {
        Some(list) => list
            .iter()
            .filter(|n| !n.is_empty())
            .map(|n| party(&protocol, n))
            .collect::<Result<_, _>>()?,
        None => (0..names.len())
            .map(PartyId)
            .filter(|p| overrides.get(p).map_or(true, |e| e == COMPLIANT))
            .collect(),
    };
    for (p, entry) in &overrides {
        if compliance.contains(p) && entry != COMPLIANT {
            return Err(InputError(format!(
                "{} is compliant but was given strategy `{entry}`",
                names[p.0]
            )));
        }
    }
    for p in (0..names.len()).map(PartyId).filter(|p| !compliance.contains(p)) {
        if overrides.get(&p).map_or(true, |e| e == COMPLIANT) {
            let entries: Vec<&str> = catalog.for_party(p).map(|e| e.name.as_str()).collect();
            return Err(InputError(format!(
                "{} deviates; pick one with --strategy {}=ENTRY from: {}",
                names[p.0],
                names[p.0],
                entries.join(", ")
            )));
        }
    }
    let policy = DeliveryPolicy::parse(&args.policy).ok_or_else(|| {
        InputError(format!(
            "unknown policy `{}` (expected immediate, adversarial-max or exhaustive)",
            args.policy
        ))
    })?;
    let (binding, horizon) = binding_with(&protocol, &catalog, &overrides).map_err(|e| InputError(e.to_string()))?;
    let schedule = Schedule {
        policy,
        exhaustive_order: args.exhaustive_order,
        choices: args.choices.clone(),
    };
    let exec = run_execution(
        &protocol.system,
        &binding,
        &schedule,
        protocol.contract_inputs(0),
        horizon,
    )
    .map_err(|e| InputError(e.to_string()))?;
    Ok(match args.format {
        Format::Machine => to_json_lines(&exec.trace),
        Format::Text => {
            let mut out = String::new();
            for e in &exec.trace {
                out.push_str(&format!("{e}\n"));
            }
            out.push_str(&format!("final {}\n", exec.outcome));
            out
        }
    })
}

fn jobs(flag: Option<usize>) -> Result<usize, InputError> {
    if let Some(n) = flag {
        return if n == 0 { Err(InputError("--jobs must be at least 1".into())) } else { Ok(n) };
    }
    match std::env::var(JOBS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| InputError(format!("{JOBS_VAR} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run_verify(protocol: &Protocol, catalog: &StrategyCatalog, format: Format, jobs: usize) -> Result<(String, bool), InputError> {
    let report = verify_with_jobs(protocol, catalog, jobs).map_err(|e| InputError(e.to_string()))?;
    let text = match format {
        Format::Text => render_text(&report),
        Format::Machine => render_machine(&report),
    };
    Ok((text, report.properties_pass()))
}

fn verify(args: VerifyArgs) -> Result<(String, bool), InputError> {
    let jobs = jobs(args.jobs)?;
    let (mut protocol, catalog) = load(&args.scenario)?;
    if args.exhaustive_delays && !protocol.options.policies.contains(&DeliveryPolicy::Exhaustive) {
        protocol.options.policies.push(DeliveryPolicy::Exhaustive);
    }
    protocol.options.exhaustive_order |= args.exhaustive_order;
    run_verify(&protocol, &catalog, args.format, jobs)
}

fn validate(path: &Path) -> Result<(String, bool), InputError> {
    let scenario = Scenario::load(path).map_err(|e| scenario_error(path, e))?;
    let diags = scenario.validate();
    let shown = resolve_path(path);
    let mut out = String::new();
    for d in &diags {
        out.push_str(&format!("{}: {d}\n", shown.display()));
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    let warnings = diags.len() - errors;
    out.push_str(&format!("{errors} errors, {warnings} warnings\n"));
    Ok((out, errors == 0))
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(normalise_args(std::env::args()));
    let result = match cli.command {
        Command::Validate { scenario } => validate(&scenario).map(|(out, ok)| (out, if ok { 0 } else { 2 })),
        Command::Simulate(args) => simulate(args).map(|out| (out, 0)),
        Command::Verify(args) => verify(args).map(|(out, ok)| (out, if ok { 0 } else { 1 })),
        Command::Demo { which: Demo::Swap, format, jobs: j } => jobs(j).and_then(|n| {
            let (protocol, catalog) = build_swap_protocol();
            run_verify(&protocol, &catalog, format, n).map(|(out, ok)| (out, if ok { 0 } else { 1 }))
        }),
    };
    match result {
        Ok((out, code)) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            let _ = stdout.flush();
            ExitCode::from(code)
        }
        Err(InputError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
