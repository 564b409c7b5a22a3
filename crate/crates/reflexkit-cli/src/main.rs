//! Command-line entry point: load architectures, run and step
//! reconfiguration scripts, execute canned scenarios, emit event logs.
//!
//! Exit codes: 0 on success, 1 on scenario or reconfiguration failure,
//! 2 on usage or parse errors.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use reflexkit::ftm::standard_registry;
use reflexkit::harness::{Simulation, Until};
use reflexkit::kernel::{build_composite, NodePath};
use reflexkit::scenario::{duplex_plus_tr, pbr_failover, pbr_paths, DuplexSpec, FailoverSpec};
use reflexkit::scriptlang::{
    parse_script, run_action, step_session, RunOptions, ScriptAst, StepOutcome,
};

#[derive(Parser)]
#[command(
    name = "reflexkit",
    about = "Deterministic component runtime with reconfiguration scripting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an architecture, execute scripts, run the event loop, emit the log.
    Run {
        /// Architecture definition (.arch).
        #[arg(long)]
        arch: PathBuf,
        /// Reconfiguration scripts (.rcfg); every action runs, in file order.
        #[arg(long = "script")]
        scripts: Vec<PathBuf>,
        /// Start every component before running scripts.
        #[arg(long)]
        start_all: bool,
        /// Virtual-time bound; without it the loop runs to quiescence.
        #[arg(long)]
        until: Option<u64>,
        /// Write the event log here (TSV).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the canonical graph dump here (`-` for stdout).
        #[arg(long)]
        dump_graph: Option<PathBuf>,
    },
    /// Execute one action statement by statement.
    Step {
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Action to step through.
        #[arg(long)]
        action: String,
        /// Do not wait for input between statements.
        #[arg(long)]
        batch: bool,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        dump_graph: Option<PathBuf>,
    },
    /// Run a canned scenario and verify its assertions.
    Scenario {
        name: ScenarioName,
        /// Number of client requests to drive.
        #[arg(long)]
        requests: Option<u64>,
        /// Crash instant for pbr-failover.
        #[arg(long)]
        crash_at: Option<u64>,
        /// Transient fault, `component-path:nth-integer-reply`; repeatable.
        #[arg(long = "transient")]
        transients: Vec<String>,
        /// Override the shipped reconfiguration script for this scenario.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Write the event log here; duplex-plus-tr also writes `<LOG>.phase1`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Parse an architecture and sweep its invariants.
    Validate {
        #[arg(long)]
        arch: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioName {
    PbrFailover,
    DuplexPlusTr,
}

/// Failure classes mapped to exit codes.
enum CliError {
    /// Unreadable files, parse diagnostics, bad flags: exit 2.
    Usage(String),
    /// Scenario assertion or reconfiguration failure: exit 1.
    Failure(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn seed_from_env() -> Result<u64, CliError> {
    match std::env::var("REFLEXKIT_SEED") {
        Ok(text) => text.parse().map_err(|_| {
            CliError::Usage(format!("REFLEXKIT_SEED must be an integer, got `{text}`"))
        }),
        Err(_) => Ok(0),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_sim(arch: &Path, seed: u64) -> Result<Simulation, CliError> {
    let registry = standard_registry();
    let text = read(arch)?;
    let graph = build_composite(&text, &registry)
        .map_err(|e| CliError::Usage(format!("{}: {e}", arch.display())))?;
    Ok(Simulation::with_seed(graph, &registry, seed))
}

fn load_script(path: &Path) -> Result<ScriptAst, CliError> {
    let text = read(path)?;
    parse_script(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_log(sim: &Simulation, path: &Path) -> Result<(), CliError> {
    fs::write(path, sim.log().to_tsv())
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!(
        "log written to {} ({} records)",
        path.display(),
        sim.log().len()
    );
    Ok(())
}

fn write_dump(sim: &Simulation, path: &Path) -> Result<(), CliError> {
    let dump = sim.graph().canonical_dump();
    if path.as_os_str() == "-" {
        print!("{dump}");
    } else {
        fs::write(path, dump)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            arch,
            scripts,
            start_all,
            until,
            log,
            dump_graph,
        } => {
            let seed = seed_from_env()?;
            let mut sim = load_sim(&arch, seed)?;
            if start_all {
                sim.start_all()
                    .map_err(|e| CliError::Failure(e.to_string()))?;
            }
            for path in &scripts {
                let ast = load_script(path)?;
                for action in &ast.actions {
                    let report =
                        run_action(&mut sim, &ast, &action.name, &[], RunOptions::default());
                    match report.error {
                        None => println!(
                            "action {} from {}: {} statements, {} side effects",
                            action.name,
                            path.display(),
                            report.log.entries.len(),
                            report.log.side_effects().count()
                        ),
                        Some(e) => {
                            return Err(CliError::Failure(format!(
                                "action {} from {} failed: {e}{}",
                                action.name,
                                path.display(),
                                if report.rolled_back {
                                    " (rolled back)"
                                } else {
                                    ""
                                }
                            )))
                        }
                    }
                }
            }
            match until {
                Some(t) => sim.run_until(Until::Time(t)),
                None => sim.run_until(Until::Quiescent),
            };
            println!(
                "ran to t={}; {} components, {} wires, {} log records",
                sim.now(),
                sim.graph().component_paths().len(),
                sim.graph().wire_count(),
                sim.log().len()
            );
            if let Some(path) = &log {
                write_log(&sim, path)?;
            }
            if let Some(path) = &dump_graph {
                write_dump(&sim, path)?;
            }
            Ok(())
        }

        Command::Step {
            arch,
            script,
            action,
            batch,
            log,
            dump_graph,
        } => {
            let seed = seed_from_env()?;
            let mut sim = load_sim(&arch, seed)?;
            let ast = load_script(&script)?;
            let total = ast.action(&action).map(|a| a.body.len()).ok_or_else(|| {
                CliError::Usage(format!("no action `{action}` in {}", script.display()))
            })?;
            let stdin = io::stdin();
            let mut lines = stdin.lock().lines();
            let mut failure = None;
            {
                let mut session = step_session(&mut sim, &ast, &action, &[])
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                let mut index = 0usize;
                loop {
                    if !batch {
                        print!("[{}/{}] step> ", index + 1, total);
                        io::stdout().flush()?;
                        if lines.next().is_none() {
                            println!();
                        }
                    }
                    match session.step() {
                        Ok(StepOutcome::Executed(entry)) => {
                            index = entry.statement;
                            let call = if entry.side_effect {
                                format!("{}({})", entry.op, entry.args)
                            } else {
                                format!("{} {}", entry.op, entry.args)
                            };
                            println!(
                                "[{}/{}] {call}  =>  {}",
                                entry.statement, total, entry.outcome
                            );
                        }
                        Ok(StepOutcome::Done) => {
                            println!("done");
                            break;
                        }
                        Err(e) => {
                            failure = Some(format!("statement {} failed: {e}", index + 1));
                            break;
                        }
                    }
                }
            }
            if let Some(path) = &log {
                write_log(&sim, path)?;
            }
            if let Some(path) = &dump_graph {
                write_dump(&sim, path)?;
            }
            match failure {
                Some(message) => Err(CliError::Failure(message)),
                None => Ok(()),
            }
        }

        Command::Scenario {
            name,
            requests,
            crash_at,
            transients,
            script,
            log,
        } => {
            let seed = seed_from_env()?;
            let plan = parse_transients(&transients)?;
            let script_text = match &script {
                Some(path) => Some(read(path)?),
                None => None,
            };
            match name {
                ScenarioName::PbrFailover => {
                    if !plan.is_empty() {
                        return Err(CliError::Usage(
                            "pbr-failover takes no transient plan".to_string(),
                        ));
                    }
                    let spec = FailoverSpec {
                        requests: requests.unwrap_or(10),
                        crash_at: crash_at.unwrap_or(450),
                        seed,
                        script: script_text,
                    };
                    let outcome =
                        pbr_failover(&spec).map_err(|e| CliError::Failure(e.to_string()))?;
                    println!(
                        "pbr-failover: crash at t={}, suspicion at t={}, {} of {} requests acknowledged before the crash",
                        outcome.crash_at,
                        outcome.suspicion_at,
                        outcome.acked_before_crash.len(),
                        outcome.requests
                    );
                    println!(
                        "backup state at failover: {}; final: {}",
                        outcome.backup_state_at_failover, outcome.final_backup_state
                    );
                    if let Some(path) = &log {
                        write_log(&outcome.sim, path)?;
                    }
                    outcome.check().map_err(CliError::Failure)
                }
                ScenarioName::DuplexPlusTr => {
                    let spec = DuplexSpec {
                        requests: requests.unwrap_or(5),
                        transients: if plan.is_empty() {
                            DuplexSpec::default().transients
                        } else {
                            plan
                        },
                        seed,
                        script: script_text,
                    };
                    if crash_at.is_some() {
                        return Err(CliError::Usage(
                            "duplex-plus-tr takes no crash instant".to_string(),
                        ));
                    }
                    let outcome =
                        duplex_plus_tr(&spec).map_err(|e| CliError::Failure(e.to_string()))?;
                    println!(
                        "duplex-plus-tr: phase 1 corrupted replies at {:?}; phase 2 corrupted replies at {:?}",
                        outcome.phase1_corrupted, outcome.phase2_corrupted
                    );
                    for &k in &outcome.phase2_corrupted {
                        println!(
                            "  request {k}: expected {:?}, observed {:?}",
                            outcome.oracle_tr[(k - 1) as usize],
                            outcome.phase2.outcomes[(k - 1) as usize]
                        );
                    }
                    if let Some(path) = &log {
                        let mut phase1 = path.clone().into_os_string();
                        phase1.push(".phase1");
                        write_log(&outcome.phase1.sim, Path::new(&phase1))?;
                        write_log(&outcome.phase2.sim, path)?;
                    }
                    outcome.check().map_err(CliError::Failure)
                }
            }
        }

        Command::Validate { arch } => {
            let registry = standard_registry();
            let text = read(&arch)?;
            let graph = build_composite(&text, &registry)
                .map_err(|e| CliError::Usage(format!("{}: {e}", arch.display())))?;
            let violations = graph.validate();
            if !violations.is_empty() {
                return Err(CliError::Failure(format!(
                    "invariant violations:\n  {}",
                    violations.join("\n  ")
                )));
            }
            println!(
                "{}: ok ({} components, {} wires)",
                arch.display(),
                graph.component_paths().len(),
                graph.wire_count()
            );
            Ok(())
        }
    }
}

/// Parses `component-path:nth` transient plan entries. The default plan for
/// duplex-plus-tr targets the primary's functional server.
fn parse_transients(entries: &[String]) -> Result<Vec<(NodePath, u64)>, CliError> {
    let default_path = pbr_paths().primary_server;
    entries
        .iter()
        .map(|entry| {
            let (path_text, nth_text) = entry
                .rsplit_once(':')
                .ok_or_else(|| CliError::Usage(format!("bad transient `{entry}`, want PATH:N")))?;
            let nth: u64 = nth_text
                .parse()
                .map_err(|_| CliError::Usage(format!("bad transient index in `{entry}`")))?;
            if nth == 0 {
                return Err(CliError::Usage("transient indices are 1-based".to_string()));
            }
            let path = if path_text.is_empty() {
                default_path.clone()
            } else {
                NodePath::parse(path_text)
                    .ok_or_else(|| CliError::Usage(format!("bad component path `{path_text}`")))?
            };
            Ok((path, nth))
        })
        .collect()
}
