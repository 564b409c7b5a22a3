//! Action execution: whole-action runs and step-by-step sessions.
//!
//! Primitive arguments must be singleton node sets; empty or plural sets
//! fail the statement. In transactional mode a failing statement rolls the
//! graph back to its pre-action state by applying the inverses of the
//! side effects already performed, in reverse order, through the ordinary
//! logged kernel operations. In commit mode prior effects persist.

use super::ast::{Arg, Primitive, ScriptAst, Stmt};
use super::eval::{eval_path, Env, NodeSet, ScriptNode};
use super::ScriptError;
use crate::harness::Simulation;
use crate::kernel::graph::{LifecycleChange, LifecycleTarget};
use crate::kernel::path::Endpoint;

/// Failure handling for whole-action runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Errors restore the pre-action graph.
    #[default]
    Transactional,
    /// Errors halt execution; prior effects persist.
    Commit,
}

/// Options for [`run_action`]. `fail_at` injects a synthetic failure in
/// place of the statement with that 1-based index, for exercising rollback.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub mode: Mode,
    pub fail_at: Option<usize>,
}

/// One executed statement: its index, what ran, the resolved arguments and
/// the outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconfigEntry {
    /// 1-based statement index within the action body.
    pub statement: usize,
    pub op: String,
    pub args: String,
    pub outcome: String,
    /// True for primitive calls that changed the graph.
    pub side_effect: bool,
}

/// Append-only record of an action run: one entry per executed statement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReconfigLog {
    pub entries: Vec<ReconfigEntry>,
}

impl ReconfigLog {
    pub fn side_effects(&self) -> impl Iterator<Item = &ReconfigEntry> {
        self.entries.iter().filter(|e| e.side_effect)
    }
}

/// Outcome of a whole-action run.
#[derive(Debug)]
pub struct RunReport {
    pub log: ReconfigLog,
    pub error: Option<ScriptError>,
    /// True when a transactional failure restored the pre-action graph.
    pub rolled_back: bool,
}

impl RunReport {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Inverse of an applied side effect.
#[derive(Debug, Clone)]
enum UndoOp {
    SetLifecycle {
        endpoint: crate::kernel::path::NodePath,
        target: LifecycleTarget,
    },
    AddWire {
        reference: Endpoint,
        service: Endpoint,
    },
    RemoveWire {
        reference: Endpoint,
        service: Endpoint,
    },
}

/// Runs an action to completion against the simulation's graph.
///
/// `args` bind the action parameters positionally; arity must match.
pub fn run_action(
    sim: &mut Simulation,
    ast: &ScriptAst,
    action: &str,
    args: &[NodeSet],
    options: RunOptions,
) -> RunReport {
    let mut log = ReconfigLog::default();
    let def = match ast.action(action) {
        Some(d) => d,
        None => {
            return RunReport {
                log,
                error: Some(ScriptError::UnknownAction(action.to_string())),
                rolled_back: false,
            }
        }
    };
    if def.params.len() != args.len() {
        return RunReport {
            log,
            error: Some(ScriptError::ArityMismatch {
                action: action.to_string(),
                expected: def.params.len(),
                given: args.len(),
            }),
            rolled_back: false,
        };
    }
    let mut env: Env = def
        .params
        .iter()
        .cloned()
        .zip(args.iter().cloned())
        .collect();
    let mut undo: Vec<UndoOp> = Vec::new();
    let mut error = None;
    for (idx, stmt) in def.body.iter().enumerate() {
        let statement = idx + 1;
        if options.fail_at == Some(statement) {
            error = Some(ScriptError::Injected { statement });
            break;
        }
        match exec_statement(sim, &mut env, statement, stmt) {
            Ok((entry, undo_op)) => {
                log.entries.push(entry);
                undo.extend(undo_op);
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    let mut rolled_back = false;
    if error.is_some() && options.mode == Mode::Transactional && !undo.is_empty() {
        roll_back(sim, action, undo);
        rolled_back = true;
    }
    RunReport {
        log,
        error,
        rolled_back,
    }
}

fn roll_back(sim: &mut Simulation, action: &str, undo: Vec<UndoOp>) {
    for op in undo.into_iter().rev() {
        let result = match op {
            UndoOp::SetLifecycle { endpoint, target } => {
                sim.set_lifecycle(&endpoint, target).map(|_| ())
            }
            UndoOp::AddWire { reference, service } => sim.add_wire(&reference, &service),
            UndoOp::RemoveWire { reference, service } => sim.remove_wire(&reference, &service),
        };
        // Inverses of successfully applied edits are total; a failure here
        // means the graph changed underneath the interpreter.
        result.unwrap_or_else(|e| panic!("rollback of action `{action}` failed: {e}"));
    }
}

/// Executes one statement; returns its log entry plus the undo operation for
/// any side effect.
fn exec_statement(
    sim: &mut Simulation,
    env: &mut Env,
    statement: usize,
    stmt: &Stmt,
) -> Result<(ReconfigEntry, Option<UndoOp>), ScriptError> {
    match stmt {
        Stmt::Assign { var, expr } => {
            let set = eval_path(expr, env, sim.graph())?;
            let entry = ReconfigEntry {
                statement,
                op: format!("{var} ="),
                args: expr.to_string(),
                outcome: set.to_string(),
                side_effect: false,
            };
            env.insert(var.clone(), set);
            Ok((entry, None))
        }
        Stmt::Call { primitive, args } => {
            let resolved = resolve_args(sim, env, statement, args)?;
            let args_text = resolved
                .iter()
                .map(ResolvedArg::to_string)
                .collect::<Vec<_>>()
                .join(", ");
            let (outcome, undo) = apply_primitive(sim, statement, *primitive, &resolved)?;
            let entry = ReconfigEntry {
                statement,
                op: primitive.to_string(),
                args: args_text,
                outcome,
                side_effect: true,
            };
            Ok((entry, undo))
        }
    }
}

#[derive(Debug, Clone)]
enum ResolvedArg {
    Node(ScriptNode),
    Str(String),
}

impl std::fmt::Display for ResolvedArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResolvedArg::Node(n) => write!(f, "{n}"),
            ResolvedArg::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

fn resolve_args(
    sim: &Simulation,
    env: &Env,
    statement: usize,
    args: &[Arg],
) -> Result<Vec<ResolvedArg>, ScriptError> {
    let mut resolved = Vec::with_capacity(args.len());
    for (i, arg) in args.iter().enumerate() {
        match arg {
            Arg::Str(s) => resolved.push(ResolvedArg::Str(s.clone())),
            Arg::Path(expr) => {
                let set = eval_path(expr, env, sim.graph())?;
                let node = set.single().ok_or(ScriptError::NonSingleton {
                    statement,
                    arg_index: i + 1,
                    size: set.len(),
                })?;
                resolved.push(ResolvedArg::Node(node.clone()));
            }
        }
    }
    Ok(resolved)
}

fn apply_primitive(
    sim: &mut Simulation,
    statement: usize,
    primitive: Primitive,
    args: &[ResolvedArg],
) -> Result<(String, Option<UndoOp>), ScriptError> {
    let wrong = |message: String| ScriptError::WrongArgument { statement, message };
    let arity = |expected: usize| -> Result<(), ScriptError> {
        if args.len() != expected {
            Err(wrong(format!(
                "{primitive} takes {expected} arguments, got {}",
                args.len()
            )))
        } else {
            Ok(())
        }
    };
    match primitive {
        Primitive::SetState => {
            arity(2)?;
            let path = match &args[0] {
                ResolvedArg::Node(ScriptNode::Component(p)) => p.clone(),
                ResolvedArg::Node(ScriptNode::Composite(p)) => {
                    // Let the kernel report it: lifecycle is per component.
                    p.clone()
                }
                other => {
                    return Err(wrong(format!(
                        "set-state expects a component node, got {other}"
                    )))
                }
            };
            let target = match &args[1] {
                ResolvedArg::Str(s) => LifecycleTarget::parse_strict(s).ok_or_else(|| {
                    wrong(format!(
                        "set-state expects \"STARTED\" or \"STOPPED\", got \"{s}\""
                    ))
                })?,
                other => {
                    return Err(wrong(format!(
                        "set-state expects a state string, got {other}"
                    )))
                }
            };
            let prior = sim
                .graph()
                .component(&path)
                .map(|c| c.lifecycle)
                .map_err(|source| ScriptError::Kernel { statement, source })?;
            let change = sim
                .set_lifecycle(&path, target)
                .map_err(|source| ScriptError::Kernel { statement, source })?;
            let undo = match change {
                LifecycleChange::NoOp => None,
                LifecycleChange::Changed { .. } => Some(UndoOp::SetLifecycle {
                    endpoint: path.clone(),
                    target: match prior {
                        crate::kernel::graph::Lifecycle::Started => LifecycleTarget::Started,
                        _ => LifecycleTarget::Stopped,
                    },
                }),
            };
            Ok((format!("{path} -> {target}"), undo))
        }
        Primitive::AddWire | Primitive::RemoveWire => {
            arity(2)?;
            let reference = match &args[0] {
                ResolvedArg::Node(ScriptNode::Reference(e)) => e.clone(),
                other => {
                    return Err(wrong(format!(
                        "{primitive} expects a reference node, got {other}"
                    )))
                }
            };
            let service = match &args[1] {
                ResolvedArg::Node(ScriptNode::Service(e)) => e.clone(),
                other => {
                    return Err(wrong(format!(
                        "{primitive} expects a service node, got {other}"
                    )))
                }
            };
            match primitive {
                Primitive::AddWire => {
                    sim.add_wire(&reference, &service)
                        .map_err(|source| ScriptError::Kernel { statement, source })?;
                    Ok((
                        format!("wired {reference} -> {service}"),
                        Some(UndoOp::RemoveWire { reference, service }),
                    ))
                }
                _ => {
                    sim.remove_wire(&reference, &service)
                        .map_err(|source| ScriptError::Kernel { statement, source })?;
                    Ok((
                        format!("unwired {reference} -> {service}"),
                        Some(UndoOp::AddWire { reference, service }),
                    ))
                }
            }
        }
    }
}

/// Outcome of a single step.
#[derive(Debug)]
pub enum StepOutcome {
    Executed(ReconfigEntry),
    Done,
}

/// Step-by-step execution of one action, mirroring interactive explorer
/// use. Steps run in commit mode: the final graph equals a whole-action run.
pub struct StepSession<'a> {
    sim: &'a mut Simulation,
    body: Vec<Stmt>,
    env: Env,
    next: usize,
    finished: bool,
}

/// Opens a session over the named action.
pub fn step_session<'a>(
    sim: &'a mut Simulation,
    ast: &ScriptAst,
    action: &str,
    args: &[NodeSet],
) -> Result<StepSession<'a>, ScriptError> {
    let def = ast
        .action(action)
        .ok_or_else(|| ScriptError::UnknownAction(action.to_string()))?;
    if def.params.len() != args.len() {
        return Err(ScriptError::ArityMismatch {
            action: action.to_string(),
            expected: def.params.len(),
            given: args.len(),
        });
    }
    Ok(StepSession {
        sim,
        body: def.body.clone(),
        env: def
            .params
            .iter()
            .cloned()
            .zip(args.iter().cloned())
            .collect(),
        next: 0,
        finished: false,
    })
}

impl StepSession<'_> {
    /// Executes exactly one statement, or reports `Done` past the last one.
    /// A failing statement finishes the session; prior effects persist.
    pub fn step(&mut self) -> Result<StepOutcome, ScriptError> {
        if self.finished {
            return Err(ScriptError::StepAfterDone);
        }
        if self.next >= self.body.len() {
            self.finished = true;
            return Ok(StepOutcome::Done);
        }
        let statement = self.next + 1;
        let stmt = self.body[self.next].clone();
        self.next += 1;
        match exec_statement(self.sim, &mut self.env, statement, &stmt) {
            Ok((entry, _)) => Ok(StepOutcome::Executed(entry)),
            Err(e) => {
                self.finished = true;
                Err(e)
            }
        }
    }

    /// Statements not yet executed.
    pub fn remaining(&self) -> usize {
        self.body.len() - self.next
    }

    /// Access to the simulation between steps, e.g. for introspection.
    pub fn sim(&mut self) -> &mut Simulation {
        self.sim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ftm::{standard_registry, PBR_ARCH, SWITCH_SERVER_RCFG};
    use crate::harness::Simulation;
    use crate::kernel::build_composite;
    use crate::kernel::graph::Lifecycle;
    use crate::kernel::path::NodePath;
    use crate::kernel::KernelError;
    use crate::scriptlang::parse_script;
    use crate::scriptlang::ScriptError;

    fn fresh_sim() -> Simulation {
        let registry = standard_registry();
        let graph = build_composite(PBR_ARCH, &registry).unwrap();
        Simulation::new(graph, &registry)
    }

    fn client() -> NodePath {
        NodePath::root().child("pbr").child("client_machine")
    }

    fn client_ref() -> Endpoint {
        Endpoint::new(client(), "computeService")
    }

    fn primary_service() -> Endpoint {
        Endpoint::new(
            NodePath::root().child("pbr").child("primary"),
            "computeService",
        )
    }

    fn backup_service() -> Endpoint {
        Endpoint::new(
            NodePath::root().child("pbr").child("backup"),
            "computeService",
        )
    }

    /// Hand-applied semantics of the failover script's four side effects.
    fn hand_applied_switch(sim: &mut Simulation) {
        sim.set_lifecycle(&client(), LifecycleTarget::Stopped)
            .unwrap();
        sim.remove_wire(&client_ref(), &primary_service()).unwrap();
        sim.add_wire(&client_ref(), &backup_service()).unwrap();
        sim.set_lifecycle(&client(), LifecycleTarget::Started)
            .unwrap();
    }

    #[test]
    fn switch_server_matches_hand_applied_side_effects() {
        let ast = parse_script(SWITCH_SERVER_RCFG).unwrap();
        let mut sim = fresh_sim();
        let report = run_action(&mut sim, &ast, "switchServer", &[], RunOptions::default());
        assert!(report.is_ok(), "{:?}", report.error);
        assert_eq!(report.log.entries.len(), 11);
        assert_eq!(report.log.side_effects().count(), 4);

        let mut oracle = fresh_sim();
        hand_applied_switch(&mut oracle);
        assert_eq!(sim.graph(), oracle.graph());

        let descriptor = sim.introspect(&client()).unwrap();
        assert_eq!(descriptor.lifecycle, Some(Lifecycle::Started));
        assert_eq!(descriptor.references[0].bound_to, Some(backup_service()));
        assert!(sim.graph().wire_from(&client_ref()).unwrap().service != primary_service());
    }

    #[test]
    fn second_run_fails_at_remove_wire_and_rolls_back() {
        let ast = parse_script(SWITCH_SERVER_RCFG).unwrap();
        let mut sim = fresh_sim();
        assert!(run_action(&mut sim, &ast, "switchServer", &[], RunOptions::default()).is_ok());
        let after_first = sim.graph().clone();

        let report = run_action(&mut sim, &ast, "switchServer", &[], RunOptions::default());
        match &report.error {
            Some(ScriptError::Kernel {
                statement: 9,
                source: KernelError::NoSuchWire(_),
            }) => {}
            other => panic!("expected NoSuchWire at statement 9, got {other:?}"),
        }
        assert!(report.rolled_back);
        assert_eq!(sim.graph(), &after_first);
    }

    #[test]
    fn second_run_in_commit_mode_keeps_prior_effects() {
        let ast = parse_script(SWITCH_SERVER_RCFG).unwrap();
        let mut sim = fresh_sim();
        assert!(run_action(&mut sim, &ast, "switchServer", &[], RunOptions::default()).is_ok());
        let options = RunOptions {
            mode: Mode::Commit,
            fail_at: None,
        };
        let report = run_action(&mut sim, &ast, "switchServer", &[], options);
        assert!(report.error.is_some());
        assert!(!report.rolled_back);
        // Statement 8 stopped the client and stays applied.
        let lifecycle = sim.graph().component(&client()).unwrap().lifecycle;
        assert_eq!(lifecycle, Lifecycle::Stopped);
    }

    #[test]
    fn noop_action_changes_nothing() {
        let ast = parse_script("action noop(){ }").unwrap();
        let mut sim = fresh_sim();
        let before = sim.graph().clone();
        let report = run_action(&mut sim, &ast, "noop", &[], RunOptions::default());
        assert!(report.is_ok());
        assert!(report.log.entries.is_empty());
        assert_eq!(sim.graph(), &before);
    }

    #[test]
    fn transactional_failure_at_every_statement_restores_the_snapshot() {
        let ast = parse_script(SWITCH_SERVER_RCFG).unwrap();
        for fail_at in 1..=11 {
            let mut sim = fresh_sim();
            let snapshot = sim.graph().clone();
            let options = RunOptions {
                mode: Mode::Transactional,
                fail_at: Some(fail_at),
            };
            let report = run_action(&mut sim, &ast, "switchServer", &[], options);
            assert!(
                matches!(report.error, Some(ScriptError::Injected { statement }) if statement == fail_at)
            );
            assert_eq!(
                sim.graph(),
                &snapshot,
                "rollback failed for statement {fail_at}"
            );
        }
    }

    #[test]
    fn stepping_executes_one_statement_at_a_time() {
        let ast = parse_script(SWITCH_SERVER_RCFG).unwrap();
        let mut sim = fresh_sim();
        let mut session = step_session(&mut sim, &ast, "switchServer", &[]).unwrap();
        let mut executed = 0;
        for step in 1..=11 {
            match session.step().unwrap() {
                StepOutcome::Executed(entry) => {
                    executed += 1;
                    assert_eq!(entry.statement, step);
                }
                StepOutcome::Done => panic!("done too early at step {step}"),
            }
            // Between the wire removal (9) and the re-add (10) the client is
            // stopped and its reference dangles.
            if step == 9 {
                let descriptor = session.sim().introspect(&client()).unwrap();
                assert_eq!(descriptor.lifecycle, Some(Lifecycle::Stopped));
                assert_eq!(descriptor.references[0].bound_to, None);
            }
        }
        assert_eq!(executed, 11);
        assert!(matches!(session.step().unwrap(), StepOutcome::Done));
        assert!(matches!(session.step(), Err(ScriptError::StepAfterDone)));
    }

    #[test]
    fn stepping_to_completion_equals_whole_run() {
        let ast = parse_script(SWITCH_SERVER_RCFG).unwrap();

        let mut stepped = fresh_sim();
        {
            let mut session = step_session(&mut stepped, &ast, "switchServer", &[]).unwrap();
            while !matches!(session.step().unwrap(), StepOutcome::Done) {}
        }

        let mut ran = fresh_sim();
        let options = RunOptions {
            mode: Mode::Commit,
            fail_at: None,
        };
        assert!(run_action(&mut ran, &ast, "switchServer", &[], options).is_ok());

        assert_eq!(stepped.graph(), ran.graph());
        assert_eq!(
            stepped.graph().canonical_dump(),
            ran.graph().canonical_dump()
        );
    }

    #[test]
    fn stepping_noop_is_immediately_done() {
        let ast = parse_script("action noop(){ }").unwrap();
        let mut sim = fresh_sim();
        let mut session = step_session(&mut sim, &ast, "noop", &[]).unwrap();
        assert!(matches!(session.step().unwrap(), StepOutcome::Done));
    }

    #[test]
    fn unknown_action_and_arity_are_rejected() {
        let ast = parse_script("action f(x){ }").unwrap();
        let mut sim = fresh_sim();
        let report = run_action(&mut sim, &ast, "missing", &[], RunOptions::default());
        assert!(matches!(report.error, Some(ScriptError::UnknownAction(_))));
        let report = run_action(&mut sim, &ast, "f", &[], RunOptions::default());
        assert!(matches!(
            report.error,
            Some(ScriptError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn primitive_arguments_must_be_singletons() {
        let ast = parse_script(
            "action f(){ x = $domain/scachild::nothing; set-state($x, \"STOPPED\"); }",
        )
        .unwrap();
        let mut sim = fresh_sim();
        let report = run_action(&mut sim, &ast, "f", &[], RunOptions::default());
        assert!(matches!(
            report.error,
            Some(ScriptError::NonSingleton {
                statement: 2,
                arg_index: 1,
                size: 0
            })
        ));
    }

    #[test]
    fn set_state_accepts_only_the_two_quoted_states() {
        let ast = parse_script(
            "action f(){ c = $domain/scachild::pbr/scachild::client_machine; set-state($c, \"started\"); }",
        )
        .unwrap();
        let mut sim = fresh_sim();
        let report = run_action(&mut sim, &ast, "f", &[], RunOptions::default());
        assert!(matches!(
            report.error,
            Some(ScriptError::WrongArgument { statement: 2, .. })
        ));
    }
}
