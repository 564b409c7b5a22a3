//! Canned end-to-end scenarios over the shipped architectures: crash
//! failover driven by the `switchServer` script, and transient-fault masking
//! via runtime insertion of the time-redundancy interceptor.

use thiserror::Error;

use crate::ftm::{
    standard_registry, INSERT_TIME_REDUNDANCY_RCFG, PBR_ARCH, PBR_TR_ARCH, SWITCH_SERVER_RCFG,
};
use crate::harness::{
    EventKind, EventLog, ScheduleError, SimEvent, Simulation, Until, VirtualTime,
};
use crate::kernel::graph::{Invocation, RequestId, Value};
use crate::kernel::path::{Endpoint, NodePath};
use crate::kernel::{build_composite, ArchError, KernelError};
use crate::scriptlang::{parse_script, run_action, RunOptions, ScriptError};

/// Gap between scheduled client requests.
pub const REQUEST_SPACING: VirtualTime = 50;

/// Client id used for harness-driven invocations into the client component.
pub const DRIVER: &str = "drive";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("architecture error: {0}")]
    Arch(#[from] ArchError),
    #[error("script error: {0}")]
    Script(#[from] ScriptError),
    #[error("kernel error: {0}")]
    Kernel(#[from] KernelError),
    #[error("schedule error: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("no suspicion event by t={limit}")]
    NoSuspicion { limit: VirtualTime },
    #[error("{0}")]
    Other(String),
}

/// Well-known paths in the shipped PBR architectures.
#[derive(Debug, Clone)]
pub struct PbrPaths {
    pub client: NodePath,
    pub client_control: Endpoint,
    pub primary: NodePath,
    pub primary_protocol: NodePath,
    pub primary_server: NodePath,
    pub backup: NodePath,
    pub backup_protocol: NodePath,
    pub backup_server: NodePath,
    pub detector: NodePath,
}

pub fn pbr_paths() -> PbrPaths {
    let pbr = NodePath::root().child("pbr");
    let client = pbr.child("client_machine");
    PbrPaths {
        client_control: Endpoint::new(client.clone(), "control"),
        client,
        primary: pbr.child("primary"),
        primary_protocol: pbr.child("primary").child("protocol"),
        primary_server: pbr.child("primary").child("server"),
        backup: pbr.child("backup"),
        backup_protocol: pbr.child("backup").child("protocol"),
        backup_server: pbr.child("backup").child("server"),
        detector: pbr.child("failure_detector"),
    }
}

/// What a driven request ended up as, from the client's point of view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestOutcome {
    /// Served with this counter value.
    Value(i64),
    /// Parked after a timeout; never retried successfully.
    Pending,
    /// Failed with a behavior fault.
    Fault(String),
    /// No trace in the log.
    Missing,
}

/// Per-request outcomes for the `submit` invocations driven under
/// `DRIVER:1..=requests`, read back from the event log.
pub fn client_outcomes(log: &EventLog, client: &NodePath, requests: u64) -> Vec<RequestOutcome> {
    let subject = client.to_string();
    (1..=requests)
        .map(|k| {
            let rid = format!("{DRIVER}:{k}");
            for record in log.records() {
                if record.subject != subject || record.field("rid") != Some(rid.as_str()) {
                    continue;
                }
                match record.kind {
                    EventKind::Reply => {
                        let value = record.field("value").unwrap_or("");
                        if let Ok(v) = value.parse::<i64>() {
                            return RequestOutcome::Value(v);
                        }
                        if value.starts_with("\"pending") {
                            return RequestOutcome::Pending;
                        }
                        return RequestOutcome::Fault(format!("unexpected reply {value}"));
                    }
                    EventKind::Fault => {
                        return RequestOutcome::Fault(record.detail.clone());
                    }
                    _ => continue,
                }
            }
            RequestOutcome::Missing
        })
        .collect()
}

fn schedule_submits(sim: &mut Simulation, requests: u64) -> Result<(), ScenarioError> {
    let paths = pbr_paths();
    for k in 1..=requests {
        let invocation = Invocation::new("submit", vec![Value::Int(1)], RequestId::new(DRIVER, k));
        sim.schedule(
            SimEvent::CallService {
                target: paths.client_control.clone(),
                invocation,
            },
            (k - 1) * REQUEST_SPACING,
        )?;
    }
    Ok(())
}

fn probe_counter(sim: &mut Simulation, server: &NodePath, seq: u64) -> Result<i64, ScenarioError> {
    let reply = sim.call_service(
        &Endpoint::new(server.clone(), "computeService"),
        Invocation::new("read", Vec::new(), RequestId::new("probe", seq)),
    )?;
    reply
        .value
        .as_int()
        .ok_or_else(|| ScenarioError::Other("counter read returned non-integer".into()))
}

// ----------------------------------------------------------------------
// pbr-failover
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FailoverSpec {
    pub requests: u64,
    pub crash_at: VirtualTime,
    pub seed: u64,
    /// Override for the shipped `switchServer` script text.
    pub script: Option<String>,
}

impl Default for FailoverSpec {
    fn default() -> Self {
        FailoverSpec {
            requests: 10,
            crash_at: 450,
            seed: 0,
            script: None,
        }
    }
}

#[derive(Debug)]
pub struct FailoverOutcome {
    pub requests: u64,
    pub crash_at: VirtualTime,
    pub suspicion_at: VirtualTime,
    /// Sequence numbers whose replies appear in the log before the crash.
    pub acked_before_crash: Vec<u64>,
    /// Backup counter right after `switchServer`, before any retry.
    pub backup_state_at_failover: i64,
    /// Backup counter at the end of the run.
    pub final_backup_state: i64,
    pub sim: Simulation,
}

impl FailoverOutcome {
    /// The scenario's own assertions; `Err` carries the first failure.
    pub fn check(&self) -> Result<(), String> {
        let acked = self.acked_before_crash.len() as i64;
        if self.backup_state_at_failover != acked {
            return Err(format!(
                "backup state at failover is {}, expected {} (acknowledged requests)",
                self.backup_state_at_failover, acked
            ));
        }
        if self.final_backup_state != self.requests as i64 {
            return Err(format!(
                "final backup state is {}, expected {} (every request exactly once)",
                self.final_backup_state, self.requests
            ));
        }
        if self.suspicion_at <= self.crash_at {
            return Err(format!(
                "suspicion at t={} not after crash at t={}",
                self.suspicion_at, self.crash_at
            ));
        }
        Ok(())
    }
}

/// Runs the crash-failover scenario: drive `requests` increments, crash the
/// primary at `crash_at`, run `switchServer` when the detector raises its
/// suspicion, poke the client to retry parked requests, and drain.
pub fn pbr_failover(spec: &FailoverSpec) -> Result<FailoverOutcome, ScenarioError> {
    let registry = standard_registry();
    let graph = build_composite(PBR_ARCH, &registry)?;
    let mut sim = Simulation::with_seed(graph, &registry, spec.seed);
    let paths = pbr_paths();

    sim.start_all()?;
    sim.inject_crash(&paths.primary, spec.crash_at)?;
    schedule_submits(&mut sim, spec.requests)?;

    // The operator reacts to the suspicion event: advance one unit at a
    // time until the detector speaks up.
    let limit = spec.crash_at + 600;
    let suspicion_at = loop {
        if let Some(record) = sim.log().first(EventKind::Suspicion) {
            break record.time;
        }
        if sim.now() >= limit {
            return Err(ScenarioError::NoSuspicion { limit });
        }
        let next = sim.now() + 1;
        sim.run_until(Until::Time(next));
    };

    let ast = match &spec.script {
        Some(text) => parse_script(text)?,
        None => parse_script(SWITCH_SERVER_RCFG)?,
    };
    let report = run_action(&mut sim, &ast, "switchServer", &[], RunOptions::default());
    if let Some(e) = report.error {
        return Err(e.into());
    }

    let backup_state_at_failover = probe_counter(&mut sim, &paths.backup_server, 1)?;

    // Acknowledged = replies the primary protocol sent before the crash.
    let crash_index = sim
        .log()
        .records()
        .iter()
        .position(|r| r.kind == EventKind::Fault && r.detail == "crash")
        .unwrap_or(usize::MAX);
    let protocol_subject = paths.primary_protocol.to_string();
    let acked_before_crash: Vec<u64> = sim.log().records()[..crash_index.min(sim.log().len())]
        .iter()
        .filter(|r| {
            r.kind == EventKind::Reply
                && r.subject == protocol_subject
                && r.field("op") == Some("increment")
        })
        .filter_map(|r| r.field("rid")?.split(':').nth(1)?.parse().ok())
        .collect();

    // Retry parked requests now that the client is rebound.
    sim.call_service(
        &paths.client_control,
        Invocation::new(
            "retry",
            Vec::new(),
            RequestId::new(DRIVER, spec.requests + 1),
        ),
    )?;

    let last_submit = (spec.requests.saturating_sub(1)) * REQUEST_SPACING;
    let horizon = sim.now().max(last_submit) + 600;
    sim.run_until(Until::Time(horizon));

    let final_backup_state = probe_counter(&mut sim, &paths.backup_server, 2)?;

    Ok(FailoverOutcome {
        requests: spec.requests,
        crash_at: spec.crash_at,
        suspicion_at,
        acked_before_crash,
        backup_state_at_failover,
        final_backup_state,
        sim,
    })
}

// ----------------------------------------------------------------------
// duplex-plus-tr
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DuplexSpec {
    pub requests: u64,
    /// Transient plan: component path plus 1-based integer-reply index.
    pub transients: Vec<(NodePath, u64)>,
    pub seed: u64,
    /// Override for the shipped insertion script text.
    pub script: Option<String>,
}

impl Default for DuplexSpec {
    fn default() -> Self {
        DuplexSpec {
            requests: 5,
            transients: vec![(pbr_paths().primary_server, 3)],
            seed: 0,
            script: None,
        }
    }
}

#[derive(Debug)]
pub struct PhaseOutcome {
    pub outcomes: Vec<RequestOutcome>,
    pub sim: Simulation,
}

#[derive(Debug)]
pub struct DuplexOutcome {
    pub requests: u64,
    /// Fault-free outcomes without the interceptor.
    pub oracle: Vec<RequestOutcome>,
    /// Fault-free outcomes with the interceptor inserted.
    pub oracle_tr: Vec<RequestOutcome>,
    pub phase1: PhaseOutcome,
    pub phase2: PhaseOutcome,
    /// 1-based request indices whose outcome differs from the oracle.
    pub phase1_corrupted: Vec<u64>,
    pub phase2_corrupted: Vec<u64>,
    /// True when the transient plan was empty.
    pub empty_plan: bool,
}

impl DuplexOutcome {
    pub fn check(&self) -> Result<(), String> {
        if self.oracle != self.oracle_tr {
            return Err("interceptor changed fault-free replies".to_string());
        }
        if self.empty_plan {
            if !self.phase1_corrupted.is_empty() || !self.phase2_corrupted.is_empty() {
                return Err("empty transient plan but phases diverge from the oracle".to_string());
            }
            return Ok(());
        }
        if self.phase1_corrupted.is_empty() {
            return Err("phase 1 shows no corrupted reply".to_string());
        }
        if !self.phase2_corrupted.is_empty() {
            let diffs: Vec<String> = self
                .phase2_corrupted
                .iter()
                .map(|&k| {
                    format!(
                        "request {k}: expected {:?}, observed {:?}",
                        self.oracle_tr[(k - 1) as usize],
                        self.phase2.outcomes[(k - 1) as usize]
                    )
                })
                .collect();
            return Err(format!(
                "phase 2 shows corrupted replies: {}",
                diffs.join("; ")
            ));
        }
        Ok(())
    }
}

/// One run over the TR architecture: optionally insert the interceptor at
/// runtime, apply the transient plan, drive the requests.
pub fn duplex_phase(
    spec: &DuplexSpec,
    transients: &[(NodePath, u64)],
    insert_tr: bool,
) -> Result<PhaseOutcome, ScenarioError> {
    let registry = standard_registry();
    let graph = build_composite(PBR_TR_ARCH, &registry)?;
    let mut sim = Simulation::with_seed(graph, &registry, spec.seed);
    let paths = pbr_paths();

    sim.start_all()?;
    for (path, nth) in transients {
        sim.inject_transient(path, *nth)?;
    }
    if insert_tr {
        let ast = match &spec.script {
            Some(text) => parse_script(text)?,
            None => parse_script(INSERT_TIME_REDUNDANCY_RCFG)?,
        };
        let report = run_action(
            &mut sim,
            &ast,
            "insertTimeRedundancy",
            &[],
            RunOptions::default(),
        );
        if let Some(e) = report.error {
            return Err(e.into());
        }
    }
    schedule_submits(&mut sim, spec.requests)?;
    let horizon = (spec.requests.saturating_sub(1)) * REQUEST_SPACING + 600;
    sim.run_until(Until::Time(horizon));

    let outcomes = client_outcomes(sim.log(), &paths.client, spec.requests);
    Ok(PhaseOutcome { outcomes, sim })
}

/// Phase 1 runs the duplex architecture bare and records what the transient
/// plan does to client-visible replies; phase 2 inserts the interceptor at
/// runtime and replays the same plan. Both compare against fault-free runs.
pub fn duplex_plus_tr(spec: &DuplexSpec) -> Result<DuplexOutcome, ScenarioError> {
    let oracle = duplex_phase(spec, &[], false)?.outcomes;
    let oracle_tr = duplex_phase(spec, &[], true)?.outcomes;
    let phase1 = duplex_phase(spec, &spec.transients, false)?;
    let phase2 = duplex_phase(spec, &spec.transients, true)?;

    let diff = |observed: &[RequestOutcome], expected: &[RequestOutcome]| -> Vec<u64> {
        observed
            .iter()
            .zip(expected)
            .enumerate()
            .filter(|(_, (o, e))| o != e)
            .map(|(i, _)| (i + 1) as u64)
            .collect()
    };
    let phase1_corrupted = diff(&phase1.outcomes, &oracle);
    let phase2_corrupted = diff(&phase2.outcomes, &oracle_tr);

    Ok(DuplexOutcome {
        requests: spec.requests,
        oracle,
        oracle_tr,
        phase1,
        phase2,
        phase1_corrupted,
        phase2_corrupted,
        empty_plan: spec.transients.is_empty(),
    })
}
