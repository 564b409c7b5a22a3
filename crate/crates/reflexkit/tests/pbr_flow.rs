//! End-to-end flows over the shipped primary-backup architecture: traffic,
//! failover, fault masking, and the log-level invariant sweeps.

use std::collections::BTreeMap;

use reflexkit::ftm::{standard_registry, PBR_ARCH};
use reflexkit::harness::{replay_structural, EventKind, EventLog, SimEvent, Simulation, Until};
use reflexkit::kernel::graph::{Invocation, LifecycleTarget, RequestId, Value};
use reflexkit::kernel::{build_composite, Endpoint, KernelError, NodePath};
use reflexkit::scenario::{
    duplex_plus_tr, pbr_failover, pbr_paths, DuplexSpec, FailoverSpec, RequestOutcome,
};

fn pbr_sim() -> Simulation {
    let registry = standard_registry();
    let graph = build_composite(PBR_ARCH, &registry).unwrap();
    let mut sim = Simulation::new(graph, &registry);
    sim.start_all().unwrap();
    sim
}

/// Quiescence and crash containment, swept over a whole log: no emission
/// (non-drained dispatch) is attributed to a component while it is stopped
/// or after it crashed. Queued and dropped dispatches are emission records;
/// drained ones re-play an old emission and are excluded.
fn assert_emitters_live(log: &EventLog) {
    #[derive(PartialEq)]
    enum S {
        Started,
        Stopped,
        Crashed,
    }
    let mut state: BTreeMap<String, S> = BTreeMap::new();
    for record in log.records() {
        match record.kind {
            EventKind::Lifecycle => {
                let s = if record.detail.starts_with("set-state STARTED") {
                    S::Started
                } else {
                    S::Stopped
                };
                if !record.detail.ends_with("noop") {
                    state.insert(record.subject.clone(), s);
                }
            }
            EventKind::Fault if record.detail == "crash" => {
                state.insert(record.subject.clone(), S::Crashed);
            }
            EventKind::Dispatch => {
                let disp = record.field("disp").unwrap_or("run");
                if disp == "drained" {
                    continue;
                }
                let from = record.field("from").unwrap_or("external");
                if from == "external" {
                    continue;
                }
                match state.get(from) {
                    Some(S::Started) => {}
                    Some(S::Stopped) => panic!(
                        "stopped component {from} emitted at t={} seq={}",
                        record.time, record.seq
                    ),
                    Some(S::Crashed) => panic!(
                        "crashed component {from} emitted at t={} seq={}",
                        record.time, record.seq
                    ),
                    None => panic!("emitter {from} has no lifecycle record"),
                }
            }
            _ => {}
        }
    }
}

fn structural(dump: &str) -> String {
    dump.lines()
        .filter(|l| !l.starts_with("queue "))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn five_requests_checkpoint_before_each_reply() {
    let mut sim = pbr_sim();
    let target = Endpoint::new(pbr_paths().primary, "computeService");
    for seq in 1..=5u64 {
        sim.schedule(
            SimEvent::CallService {
                target: target.clone(),
                invocation: Invocation::new(
                    "increment",
                    vec![Value::Int(1)],
                    RequestId::new("A", seq),
                ),
            },
            seq * 10,
        )
        .unwrap();
    }
    sim.run_until(Until::Time(100));

    let protocol = pbr_paths().primary_protocol.to_string();
    let replies: Vec<_> = sim
        .log()
        .of_kind(EventKind::Reply)
        .filter(|r| r.subject == protocol && r.field("op") == Some("increment"))
        .collect();
    let checkpoints: Vec<_> = sim.log().of_kind(EventKind::Checkpoint).collect();
    assert_eq!(replies.len(), 5);
    assert_eq!(checkpoints.len(), 5);
    for reply in &replies {
        let rid = reply.field("rid").unwrap();
        let checkpoint = checkpoints
            .iter()
            .find(|c| c.field("rid") == Some(rid))
            .unwrap_or_else(|| panic!("no checkpoint for {rid}"));
        assert!(
            checkpoint.seq < reply.seq,
            "checkpoint after reply for {rid}"
        );
    }
}

#[test]
fn quiescence_holds_across_a_failover_run() {
    let outcome = pbr_failover(&FailoverSpec::default()).unwrap();
    outcome.check().unwrap();
    assert_emitters_live(outcome.sim.log());
}

#[test]
fn suspicion_precedes_the_failover_edits() {
    let outcome = pbr_failover(&FailoverSpec {
        crash_at: 220,
        ..Default::default()
    })
    .unwrap();
    outcome.check().unwrap();
    let log = outcome.sim.log();
    let suspicion = log.first(EventKind::Suspicion).unwrap().seq;
    let edits: Vec<u64> = log
        .of_kind(EventKind::GraphEdit)
        .filter(|r| r.detail.contains("wire"))
        .map(|r| r.seq)
        .collect();
    assert_eq!(edits.len(), 2, "one removal, one addition");
    assert!(edits.iter().all(|&seq| seq > suspicion));
    // Replies resume at the backup protocol afterwards.
    let backup_protocol = pbr_paths().backup_protocol.to_string();
    assert!(log
        .of_kind(EventKind::Reply)
        .any(|r| r.subject == backup_protocol && r.seq > edits[1]));
}

#[test]
fn replaying_structural_events_reproduces_the_final_graph() {
    let registry = standard_registry();
    let initial = build_composite(PBR_ARCH, &registry).unwrap();
    let outcome = pbr_failover(&FailoverSpec {
        crash_at: 130,
        ..Default::default()
    })
    .unwrap();
    let replayed = replay_structural(&initial, outcome.sim.log().records()).unwrap();
    assert_eq!(
        structural(&replayed.canonical_dump()),
        structural(&outcome.sim.graph().canonical_dump())
    );
}

#[test]
fn stopped_client_queues_then_replays_in_order_after_rewire() {
    let k = 7u64;
    let mut sim = pbr_sim();
    let paths = pbr_paths();
    sim.set_lifecycle(&paths.client, LifecycleTarget::Stopped)
        .unwrap();
    for seq in 1..=k {
        let err = sim
            .call_service(
                &paths.client_control,
                Invocation::new("submit", vec![Value::Int(1)], RequestId::new("drive", seq)),
            )
            .unwrap_err();
        assert!(matches!(err, KernelError::Timeout { .. }));
    }
    // Rewire to the backup while quiescent.
    let reference = Endpoint::new(paths.client.clone(), "computeService");
    let primary = Endpoint::new(paths.primary.clone(), "computeService");
    let backup = Endpoint::new(paths.backup.clone(), "computeService");
    sim.remove_wire(&reference, &primary).unwrap();
    sim.add_wire(&reference, &backup).unwrap();
    sim.set_lifecycle(&paths.client, LifecycleTarget::Started)
        .unwrap();
    sim.run_until(Until::Time(0));

    let client_subject = paths.client.to_string();
    let replies: Vec<i64> = sim
        .log()
        .of_kind(EventKind::Reply)
        .filter(|r| r.subject == client_subject && r.field("op") == Some("submit"))
        .filter_map(|r| r.field("value")?.parse().ok())
        .collect();
    let expected: Vec<i64> = (1..=k as i64).collect();
    assert_eq!(replies, expected, "exactly k replies, in order");

    // No duplicates at the server: invocation count = distinct request ids.
    let backup_server = paths.backup_server.to_string();
    let served = sim
        .log()
        .of_kind(EventKind::Dispatch)
        .filter(|r| r.subject == backup_server && r.field("op") == Some("increment"))
        .count();
    assert_eq!(served as u64, k);
    assert_emitters_live(sim.log());
}

#[test]
fn failover_preserves_acknowledged_state_for_sampled_crash_instants() {
    for crash_at in [0, 60, 125, 250, 333, 449, 450, 451, 600] {
        let outcome = pbr_failover(&FailoverSpec {
            crash_at,
            ..Default::default()
        })
        .unwrap();
        outcome
            .check()
            .unwrap_or_else(|e| panic!("crash_at={crash_at}: {e}"));
        let acked = outcome.acked_before_crash.len() as i64;
        assert_eq!(
            outcome.backup_state_at_failover, acked,
            "crash_at={crash_at}"
        );
        assert_eq!(outcome.final_backup_state, 10, "crash_at={crash_at}");
    }
}

#[test]
fn duplex_scenario_masks_the_default_transient() {
    let outcome = duplex_plus_tr(&DuplexSpec::default()).unwrap();
    outcome.check().unwrap();
    // The third integer reply corrupts request 3 in phase 1.
    assert_eq!(outcome.phase1_corrupted, vec![3]);
    assert_eq!(outcome.phase1.outcomes[2], RequestOutcome::Value(2));
    assert_eq!(outcome.oracle[2], RequestOutcome::Value(3));
    assert!(outcome.phase2_corrupted.is_empty());
    // Phase 2 really was challenged: the interceptor retried.
    assert!(outcome
        .phase2
        .sim
        .log()
        .of_kind(EventKind::Warning)
        .any(|r| r.detail.contains("reply mismatch")));
}

#[test]
fn duplex_scenario_with_empty_plan_is_clean() {
    let spec = DuplexSpec {
        transients: vec![],
        ..Default::default()
    };
    let outcome = duplex_plus_tr(&spec).unwrap();
    outcome.check().unwrap();
    assert!(outcome.phase1_corrupted.is_empty());
    assert!(outcome.phase2_corrupted.is_empty());
}

#[test]
fn scenarios_are_deterministic() {
    let run_failover = || {
        let outcome = pbr_failover(&FailoverSpec::default()).unwrap();
        outcome.sim.log().to_tsv()
    };
    assert_eq!(run_failover(), run_failover());

    let run_duplex = || {
        let outcome = duplex_plus_tr(&DuplexSpec::default()).unwrap();
        (
            outcome.phase1.sim.log().to_tsv(),
            outcome.phase2.sim.log().to_tsv(),
        )
    };
    assert_eq!(run_duplex(), run_duplex());
}

#[test]
fn clock_is_monotone_across_whole_logs() {
    let outcome = pbr_failover(&FailoverSpec::default()).unwrap();
    let records = outcome.sim.log().records();
    for pair in records.windows(2) {
        assert!(pair[0].time <= pair[1].time);
        assert!(pair[0].seq < pair[1].seq);
    }
}

#[test]
fn crashed_subtree_swallows_invocations_until_failover() {
    let mut sim = pbr_sim();
    let paths = pbr_paths();
    sim.inject_crash(&paths.primary, 40).unwrap();
    sim.run_until(Until::Time(40));
    let err = sim
        .call_service(
            &Endpoint::new(paths.primary.clone(), "computeService"),
            Invocation::new("increment", vec![Value::Int(1)], RequestId::new("A", 1))
                .with_deadline(sim.now() + 500),
        )
        .unwrap_err();
    assert_eq!(err, KernelError::Timeout { at: 540 });
    // The protocol behaviors never ran.
    let protocol = paths.primary_protocol.to_string();
    assert!(!sim
        .log()
        .of_kind(EventKind::Reply)
        .any(|r| r.subject == protocol));
}

#[test]
fn detector_keeps_probing_after_failover_without_new_suspicions() {
    let outcome = pbr_failover(&FailoverSpec::default()).unwrap();
    let log = outcome.sim.log();
    assert_eq!(log.of_kind(EventKind::Suspicion).count(), 1);
    let suspicion = log.first(EventKind::Suspicion).unwrap().seq;
    let detector = NodePath::root()
        .child("pbr")
        .child("failure_detector")
        .to_string();
    assert!(log
        .of_kind(EventKind::Warning)
        .any(|r| r.subject == detector && r.seq > suspicion));
}

#[test]
fn graph_invariants_hold_after_whole_scenarios() {
    let outcome = pbr_failover(&FailoverSpec::default()).unwrap();
    assert!(outcome.sim.graph().validate().is_empty());
    let duplex = duplex_plus_tr(&DuplexSpec::default()).unwrap();
    assert!(duplex.phase1.sim.graph().validate().is_empty());
    assert!(duplex.phase2.sim.graph().validate().is_empty());
}
