//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p reflexkit-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use reflexkit::ftm::{standard_registry, PBR_ARCH, SWITCH_SERVER_RCFG};
use reflexkit::harness::{EventKind, Simulation};
use reflexkit::kernel::graph::{Invocation, Lifecycle, LifecycleTarget, RequestId, Value};
use reflexkit::kernel::{build_composite, Endpoint, KernelError};
use reflexkit::scenario::{duplex_plus_tr, pbr_failover, pbr_paths, DuplexSpec, FailoverSpec};
use reflexkit::scriptlang::{
    parse_script, print_script, run_action, step_session, ActionDef, Arg, Axis, Head, Mode,
    PathExpr, Primitive, RunOptions, ScriptAst, Step, StepOutcome, Stmt,
};

fn fresh_sim() -> Simulation {
    let registry = standard_registry();
    Simulation::new(build_composite(PBR_ARCH, &registry).unwrap(), &registry)
}

#[test]
fn criterion_1_failover_script_fidelity() {
    let started = Instant::now();

    let ast = parse_script(SWITCH_SERVER_RCFG).expect("verbatim script must parse");
    assert_eq!(ast.actions.len(), 1);
    let action = &ast.actions[0];
    assert_eq!(action.name, "switchServer");
    assert_eq!(action.body.len(), 11, "11 statements");
    assert_eq!(action.assignments(), 7, "7 assignments");
    assert_eq!(action.calls(), 4, "4 primitive calls");

    let mut sim = fresh_sim();
    let report = run_action(&mut sim, &ast, "switchServer", &[], RunOptions::default());
    assert!(report.error.is_none(), "{:?}", report.error);

    let paths = pbr_paths();
    let client_ref = Endpoint::new(paths.client.clone(), "computeService");
    let wire = sim
        .graph()
        .wire_from(&client_ref)
        .expect("client must be wired");
    assert_eq!(
        wire.service,
        Endpoint::new(paths.backup.clone(), "computeService")
    );
    let primary_service = Endpoint::new(paths.primary.clone(), "computeService");
    assert!(
        !sim.graph().wires().any(|w| w.service == primary_service),
        "no wire to the primary remains"
    );
    assert_eq!(
        sim.graph().component(&paths.client).unwrap().lifecycle,
        Lifecycle::Started
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, bound is 1s");
    println!("[PASS] criterion 1: shipped failover-script fidelity (11 statements, rewired to backup, client STARTED) in {elapsed:?}");
}

/// Crash grid shared by criteria 2 and 3: every virtual-time unit across a
/// 10-request run (requests land at t = 0, 50, ..., 450).
const CRASH_GRID_END: u64 = 500;

#[test]
fn criterion_2_failover_safety_over_the_crash_grid() {
    let started = Instant::now();
    for crash_at in 0..=CRASH_GRID_END {
        let outcome = pbr_failover(&FailoverSpec {
            crash_at,
            ..Default::default()
        })
        .unwrap_or_else(|e| panic!("crash_at={crash_at}: {e}"));
        let acked = outcome.acked_before_crash.len() as i64;
        assert_eq!(
            outcome.backup_state_at_failover, acked,
            "crash_at={crash_at}: backup state after switchServer must equal the acknowledged requests"
        );
        assert_eq!(
            outcome.final_backup_state, 10,
            "crash_at={crash_at}: every request must land exactly once"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "took {elapsed:?}, bound is 10s"
    );
    println!(
        "[PASS] criterion 2: failover safety across crash instants 0..={CRASH_GRID_END} in {elapsed:?}"
    );
}

#[test]
fn criterion_3_detection_bound_over_the_crash_grid() {
    for crash_at in 0..=CRASH_GRID_END {
        let outcome = pbr_failover(&FailoverSpec {
            crash_at,
            ..Default::default()
        })
        .unwrap_or_else(|e| panic!("crash_at={crash_at}: {e}"));
        let t = outcome.suspicion_at;
        assert!(
            t > crash_at,
            "crash_at={crash_at}: suspicion at {t} not after the crash"
        );
        assert!(
            t <= crash_at + 3 * 100 + 100,
            "crash_at={crash_at}: suspicion at {t} beyond crash + 3*100 + 100"
        );
    }
    println!(
        "[PASS] criterion 3: crash < t_suspect <= crash + 400 across crash instants 0..={CRASH_GRID_END}"
    );
}

#[test]
fn criterion_4_time_redundancy_masks_single_transients() {
    let requests = 5u64;
    let server = pbr_paths().primary_server;
    for k in 1..=requests {
        // One transient per logical request: without the interceptor the
        // k-th integer reply is exactly request k's reply.
        let spec = DuplexSpec {
            requests,
            transients: vec![(server.clone(), k)],
            seed: 0,
            script: None,
        };
        let outcome = duplex_plus_tr(&spec).unwrap();
        assert_eq!(
            outcome.phase1_corrupted,
            vec![k],
            "request {k}: phase 1 must exhibit the corrupted reply"
        );
        assert!(
            outcome.phase2_corrupted.is_empty(),
            "request {k}: phase 2 must mask it, saw {:?}",
            outcome.phase2_corrupted
        );
        outcome.check().unwrap();
    }
    println!(
        "[PASS] criterion 4: every single transient per logical request corrupts phase 1 and is masked in phase 2"
    );
}

#[test]
fn criterion_5_quiescence_and_no_loss() {
    for k in 0..=20u64 {
        let mut sim = fresh_sim();
        sim.start_all().unwrap();
        let paths = pbr_paths();
        sim.set_lifecycle(&paths.client, LifecycleTarget::Stopped)
            .unwrap();
        let stop_seq = sim.log().len() as u64 - 1;
        for seq in 1..=k {
            let err = sim
                .call_service(
                    &paths.client_control,
                    Invocation::new("submit", vec![Value::Int(1)], RequestId::new("drive", seq)),
                )
                .unwrap_err();
            assert!(
                matches!(err, KernelError::Timeout { .. }),
                "k={k} seq={seq}: {err}"
            );
        }
        let reference = Endpoint::new(paths.client.clone(), "computeService");
        sim.remove_wire(
            &reference,
            &Endpoint::new(paths.primary.clone(), "computeService"),
        )
        .unwrap();
        sim.add_wire(
            &reference,
            &Endpoint::new(paths.backup.clone(), "computeService"),
        )
        .unwrap();
        sim.set_lifecycle(&paths.client, LifecycleTarget::Started)
            .unwrap();
        let start_seq = sim.log().len() as u64 - 1;
        sim.run_until(reflexkit::Until::Time(0));

        // Quiescence: nothing was emitted by the client while stopped.
        let client_subject = paths.client.to_string();
        assert!(
            !sim.log().records().iter().any(|r| {
                r.seq > stop_seq
                    && r.seq < start_seq
                    && r.kind == EventKind::Dispatch
                    && r.field("from") == Some(client_subject.as_str())
            }),
            "k={k}: stopped client emitted an invocation"
        );

        // No loss, in order: exactly k replies with the running counts.
        let replies: Vec<i64> = sim
            .log()
            .of_kind(EventKind::Reply)
            .filter(|r| r.subject == client_subject && r.field("op") == Some("submit"))
            .filter_map(|r| r.field("value")?.parse().ok())
            .collect();
        let expected: Vec<i64> = (1..=k as i64).collect();
        assert_eq!(replies, expected, "k={k}");

        // No duplicates at the server: invocations = distinct request ids.
        let backup_server = paths.backup_server.to_string();
        let served = sim
            .log()
            .of_kind(EventKind::Dispatch)
            .filter(|r| r.subject == backup_server && r.field("op") == Some("increment"))
            .count() as u64;
        assert_eq!(served, k, "k={k}");
    }
    println!("[PASS] criterion 5: stop/enqueue/rewire/start delivers exactly k replies in order for k in 0..=20");
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reflexkit"))
}

fn assets() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../reflexkit/assets"))
}

#[test]
fn criterion_6_byte_identical_logs_for_every_scenario() {
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let run = |args: &[&str], log: &Path| {
        let status = binary()
            .args(args)
            .arg("--log")
            .arg(log)
            .env("REFLEXKIT_SEED", "0")
            .status()
            .expect("spawn reflexkit");
        assert!(status.success(), "command {args:?} failed");
        std::fs::read(log).expect("log file")
    };

    for (name, args) in [
        (
            "pbr-failover",
            vec![
                "scenario",
                "pbr-failover",
                "--requests",
                "10",
                "--crash-at",
                "450",
            ],
        ),
        (
            "duplex-plus-tr",
            vec!["scenario", "duplex-plus-tr", "--requests", "5"],
        ),
    ] {
        let first = run(&args, &tmp.join(format!("{name}-a.tsv")));
        let second = run(&args, &tmp.join(format!("{name}-b.tsv")));
        assert_eq!(first, second, "{name} logs must be byte-identical");
        assert!(first.starts_with(b"#reflexkit-log v1 seed=0\n"));
    }

    // `run` with identical arguments is byte-identical too.
    let arch = assets().join("pbr.arch");
    let script = assets().join("switchServer.rcfg");
    let run_args = |log: &Path| {
        let status = binary()
            .arg("run")
            .arg("--arch")
            .arg(&arch)
            .arg("--script")
            .arg(&script)
            .arg("--until")
            .arg("100")
            .arg("--log")
            .arg(log)
            .status()
            .expect("spawn reflexkit");
        assert!(status.success());
        std::fs::read(log).expect("log file")
    };
    let first = run_args(&tmp.join("run-a.tsv"));
    let second = run_args(&tmp.join("run-b.tsv"));
    assert_eq!(first, second);

    println!("[PASS] criterion 6: two runs of every scenario produce byte-identical log files");
}

#[test]
fn criterion_7_transactional_rollback_at_every_statement() {
    let ast = parse_script(SWITCH_SERVER_RCFG).unwrap();
    for fail_at in 1..=11usize {
        let mut sim = fresh_sim();
        let snapshot = sim.graph().clone();
        let options = RunOptions {
            mode: Mode::Transactional,
            fail_at: Some(fail_at),
        };
        let report = run_action(&mut sim, &ast, "switchServer", &[], options);
        assert!(report.error.is_some(), "statement {fail_at} must fail");
        assert_eq!(
            sim.graph(),
            &snapshot,
            "statement {fail_at}: graph must deeply equal the pre-action snapshot"
        );
    }
    println!("[PASS] criterion 7: forced failure at each of the 11 statements leaves the graph untouched");
}

/// Small deterministic generator for round-trip scripts.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[(self.next() as usize) % items.len()]
    }
}

fn generated_script(seed: u64) -> ScriptAst {
    let mut rng = Lcg(seed.wrapping_add(0x9e3779b97f4a7c15));
    let names = ["alpha", "beta-1", "gamma_2", "relay", "fix-up"];
    let selectors = [
        "pbr",
        "client_machine",
        "primary",
        "computeService",
        "heartbeat",
        "x-1",
    ];
    let axes = [Axis::Child, Axis::Service, Axis::Reference, Axis::Property];
    let primitives = [
        Primitive::SetState,
        Primitive::AddWire,
        Primitive::RemoveWire,
    ];
    let strings = ["STARTED", "STOPPED", "plain text", ""];

    let mut actions = Vec::new();
    let action_count = 1 + rng.next() as usize % 2;
    for a in 0..action_count {
        let params: Vec<String> = (0..rng.next() % 3).map(|i| format!("p{i}")).collect();
        let mut assigned: Vec<String> = params.clone();
        let mut body = Vec::new();
        for s in 0..rng.next() % 9 {
            let steps: Vec<Step> = (0..rng.next() % 4)
                .map(|_| Step {
                    axis: *rng.pick(&axes),
                    name: rng.pick(&selectors).to_string(),
                })
                .collect();
            let head = if assigned.is_empty() || rng.next().is_multiple_of(3) {
                Head::Domain
            } else {
                Head::Var(rng.pick(&assigned).clone())
            };
            if rng.next().is_multiple_of(2) {
                let var = format!("v{s}");
                body.push(Stmt::Assign {
                    var: var.clone(),
                    expr: PathExpr { head, steps },
                });
                if !assigned.contains(&var) {
                    assigned.push(var);
                }
            } else {
                let args = (0..rng.next() % 3)
                    .map(|_| {
                        if rng.next().is_multiple_of(2) {
                            Arg::Str(rng.pick(&strings).to_string())
                        } else {
                            let head = if assigned.is_empty() {
                                Head::Domain
                            } else {
                                Head::Var(rng.pick(&assigned).clone())
                            };
                            Arg::Path(PathExpr {
                                head,
                                steps: vec![Step {
                                    axis: *rng.pick(&axes),
                                    name: rng.pick(&selectors).to_string(),
                                }],
                            })
                        }
                    })
                    .collect();
                body.push(Stmt::Call {
                    primitive: *rng.pick(&primitives),
                    args,
                });
            }
        }
        actions.push(ActionDef {
            name: format!("{}_{a}", rng.pick(&names)),
            params,
            body,
        });
    }
    ScriptAst { actions }
}

#[test]
fn criterion_8_round_trips() {
    // Parse/print round-trip: the shipped failover script...
    let fig = parse_script(SWITCH_SERVER_RCFG).unwrap();
    assert_eq!(parse_script(&print_script(&fig)).unwrap(), fig);
    // ...plus a 50-script generated corpus.
    for seed in 0..50u64 {
        let ast = generated_script(seed);
        let printed = print_script(&ast);
        let reparsed = parse_script(&printed).unwrap_or_else(|e| {
            panic!("seed {seed}: printed corpus script failed to parse: {e}\n{printed}")
        });
        assert_eq!(reparsed, ast, "seed {seed}");
    }

    // Step/run final-graph equivalence on all shipped scripts.
    for (text, action, arch) in [
        (SWITCH_SERVER_RCFG, "switchServer", PBR_ARCH),
        (
            reflexkit::ftm::INSERT_TIME_REDUNDANCY_RCFG,
            "insertTimeRedundancy",
            reflexkit::ftm::PBR_TR_ARCH,
        ),
    ] {
        let registry = standard_registry();
        let ast = parse_script(text).unwrap();

        let mut ran = Simulation::new(build_composite(arch, &registry).unwrap(), &registry);
        let options = RunOptions {
            mode: Mode::Commit,
            fail_at: None,
        };
        let report = run_action(&mut ran, &ast, action, &[], options);
        assert!(report.error.is_none(), "{action}: {:?}", report.error);

        let mut stepped = Simulation::new(build_composite(arch, &registry).unwrap(), &registry);
        {
            let mut session = step_session(&mut stepped, &ast, action, &[]).unwrap();
            while !matches!(session.step().unwrap(), StepOutcome::Done) {}
        }
        assert_eq!(
            ran.graph().canonical_dump(),
            stepped.graph().canonical_dump(),
            "{action}: stepped and whole-run graphs must match"
        );
    }
    println!("[PASS] criterion 8: parse/print round-trips (shipped script + 50 generated) and step/run equivalence");
}
