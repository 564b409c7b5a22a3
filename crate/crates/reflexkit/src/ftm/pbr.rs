//! Primary-backup replication protocol behaviors.
//!
//! The primary-side protocol forwards each fresh request to the functional
//! server, snapshots the server state, ships a checkpoint to the backup and
//! only then replies (warm passive: acknowledged state survives failover).
//! Duplicate request ids are served from the cached reply without touching
//! the server. The backup-side protocol applies checkpoints, and answers
//! `computeService` requests from the restored state once traffic reaches
//! it; rewiring the client is the whole promotion, no role message exists.

use std::collections::BTreeMap;

use crate::harness::BehaviorCtx;
use crate::kernel::behavior::{Behavior, BehaviorFault};
use crate::kernel::graph::{Invocation, Reply, RequestId, Value};

/// A state snapshot plus the request that produced it and the reply sent for
/// that request. The reply rides along so the receiving replica can serve
/// duplicates of the last acknowledged request after failover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub snapshot: Vec<u8>,
    pub last: RequestId,
    pub reply: Value,
}

impl Checkpoint {
    /// Encodes into invocation arguments:
    /// `[snapshot-hex, client, seq, reply-tag, reply-repr]`.
    pub fn encode(&self) -> Vec<Value> {
        let (tag, repr) = match &self.reply {
            Value::Int(v) => ("int", v.to_string()),
            Value::Text(v) => ("text", v.clone()),
        };
        vec![
            Value::Text(hex::encode(&self.snapshot)),
            Value::Text(self.last.client.clone()),
            Value::Int(self.last.seq as i64),
            Value::Text(tag.to_string()),
            Value::Text(repr),
        ]
    }

    pub fn decode(arguments: &[Value]) -> Result<Self, BehaviorFault> {
        let bad = || BehaviorFault::new("malformed checkpoint");
        let [Value::Text(snap_hex), Value::Text(client), Value::Int(seq), Value::Text(tag), Value::Text(repr)] =
            arguments
        else {
            return Err(bad());
        };
        let snapshot = hex::decode(snap_hex).map_err(|_| bad())?;
        let reply = match tag.as_str() {
            "int" => Value::Int(repr.parse().map_err(|_| bad())?),
            "text" => Value::Text(repr.clone()),
            _ => return Err(bad()),
        };
        if *seq < 0 {
            return Err(bad());
        }
        Ok(Checkpoint {
            snapshot,
            last: RequestId::new(client.clone(), *seq as u64),
            reply,
        })
    }
}

/// Per-client last processed sequence number and the reply cached for it.
#[derive(Debug, Default, Clone)]
pub struct ProtocolTable {
    per_client: BTreeMap<String, (u64, Value)>,
}

impl ProtocolTable {
    /// Classifies an incoming request id against the table.
    fn classify(&self, rid: &RequestId) -> RequestClass {
        match self.per_client.get(&rid.client) {
            Some((last, cached)) if rid.seq == *last => RequestClass::Duplicate(cached.clone()),
            Some((last, _)) if rid.seq < *last => RequestClass::Stale { last: *last },
            _ => RequestClass::Fresh,
        }
    }

    fn record(&mut self, rid: &RequestId, reply: Value) {
        self.per_client.insert(rid.client.clone(), (rid.seq, reply));
    }
}

enum RequestClass {
    Fresh,
    Duplicate(Value),
    Stale { last: u64 },
}

/// Primary-side protocol: request processing plus heartbeat service.
#[derive(Debug, Default)]
pub struct PrimaryProtocol {
    table: ProtocolTable,
    checkpoint_seq: u64,
}

impl PrimaryProtocol {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Behavior for PrimaryProtocol {
    fn handle(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        service: &str,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        match service {
            "heartbeat" => match invocation.operation.as_str() {
                "ping" => Ok(Reply::text("pong")),
                other => Err(BehaviorFault::new(format!(
                    "unknown heartbeat operation `{other}`"
                ))),
            },
            "computeService" => self.handle_request(ctx, invocation),
            other => Err(BehaviorFault::new(format!(
                "no behavior for service `{other}`"
            ))),
        }
    }
}

impl PrimaryProtocol {
    fn handle_request(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        let rid = &invocation.request_id;
        match self.table.classify(rid) {
            RequestClass::Duplicate(cached) => {
                ctx.log_warning(format!("duplicate rid={rid}, serving cached reply"));
                return Ok(Reply { value: cached });
            }
            RequestClass::Stale { last } => {
                return Err(BehaviorFault::new(format!(
                    "stale sequence: rid={rid} after seq {last} was processed"
                )));
            }
            RequestClass::Fresh => {}
        }

        // Functional call; server faults propagate to the caller.
        let reply = ctx
            .invoke("server", invocation.clone())
            .map_err(|e| BehaviorFault::new(format!("server invocation failed: {e}")))?;

        // Snapshot and ship the checkpoint strictly before replying.
        let snapshot = self.snapshot(ctx)?;
        let checkpoint = Checkpoint {
            snapshot,
            last: rid.clone(),
            reply: reply.value.clone(),
        };
        ctx.log_checkpoint(format!(
            "rid={rid} state={}",
            String::from_utf8_lossy(&checkpoint.snapshot)
        ));
        self.checkpoint_seq += 1;
        let ck_invocation = Invocation::new(
            "apply-checkpoint",
            checkpoint.encode(),
            RequestId::new("ckpt", self.checkpoint_seq),
        );
        if let Err(e) = ctx.invoke("checkpoint", ck_invocation) {
            // Degraded mode: an unreachable backup must not refuse service.
            ctx.log_warning(format!("checkpoint send failed: {e} (degraded)"));
        }

        self.table.record(rid, reply.value.clone());
        Ok(reply)
    }

    fn snapshot(&self, ctx: &mut BehaviorCtx<'_>) -> Result<Vec<u8>, BehaviorFault> {
        self.state_op(ctx, "get-state", Vec::new())
            .map(|v| match v {
                Value::Text(s) => s.into_bytes(),
                Value::Int(v) => v.to_string().into_bytes(),
            })
    }

    fn state_op(
        &self,
        ctx: &mut BehaviorCtx<'_>,
        operation: &str,
        arguments: Vec<Value>,
    ) -> Result<Value, BehaviorFault> {
        let rid = RequestId::new("ckpt-state", self.checkpoint_seq + 1);
        ctx.invoke("server", Invocation::new(operation, arguments, rid))
            .map(|r| r.value)
            .map_err(|e| BehaviorFault::new(format!("{operation} failed: {e}")))
    }
}

/// Backup-side protocol: applies checkpoints; serves requests from restored
/// state once the client is rewired to it.
#[derive(Debug, Default)]
pub struct BackupProtocol {
    table: ProtocolTable,
    state_seq: u64,
}

impl BackupProtocol {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Behavior for BackupProtocol {
    fn handle(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        service: &str,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        match service {
            "checkpoint" => match invocation.operation.as_str() {
                "apply-checkpoint" => self.apply_checkpoint(ctx, invocation),
                other => Err(BehaviorFault::new(format!(
                    "unknown checkpoint operation `{other}`"
                ))),
            },
            "computeService" => self.handle_request(ctx, invocation),
            other => Err(BehaviorFault::new(format!(
                "no behavior for service `{other}`"
            ))),
        }
    }
}

impl BackupProtocol {
    fn apply_checkpoint(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        let checkpoint = Checkpoint::decode(&invocation.arguments)?;
        let snapshot = String::from_utf8(checkpoint.snapshot.clone())
            .map_err(|_| BehaviorFault::new("snapshot is not valid UTF-8"))?;
        self.state_seq += 1;
        ctx.invoke(
            "server",
            Invocation::new(
                "set-state",
                vec![Value::Text(snapshot)],
                RequestId::new("restore", self.state_seq),
            ),
        )
        .map_err(|e| BehaviorFault::new(format!("snapshot restore failed: {e}")))?;
        self.table.record(&checkpoint.last, checkpoint.reply);
        Ok(Reply::text("ack"))
    }

    fn handle_request(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        let rid = &invocation.request_id;
        match self.table.classify(rid) {
            RequestClass::Duplicate(cached) => {
                ctx.log_warning(format!("duplicate rid={rid}, serving cached reply"));
                return Ok(Reply { value: cached });
            }
            RequestClass::Stale { last } => {
                return Err(BehaviorFault::new(format!(
                    "stale sequence: rid={rid} after seq {last} was processed"
                )));
            }
            RequestClass::Fresh => {}
        }
        let reply = ctx
            .invoke("server", invocation.clone())
            .map_err(|e| BehaviorFault::new(format!("server invocation failed: {e}")))?;
        self.table.record(rid, reply.value.clone());
        Ok(reply)
    }
}


#[cfg(test)]
mod sim_tests {
    use super::*;
    use crate::ftm::{standard_registry, PBR_ARCH};
    use crate::harness::{EventKind, Simulation};
    use crate::kernel::build_composite;
    use crate::kernel::path::{Endpoint, NodePath};

    fn pbr_sim() -> Simulation {
        let registry = standard_registry();
        let graph = build_composite(PBR_ARCH, &registry).unwrap();
        let mut sim = Simulation::new(graph, &registry);
        sim.start_all().unwrap();
        sim
    }

    fn pbr() -> NodePath {
        NodePath::root().child("pbr")
    }

    fn compute(
        sim: &mut Simulation,
        client: &str,
        seq: u64,
        amount: i64,
    ) -> Result<i64, crate::kernel::KernelError> {
        let invocation = Invocation::new(
            "increment",
            vec![Value::Int(amount)],
            RequestId::new(client, seq),
        );
        sim.call_service(
            &Endpoint::new(pbr().child("primary"), "computeService"),
            invocation,
        )
        .map(|r| r.value.as_int().unwrap())
    }

    fn counter_state(sim: &mut Simulation, replica: &str) -> String {
        let endpoint = Endpoint::new(pbr().child(replica).child("server"), "computeService");
        let reply = sim
            .call_service(
                &endpoint,
                Invocation::new("get-state", vec![], RequestId::new("probe", 1)),
            )
            .unwrap();
        reply.value.as_text().unwrap().to_string()
    }

    fn server_invocations(sim: &Simulation, replica: &str) -> usize {
        let subject = pbr().child(replica).child("server").to_string();
        sim.log()
            .of_kind(EventKind::Dispatch)
            .filter(|r| r.subject == subject && r.field("op") == Some("increment"))
            .count()
    }

    #[test]
    fn fresh_request_checkpoints_before_replying() {
        let mut sim = pbr_sim();
        for (seq, amount) in [(1, 2), (2, 3), (3, 5)] {
            compute(&mut sim, "A", seq, amount).unwrap();
        }
        // Counter now at 10; oracle is the sequential replay.
        assert_eq!(counter_state(&mut sim, "primary"), "10");

        let reply = compute(&mut sim, "A", 4, 5).unwrap();
        assert_eq!(reply, 15);

        let protocol = pbr().child("primary").child("protocol").to_string();
        let checkpoint = sim
            .log()
            .of_kind(EventKind::Checkpoint)
            .find(|r| r.field("rid") == Some("A:4"))
            .expect("checkpoint for A:4");
        assert_eq!(checkpoint.field("state"), Some("15"));
        let reply_record = sim
            .log()
            .of_kind(EventKind::Reply)
            .find(|r| r.subject == protocol && r.field("rid") == Some("A:4"))
            .expect("reply for A:4");
        assert!(
            checkpoint.seq < reply_record.seq,
            "checkpoint must precede the reply"
        );

        // The backup follows the primary.
        assert_eq!(counter_state(&mut sim, "backup"), "15");
    }

    #[test]
    fn duplicate_request_is_served_from_cache() {
        let mut sim = pbr_sim();
        assert_eq!(compute(&mut sim, "A", 1, 2).unwrap(), 2);
        assert_eq!(compute(&mut sim, "A", 2, 3).unwrap(), 5);
        assert_eq!(compute(&mut sim, "A", 3, 5).unwrap(), 10);
        assert_eq!(compute(&mut sim, "A", 4, 5).unwrap(), 15);
        let before = server_invocations(&sim, "primary");
        let checkpoints_before = sim.log().of_kind(EventKind::Checkpoint).count();

        assert_eq!(compute(&mut sim, "A", 4, 5).unwrap(), 15);

        assert_eq!(
            server_invocations(&sim, "primary"),
            before,
            "no server call on duplicate"
        );
        assert_eq!(
            sim.log().of_kind(EventKind::Checkpoint).count(),
            checkpoints_before,
            "no checkpoint on duplicate"
        );
    }

    #[test]
    fn stale_sequence_is_rejected() {
        let mut sim = pbr_sim();
        compute(&mut sim, "A", 3, 1).unwrap();
        compute(&mut sim, "A", 4, 1).unwrap();
        let err = compute(&mut sim, "A", 3, 1).unwrap_err();
        assert!(err.to_string().contains("stale sequence"), "{err}");
    }

    #[test]
    fn sequence_numbers_are_tracked_per_client() {
        let mut sim = pbr_sim();
        assert_eq!(compute(&mut sim, "A", 1, 1).unwrap(), 1);
        assert_eq!(compute(&mut sim, "B", 1, 1).unwrap(), 2);
        assert_eq!(compute(&mut sim, "A", 2, 1).unwrap(), 3);
        // Duplicates per client, not global.
        assert_eq!(compute(&mut sim, "B", 1, 0).unwrap(), 2);
    }

    #[test]
    fn applying_a_checkpoint_restores_state_and_is_idempotent() {
        let mut sim = pbr_sim();
        let checkpoint = Checkpoint {
            snapshot: b"15".to_vec(),
            last: RequestId::new("A", 4),
            reply: Value::Int(15),
        };
        let target = Endpoint::new(pbr().child("backup"), "checkpoint");
        for seq in 1..=2 {
            let reply = sim
                .call_service(
                    &target,
                    Invocation::new(
                        "apply-checkpoint",
                        checkpoint.encode(),
                        RequestId::new("ck", seq),
                    ),
                )
                .unwrap();
            assert_eq!(reply, Reply::text("ack"));
            assert_eq!(counter_state(&mut sim, "backup"), "15");
        }
        // Restored dedup table serves the checkpointed request from cache.
        let dup = Invocation::new("increment", vec![Value::Int(5)], RequestId::new("A", 4));
        let reply = sim
            .call_service(&Endpoint::new(pbr().child("backup"), "computeService"), dup)
            .unwrap();
        assert_eq!(reply.value, Value::Int(15));
        assert_eq!(server_invocations(&sim, "backup"), 0);
    }

    #[test]
    fn checkpoint_stream_keeps_backup_equal_to_primary() {
        let mut sim = pbr_sim();
        for seq in 1..=8 {
            compute(&mut sim, "A", seq, seq as i64).unwrap();
        }
        assert_eq!(
            counter_state(&mut sim, "primary"),
            counter_state(&mut sim, "backup")
        );
        assert_eq!(counter_state(&mut sim, "primary"), "36");
    }

    #[test]
    fn unbound_checkpoint_reference_degrades_with_a_warning() {
        let registry = standard_registry();
        let graph = build_composite(PBR_ARCH, &registry).unwrap();
        let mut sim = Simulation::new(graph, &registry);
        let reference = Endpoint::new(pbr().child("primary"), "checkpoint");
        let service = Endpoint::new(pbr().child("backup"), "checkpoint");
        sim.remove_wire(&reference, &service).unwrap();
        sim.start_all().unwrap();

        assert_eq!(compute(&mut sim, "A", 1, 7).unwrap(), 7);
        assert!(sim
            .log()
            .of_kind(EventKind::Warning)
            .any(|r| r.detail.contains("checkpoint send failed")));
        assert_eq!(counter_state(&mut sim, "backup"), "0");
    }

    #[test]
    fn dedup_holds_for_arbitrary_resend_patterns() {
        let mut sim = pbr_sim();
        let sends = [
            (1, 1),
            (1, 1),
            (2, 2),
            (1, 1),
            (3, 3),
            (2, 2),
            (3, 3),
            (3, 3),
        ];
        for (seq, amount) in sends {
            let _ = compute(&mut sim, "A", seq, amount);
        }
        let distinct = 3;
        assert_eq!(server_invocations(&sim, "primary"), distinct);
    }
}
