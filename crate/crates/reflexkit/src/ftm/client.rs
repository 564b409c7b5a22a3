//! Scenario client: issues sequenced `increment` requests with a fixed
//! deadline through its `computeService` reference.
//!
//! A timed-out or unbound request is parked; the harness pokes `retry` after
//! it has rebound the reference, and the client re-issues the parked
//! requests under their original request ids, which exercises duplicate
//! suppression downstream.

use crate::harness::BehaviorCtx;
use crate::kernel::behavior::{Behavior, BehaviorFault};
use crate::kernel::graph::{Invocation, Reply, RequestId, Value};
use crate::kernel::KernelError;

pub const DEFAULT_DEADLINE: u64 = 500;

#[derive(Debug, Default)]
pub struct ClientBehavior {
    seq: u64,
    pending: Vec<(u64, i64)>,
}

impl ClientBehavior {
    pub fn new() -> Self {
        Self::default()
    }

    fn client_id(ctx: &BehaviorCtx<'_>) -> String {
        ctx.property("client_id")
            .ok()
            .and_then(|v| v.as_text().map(str::to_string))
            .unwrap_or_else(|| "c1".to_string())
    }

    fn deadline(ctx: &BehaviorCtx<'_>) -> u64 {
        ctx.property("deadline")
            .ok()
            .and_then(|v| v.as_int())
            .filter(|v| *v > 0)
            .map(|v| v as u64)
            .unwrap_or(DEFAULT_DEADLINE)
    }

    /// One attempt at request `seq`. Timeouts and unbound references park
    /// the request for a later retry; other failures propagate.
    fn attempt(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        seq: u64,
        amount: i64,
    ) -> Result<Option<Reply>, BehaviorFault> {
        let rid = RequestId::new(Self::client_id(ctx), seq);
        let deadline = ctx.now() + Self::deadline(ctx);
        let request = Invocation::new("increment", vec![Value::Int(amount)], rid.clone())
            .with_deadline(deadline);
        match ctx.invoke("computeService", request) {
            Ok(reply) => Ok(Some(reply)),
            Err(KernelError::Timeout { at }) => {
                ctx.log_warning(format!(
                    "request rid={rid} timed out at t={at}; parked for retry"
                ));
                self.pending.push((seq, amount));
                Ok(None)
            }
            Err(KernelError::UnboundReference(e)) => {
                ctx.log_warning(format!(
                    "request rid={rid} found {e} unbound; parked for retry"
                ));
                self.pending.push((seq, amount));
                Ok(None)
            }
            Err(e) => Err(BehaviorFault::new(format!("request rid={rid} failed: {e}"))),
        }
    }
}

impl Behavior for ClientBehavior {
    fn handle(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        _service: &str,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        match invocation.operation.as_str() {
            "submit" => {
                let amount = match invocation.arguments.first() {
                    Some(Value::Int(n)) => *n,
                    None => 1,
                    Some(other) => {
                        return Err(BehaviorFault::new(format!(
                            "submit expects an integer amount, got {other}"
                        )))
                    }
                };
                self.seq += 1;
                let seq = self.seq;
                match self.attempt(ctx, seq, amount)? {
                    Some(reply) => Ok(reply),
                    None => Ok(Reply::text(format!("pending seq={seq}"))),
                }
            }
            "retry" => {
                let parked = std::mem::take(&mut self.pending);
                let total = parked.len();
                let mut served = 0usize;
                for (seq, amount) in parked {
                    if self.attempt(ctx, seq, amount)?.is_some() {
                        served += 1;
                    }
                }
                Ok(Reply::text(format!("retried {served}/{total}")))
            }
            other => Err(BehaviorFault::new(format!("unknown operation `{other}`"))),
        }
    }
}
