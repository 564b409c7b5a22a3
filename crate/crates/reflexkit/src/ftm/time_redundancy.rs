//! Time-redundancy interceptor: one service and one reference of the same
//! interface.
//!
//! Every invocation executes twice against the inner service; equal replies
//! pass through, unequal replies trigger retry rounds (two fresh executions
//! each) up to `max_retries`, after which a persistent-mismatch fault is
//! raised. Because the inner service is stateful, the interceptor captures
//! its state up front with `get-state` and restores it with `set-state`
//! between executions, so a "fresh execution" really starts from the same
//! state; the surviving state is the one produced by the last execution.
//!
//! The transient fault model only corrupts integer replies, so the text
//! replies of the get-state/set-state bracketing are immune and any single
//! transient per logical request is masked.

use crate::harness::BehaviorCtx;
use crate::kernel::behavior::{Behavior, BehaviorFault};
use crate::kernel::graph::{Invocation, Reply, RequestId, Value};

pub const DEFAULT_MAX_RETRIES: u64 = 1;

#[derive(Debug, Default)]
pub struct TimeRedundancy {
    call_seq: u64,
}

impl TimeRedundancy {
    pub fn new() -> Self {
        Self::default()
    }

    fn call(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        operation: &str,
        arguments: Vec<Value>,
    ) -> Result<Value, BehaviorFault> {
        self.call_seq += 1;
        let invocation = Invocation::new(operation, arguments, RequestId::new("tr", self.call_seq));
        ctx.invoke("server", invocation)
            .map(|r| r.value)
            .map_err(|e| BehaviorFault::new(format!("inner {operation} failed: {e}")))
    }

    fn forward(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        invocation: &Invocation,
    ) -> Result<Value, BehaviorFault> {
        self.call(ctx, &invocation.operation, invocation.arguments.clone())
    }
}

impl Behavior for TimeRedundancy {
    fn handle(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        _service: &str,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        let max_retries = ctx
            .property("max_retries")
            .ok()
            .and_then(|v| v.as_int())
            .filter(|v| *v >= 0)
            .map(|v| v as u64)
            .unwrap_or(DEFAULT_MAX_RETRIES);
        let rounds = 1 + max_retries;

        let initial_state = match self.call(ctx, "get-state", Vec::new())? {
            Value::Text(s) => s,
            Value::Int(v) => v.to_string(),
        };

        for round in 1..=rounds {
            let first = self.forward(ctx, invocation)?;
            self.call(ctx, "set-state", vec![Value::Text(initial_state.clone())])?;
            let second = self.forward(ctx, invocation)?;
            if first == second {
                return Ok(Reply { value: first });
            }
            ctx.log_warning(format!(
                "reply mismatch on round {round}: {first} vs {second} (rid={})",
                invocation.request_id
            ));
            if round < rounds {
                self.call(ctx, "set-state", vec![Value::Text(initial_state.clone())])?;
            }
        }
        Err(BehaviorFault::new(format!(
            "persistent reply mismatch after {rounds} rounds (rid={})",
            invocation.request_id
        )))
    }
}
