//! The functional layer used by the replication tests: a deterministic
//! counter exposing `increment(n)` / `read` plus `get-state` / `set-state`
//! for checkpointing. Its state snapshot is the decimal rendering of the
//! count, so snapshots round-trip through get-state/set-state.

use crate::harness::BehaviorCtx;
use crate::kernel::behavior::{Behavior, BehaviorFault};
use crate::kernel::graph::{Invocation, Reply, Value};

#[derive(Debug, Default)]
pub struct CounterServer {
    count: i64,
}

impl CounterServer {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Behavior for CounterServer {
    fn handle(
        &mut self,
        _ctx: &mut BehaviorCtx<'_>,
        _service: &str,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        match invocation.operation.as_str() {
            "increment" => {
                let amount = match invocation.arguments.first() {
                    Some(Value::Int(n)) => *n,
                    Some(other) => {
                        return Err(BehaviorFault::new(format!(
                            "increment expects an integer amount, got {other}"
                        )))
                    }
                    None => return Err(BehaviorFault::new("increment expects an amount")),
                };
                self.count += amount;
                Ok(Reply::int(self.count))
            }
            "read" => Ok(Reply::int(self.count)),
            "get-state" => Ok(Reply::text(self.count.to_string())),
            "set-state" => {
                let snapshot = match invocation.arguments.first() {
                    Some(Value::Text(s)) => s,
                    _ => return Err(BehaviorFault::new("set-state expects a snapshot string")),
                };
                self.count = snapshot
                    .parse()
                    .map_err(|_| BehaviorFault::new(format!("bad snapshot `{snapshot}`")))?;
                Ok(Reply::text("ok"))
            }
            other => Err(BehaviorFault::new(format!("unknown operation `{other}`"))),
        }
    }
}
