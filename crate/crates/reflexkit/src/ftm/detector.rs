//! Heartbeat failure detector.
//!
//! Probes the primary every `heartbeat_period` units; a reply refreshes the
//! last-reply instant. Suspicion latches the first time
//! `now - last_reply >= heartbeat_period * missed_threshold` and is emitted
//! to the event log exactly once.

use crate::harness::{BehaviorCtx, TickCtx};
use crate::kernel::behavior::{Behavior, BehaviorFault};
use crate::kernel::graph::{Invocation, PropertyValue, Reply, RequestId};

pub const DEFAULT_PERIOD: u64 = 100;
pub const DEFAULT_THRESHOLD: u64 = 3;

#[derive(Debug)]
pub struct HeartbeatDetector {
    last_reply: u64,
    suspected: bool,
    probe_seq: u64,
}

impl HeartbeatDetector {
    pub fn new() -> Self {
        HeartbeatDetector {
            last_reply: 0,
            suspected: false,
            probe_seq: 0,
        }
    }

    fn period(props: impl Fn(&str) -> Option<PropertyValue>) -> u64 {
        props("heartbeat_period")
            .and_then(|v| v.as_int())
            .filter(|v| *v > 0)
            .map(|v| v as u64)
            .unwrap_or(DEFAULT_PERIOD)
    }

    fn threshold(props: impl Fn(&str) -> Option<PropertyValue>) -> u64 {
        props("missed_threshold")
            .and_then(|v| v.as_int())
            .filter(|v| *v > 0)
            .map(|v| v as u64)
            .unwrap_or(DEFAULT_THRESHOLD)
    }
}

impl Default for HeartbeatDetector {
    fn default() -> Self {
        Self::new()
    }
}

impl Behavior for HeartbeatDetector {
    fn handle(
        &mut self,
        _ctx: &mut BehaviorCtx<'_>,
        service: &str,
        _invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault> {
        Err(BehaviorFault::new(format!(
            "detector provides no service `{service}`"
        )))
    }

    fn tick_after(&self, ctx: &TickCtx<'_>) -> Option<u64> {
        Some(Self::period(|name| ctx.property(name)))
    }

    fn tick(&mut self, ctx: &mut BehaviorCtx<'_>) {
        let period = Self::period(|name| ctx.property(name).ok());
        let threshold = Self::threshold(|name| ctx.property(name).ok());
        let now = ctx.now();

        self.probe_seq += 1;
        let probe = Invocation::new("ping", Vec::new(), RequestId::new("fd", self.probe_seq))
            .with_deadline(now + period);
        match ctx.invoke("heartbeat", probe) {
            Ok(_) => self.last_reply = now,
            Err(e) => ctx.log_warning(format!("heartbeat missed: {e}")),
        }

        if !self.suspected && now - self.last_reply >= period * threshold {
            self.suspected = true;
            ctx.log_suspicion(format!(
                "suspected: last-reply={} now={now} window={}",
                self.last_reply,
                period * threshold
            ));
        }
    }
}
