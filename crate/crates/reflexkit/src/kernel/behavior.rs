//! Behavior registration.
//!
//! `.arch` files name behaviors by identifier; the registry maps identifiers
//! to factories producing a fresh behavior instance per component. Behavior
//! state lives outside the graph so that graph snapshots stay structural.

use std::collections::BTreeMap;
use std::fmt;

use crate::harness::{BehaviorCtx, TickCtx};
use crate::kernel::graph::{Invocation, Reply};

/// A fault raised by a behavior while handling an invocation. Propagates to
/// the caller through every nesting level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorFault(pub String);

impl BehaviorFault {
    pub fn new(message: impl Into<String>) -> Self {
        BehaviorFault(message.into())
    }
}

impl fmt::Display for BehaviorFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Component logic, driven exclusively by the dispatch loop.
///
/// Behaviors must be `Send` so a whole simulation can move between threads
/// as a unit; nothing is ever shared concurrently.
pub trait Behavior: Send {
    /// Handles one invocation addressed to `service`. Runs synchronously;
    /// nested invocations go through `ctx`.
    fn handle(
        &mut self,
        ctx: &mut BehaviorCtx<'_>,
        service: &str,
        invocation: &Invocation,
    ) -> Result<Reply, BehaviorFault>;

    /// Delay until the next periodic tick, or `None` when the behavior does
    /// not tick. Consulted when the component starts and after each tick.
    fn tick_after(&self, _ctx: &TickCtx<'_>) -> Option<u64> {
        None
    }

    /// Periodic work while the component is started.
    fn tick(&mut self, _ctx: &mut BehaviorCtx<'_>) {}
}

type Factory = Box<dyn Fn() -> Box<dyn Behavior> + Send>;

/// Maps behavior identifiers to instance factories. Populated at startup.
#[derive(Default)]
pub struct BehaviorRegistry {
    factories: BTreeMap<String, Factory>,
}

impl BehaviorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F, B>(&mut self, id: impl Into<String>, factory: F)
    where
        F: Fn() -> B + Send + 'static,
        B: Behavior + 'static,
    {
        self.factories
            .insert(id.into(), Box::new(move || Box::new(factory())));
    }

    pub fn contains(&self, id: &str) -> bool {
        self.factories.contains_key(id)
    }

    pub fn create(&self, id: &str) -> Option<Box<dyn Behavior>> {
        self.factories.get(id).map(|f| f())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

impl fmt::Debug for BehaviorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BehaviorRegistry")
            .field("ids", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}
