//! reflexkit: a deterministic component-runtime kernel with a
//! reconfiguration scripting language, hosting primary-backup replication
//! whose failover and upgrade are pure runtime manipulations of the
//! component graph.
//!
//! The crate is organized around four pieces:
//!
//! * [`kernel`] — the architecture graph (composites, components, services,
//!   references, wires, properties), the `.arch` definition format and the
//!   behavior registry. It exposes the three capabilities reconfiguration
//!   needs: state/property access, lifecycle control, wiring control.
//! * [`scriptlang`] — parser and interpreter for `.rcfg` reconfiguration
//!   scripts: assignments of path expressions over the four navigation axes
//!   plus the `set-state` / `add-scawire` / `remove-scawire` primitives,
//!   runnable whole or step by step.
//! * [`ftm`] — fault-tolerance mechanisms as ordinary behaviors: the
//!   primary-backup protocol with per-request checkpoints, the heartbeat
//!   failure detector, the time-redundancy interceptor, and the descriptor
//!   type for applicability checks. Failover itself is not built in; it is
//!   the shipped `switchServer` script.
//! * [`harness`] — the deterministic virtual-time event loop, fault
//!   injection (crashes, transient bit flips) and the append-only event log.
//!
//! [`scenario`] ties them together into the two canned experiments: crash
//! failover via `switchServer`, and transient masking via runtime insertion
//! of the time-redundancy interceptor.
//!
//! Determinism is load-bearing everywhere: identical inputs produce
//! byte-identical event logs.

// Kernel errors carry full endpoint/path context by design; the enum is
// bigger than clippy's Result threshold and that is fine for a simulator.
#![allow(clippy::result_large_err)]

pub mod ftm;
pub mod harness;
pub mod kernel;
pub mod scenario;
pub mod scriptlang;

pub use harness::{EventKind, EventLog, EventRecord, SimEvent, Simulation, Until, VirtualTime};
pub use kernel::{build_composite, ArchError, ArchitectureGraph, Endpoint, KernelError, NodePath};
pub use scriptlang::{parse_script, print_script, ScriptAst, ScriptError};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::harness::BehaviorCtx;
    use crate::kernel::behavior::{Behavior, BehaviorFault, BehaviorRegistry};
    use crate::kernel::graph::{Invocation, Reply};

    /// Behavior that answers every invocation with `ok`.
    pub struct EchoBehavior;

    impl Behavior for EchoBehavior {
        fn handle(
            &mut self,
            _ctx: &mut BehaviorCtx<'_>,
            _service: &str,
            _invocation: &Invocation,
        ) -> Result<Reply, BehaviorFault> {
            Ok(Reply::text("ok"))
        }
    }

    /// Behavior that forwards every invocation through its `out` reference.
    pub struct ForwardBehavior;

    impl Behavior for ForwardBehavior {
        fn handle(
            &mut self,
            ctx: &mut BehaviorCtx<'_>,
            _service: &str,
            invocation: &Invocation,
        ) -> Result<Reply, BehaviorFault> {
            ctx.invoke("out", invocation.clone())
                .map_err(|e| BehaviorFault::new(e.to_string()))
        }
    }

    /// Registry with the shipped behaviors plus bare `echo` and `forward`.
    pub fn test_registry() -> BehaviorRegistry {
        let mut registry = crate::ftm::standard_registry();
        registry.register("echo", || EchoBehavior);
        registry.register("forward", || ForwardBehavior);
        registry
    }

    /// Two echo components, `a` wired to `b`.
    pub const TINY_ARCH: &str = r#"
composite tiny {
  component a {
    implementation echo
    service input : Io
    reference out : Io
    property label : text = "a"
    property limit : int = 10
  }
  component b {
    implementation echo
    service input : Io
  }
  wire a.out -> b.input
}
"#;
}
