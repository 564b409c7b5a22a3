//! The deterministic event loop that owns the graph, the clock, the event
//! log and the behavior instances.
//!
//! Everything runs on one thread of control. Events dispatch in
//! `(time, insertion order)`; invocations execute synchronously within the
//! dispatching event, with nested invocations allowed up to a fixed depth.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::kernel::behavior::{Behavior, BehaviorRegistry};
use crate::kernel::graph::{
    ArchitectureGraph, Invocation, Lifecycle, LifecycleChange, LifecycleTarget, NodeDescriptor,
    PropertyValue, Reply, Value,
};
use crate::kernel::path::{Endpoint, NodePath, PortKind};
use crate::kernel::KernelError;

use super::clock::{VirtualClock, VirtualTime};
use super::fault::{CrashFault, FaultPlan, TransientFault};
use super::log::{EventKind, EventLog, EventRecord};

/// Nested invocations beyond this depth are a behavior fault.
pub const MAX_CALL_DEPTH: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cannot schedule at t={at}: clock is already at t={now}")]
    InPast { at: VirtualTime, now: VirtualTime },
}

/// An event queued for dispatch.
#[derive(Debug, Clone)]
pub enum SimEvent {
    /// Deliver an invocation to a service endpoint, as an external caller.
    CallService {
        target: Endpoint,
        invocation: Invocation,
    },
    /// Drain a restarted component's inbound queue in FIFO order.
    InboxDrain { path: NodePath },
    /// Periodic behavior tick; stale generations are dropped.
    Tick { path: NodePath, generation: u64 },
    /// Crash-fault injection point.
    Crash { path: NodePath },
}

/// Opaque handle for a scheduled event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventHandle(u64);

/// Stop condition for [`Simulation::run_until`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Until {
    /// Dispatch everything scheduled at or before the bound, then set the
    /// clock to the bound.
    Time(VirtualTime),
    /// Dispatch until the queue is empty.
    Quiescent,
}

/// How an invocation reached (or failed to reach) its target. Recorded in
/// dispatch records as `disp=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Disposition {
    Run,
    Queued,
    Drained,
    Dropped,
}

impl std::fmt::Display for Disposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Disposition::Run => "run",
            Disposition::Queued => "queued",
            Disposition::Drained => "drained",
            Disposition::Dropped => "dropped",
        };
        write!(f, "{s}")
    }
}

/// Read-only view handed to `Behavior::tick_after`.
pub struct TickCtx<'a> {
    pub graph: &'a ArchitectureGraph,
    pub path: &'a NodePath,
    pub now: VirtualTime,
}

impl TickCtx<'_> {
    pub fn property(&self, name: &str) -> Option<PropertyValue> {
        self.graph.get_property(self.path, name).ok()
    }
}

/// The simulation: single owner of graph, clock, log, queue and behaviors.
pub struct Simulation {
    clock: VirtualClock,
    log: EventLog,
    graph: ArchitectureGraph,
    behaviors: BTreeMap<NodePath, Box<dyn Behavior>>,
    queue: BTreeMap<(VirtualTime, u64), SimEvent>,
    queue_seq: u64,
    tick_generations: BTreeMap<NodePath, u64>,
    fault_plan: FaultPlan,
    int_reply_counts: BTreeMap<NodePath, u64>,
    call_depth: usize,
}

impl Simulation {
    pub fn new(graph: ArchitectureGraph, registry: &BehaviorRegistry) -> Self {
        Self::with_seed(graph, registry, 0)
    }

    /// The seed is recorded in the log header. Current behaviors are fully
    /// deterministic, so it only labels the run.
    pub fn with_seed(graph: ArchitectureGraph, registry: &BehaviorRegistry, seed: u64) -> Self {
        let mut behaviors = BTreeMap::new();
        for path in graph.component_paths() {
            let id = &graph.component(&path).expect("component path").behavior;
            let behavior = registry
                .create(id)
                .unwrap_or_else(|| panic!("behavior `{id}` not registered"));
            behaviors.insert(path, behavior);
        }
        Simulation {
            clock: VirtualClock::new(),
            log: EventLog::new(seed),
            graph,
            behaviors,
            queue: BTreeMap::new(),
            queue_seq: 0,
            tick_generations: BTreeMap::new(),
            fault_plan: FaultPlan::default(),
            int_reply_counts: BTreeMap::new(),
            call_depth: 0,
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.clock.now()
    }

    pub fn graph(&self) -> &ArchitectureGraph {
        &self.graph
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn fault_plan(&self) -> &FaultPlan {
        &self.fault_plan
    }

    // ------------------------------------------------------------------
    // Kernel operations (logging wrappers over the graph)
    // ------------------------------------------------------------------

    /// Sets a component's lifecycle. Setting the current state is a no-op
    /// that still leaves one log entry. On STOPPED -> STARTED the inbound
    /// queue is scheduled for FIFO dispatch.
    pub fn set_lifecycle(
        &mut self,
        path: &NodePath,
        target: LifecycleTarget,
    ) -> Result<LifecycleChange, KernelError> {
        let change = self.graph.set_lifecycle(path, target)?;
        match change {
            LifecycleChange::NoOp => {
                self.append(
                    EventKind::Lifecycle,
                    path.to_string(),
                    format!("set-state {target} noop"),
                );
            }
            LifecycleChange::Changed { .. } => {
                self.append(
                    EventKind::Lifecycle,
                    path.to_string(),
                    format!("set-state {target}"),
                );
                // Any lifecycle transition invalidates the running tick chain.
                *self.tick_generations.entry(path.clone()).or_insert(0) += 1;
                if target == LifecycleTarget::Started {
                    if !self.graph.component(path)?.inbox.is_empty() {
                        self.schedule_internal(SimEvent::InboxDrain { path: path.clone() });
                    }
                    self.schedule_tick(path);
                }
            }
        }
        Ok(change)
    }

    /// Starts every component, in document order.
    pub fn start_all(&mut self) -> Result<(), KernelError> {
        for path in self.graph.component_paths() {
            self.set_lifecycle(&path, LifecycleTarget::Started)?;
        }
        Ok(())
    }

    pub fn add_wire(
        &mut self,
        reference: &Endpoint,
        service: &Endpoint,
    ) -> Result<(), KernelError> {
        self.graph.add_wire(reference, service)?;
        self.append(
            EventKind::GraphEdit,
            reference.node.to_string(),
            format!("add-wire {reference} -> {service}"),
        );
        Ok(())
    }

    pub fn remove_wire(
        &mut self,
        reference: &Endpoint,
        service: &Endpoint,
    ) -> Result<(), KernelError> {
        self.graph.remove_wire(reference, service)?;
        self.append(
            EventKind::GraphEdit,
            reference.node.to_string(),
            format!("remove-wire {reference} -> {service}"),
        );
        Ok(())
    }

    pub fn get_property(&self, path: &NodePath, name: &str) -> Result<PropertyValue, KernelError> {
        self.graph.get_property(path, name)
    }

    pub fn set_property(
        &mut self,
        path: &NodePath,
        name: &str,
        value: PropertyValue,
    ) -> Result<(), KernelError> {
        let detail = format!("set-property {path}.{name} {}={value}", value.type_name());
        self.graph.set_property(path, name, value)?;
        self.append(EventKind::GraphEdit, path.to_string(), detail);
        Ok(())
    }

    pub fn introspect(&self, path: &NodePath) -> Result<NodeDescriptor, KernelError> {
        self.graph.introspect(path)
    }

    /// Sends an invocation out through a reference endpoint, as an external
    /// caller (the emitter is recorded as `external`).
    pub fn invoke(
        &mut self,
        source: &Endpoint,
        invocation: Invocation,
    ) -> Result<Reply, KernelError> {
        self.invoke_via_reference(None, source, invocation)
    }

    /// Delivers an invocation straight to a service endpoint, as an external
    /// caller. Promotions resolve down to the backing component.
    pub fn call_service(
        &mut self,
        target: &Endpoint,
        invocation: Invocation,
    ) -> Result<Reply, KernelError> {
        if self.graph.endpoint_kind(target)? != PortKind::Service {
            return Err(KernelError::KindMismatch {
                endpoint: target.clone(),
                expected: PortKind::Service,
            });
        }
        let resolved = self.graph.resolve_promotions(target)?;
        self.deliver(None, &resolved, invocation)
    }

    // ------------------------------------------------------------------
    // Scheduling
    // ------------------------------------------------------------------

    /// Queues an event; ties at equal times break by insertion order.
    pub fn schedule(
        &mut self,
        event: SimEvent,
        at: VirtualTime,
    ) -> Result<EventHandle, ScheduleError> {
        if at < self.clock.now() {
            return Err(ScheduleError::InPast {
                at,
                now: self.clock.now(),
            });
        }
        Ok(self.schedule_at(event, at))
    }

    fn schedule_at(&mut self, event: SimEvent, at: VirtualTime) -> EventHandle {
        let seq = self.queue_seq;
        self.queue_seq += 1;
        self.queue.insert((at, seq), event);
        EventHandle(seq)
    }

    fn schedule_internal(&mut self, event: SimEvent) -> EventHandle {
        let now = self.clock.now();
        self.schedule_at(event, now)
    }

    /// Registers a crash fault: every component at or beneath the path is
    /// marked crashed at the given instant.
    pub fn inject_crash(&mut self, path: &NodePath, at: VirtualTime) -> Result<(), KernelError> {
        self.graph.node(path)?;
        self.fault_plan.crashes.push(CrashFault {
            path: path.clone(),
            at,
        });
        self.schedule_at(SimEvent::Crash { path: path.clone() }, at);
        Ok(())
    }

    /// Registers a transient fault: the lowest bit of the `nth` integer
    /// reply produced by the component flips. Indices are 1-based.
    pub fn inject_transient(&mut self, path: &NodePath, nth_reply: u64) -> Result<(), KernelError> {
        self.graph.component(path)?;
        if nth_reply == 0 {
            return Err(KernelError::InvariantViolation(
                "transient reply indices are 1-based".to_string(),
            ));
        }
        self.fault_plan.transients.push(TransientFault {
            path: path.clone(),
            nth_reply,
        });
        Ok(())
    }

    /// Dispatches queued events in `(time, insertion)` order until the bound
    /// or quiescence; returns the records appended during the run.
    pub fn run_until(&mut self, until: Until) -> &[EventRecord] {
        let mark = self.log.len();
        loop {
            let Some((&(t, s), _)) = self.queue.iter().next() else {
                if let Until::Time(bound) = until {
                    self.clock.advance_to(bound);
                }
                break;
            };
            if let Until::Time(bound) = until {
                if t > bound {
                    self.clock.advance_to(bound);
                    break;
                }
            }
            let event = self.queue.remove(&(t, s)).expect("peeked key");
            self.clock.advance_to(t);
            self.dispatch_event(event);
        }
        &self.log.records()[mark..]
    }

    fn dispatch_event(&mut self, event: SimEvent) {
        match event {
            SimEvent::CallService { target, invocation } => {
                // Outcome lands in the log; the scheduled caller is nobody.
                let _ = self.call_service(&target, invocation);
            }
            SimEvent::InboxDrain { path } => self.drain_inbox(&path),
            SimEvent::Tick { path, generation } => self.handle_tick(&path, generation),
            SimEvent::Crash { path } => self.apply_crash(&path),
        }
    }

    fn apply_crash(&mut self, path: &NodePath) {
        match self.graph.crash(path) {
            Ok(crashed) => {
                for p in crashed {
                    *self.tick_generations.entry(p.clone()).or_insert(0) += 1;
                    self.append(EventKind::Fault, p.to_string(), "crash");
                }
            }
            Err(e) => {
                self.append(
                    EventKind::Warning,
                    path.to_string(),
                    format!("crash injection failed: {e}"),
                );
            }
        }
    }

    // ------------------------------------------------------------------
    // Invocation path
    // ------------------------------------------------------------------

    fn invoke_via_reference(
        &mut self,
        emitter: Option<&NodePath>,
        reference: &Endpoint,
        invocation: Invocation,
    ) -> Result<Reply, KernelError> {
        if self.graph.endpoint_kind(reference)? != PortKind::Reference {
            return Err(KernelError::KindMismatch {
                endpoint: reference.clone(),
                expected: PortKind::Reference,
            });
        }
        let wire = self
            .graph
            .outgoing_wire(reference)
            .ok_or_else(|| KernelError::UnboundReference(reference.clone()))?
            .clone();
        let target = self.graph.resolve_promotions(&wire.service)?;
        let emitter = emitter.cloned();
        self.deliver(emitter.as_ref(), &target, invocation)
    }

    /// Delivers to a component service: runs the behavior when started,
    /// queues when stopped, drops when crashed.
    fn deliver(
        &mut self,
        emitter: Option<&NodePath>,
        target: &Endpoint,
        invocation: Invocation,
    ) -> Result<Reply, KernelError> {
        let component = self.graph.component(&target.node)?;
        if component.service(&target.port).is_none() {
            return Err(KernelError::UnresolvedEndpoint(target.clone()));
        }
        match component.lifecycle {
            Lifecycle::Crashed => {
                let at = invocation.deadline.unwrap_or(self.clock.now());
                self.log_dispatch(target, emitter, &invocation, Disposition::Dropped);
                Err(KernelError::Timeout { at })
            }
            Lifecycle::Stopped => {
                let at = invocation.deadline.unwrap_or(self.clock.now());
                self.log_dispatch(target, emitter, &invocation, Disposition::Queued);
                let queued = crate::kernel::graph::QueuedInvocation {
                    source: emitter.cloned(),
                    service: target.port.clone(),
                    invocation,
                };
                self.graph
                    .component_mut(&target.node)?
                    .inbox
                    .push_back(queued);
                Err(KernelError::Timeout { at })
            }
            Lifecycle::Started => self.run_behavior(emitter, target, invocation, Disposition::Run),
        }
    }

    fn run_behavior(
        &mut self,
        emitter: Option<&NodePath>,
        target: &Endpoint,
        invocation: Invocation,
        disposition: Disposition,
    ) -> Result<Reply, KernelError> {
        self.log_dispatch(target, emitter, &invocation, disposition);
        if self.call_depth >= MAX_CALL_DEPTH {
            let fault = format!("invocation depth exceeded ({MAX_CALL_DEPTH})");
            self.log_fault(target, &invocation, &fault);
            return Err(KernelError::CallDepthExceeded(MAX_CALL_DEPTH));
        }
        let Some(mut behavior) = self.behaviors.remove(&target.node) else {
            let fault = "reentrant invocation".to_string();
            self.log_fault(target, &invocation, &fault);
            return Err(KernelError::BehaviorFault(fault));
        };
        self.call_depth += 1;
        let result = {
            let mut ctx = BehaviorCtx {
                sim: self,
                path: target.node.clone(),
            };
            behavior.handle(&mut ctx, &target.port, &invocation)
        };
        self.call_depth -= 1;
        self.behaviors.insert(target.node.clone(), behavior);
        match result {
            Ok(mut reply) => {
                self.maybe_corrupt(&target.node, &mut reply);
                self.append(
                    EventKind::Reply,
                    target.node.to_string(),
                    format!(
                        "op={} rid={} value={}",
                        invocation.operation, invocation.request_id, reply.value
                    ),
                );
                Ok(reply)
            }
            Err(fault) => {
                self.log_fault(target, &invocation, &fault.0);
                Err(KernelError::BehaviorFault(fault.0))
            }
        }
    }

    /// Applies the transient plan: the nth integer reply of a component gets
    /// its lowest bit flipped. Text replies are outside the corruption rule
    /// and are not counted.
    fn maybe_corrupt(&mut self, path: &NodePath, reply: &mut Reply) {
        let Value::Int(v) = reply.value else { return };
        let count = self.int_reply_counts.entry(path.clone()).or_insert(0);
        *count += 1;
        let n = *count;
        if self
            .fault_plan
            .transients
            .iter()
            .any(|t| &t.path == path && t.nth_reply == n)
        {
            let corrupted = v ^ 1;
            reply.value = Value::Int(corrupted);
            self.append(
                EventKind::Fault,
                path.to_string(),
                format!("transient bit-flip reply #{n}: {v} -> {corrupted}"),
            );
        }
    }

    fn drain_inbox(&mut self, path: &NodePath) {
        while let Ok(component) = self.graph.component_mut(path) {
            if component.lifecycle != Lifecycle::Started {
                break;
            }
            let Some(queued) = component.inbox.pop_front() else {
                break;
            };
            let target = Endpoint::new(path.clone(), &queued.service);
            let _ = self.run_behavior(
                queued.source.as_ref(),
                &target,
                queued.invocation,
                Disposition::Drained,
            );
        }
    }

    fn schedule_tick(&mut self, path: &NodePath) {
        let behavior = match self.behaviors.get(path) {
            Some(b) => b,
            None => return,
        };
        let ctx = TickCtx {
            graph: &self.graph,
            path,
            now: self.clock.now(),
        };
        if let Some(delay) = behavior.tick_after(&ctx) {
            let generation = *self.tick_generations.entry(path.clone()).or_insert(0);
            let at = self.clock.now() + delay.max(1);
            self.schedule_at(
                SimEvent::Tick {
                    path: path.clone(),
                    generation,
                },
                at,
            );
        }
    }

    fn handle_tick(&mut self, path: &NodePath, generation: u64) {
        if self.tick_generations.get(path).copied().unwrap_or(0) != generation {
            return;
        }
        match self.graph.component(path) {
            Ok(c) if c.lifecycle == Lifecycle::Started => {}
            _ => return,
        }
        let Some(mut behavior) = self.behaviors.remove(path) else {
            return;
        };
        {
            let mut ctx = BehaviorCtx {
                sim: self,
                path: path.clone(),
            };
            behavior.tick(&mut ctx);
        }
        self.behaviors.insert(path.clone(), behavior);
        self.schedule_tick(path);
    }

    // ------------------------------------------------------------------
    // Logging
    // ------------------------------------------------------------------

    fn append(&mut self, kind: EventKind, subject: impl Into<String>, detail: impl Into<String>) {
        let now = self.clock.now();
        self.log.append(now, kind, subject, detail);
    }

    fn log_dispatch(
        &mut self,
        target: &Endpoint,
        emitter: Option<&NodePath>,
        invocation: &Invocation,
        disposition: Disposition,
    ) {
        let from = emitter
            .map(NodePath::to_string)
            .unwrap_or_else(|| "external".to_string());
        let args: Vec<String> = invocation.arguments.iter().map(|v| v.to_string()).collect();
        self.append(
            EventKind::Dispatch,
            target.node.to_string(),
            format!(
                "op={} rid={} from={from} disp={disposition} args=[{}]",
                invocation.operation,
                invocation.request_id,
                args.join(",")
            ),
        );
    }

    fn log_fault(&mut self, target: &Endpoint, invocation: &Invocation, fault: &str) {
        self.append(
            EventKind::Fault,
            target.node.to_string(),
            format!(
                "op={} rid={} fault: {fault}",
                invocation.operation, invocation.request_id
            ),
        );
    }
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("now", &self.clock.now())
            .field("events", &self.log.len())
            .field("queued", &self.queue.len())
            .finish()
    }
}

/// Capabilities handed to a behavior while it runs: its own clock view,
/// properties, outbound references and log access.
pub struct BehaviorCtx<'a> {
    sim: &'a mut Simulation,
    path: NodePath,
}

impl BehaviorCtx<'_> {
    pub fn now(&self) -> VirtualTime {
        self.sim.clock.now()
    }

    pub fn path(&self) -> &NodePath {
        &self.path
    }

    /// Reads one of the component's own properties.
    pub fn property(&self, name: &str) -> Result<PropertyValue, KernelError> {
        self.sim.graph.get_property(&self.path, name)
    }

    /// Invokes out through one of the component's own references. The
    /// emitter recorded in the log is this component.
    pub fn invoke(
        &mut self,
        reference: &str,
        invocation: Invocation,
    ) -> Result<Reply, KernelError> {
        debug_assert_eq!(
            self.sim.graph.component(&self.path).map(|c| c.lifecycle),
            Ok(Lifecycle::Started),
            "stopped components must not emit"
        );
        let endpoint = Endpoint::new(self.path.clone(), reference);
        let path = self.path.clone();
        self.sim
            .invoke_via_reference(Some(&path), &endpoint, invocation)
    }

    pub fn log_warning(&mut self, detail: impl Into<String>) {
        let subject = self.path.to_string();
        self.sim.append(EventKind::Warning, subject, detail);
    }

    /// Emits a checkpoint record; the subject is this component.
    pub fn log_checkpoint(&mut self, detail: impl Into<String>) {
        let subject = self.path.to_string();
        self.sim.append(EventKind::Checkpoint, subject, detail);
    }

    /// Emits a suspicion record; the subject is this component.
    pub fn log_suspicion(&mut self, detail: impl Into<String>) {
        let subject = self.path.to_string();
        self.sim.append(EventKind::Suspicion, subject, detail);
    }
}
