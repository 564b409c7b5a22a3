//! Deterministic virtual-time scheduler, fault injector and event log: the
//! simulated environment the kernel and the fault-tolerance behaviors run in.

pub mod clock;
pub mod fault;
pub mod log;
pub mod sim;

pub use clock::{VirtualClock, VirtualTime};
pub use fault::{CrashFault, FaultPlan, TransientFault};
pub use log::{detail_field, replay_structural, EventKind, EventLog, EventRecord};
pub use sim::{
    BehaviorCtx, EventHandle, ScheduleError, SimEvent, Simulation, TickCtx, Until, MAX_CALL_DEPTH,
};
