//! Fault-tolerance mechanisms as component behaviors: the primary-backup
//! replication protocol with per-request checkpointing, the heartbeat
//! failure detector, the time-redundancy interceptor, plus the descriptor
//! used for applicability checks.
//!
//! Recovery is deliberately not built into the behaviors: the `switchServer`
//! reconfiguration script is the failover.

pub mod client;
pub mod counter;
pub mod descriptor;
pub mod detector;
pub mod pbr;
pub mod time_redundancy;

pub use client::ClientBehavior;
pub use counter::CounterServer;
pub use descriptor::{
    check_applicability, pbr_descriptor, ApplicabilityContext, FaultKind, FtmDescriptor, Verdict,
};
pub use detector::HeartbeatDetector;
pub use pbr::{BackupProtocol, Checkpoint, PrimaryProtocol};
pub use time_redundancy::TimeRedundancy;

use crate::kernel::BehaviorRegistry;

/// Architecture: client, primary{protocol,server}, backup{protocol,server},
/// failure detector, wires client->primary, primary->backup and
/// detector->primary.
pub const PBR_ARCH: &str = include_str!("../../assets/pbr.arch");

/// Same as [`PBR_ARCH`] plus pre-declared, unwired time-redundancy
/// interceptors inside each replica.
pub const PBR_TR_ARCH: &str = include_str!("../../assets/pbr_tr.arch");

/// The failover script, byte for byte.
pub const SWITCH_SERVER_RCFG: &str = include_str!("../../assets/switchServer.rcfg");

/// Splices the time-redundancy interceptor between the primary's protocol
/// and its server.
pub const INSERT_TIME_REDUNDANCY_RCFG: &str =
    include_str!("../../assets/insertTimeRedundancy.rcfg");

/// Registry with every behavior the shipped architectures name.
pub fn standard_registry() -> BehaviorRegistry {
    let mut registry = BehaviorRegistry::new();
    registry.register("counter_server", CounterServer::new);
    registry.register("pbr_client", ClientBehavior::new);
    registry.register("pbr_primary", PrimaryProtocol::new);
    registry.register("pbr_backup", BackupProtocol::new);
    registry.register("heartbeat_detector", HeartbeatDetector::new);
    registry.register("time_redundancy", TimeRedundancy::new);
    registry
}
