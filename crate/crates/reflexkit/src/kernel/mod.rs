//! The component-runtime kernel: the architecture graph, the `.arch` format,
//! and the behavior registry.
//!
//! The kernel exposes the three capabilities every runtime reconfiguration
//! needs: access to component state and properties, control over component
//! lifecycle, and control over wiring.

pub mod arch;
pub mod behavior;
pub mod graph;
pub mod path;

pub use arch::{build_composite, parse_arch, ArchError};
pub use behavior::{Behavior, BehaviorFault, BehaviorRegistry};
pub use graph::{
    ArchitectureGraph, Child, Component, Composite, Invocation, Lifecycle, LifecycleChange,
    LifecycleTarget, NodeDescriptor, NodeKind, NodeRef, Port, Promotion, Property, PropertyValue,
    QueuedInvocation, ReferenceView, Reply, RequestId, Value, Wire,
};
pub use path::{Endpoint, NodePath, PortKind};

use thiserror::Error;

/// Errors from kernel operations, including the invocation path.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("no node at path {0}")]
    UnresolvedPath(NodePath),
    #[error("{0} is not a component")]
    NotAComponent(NodePath),
    #[error("component {0} is crashed")]
    Crashed(NodePath),
    #[error("no port {0}")]
    UnresolvedEndpoint(Endpoint),
    #[error("{endpoint} is not a {expected}")]
    KindMismatch {
        endpoint: Endpoint,
        expected: PortKind,
    },
    #[error("reference {reference} already wired to {bound_to}")]
    OccupiedReference {
        reference: Endpoint,
        bound_to: Endpoint,
    },
    #[error("interface mismatch: {reference} is {reference_interface}, {service} is {service_interface}")]
    InterfaceMismatch {
        reference: Endpoint,
        reference_interface: String,
        service: Endpoint,
        service_interface: String,
    },
    #[error("no such wire: {0}")]
    NoSuchWire(Wire),
    #[error("no property {name} on {path}")]
    UndeclaredProperty { path: NodePath, name: String },
    #[error("property {name} on {path} is declared {declared}, got {provided}")]
    PropertyTypeMismatch {
        path: NodePath,
        name: String,
        declared: &'static str,
        provided: &'static str,
    },
    #[error("reference {0} is unbound")]
    UnboundReference(Endpoint),
    #[error("timed out at t={at}")]
    Timeout { at: u64 },
    #[error("behavior fault: {0}")]
    BehaviorFault(String),
    #[error("invocation depth exceeded ({0})")]
    CallDepthExceeded(usize),
    #[error("graph invariant violated: {0}")]
    InvariantViolation(String),
}
