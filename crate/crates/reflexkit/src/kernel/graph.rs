//! The architecture graph: composites, components, ports, properties, wires.
//!
//! The graph is the object of every reconfiguration. All structural edits go
//! through the methods here, which enforce the invariants (interface match on
//! wires, 0..1 reference multiplicity, unique names); [`ArchitectureGraph::validate`]
//! re-checks the full set as a sweep.

use std::collections::BTreeSet;
use std::collections::VecDeque;
use std::fmt;

use super::path::{Endpoint, NodePath, PortKind};
use crate::kernel::KernelError;

/// Lifecycle of a component.
///
/// `Crashed` models a crash fault injected by the harness; it is not
/// reachable through `set_lifecycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Lifecycle {
    Started,
    Stopped,
    Crashed,
}

impl fmt::Display for Lifecycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lifecycle::Started => write!(f, "STARTED"),
            Lifecycle::Stopped => write!(f, "STOPPED"),
            Lifecycle::Crashed => write!(f, "CRASHED"),
        }
    }
}

/// Lifecycle values reachable through `set_lifecycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleTarget {
    Started,
    Stopped,
}

impl LifecycleTarget {
    pub fn as_lifecycle(self) -> Lifecycle {
        match self {
            LifecycleTarget::Started => Lifecycle::Started,
            LifecycleTarget::Stopped => Lifecycle::Stopped,
        }
    }

    /// Accepts exactly the quoted strings used by reconfiguration scripts.
    pub fn parse_strict(text: &str) -> Option<Self> {
        match text {
            "STARTED" => Some(LifecycleTarget::Started),
            "STOPPED" => Some(LifecycleTarget::Stopped),
            _ => None,
        }
    }
}

impl fmt::Display for LifecycleTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_lifecycle())
    }
}

/// A typed scalar property value. The type is fixed at declaration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PropertyValue {
    Int(i64),
    Text(String),
    Bool(bool),
}

impl PropertyValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            PropertyValue::Int(_) => "int",
            PropertyValue::Text(_) => "text",
            PropertyValue::Bool(_) => "bool",
        }
    }

    pub fn same_type(&self, other: &PropertyValue) -> bool {
        self.type_name() == other.type_name()
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PropertyValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Int(v) => write!(f, "{v}"),
            PropertyValue::Text(v) => write!(f, "\"{v}\""),
            PropertyValue::Bool(v) => write!(f, "{v}"),
        }
    }
}

/// A declared property on a component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub value: PropertyValue,
}

/// A declared service or reference port: `(name, interface)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub interface: String,
}

/// Scalar values carried by invocations and replies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(v) => write!(f, "\"{v}\""),
        }
    }
}

/// Request identity: `(client id, sequence number)`.
///
/// Sequence numbers strictly increase per client.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId {
    pub client: String,
    pub seq: u64,
}

impl RequestId {
    pub fn new(client: impl Into<String>, seq: u64) -> Self {
        RequestId {
            client: client.into(),
            seq,
        }
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.client, self.seq)
    }
}

/// A message sent through a reference towards a service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub operation: String,
    pub arguments: Vec<Value>,
    pub request_id: RequestId,
    /// Virtual-time instant after which the caller gives up, if any.
    pub deadline: Option<u64>,
}

impl Invocation {
    pub fn new(operation: impl Into<String>, arguments: Vec<Value>, request_id: RequestId) -> Self {
        Invocation {
            operation: operation.into(),
            arguments,
            request_id,
            deadline: None,
        }
    }

    pub fn with_deadline(mut self, deadline: u64) -> Self {
        self.deadline = Some(deadline);
        self
    }
}

/// The result of a successful invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub value: Value,
}

impl Reply {
    pub fn int(v: i64) -> Self {
        Reply {
            value: Value::Int(v),
        }
    }

    pub fn text(v: impl Into<String>) -> Self {
        Reply {
            value: Value::Text(v.into()),
        }
    }
}

/// An invocation parked in a stopped component's inbound queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedInvocation {
    /// Component that emitted the invocation, when one did.
    pub source: Option<NodePath>,
    /// Service port the invocation was addressed to.
    pub service: String,
    pub invocation: Invocation,
}

/// A component: named ports, properties, a behavior identifier and an
/// inbound queue. Behavior state itself lives outside the graph, keyed by
/// path, so that graph snapshots stay purely structural.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub lifecycle: Lifecycle,
    pub behavior: String,
    pub services: Vec<Port>,
    pub references: Vec<Port>,
    pub properties: Vec<Property>,
    pub inbox: VecDeque<QueuedInvocation>,
}

impl Component {
    pub fn service(&self, name: &str) -> Option<&Port> {
        self.services.iter().find(|p| p.name == name)
    }

    pub fn reference(&self, name: &str) -> Option<&Port> {
        self.references.iter().find(|p| p.name == name)
    }

    pub fn property(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// A promoted port on a composite: the composite exposes a child endpoint
/// under its own name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Promotion {
    pub kind: PortKind,
    pub name: String,
    /// Child name and port within this composite.
    pub child: String,
    pub port: String,
}

/// A composite holds an ordered list of children plus port promotions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composite {
    pub name: String,
    pub children: Vec<Child>,
    pub promotions: Vec<Promotion>,
}

impl Composite {
    pub fn new(name: impl Into<String>) -> Self {
        Composite {
            name: name.into(),
            children: Vec::new(),
            promotions: Vec::new(),
        }
    }

    pub fn child(&self, name: &str) -> Option<&Child> {
        self.children.iter().find(|c| c.name() == name)
    }

    pub fn child_mut(&mut self, name: &str) -> Option<&mut Child> {
        self.children.iter_mut().find(|c| c.name() == name)
    }

    pub fn promotion(&self, kind: PortKind, name: &str) -> Option<&Promotion> {
        self.promotions
            .iter()
            .find(|p| p.kind == kind && p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Child {
    Component(Component),
    Composite(Composite),
}

impl Child {
    pub fn name(&self) -> &str {
        match self {
            Child::Component(c) => &c.name,
            Child::Composite(c) => &c.name,
        }
    }
}

/// A wire binds a reference endpoint to a service endpoint of the same
/// interface. Stored as a set: wire identity is the endpoint pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Wire {
    pub reference: Endpoint,
    pub service: Endpoint,
}

impl fmt::Display for Wire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.reference, self.service)
    }
}

/// What a lifecycle transition did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleChange {
    /// The target state differed and was applied.
    Changed { from: Lifecycle },
    /// The component was already in the target state.
    NoOp,
}

/// Read-only view of a node produced by `introspect`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeDescriptor {
    pub path: NodePath,
    pub name: String,
    pub kind: NodeKind,
    pub lifecycle: Option<Lifecycle>,
    pub behavior: Option<String>,
    pub services: Vec<Port>,
    pub references: Vec<ReferenceView>,
    pub properties: Vec<Property>,
    pub children: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Composite,
    Component,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Composite => write!(f, "composite"),
            NodeKind::Component => write!(f, "component"),
        }
    }
}

/// A reference port together with its bound wire target, if wired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceView {
    pub name: String,
    pub interface: String,
    pub bound_to: Option<Endpoint>,
}

/// The whole architecture: a root composite named `domain` plus the wire set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureGraph {
    root: Composite,
    wires: BTreeSet<Wire>,
}

impl ArchitectureGraph {
    /// An empty graph: just the root composite, no children, no wires.
    pub fn empty() -> Self {
        ArchitectureGraph {
            root: Composite::new("domain"),
            wires: BTreeSet::new(),
        }
    }

    pub fn root(&self) -> &Composite {
        &self.root
    }

    pub(crate) fn root_mut(&mut self) -> &mut Composite {
        &mut self.root
    }

    pub fn wires(&self) -> impl Iterator<Item = &Wire> {
        self.wires.iter()
    }

    pub fn wire_count(&self) -> usize {
        self.wires.len()
    }

    // ------------------------------------------------------------------
    // Node lookup
    // ------------------------------------------------------------------

    /// Resolves a path to a composite or component.
    pub fn node(&self, path: &NodePath) -> Result<NodeRef<'_>, KernelError> {
        let segments = path.segments();
        if segments.is_empty() || segments[0] != self.root.name {
            return Err(KernelError::UnresolvedPath(path.clone()));
        }
        let mut current = NodeRef::Composite(&self.root);
        for name in &segments[1..] {
            let composite = match current {
                NodeRef::Composite(c) => c,
                NodeRef::Component(_) => {
                    return Err(KernelError::UnresolvedPath(path.clone()));
                }
            };
            current = match composite.child(name) {
                Some(Child::Component(c)) => NodeRef::Component(c),
                Some(Child::Composite(c)) => NodeRef::Composite(c),
                None => return Err(KernelError::UnresolvedPath(path.clone())),
            };
        }
        Ok(current)
    }

    pub fn component(&self, path: &NodePath) -> Result<&Component, KernelError> {
        match self.node(path)? {
            NodeRef::Component(c) => Ok(c),
            NodeRef::Composite(_) => Err(KernelError::NotAComponent(path.clone())),
        }
    }

    pub(crate) fn component_mut(&mut self, path: &NodePath) -> Result<&mut Component, KernelError> {
        let segments = path.segments();
        if segments.is_empty() || segments[0] != self.root.name {
            return Err(KernelError::UnresolvedPath(path.clone()));
        }
        let mut current = &mut self.root;
        for (i, name) in segments[1..].iter().enumerate() {
            let is_last = i == segments.len() - 2;
            match current.child_mut(name) {
                Some(Child::Component(c)) if is_last => return Ok(c),
                Some(Child::Composite(c)) if !is_last => current = c,
                Some(Child::Component(_)) => return Err(KernelError::UnresolvedPath(path.clone())),
                Some(Child::Composite(_)) => return Err(KernelError::NotAComponent(path.clone())),
                None => return Err(KernelError::UnresolvedPath(path.clone())),
            }
        }
        Err(KernelError::NotAComponent(path.clone()))
    }

    /// All component paths in document order.
    pub fn component_paths(&self) -> Vec<NodePath> {
        let mut out = Vec::new();
        collect_components(&self.root, NodePath::root(), &mut out);
        out
    }

    /// True when the endpoint resolves to a port of the given kind, either a
    /// component port or a composite promotion.
    pub fn endpoint_kind(&self, endpoint: &Endpoint) -> Result<PortKind, KernelError> {
        match self.node(&endpoint.node)? {
            NodeRef::Component(c) => {
                if c.service(&endpoint.port).is_some() {
                    Ok(PortKind::Service)
                } else if c.reference(&endpoint.port).is_some() {
                    Ok(PortKind::Reference)
                } else {
                    Err(KernelError::UnresolvedEndpoint(endpoint.clone()))
                }
            }
            NodeRef::Composite(c) => c
                .promotions
                .iter()
                .find(|p| p.name == endpoint.port)
                .map(|p| p.kind)
                .ok_or_else(|| KernelError::UnresolvedEndpoint(endpoint.clone())),
        }
    }

    /// Interface name of the port behind an endpoint, resolving promotions
    /// down to the component port that ultimately backs it.
    pub fn endpoint_interface(&self, endpoint: &Endpoint) -> Result<String, KernelError> {
        let backing = self.resolve_promotions(endpoint)?;
        let component = self.component(&backing.node)?;
        component
            .service(&backing.port)
            .or_else(|| component.reference(&backing.port))
            .map(|p| p.interface.clone())
            .ok_or_else(|| KernelError::UnresolvedEndpoint(endpoint.clone()))
    }

    /// Follows composite promotions until a component port is reached.
    pub fn resolve_promotions(&self, endpoint: &Endpoint) -> Result<Endpoint, KernelError> {
        let mut current = endpoint.clone();
        loop {
            match self.node(&current.node)? {
                NodeRef::Component(c) => {
                    if c.service(&current.port).is_some() || c.reference(&current.port).is_some() {
                        return Ok(current);
                    }
                    return Err(KernelError::UnresolvedEndpoint(endpoint.clone()));
                }
                NodeRef::Composite(comp) => {
                    let promo = comp
                        .promotions
                        .iter()
                        .find(|p| p.name == current.port)
                        .ok_or_else(|| KernelError::UnresolvedEndpoint(endpoint.clone()))?;
                    current = Endpoint::new(current.node.child(&promo.child), &promo.port);
                }
            }
        }
    }

    /// The wire leaving a reference endpoint, if any.
    pub fn wire_from(&self, reference: &Endpoint) -> Option<&Wire> {
        self.wires.iter().find(|w| &w.reference == reference)
    }

    /// Walks promotions upward from a component reference until a wire is
    /// found: a reference promoted by an enclosing composite is bound by a
    /// wire installed at that composite's level.
    pub fn outgoing_wire(&self, reference: &Endpoint) -> Option<&Wire> {
        let mut current = reference.clone();
        loop {
            if let Some(w) = self.wire_from(&current) {
                return Some(w);
            }
            let parent = current.node.parent()?;
            let promo_name = match self.node(&parent) {
                Ok(NodeRef::Composite(c)) => c
                    .promotions
                    .iter()
                    .find(|p| {
                        p.kind == PortKind::Reference
                            && p.child == current.node.name()
                            && p.port == current.port
                    })
                    .map(|p| p.name.clone()),
                _ => None,
            }?;
            current = Endpoint::new(parent, promo_name);
        }
    }

    // ------------------------------------------------------------------
    // Structural edits
    // ------------------------------------------------------------------

    /// Sets a component's lifecycle to `Started` or `Stopped`.
    ///
    /// Setting the current state is a no-op. Crashed components reject both.
    pub fn set_lifecycle(
        &mut self,
        path: &NodePath,
        target: LifecycleTarget,
    ) -> Result<LifecycleChange, KernelError> {
        let component = self.component_mut(path)?;
        if component.lifecycle == Lifecycle::Crashed {
            return Err(KernelError::Crashed(path.clone()));
        }
        let next = target.as_lifecycle();
        if component.lifecycle == next {
            return Ok(LifecycleChange::NoOp);
        }
        let from = component.lifecycle;
        component.lifecycle = next;
        Ok(LifecycleChange::Changed { from })
    }

    /// Marks every component at or beneath `path` as crashed. Used only by
    /// the fault injector.
    pub fn crash(&mut self, path: &NodePath) -> Result<Vec<NodePath>, KernelError> {
        self.node(path)?;
        let mut crashed = Vec::new();
        for p in self.component_paths() {
            if p.starts_with(path) {
                let c = self.component_mut(&p)?;
                if c.lifecycle != Lifecycle::Crashed {
                    c.lifecycle = Lifecycle::Crashed;
                    crashed.push(p);
                }
            }
        }
        if crashed.is_empty() {
            // Crashing a bare composite with no components is a path error.
            if matches!(self.node(path)?, NodeRef::Composite(c) if c.children.is_empty()) {
                return Err(KernelError::UnresolvedPath(path.clone()));
            }
        }
        Ok(crashed)
    }

    /// Installs a wire from a reference endpoint to a service endpoint.
    pub fn add_wire(
        &mut self,
        reference: &Endpoint,
        service: &Endpoint,
    ) -> Result<(), KernelError> {
        if self.endpoint_kind(reference)? != PortKind::Reference {
            return Err(KernelError::KindMismatch {
                endpoint: reference.clone(),
                expected: PortKind::Reference,
            });
        }
        if self.endpoint_kind(service)? != PortKind::Service {
            return Err(KernelError::KindMismatch {
                endpoint: service.clone(),
                expected: PortKind::Service,
            });
        }
        if let Some(existing) = self.wire_from(reference) {
            return Err(KernelError::OccupiedReference {
                reference: reference.clone(),
                bound_to: existing.service.clone(),
            });
        }
        let ref_iface = self.endpoint_interface(reference)?;
        let svc_iface = self.endpoint_interface(service)?;
        if ref_iface != svc_iface {
            return Err(KernelError::InterfaceMismatch {
                reference: reference.clone(),
                reference_interface: ref_iface,
                service: service.clone(),
                service_interface: svc_iface,
            });
        }
        self.wires.insert(Wire {
            reference: reference.clone(),
            service: service.clone(),
        });
        Ok(())
    }

    /// Removes exactly the given wire.
    pub fn remove_wire(
        &mut self,
        reference: &Endpoint,
        service: &Endpoint,
    ) -> Result<(), KernelError> {
        let wire = Wire {
            reference: reference.clone(),
            service: service.clone(),
        };
        if !self.wires.remove(&wire) {
            return Err(KernelError::NoSuchWire(wire));
        }
        Ok(())
    }

    pub fn get_property(&self, path: &NodePath, name: &str) -> Result<PropertyValue, KernelError> {
        let component = self.component(path)?;
        component
            .property(name)
            .map(|p| p.value.clone())
            .ok_or_else(|| KernelError::UndeclaredProperty {
                path: path.clone(),
                name: name.to_string(),
            })
    }

    pub fn set_property(
        &mut self,
        path: &NodePath,
        name: &str,
        value: PropertyValue,
    ) -> Result<PropertyValue, KernelError> {
        let component = self.component_mut(path)?;
        let slot = component
            .properties
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| KernelError::UndeclaredProperty {
                path: path.clone(),
                name: name.to_string(),
            })?;
        if !slot.value.same_type(&value) {
            return Err(KernelError::PropertyTypeMismatch {
                path: path.clone(),
                name: name.to_string(),
                declared: slot.value.type_name(),
                provided: value.type_name(),
            });
        }
        Ok(std::mem::replace(&mut slot.value, value))
    }

    /// Pure read of a node's shape and current state.
    pub fn introspect(&self, path: &NodePath) -> Result<NodeDescriptor, KernelError> {
        match self.node(path)? {
            NodeRef::Component(c) => Ok(NodeDescriptor {
                path: path.clone(),
                name: c.name.clone(),
                kind: NodeKind::Component,
                lifecycle: Some(c.lifecycle),
                behavior: Some(c.behavior.clone()),
                services: c.services.clone(),
                references: c
                    .references
                    .iter()
                    .map(|r| ReferenceView {
                        name: r.name.clone(),
                        interface: r.interface.clone(),
                        bound_to: self
                            .wire_from(&Endpoint::new(path.clone(), &r.name))
                            .map(|w| w.service.clone()),
                    })
                    .collect(),
                properties: c.properties.clone(),
                children: Vec::new(),
            }),
            NodeRef::Composite(c) => {
                let mut services = Vec::new();
                let mut references = Vec::new();
                for promo in &c.promotions {
                    let endpoint = Endpoint::new(path.clone(), &promo.name);
                    let interface = self.endpoint_interface(&endpoint)?;
                    match promo.kind {
                        PortKind::Service => services.push(Port {
                            name: promo.name.clone(),
                            interface,
                        }),
                        PortKind::Reference => references.push(ReferenceView {
                            name: promo.name.clone(),
                            interface,
                            bound_to: self.wire_from(&endpoint).map(|w| w.service.clone()),
                        }),
                    }
                }
                Ok(NodeDescriptor {
                    path: path.clone(),
                    name: c.name.clone(),
                    kind: NodeKind::Composite,
                    lifecycle: None,
                    behavior: None,
                    services,
                    references,
                    properties: Vec::new(),
                    children: c.children.iter().map(|ch| ch.name().to_string()).collect(),
                })
            }
        }
    }

    // ------------------------------------------------------------------
    // Invariant sweep
    // ------------------------------------------------------------------

    /// Re-checks every graph invariant; returns the list of violations.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let mut seen_paths = BTreeSet::new();
        validate_composite(
            &self.root,
            NodePath::root(),
            self,
            &mut seen_paths,
            &mut violations,
        );

        let mut seen_refs = BTreeSet::new();
        for wire in &self.wires {
            match self.endpoint_kind(&wire.reference) {
                Ok(PortKind::Reference) => {}
                Ok(_) => violations.push(format!("wire {wire}: source is not a reference")),
                Err(e) => violations.push(format!("wire {wire}: {e}")),
            }
            match self.endpoint_kind(&wire.service) {
                Ok(PortKind::Service) => {}
                Ok(_) => violations.push(format!("wire {wire}: target is not a service")),
                Err(e) => violations.push(format!("wire {wire}: {e}")),
            }
            match (
                self.endpoint_interface(&wire.reference),
                self.endpoint_interface(&wire.service),
            ) {
                (Ok(a), Ok(b)) if a != b => {
                    violations.push(format!("wire {wire}: interface mismatch {a} vs {b}"))
                }
                _ => {}
            }
            if !seen_refs.insert(wire.reference.clone()) {
                violations.push(format!(
                    "reference {} has more than one outgoing wire",
                    wire.reference
                ));
            }
        }
        violations
    }

    /// Canonical textual form: one sorted line per node, port, property,
    /// promotion, wire and non-empty queue. Two graphs are deeply equal
    /// exactly when their dumps are equal.
    pub fn canonical_dump(&self) -> String {
        let mut lines = Vec::new();
        dump_composite(&self.root, NodePath::root(), &mut lines);
        for wire in &self.wires {
            lines.push(format!("wire {} -> {}", wire.reference, wire.service));
        }
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

/// Borrowed view of a node.
#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Composite(&'a Composite),
    Component(&'a Component),
}

fn collect_components(composite: &Composite, path: NodePath, out: &mut Vec<NodePath>) {
    for child in &composite.children {
        match child {
            Child::Component(c) => out.push(path.child(&c.name)),
            Child::Composite(c) => collect_components(c, path.child(&c.name), out),
        }
    }
}

fn validate_composite(
    composite: &Composite,
    path: NodePath,
    graph: &ArchitectureGraph,
    seen_paths: &mut BTreeSet<NodePath>,
    violations: &mut Vec<String>,
) {
    if !seen_paths.insert(path.clone()) {
        violations.push(format!("duplicate node path {path}"));
    }
    let mut child_names = BTreeSet::new();
    for child in &composite.children {
        if !child_names.insert(child.name().to_string()) {
            violations.push(format!("duplicate child name {} in {path}", child.name()));
        }
        match child {
            Child::Component(c) => {
                let child_path = path.child(&c.name);
                if !seen_paths.insert(child_path.clone()) {
                    violations.push(format!("duplicate node path {child_path}"));
                }
                let mut port_names = BTreeSet::new();
                for port in c.services.iter().chain(&c.references) {
                    if !port_names.insert(port.name.clone()) {
                        violations.push(format!("duplicate port {} on {child_path}", port.name));
                    }
                }
            }
            Child::Composite(c) => {
                validate_composite(c, path.child(&c.name), graph, seen_paths, violations)
            }
        }
    }
    let mut promo_names = BTreeSet::new();
    for promo in &composite.promotions {
        if !promo_names.insert(promo.name.clone()) {
            violations.push(format!("duplicate promotion {} on {path}", promo.name));
        }
        let target = Endpoint::new(path.child(&promo.child), &promo.port);
        match graph.endpoint_kind(&target) {
            Ok(kind) if kind == promo.kind => {}
            Ok(kind) => violations.push(format!(
                "promotion {} on {path}: child endpoint {target} is a {kind}, expected {}",
                promo.name, promo.kind
            )),
            Err(e) => violations.push(format!("promotion {} on {path}: {e}", promo.name)),
        }
    }
}

fn dump_composite(composite: &Composite, path: NodePath, lines: &mut Vec<String>) {
    if path.is_root() {
        lines.push(format!("composite {path}"));
    }
    for promo in &composite.promotions {
        lines.push(format!(
            "promote-{} {}.{} -> {}.{}",
            promo.kind,
            path,
            promo.name,
            path.child(&promo.child),
            promo.port
        ));
    }
    for child in &composite.children {
        match child {
            Child::Component(c) => {
                let p = path.child(&c.name);
                lines.push(format!(
                    "component {p} lifecycle={} behavior={}",
                    c.lifecycle, c.behavior
                ));
                for s in &c.services {
                    lines.push(format!("service {p}.{} : {}", s.name, s.interface));
                }
                for r in &c.references {
                    lines.push(format!("reference {p}.{} : {}", r.name, r.interface));
                }
                for prop in &c.properties {
                    lines.push(format!(
                        "property {p}.{} {}={}",
                        prop.name,
                        prop.value.type_name(),
                        prop.value
                    ));
                }
                if !c.inbox.is_empty() {
                    lines.push(format!("queue {p} len={}", c.inbox.len()));
                }
            }
            Child::Composite(c) => {
                let p = path.child(&c.name);
                lines.push(format!("composite {p}"));
                dump_composite(c, p, lines);
            }
        }
    }
}
