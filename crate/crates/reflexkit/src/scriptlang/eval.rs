//! Path-expression evaluation over the architecture graph.
//!
//! Each step maps every node in the current set to its matching children or
//! ports by axis and name; results stay duplicate-free in first-occurrence
//! order, which coincides with document order for document-ordered inputs.
//! An axis applied to an incompatible node kind yields the empty set rather
//! than an error.

use std::collections::BTreeMap;
use std::fmt;

use super::ast::{Axis, Head, PathExpr};
use super::ScriptError;
use crate::kernel::graph::{ArchitectureGraph, Child, NodeRef};
use crate::kernel::path::{Endpoint, NodePath, PortKind};

/// A node selected by a path expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptNode {
    Composite(NodePath),
    Component(NodePath),
    Service(Endpoint),
    Reference(Endpoint),
    Property { component: NodePath, name: String },
}

impl fmt::Display for ScriptNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptNode::Composite(p) => write!(f, "composite {p}"),
            ScriptNode::Component(p) => write!(f, "component {p}"),
            ScriptNode::Service(e) => write!(f, "service {e}"),
            ScriptNode::Reference(e) => write!(f, "reference {e}"),
            ScriptNode::Property { component, name } => write!(f, "property {component}.{name}"),
        }
    }
}

/// Ordered, duplicate-free list of nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeSet(Vec<ScriptNode>);

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(node: ScriptNode) -> Self {
        NodeSet(vec![node])
    }

    pub fn push(&mut self, node: ScriptNode) {
        if !self.0.contains(&node) {
            self.0.push(node);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScriptNode> {
        self.0.iter()
    }

    /// The sole node, when the set is a singleton.
    pub fn single(&self) -> Option<&ScriptNode> {
        match self.0.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rendered: Vec<String> = self.0.iter().map(ScriptNode::to_string).collect();
        write!(f, "{{{}}}", rendered.join(", "))
    }
}

/// Variable bindings during action execution.
pub type Env = BTreeMap<String, NodeSet>;

/// Evaluates a path expression. Pure: the graph is only read.
pub fn eval_path(
    expr: &PathExpr,
    env: &Env,
    graph: &ArchitectureGraph,
) -> Result<NodeSet, ScriptError> {
    let mut current = match &expr.head {
        Head::Domain => NodeSet::singleton(ScriptNode::Composite(NodePath::root())),
        Head::Var(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| ScriptError::UnboundVariable(name.clone()))?,
    };
    for step in &expr.steps {
        let mut next = NodeSet::new();
        for node in current.iter() {
            expand(node, step.axis, &step.name, graph, &mut next);
        }
        current = next;
    }
    Ok(current)
}

fn expand(node: &ScriptNode, axis: Axis, name: &str, graph: &ArchitectureGraph, out: &mut NodeSet) {
    match (axis, node) {
        (Axis::Child, ScriptNode::Composite(path)) => {
            if let Ok(NodeRef::Composite(c)) = graph.node(path) {
                for child in &c.children {
                    if child.name() == name {
                        let child_path = path.child(name);
                        match child {
                            Child::Component(_) => out.push(ScriptNode::Component(child_path)),
                            Child::Composite(_) => out.push(ScriptNode::Composite(child_path)),
                        }
                    }
                }
            }
        }
        (Axis::Service, ScriptNode::Component(path)) => {
            if let Ok(c) = graph.component(path) {
                if c.service(name).is_some() {
                    out.push(ScriptNode::Service(Endpoint::new(path.clone(), name)));
                }
            }
        }
        (Axis::Service, ScriptNode::Composite(path)) => {
            if let Ok(NodeRef::Composite(c)) = graph.node(path) {
                if c.promotion(PortKind::Service, name).is_some() {
                    out.push(ScriptNode::Service(Endpoint::new(path.clone(), name)));
                }
            }
        }
        (Axis::Reference, ScriptNode::Component(path)) => {
            if let Ok(c) = graph.component(path) {
                if c.reference(name).is_some() {
                    out.push(ScriptNode::Reference(Endpoint::new(path.clone(), name)));
                }
            }
        }
        (Axis::Reference, ScriptNode::Composite(path)) => {
            if let Ok(NodeRef::Composite(c)) = graph.node(path) {
                if c.promotion(PortKind::Reference, name).is_some() {
                    out.push(ScriptNode::Reference(Endpoint::new(path.clone(), name)));
                }
            }
        }
        (Axis::Property, ScriptNode::Component(path)) => {
            if let Ok(c) = graph.component(path) {
                if c.property(name).is_some() {
                    out.push(ScriptNode::Property {
                        component: path.clone(),
                        name: name.to_string(),
                    });
                }
            }
        }
        // Incompatible node kind for the axis: no matches, by definition.
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ftm::{standard_registry, PBR_ARCH};
    use crate::kernel::build_composite;
    use crate::scriptlang::parser::parse_script;
    use crate::scriptlang::Stmt;

    fn pbr_graph() -> ArchitectureGraph {
        build_composite(PBR_ARCH, &standard_registry()).unwrap()
    }

    /// Parses `x = <expr>;` and returns the expression.
    fn expr(text: &str) -> PathExpr {
        let ast = parse_script(&format!("action t(){{ x = {text}; }}")).unwrap();
        match &ast.actions[0].body[0] {
            Stmt::Assign { expr, .. } => expr.clone(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn domain_child_selects_the_composite() {
        let graph = pbr_graph();
        let set = eval_path(&expr("$domain/scachild::pbr"), &Env::new(), &graph).unwrap();
        assert_eq!(
            set,
            NodeSet::singleton(ScriptNode::Composite(NodePath::root().child("pbr")))
        );
    }

    #[test]
    fn missing_name_yields_empty_set() {
        let graph = pbr_graph();
        let set = eval_path(&expr("$domain/scachild::nonexistent"), &Env::new(), &graph).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn reference_axis_matches_introspection() {
        let graph = pbr_graph();
        let set = eval_path(
            &expr("$domain/scachild::pbr/scachild::client_machine/scareference::computeService"),
            &Env::new(),
            &graph,
        )
        .unwrap();
        let client = NodePath::root().child("pbr").child("client_machine");
        // Oracle: direct lookup through kernel introspection.
        let descriptor = graph.introspect(&client).unwrap();
        assert_eq!(descriptor.references.len(), 1);
        let expected = Endpoint::new(client, descriptor.references[0].name.clone());
        assert_eq!(set, NodeSet::singleton(ScriptNode::Reference(expected)));
    }

    #[test]
    fn promoted_ports_are_visible_on_composites() {
        let graph = pbr_graph();
        let set = eval_path(
            &expr("$domain/scachild::pbr/scachild::primary/scaservice::computeService"),
            &Env::new(),
            &graph,
        )
        .unwrap();
        assert_eq!(set.len(), 1);
        assert!(matches!(set.single(), Some(ScriptNode::Service(_))));
    }

    #[test]
    fn axis_on_incompatible_node_kind_is_empty_not_error() {
        let graph = pbr_graph();
        // scaservice applied to the service node it just selected
        let set = eval_path(
            &expr(
                "$domain/scachild::pbr/scachild::primary/scaservice::computeService/scaservice::computeService",
            ),
            &Env::new(),
            &graph,
        )
        .unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn property_axis_selects_declared_properties() {
        let graph = pbr_graph();
        let set = eval_path(
            &expr("$domain/scachild::pbr/scachild::failure_detector/scaproperty::heartbeat_period"),
            &Env::new(),
            &graph,
        )
        .unwrap();
        let detector = NodePath::root().child("pbr").child("failure_detector");
        assert_eq!(
            set.single(),
            Some(&ScriptNode::Property {
                component: detector,
                name: "heartbeat_period".into()
            })
        );
    }

    #[test]
    fn evaluation_is_pure() {
        let graph = pbr_graph();
        let e = expr("$domain/scachild::pbr/scachild::backup/scaservice::computeService");
        let before = graph.clone();
        let first = eval_path(&e, &Env::new(), &graph).unwrap();
        let second = eval_path(&e, &Env::new(), &graph).unwrap();
        assert_eq!(first, second);
        assert_eq!(graph, before);
    }
}
