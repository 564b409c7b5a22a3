//! Node paths and port endpoints.
//!
//! A [`NodePath`] names a node in the architecture tree as the sequence of
//! child names from the root composite (`domain`). An [`Endpoint`] names a
//! port (service or reference) on a node; wires connect two endpoints.

use std::fmt;

/// Path separator in the textual form, e.g. `domain/pbr/client_machine`.
pub const PATH_SEP: char = '/';

/// Separator between a node path and a port name, e.g.
/// `domain/pbr/client_machine.computeService`.
pub const PORT_SEP: char = '.';

/// Identifies a node by the chain of names from the root.
///
/// The first segment is always the root composite name (`domain`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(Vec<String>);

impl NodePath {
    /// Path of the root composite.
    pub fn root() -> Self {
        NodePath(vec!["domain".to_string()])
    }

    pub fn from_segments<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        NodePath(segments.into_iter().map(Into::into).collect())
    }

    /// Parses the textual form, e.g. `domain/pbr/client_machine`.
    pub fn parse(text: &str) -> Option<Self> {
        if text.is_empty() {
            return None;
        }
        let segments: Vec<String> = text.split(PATH_SEP).map(str::to_string).collect();
        if segments.iter().any(|s| s.is_empty()) {
            return None;
        }
        Some(NodePath(segments))
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    /// Last segment: the node's own name.
    pub fn name(&self) -> &str {
        self.0.last().map(String::as_str).unwrap_or("")
    }

    /// Path of the enclosing composite, or `None` for the root.
    pub fn parent(&self) -> Option<NodePath> {
        if self.0.len() <= 1 {
            None
        } else {
            Some(NodePath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, name: &str) -> NodePath {
        let mut segments = self.0.clone();
        segments.push(name.to_string());
        NodePath(segments)
    }

    pub fn is_root(&self) -> bool {
        self.0.len() == 1
    }

    /// True when `self` is `other` or lies beneath it.
    pub fn starts_with(&self, other: &NodePath) -> bool {
        self.0.len() >= other.0.len() && self.0[..other.0.len()] == other.0[..]
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join("/"))
    }
}

/// Whether a port provides (`Service`) or consumes (`Reference`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PortKind {
    Service,
    Reference,
}

impl fmt::Display for PortKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortKind::Service => write!(f, "service"),
            PortKind::Reference => write!(f, "reference"),
        }
    }
}

/// A port on a node: component port or composite promotion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub node: NodePath,
    pub port: String,
}

impl Endpoint {
    pub fn new(node: NodePath, port: impl Into<String>) -> Self {
        Endpoint {
            node,
            port: port.into(),
        }
    }

    /// Parses `path.port`, splitting on the last `.`.
    pub fn parse(text: &str) -> Option<Self> {
        let (path, port) = text.rsplit_once(PORT_SEP)?;
        if port.is_empty() {
            return None;
        }
        Some(Endpoint {
            node: NodePath::parse(path)?,
            port: port.to_string(),
        })
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

/// Identifier rule shared by the `.arch` and script grammars:
/// `[A-Za-z_][A-Za-z0-9_-]*`.
pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}
