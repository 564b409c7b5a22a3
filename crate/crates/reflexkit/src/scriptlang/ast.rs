//! AST for reconfiguration scripts.
//!
//! A script is a set of actions; each action body is an ordered list of
//! variable assignments (path expressions) and primitive calls. There are no
//! conditionals, loops or arithmetic, so hyphenated identifiers like `c-ref`
//! never collide with an operator.

use std::fmt;

/// The four navigation axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Child,
    Service,
    Reference,
    Property,
}

impl Axis {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "scachild" => Some(Axis::Child),
            "scaservice" => Some(Axis::Service),
            "scareference" => Some(Axis::Reference),
            "scaproperty" => Some(Axis::Property),
            _ => None,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::Child => "scachild",
            Axis::Service => "scaservice",
            Axis::Reference => "scareference",
            Axis::Property => "scaproperty",
        };
        write!(f, "{s}")
    }
}

/// The reconfiguration primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    SetState,
    AddWire,
    RemoveWire,
}

impl Primitive {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "set-state" => Some(Primitive::SetState),
            "add-scawire" => Some(Primitive::AddWire),
            "remove-scawire" => Some(Primitive::RemoveWire),
            _ => None,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Primitive::SetState => "set-state",
            Primitive::AddWire => "add-scawire",
            Primitive::RemoveWire => "remove-scawire",
        };
        write!(f, "{s}")
    }
}

/// Head of a path expression: the built-in root or a script variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Head {
    /// `$domain`, the root composite.
    Domain,
    Var(String),
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Domain => write!(f, "$domain"),
            Head::Var(v) => write!(f, "${v}"),
        }
    }
}

/// One navigation step: axis plus name selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub axis: Axis,
    pub name: String,
}

/// `$head/axis::name/axis::name/...` — at least a head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathExpr {
    pub head: Head,
    pub steps: Vec<Step>,
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for step in &self.steps {
            write!(f, "/{}::{}", step.axis, step.name)?;
        }
        Ok(())
    }
}

/// Argument to a primitive call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Path(PathExpr),
    Str(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Path(p) => write!(f, "{p}"),
            Arg::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign {
        var: String,
        expr: PathExpr,
    },
    Call {
        primitive: Primitive,
        args: Vec<Arg>,
    },
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Assign { var, expr } => write!(f, "{var} = {expr}"),
            Stmt::Call { primitive, args } => {
                let rendered: Vec<String> = args.iter().map(Arg::to_string).collect();
                write!(f, "{primitive}({})", rendered.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

impl ActionDef {
    pub fn assignments(&self) -> usize {
        self.body
            .iter()
            .filter(|s| matches!(s, Stmt::Assign { .. }))
            .count()
    }

    pub fn calls(&self) -> usize {
        self.body
            .iter()
            .filter(|s| matches!(s, Stmt::Call { .. }))
            .count()
    }
}

/// A parsed script: the actions in definition order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScriptAst {
    pub actions: Vec<ActionDef>,
}

impl ScriptAst {
    pub fn action(&self, name: &str) -> Option<&ActionDef> {
        self.actions.iter().find(|a| a.name == name)
    }
}
