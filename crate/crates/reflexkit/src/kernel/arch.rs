//! Parser for `.arch` architecture definitions.
//!
//! The format is line-oriented with `#` comments:
//!
//! ```text
//! composite <name> { <entry>* }
//! entry := component <name> { implementation <behavior-id>
//!                              (service <name> : <Interface>)*
//!                              (reference <name> : <Interface>)*
//!                              (property <name> : <int|text|bool> = <literal>)* }
//!        | composite <name> { ... (service <name> promotes <child>.<port>)*
//!                                 (reference <name> promotes <child>.<port>)* }
//!        | wire <child>.<ref> -> <child>.<service>
//! ```
//!
//! Building returns a graph whose components are all `STOPPED` with every
//! declared wire installed.

use std::collections::BTreeSet;
use std::collections::VecDeque;

use thiserror::Error;

use super::behavior::BehaviorRegistry;
use super::graph::{
    ArchitectureGraph, Child, Component, Composite, Lifecycle, Port, Promotion, Property,
    PropertyValue,
};
use super::path::{is_identifier, Endpoint, NodePath, PortKind};
use super::KernelError;

#[derive(Debug, Error)]
pub enum ArchError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("line {line}: unknown behavior `{behavior}` for component {component}")]
    UnknownBehavior {
        line: usize,
        behavior: String,
        component: String,
    },
    #[error("line {line}: {source}")]
    Semantic {
        line: usize,
        #[source]
        source: KernelError,
    },
}

impl ArchError {
    fn parse(pos: Pos, message: impl Into<String>) -> Self {
        ArchError::Parse {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

// ----------------------------------------------------------------------
// Definition AST
// ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompositeDef {
    pub name: String,
    pub line: usize,
    pub entries: Vec<EntryDef>,
}

#[derive(Debug, Clone)]
pub enum EntryDef {
    Component(ComponentDef),
    Composite(CompositeDef),
    Wire(WireDef),
    Promotion(PromotionDef),
}

#[derive(Debug, Clone)]
pub struct ComponentDef {
    pub name: String,
    pub line: usize,
    pub behavior: String,
    pub services: Vec<(String, String)>,
    pub references: Vec<(String, String)>,
    pub properties: Vec<(String, PropertyValue)>,
}

#[derive(Debug, Clone)]
pub struct WireDef {
    pub line: usize,
    pub from_child: String,
    pub from_port: String,
    pub to_child: String,
    pub to_port: String,
}

#[derive(Debug, Clone)]
pub struct PromotionDef {
    pub line: usize,
    pub kind: PortKind,
    pub name: String,
    pub child: String,
    pub port: String,
}

// ----------------------------------------------------------------------
// Lexer
// ----------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LBrace,
    RBrace,
    Colon,
    Equals,
    Dot,
    Arrow,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Equals => write!(f, "`=`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Arrow => write!(f, "`->`"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ArchError> {
    let mut tokens = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos {
                line: line_no,
                col: i + 1,
            };
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '{' => {
                    tokens.push((Tok::LBrace, pos));
                    i += 1;
                }
                '}' => {
                    tokens.push((Tok::RBrace, pos));
                    i += 1;
                }
                ':' => {
                    tokens.push((Tok::Colon, pos));
                    i += 1;
                }
                '=' => {
                    tokens.push((Tok::Equals, pos));
                    i += 1;
                }
                '.' => {
                    tokens.push((Tok::Dot, pos));
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    tokens.push((Tok::Arrow, pos));
                    i += 2;
                }
                '-' if chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) => {
                    let start = i;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    let text: String = chars[start..i].iter().collect();
                    let value = text
                        .parse()
                        .map_err(|_| ArchError::parse(pos, "bad integer"))?;
                    tokens.push((Tok::Int(value), pos));
                }
                '"' => {
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && chars[j] != '"' {
                        j += 1;
                    }
                    if j >= chars.len() {
                        return Err(ArchError::parse(pos, "unterminated string literal"));
                    }
                    tokens.push((Tok::Str(chars[start..j].iter().collect()), pos));
                    i = j + 1;
                }
                c if c.is_ascii_digit() => {
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    let text: String = chars[start..i].iter().collect();
                    let value = text
                        .parse()
                        .map_err(|_| ArchError::parse(pos, "bad integer"))?;
                    tokens.push((Tok::Int(value), pos));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-')
                    {
                        i += 1;
                    }
                    tokens.push((Tok::Ident(chars[start..i].iter().collect()), pos));
                }
                other => {
                    return Err(ArchError::parse(
                        pos,
                        format!("unexpected character `{other}`"),
                    ));
                }
            }
        }
    }
    Ok(tokens)
}

// ----------------------------------------------------------------------
// Parser
// ----------------------------------------------------------------------

struct Parser {
    tokens: Vec<(Tok, Pos)>,
    index: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.index).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.tokens
            .get(self.index)
            .map(|(_, p)| *p)
            .unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let item = self.tokens.get(self.index).cloned();
        if item.is_some() {
            self.index += 1;
        }
        item
    }

    fn expect(&mut self, expected: Tok) -> Result<Pos, ArchError> {
        match self.next() {
            Some((tok, pos)) if tok == expected => Ok(pos),
            Some((tok, pos)) => Err(ArchError::parse(
                pos,
                format!("expected {expected}, found {tok}"),
            )),
            None => Err(ArchError::parse(
                self.end,
                format!("expected {expected}, found end of input"),
            )),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Pos), ArchError> {
        match self.next() {
            Some((Tok::Ident(name), pos)) => {
                if !is_identifier(&name) {
                    return Err(ArchError::parse(
                        pos,
                        format!("invalid identifier `{name}`"),
                    ));
                }
                Ok((name, pos))
            }
            Some((tok, pos)) => Err(ArchError::parse(
                pos,
                format!("expected identifier, found {tok}"),
            )),
            None => Err(ArchError::parse(
                self.end,
                "expected identifier, found end of input",
            )),
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Result<Pos, ArchError> {
        let (name, pos) = self.expect_ident()?;
        if name != word {
            return Err(ArchError::parse(
                pos,
                format!("expected `{word}`, found `{name}`"),
            ));
        }
        Ok(pos)
    }

    fn parse_composite(&mut self) -> Result<CompositeDef, ArchError> {
        let pos = self.expect_keyword("composite")?;
        let (name, _) = self.expect_ident()?;
        self.expect(Tok::LBrace)?;
        let mut entries = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next();
                    break;
                }
                Some(Tok::Ident(word)) => match word.as_str() {
                    "component" => entries.push(EntryDef::Component(self.parse_component()?)),
                    "composite" => entries.push(EntryDef::Composite(self.parse_composite()?)),
                    "wire" => entries.push(EntryDef::Wire(self.parse_wire()?)),
                    "service" => entries.push(EntryDef::Promotion(
                        self.parse_promotion(PortKind::Service)?,
                    )),
                    "reference" => entries.push(EntryDef::Promotion(
                        self.parse_promotion(PortKind::Reference)?,
                    )),
                    other => {
                        let pos = self.pos();
                        return Err(ArchError::parse(
                            pos,
                            format!("expected component, composite, wire, service or reference, found `{other}`"),
                        ));
                    }
                },
                Some(tok) => {
                    let message = format!("unexpected {tok} in composite body");
                    let pos = self.pos();
                    return Err(ArchError::parse(pos, message));
                }
                None => {
                    return Err(ArchError::parse(self.end, "unclosed composite body"));
                }
            }
        }
        Ok(CompositeDef {
            name,
            line: pos.line,
            entries,
        })
    }

    fn parse_component(&mut self) -> Result<ComponentDef, ArchError> {
        let pos = self.expect_keyword("component")?;
        let (name, _) = self.expect_ident()?;
        self.expect(Tok::LBrace)?;
        self.expect_keyword("implementation")?;
        let (behavior, _) = self.expect_ident()?;
        let mut def = ComponentDef {
            name,
            line: pos.line,
            behavior,
            services: Vec::new(),
            references: Vec::new(),
            properties: Vec::new(),
        };
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next();
                    break;
                }
                Some(Tok::Ident(word)) => match word.as_str() {
                    "service" => {
                        self.next();
                        let (port, _) = self.expect_ident()?;
                        self.expect(Tok::Colon)?;
                        let (iface, _) = self.expect_ident()?;
                        def.services.push((port, iface));
                    }
                    "reference" => {
                        self.next();
                        let (port, _) = self.expect_ident()?;
                        self.expect(Tok::Colon)?;
                        let (iface, _) = self.expect_ident()?;
                        def.references.push((port, iface));
                    }
                    "property" => {
                        self.next();
                        let (prop, _) = self.expect_ident()?;
                        self.expect(Tok::Colon)?;
                        let (ty, ty_pos) = self.expect_ident()?;
                        self.expect(Tok::Equals)?;
                        let value = self.parse_literal(&ty, ty_pos)?;
                        def.properties.push((prop, value));
                    }
                    other => {
                        let pos = self.pos();
                        return Err(ArchError::parse(
                            pos,
                            format!("expected service, reference or property, found `{other}`"),
                        ));
                    }
                },
                Some(tok) => {
                    let message = format!("unexpected {tok} in component body");
                    let pos = self.pos();
                    return Err(ArchError::parse(pos, message));
                }
                None => return Err(ArchError::parse(self.end, "unclosed component body")),
            }
        }
        Ok(def)
    }

    fn parse_literal(&mut self, ty: &str, ty_pos: Pos) -> Result<PropertyValue, ArchError> {
        match ty {
            "int" => match self.next() {
                Some((Tok::Int(v), _)) => Ok(PropertyValue::Int(v)),
                other => Err(ArchError::parse(
                    other.map(|(_, p)| p).unwrap_or(self.end),
                    "expected integer literal",
                )),
            },
            "text" => match self.next() {
                Some((Tok::Str(s), _)) => Ok(PropertyValue::Text(s)),
                other => Err(ArchError::parse(
                    other.map(|(_, p)| p).unwrap_or(self.end),
                    "expected string literal",
                )),
            },
            "bool" => match self.next() {
                Some((Tok::Ident(word), pos)) => match word.as_str() {
                    "true" => Ok(PropertyValue::Bool(true)),
                    "false" => Ok(PropertyValue::Bool(false)),
                    _ => Err(ArchError::parse(pos, "expected `true` or `false`")),
                },
                other => Err(ArchError::parse(
                    other.map(|(_, p)| p).unwrap_or(self.end),
                    "expected `true` or `false`",
                )),
            },
            _ => Err(ArchError::parse(
                ty_pos,
                format!("unknown property type `{ty}` (expected int, text or bool)"),
            )),
        }
    }

    fn parse_wire(&mut self) -> Result<WireDef, ArchError> {
        let pos = self.expect_keyword("wire")?;
        let (from_child, _) = self.expect_ident()?;
        self.expect(Tok::Dot)?;
        let (from_port, _) = self.expect_ident()?;
        self.expect(Tok::Arrow)?;
        let (to_child, _) = self.expect_ident()?;
        self.expect(Tok::Dot)?;
        let (to_port, _) = self.expect_ident()?;
        Ok(WireDef {
            line: pos.line,
            from_child,
            from_port,
            to_child,
            to_port,
        })
    }

    fn parse_promotion(&mut self, kind: PortKind) -> Result<PromotionDef, ArchError> {
        let pos = self.pos();
        self.next(); // service | reference
        let (name, _) = self.expect_ident()?;
        self.expect_keyword("promotes")?;
        let (child, _) = self.expect_ident()?;
        self.expect(Tok::Dot)?;
        let (port, _) = self.expect_ident()?;
        Ok(PromotionDef {
            line: pos.line,
            kind,
            name,
            child,
            port,
        })
    }
}

/// Parses a definition without building a graph from it.
pub fn parse_arch(text: &str) -> Result<CompositeDef, ArchError> {
    let tokens = lex(text)?;
    let end = Pos {
        line: text.lines().count().max(1),
        col: 1,
    };
    let mut parser = Parser {
        tokens,
        index: 0,
        end,
    };
    let def = parser.parse_composite()?;
    if let Some(tok) = parser.peek() {
        let message = format!("unexpected {tok} after top-level composite");
        let pos = parser.pos();
        return Err(ArchError::parse(pos, message));
    }
    Ok(def)
}

/// Parses and builds: returns a graph with all components `STOPPED` and all
/// declared wires installed, rooted at `domain`.
pub fn build_composite(
    text: &str,
    registry: &BehaviorRegistry,
) -> Result<ArchitectureGraph, ArchError> {
    let def = parse_arch(text)?;
    let mut graph = ArchitectureGraph::empty();
    let mut wires = Vec::new();
    let root_path = NodePath::root();
    let child = build_entry(&def, registry, &root_path, &mut wires)?;
    graph.root_mut().children.push(Child::Composite(child));

    for (line, reference, service) in wires {
        graph
            .add_wire(&reference, &service)
            .map_err(|source| ArchError::Semantic { line, source })?;
    }

    let violations = graph.validate();
    if let Some(first) = violations.into_iter().next() {
        return Err(ArchError::Semantic {
            line: def.line,
            source: KernelError::InvariantViolation(first),
        });
    }
    Ok(graph)
}

fn build_entry(
    def: &CompositeDef,
    registry: &BehaviorRegistry,
    parent_path: &NodePath,
    wires: &mut Vec<(usize, Endpoint, Endpoint)>,
) -> Result<Composite, ArchError> {
    let path = parent_path.child(&def.name);
    let mut composite = Composite::new(def.name.clone());
    let mut names = BTreeSet::new();
    for entry in &def.entries {
        match entry {
            EntryDef::Component(c) => {
                if !names.insert(c.name.clone()) {
                    return Err(ArchError::Semantic {
                        line: c.line,
                        source: KernelError::InvariantViolation(format!(
                            "duplicate child name {} in {path}",
                            c.name
                        )),
                    });
                }
                if !registry.contains(&c.behavior) {
                    return Err(ArchError::UnknownBehavior {
                        line: c.line,
                        behavior: c.behavior.clone(),
                        component: path.child(&c.name).to_string(),
                    });
                }
                composite.children.push(Child::Component(Component {
                    name: c.name.clone(),
                    lifecycle: Lifecycle::Stopped,
                    behavior: c.behavior.clone(),
                    services: c
                        .services
                        .iter()
                        .map(|(n, i)| Port {
                            name: n.clone(),
                            interface: i.clone(),
                        })
                        .collect(),
                    references: c
                        .references
                        .iter()
                        .map(|(n, i)| Port {
                            name: n.clone(),
                            interface: i.clone(),
                        })
                        .collect(),
                    properties: c
                        .properties
                        .iter()
                        .map(|(n, v)| Property {
                            name: n.clone(),
                            value: v.clone(),
                        })
                        .collect(),
                    inbox: VecDeque::new(),
                }));
            }
            EntryDef::Composite(inner) => {
                if !names.insert(inner.name.clone()) {
                    return Err(ArchError::Semantic {
                        line: inner.line,
                        source: KernelError::InvariantViolation(format!(
                            "duplicate child name {} in {path}",
                            inner.name
                        )),
                    });
                }
                let built = build_entry(inner, registry, &path, wires)?;
                composite.children.push(Child::Composite(built));
            }
            EntryDef::Wire(w) => {
                wires.push((
                    w.line,
                    Endpoint::new(path.child(&w.from_child), &w.from_port),
                    Endpoint::new(path.child(&w.to_child), &w.to_port),
                ));
            }
            EntryDef::Promotion(p) => {
                composite.promotions.push(Promotion {
                    kind: p.kind,
                    name: p.name.clone(),
                    child: p.child.clone(),
                    port: p.port.clone(),
                });
            }
        }
    }
    Ok(composite)
}
