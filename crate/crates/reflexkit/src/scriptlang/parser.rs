//! Recursive-descent parser for `.rcfg` reconfiguration scripts.
//!
//! ```text
//! action <name>(<params>){ <stmt>* }
//! stmt := <var> = <pathexpr> ;
//!       | <primitive>(<arg>, ...) ;
//! pathexpr := $<head> (/ <axis>::<name>)*
//! arg := pathexpr | "<string>"
//! ```
//!
//! Unknown axes, unknown primitives and uses of unassigned variables are
//! rejected at parse time with a line/column diagnostic. `$domain` is the
//! one built-in variable.

use std::collections::BTreeSet;

use super::ast::{ActionDef, Arg, Axis, Head, PathExpr, Primitive, ScriptAst, Step, Stmt};
use super::ScriptError;
use crate::kernel::path::is_identifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Dollar,
    Slash,
    Axis, // ::
    Equals,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Dollar => write!(f, "`$`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Axis => write!(f, "`::`"),
            Tok::Equals => write!(f, "`=`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
        }
    }
}

fn err(pos: Pos, message: impl Into<String>) -> ScriptError {
    ScriptError::Parse {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ScriptError> {
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
                '$' => {
                    tokens.push((Tok::Dollar, pos));
                    i += 1;
                }
                '/' => {
                    tokens.push((Tok::Slash, pos));
                    i += 1;
                }
                ':' if chars.get(i + 1) == Some(&':') => {
                    tokens.push((Tok::Axis, pos));
                    i += 2;
                }
                '=' => {
                    tokens.push((Tok::Equals, pos));
                    i += 1;
                }
                '(' => {
                    tokens.push((Tok::LParen, pos));
                    i += 1;
                }
                ')' => {
                    tokens.push((Tok::RParen, pos));
                    i += 1;
                }
                '{' => {
                    tokens.push((Tok::LBrace, pos));
                    i += 1;
                }
                '}' => {
                    tokens.push((Tok::RBrace, pos));
                    i += 1;
                }
                ',' => {
                    tokens.push((Tok::Comma, pos));
                    i += 1;
                }
                ';' => {
                    tokens.push((Tok::Semi, pos));
                    i += 1;
                }
                '"' => {
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && chars[j] != '"' {
                        j += 1;
                    }
                    if j >= chars.len() {
                        return Err(err(pos, "unterminated string literal"));
                    }
                    tokens.push((Tok::Str(chars[start..j].iter().collect()), pos));
                    i = j + 1;
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
                other => return Err(err(pos, format!("unexpected character `{other}`"))),
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Tok, Pos)>,
    index: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.index).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.tokens.get(self.index + 1).map(|(t, _)| t)
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

    fn expect(&mut self, expected: Tok) -> Result<Pos, ScriptError> {
        match self.next() {
            Some((tok, pos)) if tok == expected => Ok(pos),
            Some((tok, pos)) => Err(err(pos, format!("expected {expected}, found {tok}"))),
            None => Err(err(
                self.end,
                format!("expected {expected}, found end of input"),
            )),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Pos), ScriptError> {
        match self.next() {
            Some((Tok::Ident(name), pos)) => {
                if !is_identifier(&name) {
                    return Err(err(pos, format!("invalid identifier `{name}`")));
                }
                Ok((name, pos))
            }
            Some((tok, pos)) => Err(err(pos, format!("expected identifier, found {tok}"))),
            None => Err(err(self.end, "expected identifier, found end of input")),
        }
    }

    fn parse_action(&mut self) -> Result<ActionDef, ScriptError> {
        let (kw, kw_pos) = self.expect_ident()?;
        if kw != "action" {
            return Err(err(kw_pos, format!("expected `action`, found `{kw}`")));
        }
        let (name, _) = self.expect_ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let (p, _) = self.expect_ident()?;
                params.push(p);
                match self.peek() {
                    Some(Tok::Comma) => {
                        self.next();
                    }
                    _ => break,
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;

        // Variables assigned so far; `$domain` is built in, parameters are
        // bound by the caller.
        let mut assigned: BTreeSet<String> = params.iter().cloned().collect();
        assigned.insert("domain".to_string());

        let mut body = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next();
                    break;
                }
                Some(Tok::Ident(_)) => {
                    let stmt = self.parse_stmt(&mut assigned)?;
                    body.push(stmt);
                }
                Some(tok) => {
                    let message = format!("expected statement or `}}`, found {tok}");
                    let pos = self.pos();
                    return Err(err(pos, message));
                }
                None => return Err(err(self.end, "unclosed action body")),
            }
        }
        Ok(ActionDef { name, params, body })
    }

    fn parse_stmt(&mut self, assigned: &mut BTreeSet<String>) -> Result<Stmt, ScriptError> {
        let is_call = matches!(self.peek2(), Some(Tok::LParen));
        let stmt = if is_call {
            let (name, pos) = self.expect_ident()?;
            let primitive = Primitive::parse(&name)
                .ok_or_else(|| err(pos, format!("unknown primitive `{name}`")))?;
            self.expect(Tok::LParen)?;
            let mut args = Vec::new();
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    args.push(self.parse_arg(assigned)?);
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.next();
                        }
                        _ => break,
                    }
                }
            }
            self.expect(Tok::RParen)?;
            Stmt::Call { primitive, args }
        } else {
            let (var, _) = self.expect_ident()?;
            self.expect(Tok::Equals)?;
            let expr = self.parse_path(assigned)?;
            assigned.insert(var.clone());
            Stmt::Assign { var, expr }
        };
        self.expect(Tok::Semi)?;
        Ok(stmt)
    }

    fn parse_arg(&mut self, assigned: &BTreeSet<String>) -> Result<Arg, ScriptError> {
        match self.peek() {
            Some(Tok::Str(_)) => {
                let Some((Tok::Str(s), _)) = self.next() else {
                    unreachable!()
                };
                Ok(Arg::Str(s))
            }
            Some(Tok::Dollar) => Ok(Arg::Path(self.parse_path(assigned)?)),
            Some(tok) => {
                let message = format!("expected argument, found {tok}");
                let pos = self.pos();
                Err(err(pos, message))
            }
            None => Err(err(self.end, "expected argument, found end of input")),
        }
    }

    fn parse_path(&mut self, assigned: &BTreeSet<String>) -> Result<PathExpr, ScriptError> {
        self.expect(Tok::Dollar)?;
        let (name, name_pos) = self.expect_ident()?;
        let head = if name == "domain" {
            Head::Domain
        } else {
            if !assigned.contains(&name) {
                return Err(err(
                    name_pos,
                    format!("use of unassigned variable `${name}`"),
                ));
            }
            Head::Var(name)
        };
        let mut steps = Vec::new();
        while self.peek() == Some(&Tok::Slash) {
            self.next();
            let (axis_name, axis_pos) = self.expect_ident()?;
            let axis = Axis::parse(&axis_name)
                .ok_or_else(|| err(axis_pos, format!("unknown axis `{axis_name}`")))?;
            self.expect(Tok::Axis)?;
            let (selector, _) = self.expect_ident()?;
            steps.push(Step {
                axis,
                name: selector,
            });
        }
        Ok(PathExpr { head, steps })
    }
}

/// Parses a script source into its AST, or a line/column diagnostic.
pub fn parse_script(text: &str) -> Result<ScriptAst, ScriptError> {
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
    let mut actions: Vec<ActionDef> = Vec::new();
    while parser.peek().is_some() {
        let pos = parser.pos();
        let action = parser.parse_action()?;
        if actions.iter().any(|a| a.name == action.name) {
            return Err(err(pos, format!("duplicate action `{}`", action.name)));
        }
        actions.push(action);
    }
    Ok(ScriptAst { actions })
}
