//! Parser and interpreter for the reconfiguration scripting language:
//! variable assignments over path expressions plus the three primitives
//! `set-state`, `add-scawire` and `remove-scawire`. Scripts use the `.rcfg`
//! extension.

pub mod ast;
pub mod eval;
pub mod interp;
pub mod parser;
pub mod printer;

pub use ast::{ActionDef, Arg, Axis, Head, PathExpr, Primitive, ScriptAst, Step, Stmt};
pub use eval::{eval_path, Env, NodeSet, ScriptNode};
pub use interp::{
    run_action, step_session, Mode, ReconfigEntry, ReconfigLog, RunOptions, RunReport, StepOutcome,
    StepSession,
};
pub use parser::parse_script;
pub use printer::print_script;

use thiserror::Error;

use crate::kernel::KernelError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{action}` takes {expected} arguments, got {given}")]
    ArityMismatch {
        action: String,
        expected: usize,
        given: usize,
    },
    #[error("variable `${0}` is not bound")]
    UnboundVariable(String),
    #[error("statement {statement}: argument {arg_index} must be a singleton node set, got {size} nodes")]
    NonSingleton {
        statement: usize,
        arg_index: usize,
        size: usize,
    },
    #[error("statement {statement}: {message}")]
    WrongArgument { statement: usize, message: String },
    #[error("statement {statement}: {source}")]
    Kernel {
        statement: usize,
        #[source]
        source: KernelError,
    },
    #[error("statement {statement}: injected failure")]
    Injected { statement: usize },
    #[error("step after done")]
    StepAfterDone,
}
