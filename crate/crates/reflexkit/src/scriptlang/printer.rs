//! Canonical script printing. `parse(print(ast))` yields an equal AST.

use super::ast::{ActionDef, ScriptAst};

pub fn print_script(ast: &ScriptAst) -> String {
    let rendered: Vec<String> = ast.actions.iter().map(print_action).collect();
    rendered.join("\n")
}

fn print_action(action: &ActionDef) -> String {
    let mut out = format!("action {}({}) {{\n", action.name, action.params.join(", "));
    for stmt in &action.body {
        out.push_str(&format!("  {stmt};\n"));
    }
    out.push_str("}\n");
    out
}
