//! Locate function definitions in a Python module.

use tree_sitter::Node;

use super::docstring::clean_docstring;
use super::parse::{parse_source, ParsedMethod};

/// One function found in a module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    /// Bare function name.
    pub name: String,
    /// Dotted path through enclosing classes, e.g. `Outer.Inner.method`.
    pub qualified_name: String,
    /// Source of the `def` (decorators excluded), dedented to column 0.
    pub code: String,
    pub docstring: Option<String>,
    /// Everything after the function name. Two definitions with equal keys
    /// but different names are a rename.
    pub body_key: String,
}

/// Top-level functions and methods of (possibly nested) classes, in source
/// order. Functions nested inside other functions are part of their parent.
pub fn extract_functions(source: &str) -> Vec<FunctionDef> {
    let parsed = parse_source(source);
    let mut out = Vec::new();
    collect(&parsed, parsed.root(), &mut Vec::new(), &mut out);
    out
}

fn collect(parsed: &ParsedMethod, node: Node<'_>, scope: &mut Vec<String>, out: &mut Vec<FunctionDef>) {
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        let def = if child.kind() == "decorated_definition" {
            match child.child_by_field_name("definition") {
                Some(d) => d,
                None => continue,
            }
        } else {
            child
        };
        match def.kind() {
            "function_definition" => {
                if let Some(f) = function_def(parsed, def, scope) {
                    out.push(f);
                }
            }
            "class_definition" => {
                let name = def
                    .child_by_field_name("name")
                    .map(|n| parsed.text(n).to_owned())
                    .unwrap_or_default();
                if let Some(body) = def.child_by_field_name("body") {
                    scope.push(name);
                    collect(parsed, body, scope, out);
                    scope.pop();
                }
            }
            // Definitions guarded by if/try at module or class level.
            "if_statement" | "try_statement" | "block" | "else_clause" | "elif_clause"
            | "except_clause" | "finally_clause" => collect(parsed, def, scope, out),
            _ => {}
        }
    }
}

fn function_def(parsed: &ParsedMethod, node: Node<'_>, scope: &[String]) -> Option<FunctionDef> {
    let name_node = node.child_by_field_name("name")?;
    let name = parsed.text(name_node).to_owned();
    let column = node.start_position().column;
    let code = dedent_from_column(parsed.text(node), column);

    let body_key = parsed.source()[name_node.end_byte()..node.end_byte()].to_owned();
    let body_key = dedent_from_column(&body_key, column);

    let docstring = node
        .child_by_field_name("body")
        .and_then(|body| leading_docstring(parsed, body));

    let mut qualified: Vec<&str> = scope.iter().map(String::as_str).collect();
    qualified.push(&name);
    Some(FunctionDef {
        qualified_name: qualified.join("."),
        name,
        code,
        docstring,
        body_key,
    })
}

/// The leading string literal of a block, cleaned. Comments are never part
/// of the docstring.
pub fn leading_docstring(parsed: &ParsedMethod, body: Node<'_>) -> Option<String> {
    let mut cursor = body.walk();
    let first = body
        .named_children(&mut cursor)
        .find(|n| n.kind() != "comment")?;
    if first.kind() != "expression_statement" || first.named_child_count() != 1 {
        return None;
    }
    let string = first.named_child(0)?;
    if string.kind() != "string" {
        return None;
    }
    let mut start = string.start_byte();
    let mut end = string.end_byte();
    let mut c = string.walk();
    for part in string.children(&mut c) {
        match part.kind() {
            "string_start" => start = part.end_byte(),
            "string_end" => end = part.start_byte(),
            _ => {}
        }
    }
    if start > end {
        return None;
    }
    let cleaned = clean_docstring(&parsed.source()[start..end]);
    (!cleaned.is_empty()).then_some(cleaned)
}

/// Remove up to `column` leading whitespace characters from every line
/// after the first (the first line starts at the node itself).
fn dedent_from_column(text: &str, column: usize) -> String {
    if column == 0 {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i == 0 {
            out.push_str(line);
            continue;
        }
        let strip = line
            .char_indices()
            .take(column)
            .take_while(|(_, c)| *c == ' ' || *c == '\t')
            .map(|(i, c)| i + c.len_utf8())
            .last()
            .unwrap_or(0);
        out.push_str(&line[strip..]);
    }
    out
}
