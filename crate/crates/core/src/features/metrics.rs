//! Syntactic features and software metrics over a parsed method.

use std::collections::BTreeSet;

use super::lexer::{self, TokenKind};
use super::parse::{visit_all, visit_named, ParsedMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntacticFeatures {
    pub n_ast_nodes: usize,
    pub n_ast_levels: usize,
    pub n_ast_errors: usize,
    pub token_count: usize,
    pub n_whitespaces: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftwareMetrics {
    pub nloc: usize,
    pub complexity: usize,
    pub n_identifiers: usize,
}

/// Node kinds that add one to cyclomatic complexity.
///
/// `boolean_operator` appears once per `and`/`or`, so `a and b or c` counts
/// twice; `if_clause` is the filter of a comprehension.
pub const DECISION_KINDS: &[&str] = &[
    "if_statement",
    "elif_clause",
    "while_statement",
    "for_statement",
    "except_clause",
    "assert_statement",
    "boolean_operator",
    "conditional_expression",
    "if_clause",
];

/// Count of whitespace characters (space, tab, newline).
pub fn count_whitespace(code: &str) -> usize {
    code.chars().filter(|c| matches!(c, ' ' | '\t' | '\n')).count()
}

pub fn compute_syntactic_features(parsed: &ParsedMethod, code: &str) -> SyntacticFeatures {
    let mut n_ast_nodes = 0;
    let mut n_ast_levels = 0;
    visit_named(parsed.root(), &mut |_, depth| {
        n_ast_nodes += 1;
        n_ast_levels = n_ast_levels.max(depth);
    });
    SyntacticFeatures {
        n_ast_nodes,
        n_ast_levels,
        n_ast_errors: parsed.n_ast_errors(),
        token_count: lexer::code_tokens(code).len(),
        n_whitespaces: count_whitespace(code),
    }
}

pub fn compute_software_metrics(parsed: &ParsedMethod, code: &str) -> SoftwareMetrics {
    let tokens = lexer::code_tokens(code);

    let mut lines = BTreeSet::new();
    for t in &tokens {
        lines.extend(t.line..=t.end_line);
    }

    let identifiers: BTreeSet<&str> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Name)
        .map(|t| t.text(code))
        .filter(|w| !lexer::is_keyword(w))
        .collect();

    let mut decisions = 0;
    visit_all(parsed.root(), &mut |node, _| {
        if node.is_named() && DECISION_KINDS.contains(&node.kind()) {
            decisions += 1;
        }
    });

    SoftwareMetrics {
        nloc: lines.len(),
        complexity: 1 + decisions,
        n_identifiers: identifiers.len(),
    }
}
