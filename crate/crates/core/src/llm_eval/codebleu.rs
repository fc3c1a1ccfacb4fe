//! CodeBLEU: BLEU, keyword-weighted BLEU, syntax subtree match and
//! def-use dataflow match, linearly combined.

use std::collections::HashMap;

use tree_sitter::Node;

use super::bleu::{brevity_penalty, clipped_matches, ngram_counts, smoothed_precision, MAX_N};
use super::{bleu_tokens, EvalError};
use crate::features::lexer::{code_token_texts, is_keyword};
use crate::features::{parse_source, ParsedMethod};

pub const DEFAULT_WEIGHTS: [f64; 4] = [0.25, 0.25, 0.25, 0.25];

const KEYWORD_WEIGHT: f64 = 1.0;
const OTHER_WEIGHT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeBleu {
    pub bleu: f64,
    pub weighted_bleu: f64,
    pub syntax_match: f64,
    pub dataflow_match: f64,
    pub score: f64,
}

fn token_weight(tok: &str) -> f64 {
    if is_keyword(tok) {
        KEYWORD_WEIGHT
    } else {
        OTHER_WEIGHT
    }
}

/// BLEU whose unigram precision weighs keywords above other tokens.
pub fn weighted_bleu(cand: &[&str], reference: &[&str]) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    if cand.is_empty() {
        return Ok(0.0);
    }
    let c = ngram_counts(cand, 1);
    let r = ngram_counts(reference, 1);
    let (mut num, mut den) = (0.0, 0.0);
    for (g, k) in &c {
        let w = token_weight(g[0]);
        num += w * (*k).min(r.get(g).copied().unwrap_or(0)) as f64;
        den += w * *k as f64;
    }
    if num == 0.0 {
        return Ok(0.0);
    }
    let mut log_sum = (num / den).ln();
    for n in 2..=MAX_N {
        let (m, total) = clipped_matches(cand, reference, n);
        log_sum += smoothed_precision(m as f64, total, n).ln();
    }
    Ok(brevity_penalty(cand.len(), reference.len()) * (log_sum / MAX_N as f64).exp())
}

fn sexp(node: Node<'_>, out: &mut String) {
    out.push('(');
    out.push_str(node.kind());
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        if child.kind() == "comment" {
            continue;
        }
        out.push(' ');
        sexp(child, out);
    }
    out.push(')');
}

/// Named-kind shapes of every non-leaf subtree, comments removed.
pub fn subtree_shapes(parsed: &ParsedMethod) -> Vec<String> {
    let mut shapes = Vec::new();
    let mut stack = vec![parsed.root()];
    while let Some(node) = stack.pop() {
        if node.kind() == "comment" {
            continue;
        }
        if node.child_count() > 0 {
            let mut s = String::new();
            sexp(node, &mut s);
            shapes.push(s);
        }
        let mut cursor = node.walk();
        stack.extend(node.named_children(&mut cursor));
    }
    shapes
}

/// Fraction of reference subtrees whose shape also occurs in the candidate.
pub fn syntax_match(cand: &ParsedMethod, reference: &ParsedMethod) -> f64 {
    let ref_shapes = subtree_shapes(reference);
    let cand_shapes: std::collections::HashSet<String> = subtree_shapes(cand).into_iter().collect();
    if ref_shapes.is_empty() {
        return if cand_shapes.is_empty() { 1.0 } else { 0.0 };
    }
    let hits = ref_shapes.iter().filter(|s| cand_shapes.contains(*s)).count();
    hits as f64 / ref_shapes.len() as f64
}

/// A def-use edge: the `use_idx`-th read of `var` saw its `def_idx`-th write.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataflowEdge {
    pub var: String,
    pub def_idx: usize,
    pub use_idx: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Use,
    Def,
}

struct FlowWalker<'a> {
    src: &'a ParsedMethod,
    defs: HashMap<String, usize>,
    uses: HashMap<String, usize>,
    edges: Vec<DataflowEdge>,
}

impl FlowWalker<'_> {
    fn identifier(&mut self, node: Node<'_>, ctx: Ctx) {
        let name = self.src.text(node).to_owned();
        match ctx {
            Ctx::Def => *self.defs.entry(name).or_insert(0) += 1,
            Ctx::Use => {
                let Some(d) = self.defs.get(&name).copied() else {
                    return;
                };
                let u = self.uses.entry(name.clone()).or_insert(0);
                self.edges.push(DataflowEdge {
                    var: name,
                    def_idx: d - 1,
                    use_idx: *u,
                });
                *u += 1;
            }
        }
    }

    fn field(&mut self, node: Node<'_>, name: &str, ctx: Ctx) {
        if let Some(child) = node.child_by_field_name(name) {
            self.walk(child, ctx);
        }
    }

    fn children(&mut self, node: Node<'_>, ctx: Ctx) {
        let mut cursor = node.walk();
        let kids: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
        for child in kids {
            self.walk(child, ctx);
        }
    }

    fn walk(&mut self, node: Node<'_>, ctx: Ctx) {
        match node.kind() {
            "identifier" => self.identifier(node, ctx),
            "comment" | "string" | "integer" | "float" | "true" | "false" | "none" => {}
            "assignment" => {
                self.field(node, "right", Ctx::Use);
                self.field(node, "left", Ctx::Def);
            }
            "augmented_assignment" => {
                self.field(node, "right", Ctx::Use);
                self.field(node, "left", Ctx::Use);
                self.field(node, "left", Ctx::Def);
            }
            "for_statement" | "for_in_clause" => {
                self.field(node, "right", Ctx::Use);
                self.field(node, "left", Ctx::Def);
                self.field(node, "body", Ctx::Use);
                self.field(node, "alternative", Ctx::Use);
            }
            "list_comprehension" | "set_comprehension" | "dictionary_comprehension"
            | "generator_expression" => {
                // Clauses bind before the element expression reads them.
                let mut cursor = node.walk();
                let kids: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
                let body = node.child_by_field_name("body");
                for child in kids.iter().filter(|k| Some(**k) != body) {
                    self.walk(*child, Ctx::Use);
                }
                if let Some(b) = body {
                    self.walk(b, Ctx::Use);
                }
            }
            "named_expression" => {
                self.field(node, "value", Ctx::Use);
                self.field(node, "name", Ctx::Def);
            }
            "as_pattern" => {
                let mut cursor = node.walk();
                let kids: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
                for child in kids {
                    let c = if child.kind() == "as_pattern_target" { Ctx::Def } else { Ctx::Use };
                    self.walk(child, c);
                }
            }
            "function_definition" | "class_definition" => {
                self.field(node, "parameters", Ctx::Def);
                self.field(node, "superclasses", Ctx::Use);
                self.field(node, "body", Ctx::Use);
            }
            "lambda" => {
                self.field(node, "parameters", Ctx::Def);
                self.field(node, "body", Ctx::Use);
            }
            "default_parameter" | "typed_default_parameter" => {
                self.field(node, "value", Ctx::Use);
                self.field(node, "name", Ctx::Def);
            }
            "typed_parameter" => {
                let mut cursor = node.walk();
                let first = node.named_children(&mut cursor).next();
                if let Some(f) = first {
                    self.walk(f, Ctx::Def);
                }
            }
            "keyword_argument" => self.field(node, "value", Ctx::Use),
            "attribute" => self.field(node, "object", Ctx::Use),
            "subscript" => self.children(node, Ctx::Use),
            "type" => {}
            _ => self.children(node, ctx),
        }
    }
}

/// Name-sensitive def-use edges of a method, in source order.
pub fn dataflow_edges(parsed: &ParsedMethod) -> Vec<DataflowEdge> {
    let mut w = FlowWalker {
        src: parsed,
        defs: HashMap::new(),
        uses: HashMap::new(),
        edges: Vec::new(),
    };
    w.walk(parsed.root(), Ctx::Use);
    w.edges
}

/// Multiset overlap of reference edges found in the candidate.
pub fn dataflow_match(cand: &ParsedMethod, reference: &ParsedMethod) -> f64 {
    let ref_edges = dataflow_edges(reference);
    let cand_edges = dataflow_edges(cand);
    if ref_edges.is_empty() {
        return if cand_edges.is_empty() { 1.0 } else { 0.0 };
    }
    let mut pool: HashMap<&DataflowEdge, usize> = HashMap::new();
    for e in &cand_edges {
        *pool.entry(e).or_insert(0) += 1;
    }
    let mut hits = 0;
    for e in &ref_edges {
        if let Some(k) = pool.get_mut(e) {
            if *k > 0 {
                *k -= 1;
                hits += 1;
            }
        }
    }
    hits as f64 / ref_edges.len() as f64
}

/// All four components and their weighted sum. Weights must be
/// non-negative and sum to one.
pub fn codebleu_components(candidate: &str, reference: &str, weights: [f64; 4]) -> Result<CodeBleu, EvalError> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(EvalError::InvalidWeights(weights));
    }
    let cand_toks = code_token_texts(candidate);
    let ref_toks = code_token_texts(reference);
    let bleu = bleu_tokens(&cand_toks, &ref_toks, MAX_N)?;
    let weighted = weighted_bleu(&cand_toks, &ref_toks)?;
    let cand_tree = parse_source(candidate);
    let ref_tree = parse_source(reference);
    let syntax = syntax_match(&cand_tree, &ref_tree);
    let flow = dataflow_match(&cand_tree, &ref_tree);
    let score = weights[0] * bleu + weights[1] * weighted + weights[2] * syntax + weights[3] * flow;
    Ok(CodeBleu {
        bleu,
        weighted_bleu: weighted,
        syntax_match: syntax,
        dataflow_match: flow,
        score,
    })
}

pub fn codebleu(candidate: &str, reference: &str, weights: [f64; 4]) -> Result<f64, EvalError> {
    Ok(codebleu_components(candidate, reference, weights)?.score)
}
