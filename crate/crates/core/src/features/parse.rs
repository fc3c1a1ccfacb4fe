//! Error-tolerant parsing via tree-sitter's Python grammar.

use std::cell::RefCell;

use tree_sitter::{Node, Parser, Tree};

use super::FeatureError;

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("python grammar is ABI compatible");
        parser
    });
}

/// A concrete syntax tree together with the source it was parsed from.
pub struct ParsedMethod {
    tree: Tree,
    source: String,
}

impl std::fmt::Debug for ParsedMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParsedMethod")
            .field("sexp", &self.tree.root_node().to_sexp())
            .finish()
    }
}

impl ParsedMethod {
    pub fn root(&self) -> Node<'_> {
        self.tree.root_node()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn text(&self, node: Node<'_>) -> &str {
        &self.source[node.byte_range()]
    }

    /// ERROR nodes plus MISSING nodes inserted by error recovery.
    pub fn n_ast_errors(&self) -> usize {
        let mut count = 0;
        visit_all(self.root(), &mut |node, _| {
            if node.is_error() || node.is_missing() {
                count += 1;
            }
        });
        count
    }
}

/// Parse UTF-8 bytes. Syntax errors never fail; only invalid UTF-8 does.
pub fn parse_method(code: &[u8]) -> Result<ParsedMethod, FeatureError> {
    let source = std::str::from_utf8(code).map_err(FeatureError::NotUtf8)?;
    Ok(parse_source(source))
}

/// Parse a string that is already known to be UTF-8.
pub fn parse_source(source: &str) -> ParsedMethod {
    let tree = PARSER.with(|p| {
        p.borrow_mut()
            .parse(source, None)
            .expect("parser has a language and no timeout")
    });
    ParsedMethod {
        tree,
        source: source.to_owned(),
    }
}

/// Pre-order walk over every node (named and anonymous). The callback
/// receives the number of *named* nodes on the path from the root to the
/// node, inclusive of the node itself when it is named.
pub fn visit_all<'t>(root: Node<'t>, f: &mut dyn FnMut(Node<'t>, usize)) {
    let mut cursor = root.walk();
    let mut named_depths: Vec<usize> = Vec::new();
    loop {
        let node = cursor.node();
        let parent_depth = named_depths.last().copied().unwrap_or(0);
        let depth = parent_depth + usize::from(node.is_named());
        f(node, depth);
        if cursor.goto_first_child() {
            named_depths.push(depth);
            continue;
        }
        loop {
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() {
                return;
            }
            named_depths.pop();
        }
    }
}

/// Pre-order walk over named nodes only, with named depth (root = 1).
pub fn visit_named<'t>(root: Node<'t>, f: &mut dyn FnMut(Node<'t>, usize)) {
    visit_all(root, &mut |node, depth| {
        if node.is_named() {
            f(node, depth);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_has_no_errors() {
        let p = parse_method(b"def f():\n    return 1\n").unwrap();
        assert_eq!(p.n_ast_errors(), 0);
    }

    #[test]
    fn malformed_has_error_nodes() {
        let p = parse_method(b"def f(:\n    return").unwrap();
        assert!(p.n_ast_errors() >= 1);
        let p = parse_method(b"def f(x):\n    return x +* 2 ) ]\n").unwrap();
        assert!(p.n_ast_errors() >= 1);
    }

    #[test]
    fn non_utf8_rejected() {
        assert!(matches!(
            parse_method(&[0x64, 0x65, 0xff, 0xfe]),
            Err(FeatureError::NotUtf8(_))
        ));
    }

    #[test]
    fn named_depth_counts_root_as_one() {
        let p = parse_source("def f():\n    return 1\n");
        let mut max = 0;
        visit_named(p.root(), &mut |_, d| max = max.max(d));
        // module > function_definition > block > return_statement > integer
        assert_eq!(max, 5);
    }
}
