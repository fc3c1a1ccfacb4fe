//! Random cut of a method after its signature.

use rand::Rng;

use crate::features::lexer::{code_tokens, TokenKind};
use crate::{derive_seed, seeded_rng};

/// A method split into the prompt part and the part to be completed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut {
    pub offset: usize,
    pub prefix: String,
    pub suffix: String,
}

/// Methods must have more than 10 tokens or more than 100 characters.
pub fn is_cut_eligible(code: &str, token_count: usize) -> bool {
    token_count > 10 || code.chars().count() > 100
}

/// Byte offsets where the method may be cut: starts of the lexical tokens
/// after the signature's closing colon, the last token included so the
/// suffix is never empty.
pub fn cut_candidates(code: &str) -> Vec<usize> {
    let tokens = code_tokens(code);
    let Some(def_idx) = tokens
        .iter()
        .position(|t| t.kind == TokenKind::Name && t.text(code) == "def")
    else {
        return Vec::new();
    };
    let mut depth = 0i32;
    let mut colon = None;
    for (i, t) in tokens.iter().enumerate().skip(def_idx + 1) {
        if t.kind != TokenKind::Op {
            continue;
        }
        match t.text(code) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ":" if depth <= 0 => {
                colon = Some(i);
                break;
            }
            _ => {}
        }
    }
    match colon {
        Some(c) => tokens[c + 1..].iter().map(|t| t.start).collect(),
        None => Vec::new(),
    }
}

/// Cut `code` at a uniformly chosen candidate. The draw depends only on
/// `seed` and `key`, not on the order points are processed in.
pub fn random_cut(code: &str, seed: u64, key: &str) -> Option<Cut> {
    let candidates = cut_candidates(code);
    if candidates.is_empty() {
        return None;
    }
    let mut rng = seeded_rng(derive_seed(seed, key));
    let offset = candidates[rng.random_range(0..candidates.len())];
    Some(Cut {
        offset,
        prefix: code[..offset].to_owned(),
        suffix: code[offset..].to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn candidates_follow_signature() {
        let code = "def f(x: int = {'a': 1}) -> dict[str, int]:\n    return x\n";
        let c = cut_candidates(code);
        assert_eq!(&code[c[0]..], "return x\n");
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn no_body_no_candidates() {
        assert!(cut_candidates("def f(x):").is_empty());
        assert!(cut_candidates("x = 1").is_empty());
        assert!(random_cut("def f(x", 1, "k").is_none());
    }

    #[test]
    fn eligibility() {
        assert!(!is_cut_eligible("def f(): pass", 5));
        assert!(is_cut_eligible("def f(): pass", 11));
        assert!(is_cut_eligible(&format!("def f(): return '{}'", "x".repeat(100)), 7));
    }

    #[test]
    fn same_key_same_cut() {
        let code = "def f(a, b):\n    c = a + b\n    return c * 2\n";
        assert_eq!(random_cut(code, 9, "p"), random_cut(code, 9, "p"));
    }

    proptest! {
        #[test]
        fn cut_partitions_code(body in "[a-z]{1,5}( [+*] [a-z0-9]{1,4}){0,6}", seed in any::<u64>()) {
            let code = format!("def g(x, y=(1, 2)):\n    return {body}\n");
            let cut = random_cut(&code, seed, "k").unwrap();
            prop_assert_eq!(format!("{}{}", cut.prefix, cut.suffix), code.clone());
            prop_assert!(cut.prefix.starts_with("def g(x, y=(1, 2)):"));
            prop_assert!(cut.prefix.len() > "def g(x, y=(1, 2)):".len());
            prop_assert!(!cut.suffix.trim().is_empty());
        }
    }
}
