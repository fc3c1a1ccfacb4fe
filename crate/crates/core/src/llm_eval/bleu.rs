//! Sentence-level BLEU over lexical code tokens.

use std::collections::HashMap;
use std::hash::Hash;

use super::EvalError;
use crate::features::lexer::code_token_texts;

pub const MAX_N: usize = 4;

pub(crate) fn ngram_counts<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate total for order `n`.
pub(crate) fn clipped_matches<T: Hash + Eq>(cand: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let matches = c
        .iter()
        .map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, cand.len().saturating_sub(n - 1))
}

/// Precision of order `n`; orders above one with no match are smoothed to
/// 1 / (total + 1).
pub(crate) fn smoothed_precision(matches: f64, total: usize, n: usize) -> f64 {
    if matches > 0.0 {
        matches / total as f64
    } else if n >= 2 {
        1.0 / (total as f64 + 1.0)
    } else {
        0.0
    }
}

pub(crate) fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        0.0
    } else if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

/// BLEU with uniform weights over orders `1..=max_n`.
pub fn bleu_tokens<T: Hash + Eq>(cand: &[T], reference: &[T], max_n: usize) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    if cand.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (m, total) = clipped_matches(cand, reference, n);
        let p = smoothed_precision(m as f64, total, n);
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    Ok(brevity_penalty(cand.len(), reference.len()) * (log_sum / max_n as f64).exp())
}

/// BLEU-4 of two code strings.
pub fn bleu(candidate: &str, reference: &str) -> Result<f64, EvalError> {
    bleu_tokens(&code_token_texts(candidate), &code_token_texts(reference), MAX_N)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_one() {
        let code = "def f(x):\n    return x + 1\n";
        assert_eq!(bleu(code, code).unwrap(), 1.0);
        assert_eq!(bleu("x", "x").unwrap(), 1.0);
    }

    #[test]
    fn no_unigram_overlap_is_zero() {
        assert_eq!(bleu("a b c", "d e f").unwrap(), 0.0);
    }

    #[test]
    fn empty_reference_errors() {
        assert!(matches!(bleu("x", "# only a comment"), Err(EvalError::EmptyReference)));
        assert_eq!(bleu("", "x").unwrap(), 0.0);
    }

    #[test]
    fn hand_worked() {
        // cand = a b c d e (5), ref = a b c x e y (6)
        // p1 = 4/5, p2 = 2/4 (ab, bc), p3 = 1/3 (abc), p4 = 0 -> 1/(2+1)
        // BP = exp(1 - 6/5)
        let got = bleu_tokens(&["a", "b", "c", "d", "e"], &["a", "b", "c", "x", "e", "y"], 4).unwrap();
        let want = (1.0f64 - 6.0 / 5.0).exp() * (0.8f64 * 0.5 * (1.0 / 3.0) * (1.0 / 3.0)).powf(0.25);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        // Clipping: cand = the the the the (4), ref = the cat (2)
        // p1 = 1/4, p2 = 0 of 3 -> 1/4, p3 = 0 of 2 -> 1/3, p4 = 0 of 1 -> 1/2; BP = 1
        let got = bleu_tokens(&["the"; 4], &["the", "cat"], 4).unwrap();
        let want = (0.25f64 * 0.25 * (1.0 / 3.0) * 0.5).powf(0.25);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}
