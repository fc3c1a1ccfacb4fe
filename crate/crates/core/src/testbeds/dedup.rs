//! Near-duplicate removal with Jaccard similarity over BPE token sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TestbedError;
use crate::tokenization::BpeModel;

pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Counts of one dedup pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub before: usize,
    pub dupes: usize,
    /// Fraction of `before` that was dropped.
    pub rate: f64,
    pub after: usize,
}

impl DedupReport {
    pub fn new(before: usize, dupes: usize) -> Self {
        let rate = if before == 0 {
            0.0
        } else {
            dupes as f64 / before as f64
        };
        DedupReport {
            before,
            dupes,
            rate,
            after: before - dupes,
        }
    }

    /// `2.30%`
    pub fn rate_percent(&self) -> String {
        format!("{:.2}%", self.rate * 100.0)
    }
}

/// Distinct token ids of `text`, sorted.
pub fn token_set(model: &BpeModel, text: &str) -> Vec<u32> {
    let mut ids = model.encode(text);
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// |a ∩ b| / |a ∪ b| over sorted, distinct slices. Two empty sets are equal.
pub fn jaccard_similarity<T: Ord>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Greedy first-wins scan: item `i` is dropped iff it is at least
/// `threshold` similar to an earlier kept item. Returns kept indices.
pub fn dedup_sets(sets: &[Vec<u32>], threshold: f64) -> Result<(Vec<usize>, DedupReport), TestbedError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(TestbedError::InvalidThreshold(threshold));
    }
    let similar_earlier: Vec<Vec<usize>> = (0..sets.len())
        .into_par_iter()
        .map(|i| {
            (0..i)
                .filter(|&j| jaccard_similarity(&sets[i], &sets[j]) >= threshold)
                .collect()
        })
        .collect();
    let mut kept_flag = vec![false; sets.len()];
    let mut kept = Vec::new();
    for (i, earlier) in similar_earlier.iter().enumerate() {
        if !earlier.iter().any(|&j| kept_flag[j]) {
            kept_flag[i] = true;
            kept.push(i);
        }
    }
    let report = DedupReport::new(sets.len(), sets.len() - kept.len());
    Ok((kept, report))
}

/// Deduplicate items by the BPE token set of `text(item)`, keeping input order.
pub fn dedup<T: Sync, F>(
    items: Vec<T>,
    model: &BpeModel,
    threshold: f64,
    text: F,
) -> Result<(Vec<T>, DedupReport), TestbedError>
where
    F: Fn(&T) -> &str + Sync,
{
    let sets: Vec<Vec<u32>> = items.par_iter().map(|it| token_set(model, text(it))).collect();
    let (kept, report) = dedup_sets(&sets, threshold)?;
    let mut keep = vec![false; items.len()];
    for i in kept {
        keep[i] = true;
    }
    let out = items
        .into_iter()
        .zip(keep)
        .filter_map(|(it, k)| k.then_some(it))
        .collect();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard_similarity(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(jaccard_similarity(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(jaccard_similarity(&['a', 'b', 'c'], &['b', 'c', 'd']), 0.5);
        assert_eq!(jaccard_similarity::<u32>(&[], &[]), 1.0);
        assert_eq!(jaccard_similarity(&[], &[1]), 0.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        // 0.7 exactly: |∩| = 7, |∪| = 10.
        let a: Vec<u32> = (0..8).collect();
        let b: Vec<u32> = (1..10).collect();
        assert_eq!(jaccard_similarity(&a, &b), 0.7);
        let (kept, rep) = dedup_sets(&[a, b], 0.7).unwrap();
        assert_eq!(kept, vec![0]);
        assert_eq!(rep.dupes, 1);
    }

    #[test]
    fn drop_of_dropped_item_does_not_shadow() {
        // 1 duplicates 0, 2 duplicates only 1: 2 is kept.
        let s0: Vec<u32> = (0..10).collect();
        let s1: Vec<u32> = (2..12).collect();
        let s2: Vec<u32> = (4..14).collect();
        assert!(jaccard_similarity(&s0, &s2) < 0.7);
        let (kept, _) = dedup_sets(&[s0, s1, s2], 0.6).unwrap();
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn bad_threshold() {
        assert!(dedup_sets(&[], 0.0).is_err());
        assert!(dedup_sets(&[], 1.5).is_err());
    }

    #[test]
    fn report_arithmetic() {
        let r = DedupReport::new(3000, 69);
        assert_eq!(r.after, 2931);
        assert_eq!(r.rate_percent(), "2.30%");
    }
}
