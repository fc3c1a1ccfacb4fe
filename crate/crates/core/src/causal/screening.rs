//! Confounder screening by correlation with the outcome.

use serde::{Deserialize, Serialize};

use super::stats::{correlation, CorrelationMethod};
use super::StudyRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedCandidate {
    pub name: String,
    pub min_abs_r: f64,
    /// (group, r) per treatment group, in group order.
    pub per_group: Vec<(String, f64)>,
}

/// Candidates whose |r| with `outcome` lies in `[lo, hi]` in every group,
/// strongest minimum first. Candidates with an undefined correlation in any
/// group are excluded.
pub fn screen_confounders(
    records: &[StudyRecord],
    candidates: &[String],
    outcome: &str,
    lo: f64,
    hi: f64,
    method: CorrelationMethod,
) -> Vec<ScreenedCandidate> {
    let mut groups: Vec<&str> = records.iter().map(|r| r.treatment.as_str()).collect();
    groups.sort_unstable();
    groups.dedup();
    let mut kept = Vec::new();
    'cand: for name in candidates {
        let mut per_group = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in records.iter().filter(|r| r.treatment == *g) {
                match (r.values.get(name), r.values.get(outcome)) {
                    (Some(x), Some(y)) => {
                        xs.push(*x);
                        ys.push(*y);
                    }
                    _ => continue 'cand,
                }
            }
            match correlation(&xs, &ys, method) {
                Ok(r) if (lo..=hi).contains(&r.abs()) => per_group.push(((*g).to_owned(), r)),
                _ => continue 'cand,
            }
        }
        if per_group.is_empty() {
            continue;
        }
        let min_abs_r = per_group.iter().map(|(_, r)| r.abs()).fold(f64::INFINITY, f64::min);
        kept.push(ScreenedCandidate {
            name: name.clone(),
            min_abs_r,
            per_group,
        });
    }
    kept.sort_by(|a, b| b.min_abs_r.total_cmp(&a.min_abs_r).then_with(|| a.name.cmp(&b.name)));
    kept
}
