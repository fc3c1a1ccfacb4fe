//! Propensity-score estimators of the average treatment effect.

use serde::{Deserialize, Serialize};

use super::propensity::{fit_propensity, PropensityParams};
use super::stats::sample_std;
use super::{BinaryDataset, CausalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Matching,
    Stratification,
    Ipw,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Matching, Method::Stratification, Method::Ipw];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Matching => "matching",
            Method::Stratification => "stratification",
            Method::Ipw => "ipw",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Matching => "Score Matching",
            Method::Stratification => "Stratification",
            Method::Ipw => "IPW",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorParams {
    pub strata: usize,
    /// Caliper in standard deviations of logit(e).
    pub caliper_sd: f64,
    pub min_per_arm: usize,
    pub propensity: PropensityParams,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            strata: 5,
            caliper_sd: 0.2,
            min_per_arm: 30,
            propensity: PropensityParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub method: Method,
    pub ate: f64,
    /// `ate × 100` for outcomes on a [0, 1] scale.
    pub ate_pct: Option<f64>,
    pub n_treated: usize,
    pub n_control: usize,
}

fn logit(e: f64) -> f64 {
    (e / (1.0 - e)).ln()
}

/// Mean outcome of the pool entries nearest to `target` (ties averaged),
/// or `None` when the nearest is beyond `caliper`. `pool` is sorted by key.
fn nearest_mean(pool: &[(f64, f64)], target: f64, caliper: f64) -> Option<f64> {
    let pos = pool.partition_point(|(k, _)| *k < target);
    let dist = |i: usize| (pool[i].0 - target).abs();
    let best = [pos.checked_sub(1), (pos < pool.len()).then_some(pos)]
        .into_iter()
        .flatten()
        .map(dist)
        .fold(f64::INFINITY, f64::min);
    if best.is_nan() || best > caliper {
        return None;
    }
    let tied = |i: usize| (dist(i) - best).abs() <= 1e-12;
    let mut lo = pos;
    while lo > 0 && tied(lo - 1) {
        lo -= 1;
    }
    let mut hi = pos;
    while hi < pool.len() && tied(hi) {
        hi += 1;
    }
    let ys: Vec<f64> = (lo..hi).filter(|i| tied(*i)).map(|i| pool[i].1).collect();
    Some(ys.iter().sum::<f64>() / ys.len() as f64)
}

/// 1-NN matching with replacement on logit(e) in both directions.
pub fn matching_ate(t: &[bool], y: &[f64], e: &[f64], caliper_sd: f64) -> Result<f64, CausalError> {
    let keys: Vec<f64> = e.iter().map(|v| logit(*v)).collect();
    let caliper = caliper_sd * sample_std(&keys);
    let mut treated: Vec<(f64, f64)> = Vec::new();
    let mut control: Vec<(f64, f64)> = Vec::new();
    for i in 0..t.len() {
        if t[i] {
            treated.push((keys[i], y[i]));
        } else {
            control.push((keys[i], y[i]));
        }
    }
    treated.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    control.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut sum = 0.0;
    let mut matched = 0usize;
    for (k, yi) in &treated {
        if let Some(m) = nearest_mean(&control, *k, caliper) {
            sum += yi - m;
            matched += 1;
        }
    }
    for (k, yi) in &control {
        if let Some(m) = nearest_mean(&treated, *k, caliper) {
            sum += m - yi;
            matched += 1;
        }
    }
    if matched == 0 {
        return Err(CausalError::NoCommonSupport);
    }
    Ok(sum / matched as f64)
}

/// Propensity-quantile strata; within-stratum differences weighted by size.
pub fn stratification_ate(t: &[bool], y: &[f64], e: &[f64], strata: usize) -> Result<f64, CausalError> {
    let strata = strata.max(1);
    let mut sorted: Vec<f64> = e.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts: Vec<f64> = (1..strata).map(|j| sorted[j * n / strata]).collect();
    let mut acc = vec![(0.0, 0usize, 0.0, 0usize); strata];
    for i in 0..t.len() {
        let s = cuts.partition_point(|c| *c <= e[i]);
        let a = &mut acc[s];
        if t[i] {
            a.0 += y[i];
            a.1 += 1;
        } else {
            a.2 += y[i];
            a.3 += 1;
        }
    }
    let mut num = 0.0;
    let mut weight = 0usize;
    for (st, nt, sc, nc) in acc {
        if nt == 0 || nc == 0 {
            continue;
        }
        let size = nt + nc;
        num += size as f64 * (st / nt as f64 - sc / nc as f64);
        weight += size;
    }
    if weight == 0 {
        return Err(CausalError::AllStrataDropped);
    }
    Ok(num / weight as f64)
}

/// mean(T·Y/e) − mean((1−T)·Y/(1−e)).
pub fn ipw_ate(t: &[bool], y: &[f64], e: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..t.len() {
        if t[i] {
            a += y[i] / e[i];
        } else {
            b += y[i] / (1.0 - e[i]);
        }
    }
    a / n - b / n
}

/// Fit the propensity model on the dataset's confounders and estimate.
pub fn estimate_dataset(
    data: &BinaryDataset,
    method: Method,
    params: &EstimatorParams,
) -> Result<AteResult, CausalError> {
    let n_treated = data.t.iter().filter(|x| **x).count();
    let n_control = data.t.len() - n_treated;
    if n_treated < params.min_per_arm.max(1) || n_control < params.min_per_arm.max(1) {
        return Err(CausalError::InsufficientData(format!(
            "{n_treated} treated and {n_control} control rows, need {} per arm",
            params.min_per_arm.max(1)
        )));
    }
    let fit = fit_propensity(&data.z, &data.t, &params.propensity)?;
    let e = &fit.scores;
    let ate = match method {
        Method::Matching => matching_ate(&data.t, &data.y, e, params.caliper_sd)?,
        Method::Stratification => stratification_ate(&data.t, &data.y, e, params.strata)?,
        Method::Ipw => ipw_ate(&data.t, &data.y, e),
    };
    Ok(AteResult {
        method,
        ate,
        ate_pct: None,
        n_treated,
        n_control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ipw_at_half_is_difference_in_means() {
        let t = [true, false, true, false];
        let y = [3.0, 1.0, 5.0, 2.0];
        let e = [0.5; 4];
        let dim = (3.0 + 5.0) / 2.0 - (1.0 + 2.0) / 2.0;
        assert!((ipw_ate(&t, &y, &e) - dim).abs() < 1e-12);
    }

    #[test]
    fn ties_are_averaged() {
        let pool = [(0.0, 1.0), (2.0, 3.0)];
        assert_eq!(nearest_mean(&pool, 1.0, 5.0), Some(2.0));
        assert_eq!(nearest_mean(&pool, 1.0, 0.5), None);
        assert_eq!(nearest_mean(&pool, 2.1, 5.0), Some(3.0));
    }

    #[test]
    fn strata_without_both_arms_dropped() {
        let t = [true, true, false, false];
        let y = [1.0, 1.0, 0.0, 0.0];
        let e = [0.9, 0.8, 0.1, 0.2];
        assert!(matches!(stratification_ate(&t, &y, &e, 2), Err(CausalError::AllStrataDropped)));
        let e = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(stratification_ate(&t, &y, &e, 2).unwrap(), 1.0);
    }
}
