//! Logistic propensity model fit by penalised Newton iterations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std};
use super::CausalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropensityParams {
    /// Ridge penalty on the (standardised) slopes; the intercept is free.
    pub l2: f64,
    pub max_iter: usize,
    /// Convergence when the largest gradient entry is below `tol · n`.
    pub tol: f64,
    pub clip: (f64, f64),
}

impl Default for PropensityParams {
    fn default() -> Self {
        PropensityParams {
            l2: 1.0,
            max_iter: 100,
            tol: 1e-10,
            clip: (0.01, 0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pub intercept: f64,
    /// Slope per input column on the standardised scale; `None` for
    /// constant columns, which are dropped.
    pub coefficients: Vec<Option<f64>>,
    /// Clipped scores, one per row.
    pub scores: Vec<f64>,
    pub iterations: usize,
}

/// Columns rescaled to zero mean and unit variance; constant columns are `None`.
pub fn standardize(columns: &[Vec<f64>]) -> Vec<Option<Vec<f64>>> {
    columns
        .iter()
        .map(|c| {
            let (m, s) = (mean(c), sample_std(c));
            (s > 0.0 && s.is_finite()).then(|| c.iter().map(|v| (v - m) / s).collect())
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x), computed without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Fit P(T = 1 | Z) with an intercept. `columns` are the confounders, one
/// vector of length n each.
pub fn fit_propensity(
    columns: &[Vec<f64>],
    t: &[bool],
    params: &PropensityParams,
) -> Result<PropensityFit, CausalError> {
    let n = t.len();
    if n == 0 {
        return Err(CausalError::InsufficientData("no rows".into()));
    }
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(CausalError::InsufficientData(format!(
            "column has {} values for {n} rows",
            bad.len()
        )));
    }
    if columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CausalError::InsufficientData("non-finite confounder value".into()));
    }
    let n_treated = t.iter().filter(|x| **x).count();
    if n_treated == 0 || n_treated == n {
        return Err(CausalError::Separation(
            "only one treatment arm present".into(),
        ));
    }
    let std_cols = standardize(columns);
    let kept: Vec<&Vec<f64>> = std_cols.iter().flatten().collect();
    let k = kept.len() + 1;
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { kept[j - 1][i] });
    let y = DVector::from_iterator(n, t.iter().map(|b| f64::from(u8::from(*b))));
    let lambda = params.l2.max(0.0);

    let objective = |beta: &DVector<f64>| -> f64 {
        let eta = &x * beta;
        let nll: f64 = eta.iter().zip(y.iter()).map(|(e, yi)| softplus(*e) - yi * e).sum();
        nll + 0.5 * lambda * beta.rows(1, k - 1).norm_squared()
    };

    let mut beta = DVector::<f64>::zeros(k);
    let mut obj = objective(&beta);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        let eta = &x * &beta;
        let p = eta.map(sigmoid);
        let mut grad = x.transpose() * (&p - &y);
        let mut wx = x.clone();
        for (i, mut row) in wx.row_iter_mut().enumerate() {
            row *= p[i] * (1.0 - p[i]);
        }
        let mut hess = x.transpose() * wx;
        for j in 1..k {
            grad[j] += lambda * beta[j];
            hess[(j, j)] += lambda;
        }
        grad_norm = grad.amax();
        if grad_norm <= params.tol * n as f64 {
            converged = true;
            break;
        }
        if lambda == 0.0 && beta.rows(1, k - 1).amax() > 30.0 {
            return Err(CausalError::Separation(format!(
                "coefficients diverge (|beta| > 30 after {iterations} iterations); trim extreme rows or add a penalty"
            )));
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => hess.lu().solve(&grad).ok_or_else(|| {
                CausalError::Separation("singular information matrix; trim extreme rows or add a penalty".into())
            })?,
        };
        let mut s = 1.0;
        // Below this decrement the objective cannot resolve the gain, so the
        // line search would only see rounding noise.
        let mut accepted = grad.dot(&step) <= 1e-9 * (1.0 + obj.abs());
        if accepted {
            beta -= &step;
            obj = objective(&beta);
        }
        while !accepted && s > 1e-12 {
            let cand = &beta - &step * s;
            let o = objective(&cand);
            if o.is_finite() && o <= obj {
                beta = cand;
                obj = o;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        if s == 1.0 && step.amax() <= 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        if lambda == 0.0 {
            let p = (&x * &beta).map(sigmoid);
            let separated = p
                .iter()
                .zip(y.iter())
                .all(|(pi, yi)| (pi - yi).abs() < 1e-3);
            if separated {
                return Err(CausalError::Separation(
                    "treatment is perfectly predicted by the confounders; trim extreme rows or add a penalty".into(),
                ));
            }
        }
        return Err(CausalError::NonConvergence {
            iterations,
            grad_norm,
        });
    }
    let (lo, hi) = params.clip;
    let scores = (&x * &beta).iter().map(|e| sigmoid(*e).clamp(lo, hi)).collect();
    let mut slopes = beta.iter().skip(1);
    let coefficients = std_cols
        .iter()
        .map(|c| c.as_ref().map(|_| *slopes.next().expect("one slope per kept column")))
        .collect();
    Ok(PropensityFit {
        intercept: beta[0],
        coefficients,
        scores,
        iterations,
    })
}
