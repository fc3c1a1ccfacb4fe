//! Synthetic generators with a known treatment effect.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::BinaryDataset;
use crate::seeded_rng;

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from the standard logistic distribution by inverting its CDF.
pub fn logistic_noise<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    (u / (1.0 - u)).ln()
}

/// Z ~ N(0,1), η ~ Logistic(0,1), ε ~ N(0,1);
/// T = 1{Z + η > 0}, Y = `z_effect`·Z + τ·T + ε.
pub fn confounded(n: usize, tau: f64, z_effect: f64, seed: u64) -> BinaryDataset {
    let mut rng = seeded_rng(seed);
    let mut z = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = standard_normal(&mut rng);
        let ti = zi + logistic_noise(&mut rng) > 0.0;
        let eps = standard_normal(&mut rng);
        z.push(zi);
        t.push(ti);
        y.push(z_effect * zi + tau * f64::from(u8::from(ti)) + eps);
    }
    BinaryDataset::new(t, y, vec![z])
}

/// Treatment assigned by a fair coin; Y = Z + τ·T + ε.
pub fn randomized(n: usize, tau: f64, seed: u64) -> BinaryDataset {
    let mut rng = seeded_rng(seed);
    let mut z = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = standard_normal(&mut rng);
        let ti: bool = rng.random();
        let eps = standard_normal(&mut rng);
        z.push(zi);
        t.push(ti);
        y.push(zi + tau * f64::from(u8::from(ti)) + eps);
    }
    BinaryDataset::new(t, y, vec![z])
}

/// Confounded assignment with no effect: Y depends on Z only.
pub fn null_effect(n: usize, seed: u64) -> BinaryDataset {
    confounded(n, 0.0, 2.0, seed)
}
