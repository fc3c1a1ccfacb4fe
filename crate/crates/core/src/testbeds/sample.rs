use rand::seq::index;

use super::TestbedError;
use crate::seeded_rng;

/// Uniform draw of `n` items without replacement, in draw order.
pub fn sample_points<T: Clone>(corpus: &[T], n: usize, seed: u64) -> Result<Vec<T>, TestbedError> {
    if n > corpus.len() {
        return Err(TestbedError::SampleTooLarge {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut rng = seeded_rng(seed);
    Ok(index::sample(&mut rng, corpus.len(), n)
        .into_iter()
        .map(|i| corpus[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_draw_is_permutation() {
        let corpus: Vec<u32> = (0..50).collect();
        let mut s = sample_points(&corpus, 50, 3).unwrap();
        assert_eq!(s, sample_points(&corpus, 50, 3).unwrap());
        s.sort_unstable();
        assert_eq!(s, corpus);
    }

    #[test]
    fn too_many() {
        assert!(matches!(
            sample_points(&[1, 2], 3, 0),
            Err(TestbedError::SampleTooLarge { requested: 3, available: 2 })
        ));
    }

    #[test]
    fn single_draw_frequencies_are_uniform() {
        let corpus: Vec<usize> = (0..10).collect();
        let draws = 10_000;
        let mut counts = [0usize; 10];
        for s in 0..draws {
            counts[sample_points(&corpus, 1, s as u64).unwrap()[0]] += 1;
        }
        let p = 0.1;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "{counts:?}");
        }
    }
}
