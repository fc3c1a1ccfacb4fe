/// Unit-cost edit distance over Unicode scalar values, and the
/// max-length-normalised similarity. Two empty strings are identical.
pub fn levenshtein(a: &str, b: &str) -> (usize, f64) {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let d = edit_distance(&a, &b);
    let longest = a.len().max(b.len());
    let sim = if longest == 0 {
        1.0
    } else {
        1.0 - d as f64 / longest as f64
    };
    (d, sim)
}

pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(levenshtein("abc", "abc"), (0, 1.0));
        assert_eq!(levenshtein("", "abc"), (3, 0.0));
        assert_eq!(levenshtein("", ""), (0, 1.0));
        let (d, s) = levenshtein("kitten", "sitting");
        assert_eq!(d, 3);
        assert!((s - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(levenshtein("héllo", "hello").0, 1);
    }

    proptest! {
        #[test]
        fn metric_axioms(a in "[abc]{0,8}", b in "[abc]{0,8}", c in "[abc]{0,8}") {
            let (ab, s) = levenshtein(&a, &b);
            prop_assert_eq!(ab, levenshtein(&b, &a).0);
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(ab <= levenshtein(&a, &c).0 + levenshtein(&c, &b).0);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(ab <= a.len().max(b.len()));
        }
    }
}
