//! Binary-relevance ranking metrics.

use num_traits::Float;

use crate::error::{Error, Result};

/// |top-K ∩ relevant| / |relevant|.
pub fn recall_at_k<I: PartialEq>(ranked: &[I], relevant: &[I], k: usize) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Empty("recall_at_k relevant set"));
    }
    let hits = ranked.iter().take(k).filter(|i| relevant.contains(i)).count();
    Ok(hits as f64 / relevant.len() as f64)
}

#[inline]
fn discount(rank: usize) -> f64 {
    // rank is 1-based
    1.0 / Float::log2((rank + 1) as f64)
}

/// DCG@K with log₂(rank + 1) discount over the ideal DCG@K.
pub fn ndcg_at_k<I: PartialEq>(ranked: &[I], relevant: &[I], k: usize) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Empty("ndcg_at_k relevant set"));
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.contains(i))
        .map(|(r, _)| discount(r + 1))
        .sum();
    let ideal: f64 = (1..=k.min(relevant.len())).map(discount).sum();
    Ok(dcg / ideal)
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counting ½.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty("auc"));
    }
    let mut twice_wins: u64 = 0;
    for &p in pos {
        for &n in neg {
            if p > n {
                twice_wins += 2;
            } else if p == n {
                twice_wins += 1;
            }
        }
    }
    Ok(twice_wins as f64 / (2 * pos.len() * neg.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use alloc::vec::Vec;

    #[test]
    fn recall_hand_cases() {
        assert_eq!(recall_at_k(&['a', 'c'], &['a', 'b'], 2).unwrap(), 0.5);
        assert_eq!(recall_at_k(&['b', 'a', 'c'], &['a', 'b'], 3).unwrap(), 1.0);
        assert_eq!(recall_at_k(&['c', 'd'], &['a', 'b'], 2).unwrap(), 0.0);
        assert!(recall_at_k(&['a'], &[], 1).is_err());
    }

    #[test]
    fn ndcg_hand_cases() {
        assert_eq!(ndcg_at_k(&[1, 2, 3], &[1], 3).unwrap(), 1.0);
        let second = ndcg_at_k(&[2, 1, 3], &[1], 3).unwrap();
        assert!((second - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((second - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[2, 3, 1], &[1], 2).unwrap(), 0.0);
    }

    #[test]
    fn auc_hand_cases() {
        assert_eq!(auc(&[0.9], &[0.1, 0.5]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.2], &[0.5]).unwrap(), 0.5);
        assert!(auc(&[], &[0.5]).is_err());
    }

    proptest! {
        #[test]
        fn metrics_bounded(
            scores in prop::collection::vec(0u8..5, 2..30),
            rel_mask in prop::collection::vec(any::<bool>(), 2..30),
            k in 1usize..40,
        ) {
            let n = scores.len().min(rel_mask.len());
            let ranked: Vec<usize> = (0..n).collect();
            let relevant: Vec<usize> = (0..n).filter(|&i| rel_mask[i]).collect();
            if !relevant.is_empty() {
                let r = recall_at_k(&ranked, &relevant, k).unwrap();
                let g = ndcg_at_k(&ranked, &relevant, k).unwrap();
                prop_assert!((0.0..=1.0).contains(&r));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
                // NDCG = 1 iff the relevant items fill the top min(K, |rel|) ranks.
                let m = k.min(relevant.len());
                let packed = ranked.iter().take(m).all(|i| relevant.contains(i));
                prop_assert_eq!((g - 1.0).abs() < 1e-12, packed);
            }
            let pos: Vec<f64> = (0..n).filter(|&i| rel_mask[i]).map(|i| scores[i] as f64).collect();
            let neg: Vec<f64> = (0..n).filter(|&i| !rel_mask[i]).map(|i| scores[i] as f64).collect();
            if !pos.is_empty() && !neg.is_empty() {
                let a = auc(&pos, &neg).unwrap();
                let b = auc(&neg, &pos).unwrap();
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert_eq!(a + b, 1.0);
            }
        }
    }
}
