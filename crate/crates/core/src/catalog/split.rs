use super::Catalog;
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Train / validation / test partition of the observed interactions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionSplits {
    pub train: Vec<(UserId, ItemId)>,
    pub valid: Vec<(UserId, ItemId)>,
    pub test: Vec<(UserId, ItemId)>,
}

/// Shuffles the interactions by `seed` and partitions them with
/// largest-remainder rounding of the normalized ratios.
pub fn split_interactions(catalog: &Catalog, ratios: (f64, f64, f64), seed: u64) -> Result<InteractionSplits> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("split ratios must be finite and nonnegative"));
    }
    let total: f64 = r.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("split ratios sum to zero"));
    }
    let mut pairs = catalog.interactions().to_vec();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let sizes = largest_remainder(pairs.len(), &r);
    let test = pairs.split_off(sizes[0] + sizes[1]);
    let valid = pairs.split_off(sizes[0]);
    Ok(InteractionSplits { train: pairs, valid, test })
}

fn largest_remainder(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let total: f64 = ratios.iter().sum();
    let quotas: Vec<f64> = ratios.iter().map(|r| n as f64 * r / total).collect();
    let mut sizes = [0usize; 3];
    for (s, q) in sizes.iter_mut().zip(&quotas) {
        *s = q.floor() as usize;
    }
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    // stable sort keeps lower index first on equal remainders
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa)
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::AttrId;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn catalog_with(n: usize) -> Catalog {
        Catalog::new(
            (0..n).map(|i| format!("u{i}")).collect(),
            vec!["v0".into()],
            vec!["p0".into()],
            vec![BTreeSet::from([AttrId(0)])],
            (0..n).map(|i| (UserId::from(i), ItemId(0))).collect(),
        )
        .unwrap()
    }

    fn sizes(s: &InteractionSplits) -> (usize, usize, usize) {
        (s.train.len(), s.valid.len(), s.test.len())
    }

    #[test]
    fn seventy_fifteen_fifteen() {
        let s = split_interactions(&catalog_with(100), (7.0, 1.5, 1.5), 3).unwrap();
        assert_eq!(sizes(&s), (70, 15, 15));
    }

    #[test]
    fn single_interaction_goes_to_train() {
        let s = split_interactions(&catalog_with(1), (1.0, 0.0, 0.0), 0).unwrap();
        assert_eq!(sizes(&s), (1, 0, 0));
    }

    #[test]
    fn equal_thirds_of_ten() {
        let s = split_interactions(&catalog_with(10), (1.0, 1.0, 1.0), 0).unwrap();
        let (a, b, c) = sizes(&s);
        assert_eq!(a + b + c, 10);
        for x in [a, b, c] {
            assert!(x == 3 || x == 4);
        }
    }

    #[test]
    fn all_zero_ratios_rejected() {
        assert!(split_interactions(&catalog_with(4), (0.0, 0.0, 0.0), 0).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_the_interactions(
            n in 1usize..200,
            r in (0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0),
            seed in any::<u64>(),
        ) {
            prop_assume!(r.0 + r.1 + r.2 > 0.0);
            let c = catalog_with(n);
            let s = split_interactions(&c, r, seed).unwrap();
            // users are distinct per interaction, so positions identify pairs
            let mut all: Vec<_> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            let mut expected = c.interactions().to_vec();
            expected.sort();
            prop_assert_eq!(all, expected);
        }
    }
}
