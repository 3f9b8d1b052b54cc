//! Seeded splits partition the pairs.

use std::collections::BTreeSet;

use promptcache_core::dataset::{split, split_sizes};
use promptcache_core::{LabeledPair, PairDataset, Prompt, SplitRatios};
use proptest::prelude::*;

fn chain(n: usize) -> PairDataset {
    let prompts = (0..=n).map(|i| Prompt::new(format!("p{i}"), format!("t{i}")).unwrap());
    let pairs = (0..n).map(|i| LabeledPair::new(format!("p{i}"), format!("p{}", i + 1), (i % 2) as f64)).collect();
    PairDataset::new(pairs, prompts).unwrap()
}

fn keys(d: &PairDataset) -> Vec<(String, String)> {
    d.pairs().iter().map(LabeledPair::key).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parts_are_disjoint_and_complete(n in 3usize..400, seed: u64) {
        let data = chain(n);
        let (train, val, test) = split(&data, SplitRatios::default(), seed).unwrap();
        let (a, b, c) = split_sizes(n, SplitRatios::default()).unwrap();
        prop_assert_eq!((train.len(), val.len(), test.len()), (a, b, c));

        let mut all: Vec<_> = [&train, &val, &test].iter().flat_map(|d| keys(d)).collect();
        let unique: BTreeSet<_> = all.iter().cloned().collect();
        prop_assert_eq!(unique.len(), n);
        all.sort();
        let mut original = keys(&data);
        original.sort();
        prop_assert_eq!(all, original);

        for part in [&train, &val, &test] {
            for p in part.pairs() {
                prop_assert!(part.prompt(&p.q1).is_some() && part.prompt(&p.q2).is_some());
            }
        }
    }

    #[test]
    fn same_seed_same_split(n in 3usize..200, seed: u64) {
        let data = chain(n);
        prop_assert_eq!(
            split(&data, SplitRatios::default(), seed).unwrap(),
            split(&data, SplitRatios::default(), seed).unwrap()
        );
    }
}

#[test]
fn reference_sizes() {
    assert_eq!(split_sizes(37_382, SplitRatios::default()).unwrap(), (26_167, 3_738, 7_477));
    assert_eq!(split_sizes(10, SplitRatios::default()).unwrap(), (7, 1, 2));
    assert!(split(&chain(2), SplitRatios::default(), 0).is_err());
}
