//! Cluster metrics against brute-force references on random partitions.

mod common;

use common::{labels, oracle_ari, oracle_exact_match_f1, oracle_scaled_vi, rng};
use disentangle::metrics::{ari, exact_match, scaled_vi, Clustering};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-9;

fn clustering(l: &[usize]) -> Clustering {
    let items: Vec<usize> = (0..l.len()).collect();
    Clustering::from_labels(&items, l).unwrap()
}

#[test]
fn hundred_random_pairs_match_the_oracles() {
    let mut g = rng(11);
    for case in 0..100 {
        let n = g.gen_range(1..=12);
        let (kx, ky) = (g.gen_range(1..=n), g.gen_range(1..=n));
        let x = labels(n, kx, &mut g);
        let y = if case % 10 == 0 { x.clone() } else { labels(n, ky, &mut g) };
        let (cx, cy) = (clustering(&x), clustering(&y));

        let vi = scaled_vi(&cx, &cy).unwrap();
        assert!((vi - oracle_scaled_vi(&x, &y)).abs() < TOL, "vi case {case}: {x:?} {y:?}");
        let a = ari(&cx, &cy).unwrap();
        assert!((a - oracle_ari(&x, &y)).abs() < TOL, "ari case {case}: {x:?} {y:?}");
        let em = exact_match(&cx, &cy).f1;
        assert_eq!(em, oracle_exact_match_f1(&x, &y), "exact match case {case}: {x:?} {y:?}");
    }
}

#[test]
fn identical_partitions_score_one() {
    let mut g = rng(12);
    for _ in 0..20 {
        let n = g.gen_range(2..=12);
        let x = labels(n, 4, &mut g);
        let c = clustering(&x);
        assert!((scaled_vi(&c, &c).unwrap() - 1.0).abs() < TOL);
        assert!((ari(&c, &c).unwrap() - 1.0).abs() < TOL);
        assert_eq!(exact_match(&c, &c).f1, 1.0);
    }
}

#[test]
fn labels_are_only_names() {
    let x = [0, 0, 1, 2, 2, 2];
    let renamed = [7, 7, 3, 9, 9, 9];
    let y = [0, 1, 1, 2, 2, 0];
    let (cx, cr, cy) = (clustering(&x), clustering(&renamed), clustering(&y));
    assert_eq!(cx, cr);
    assert_eq!(scaled_vi(&cx, &cy).unwrap(), scaled_vi(&cr, &cy).unwrap());
    assert_eq!(ari(&cx, &cy).unwrap(), ari(&cr, &cy).unwrap());
}

proptest! {
    #[test]
    fn symmetric_and_bounded(x in prop::collection::vec(0usize..5, 1..=12), seed in any::<u64>()) {
        let y = labels(x.len(), 5, &mut rng(seed));
        let (cx, cy) = (clustering(&x), clustering(&y));
        let vi = scaled_vi(&cx, &cy).unwrap();
        prop_assert!((vi - scaled_vi(&cy, &cx).unwrap()).abs() < TOL);
        prop_assert!(vi <= 1.0 + TOL);
        prop_assert!((vi - oracle_scaled_vi(&x, &y)).abs() < TOL);
        let a = ari(&cx, &cy).unwrap();
        prop_assert!((a - ari(&cy, &cx).unwrap()).abs() < TOL);
        prop_assert!(a <= 1.0 + TOL);
        prop_assert!((a - oracle_ari(&x, &y)).abs() < TOL);
        prop_assert_eq!(exact_match(&cx, &cy).f1, oracle_exact_match_f1(&x, &y));
    }
}
