mod common;

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use cirrhosis_horizon::stats::{
    chi_square_p, random_split, roc_auc, sens_spec_at, stratified_split, test_count, welch_t_p,
};

#[test]
fn auc_equals_pairwise_concordance() {
    let summary = common::checks::auc_matches_concordance(1000).unwrap();
    println!("{summary}");
}

#[test]
fn textbook_statistics() {
    common::checks::statistics_kernels().unwrap();
}

#[test]
fn perfect_and_reversed_rankings() {
    let labels = [true, true, false, false];
    assert_eq!(roc_auc(&[4.0, 3.0, 2.0, 1.0], &labels).unwrap().auc, 1.0);
    assert_eq!(roc_auc(&[1.0, 2.0, 3.0, 4.0], &labels).unwrap().auc, 0.0);
    assert_eq!(roc_auc(&[1.0; 4], &labels).unwrap().auc, 0.5);
}

#[test]
fn single_class_is_rejected() {
    assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
}

#[test]
fn sensitivity_and_specificity_at_a_cutoff() {
    let scores = [0.9, 0.8, 0.3, 0.6, 0.2, 0.1];
    let labels = [true, true, true, false, false, false];
    let (sens, spec) = sens_spec_at(&scores, &labels, 0.5, true).unwrap();
    assert!((sens - 2.0 / 3.0).abs() < 1e-12);
    assert!((spec - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn test_counts_round_half_up() {
    assert_eq!(test_count(0.3, 10), 3);
    assert_eq!(test_count(0.25, 10), 3);
    assert_eq!(test_count(0.3, 4), 1);
    assert_eq!(test_count(0.0, 7), 0);
}

#[test]
fn split_rejects_bad_fractions() {
    assert!(random_split(10, 1.5, 0).is_err());
    assert!(stratified_split(&[true, false], f64::NAN, 0).is_err());
}

fn scored_sample() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..20, n).prop_map(|v| v.into_iter().map(|x| f64::from(x) / 2.0).collect()),
            prop::collection::vec(any::<bool>(), n).prop_map(|mut v| {
                v[0] = true;
                v[1] = false;
                v
            }),
        )
    })
}

proptest! {
    #[test]
    fn roc_curve_is_monotone_between_corners((scores, labels) in scored_sample()) {
        let roc = roc_auc(&scores, &labels).unwrap();
        prop_assert_eq!(roc.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(roc.points.last().copied(), Some((1.0, 1.0)));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((0.0..=1.0).contains(&roc.auc));
    }

    #[test]
    fn flipping_labels_complements_auc((scores, labels) in scored_sample()) {
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let a = roc_auc(&scores, &labels).unwrap().auc;
        let b = roc_auc(&scores, &flipped).unwrap().auc;
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_to_monotone_transforms((scores, labels) in scored_sample()) {
        let moved: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() - 3.0).collect();
        let a = roc_auc(&scores, &labels).unwrap().auc;
        let b = roc_auc(&moved, &labels).unwrap().auc;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn random_split_is_a_partition(n in 0usize..300, f in 0.0f64..=1.0, seed in any::<u64>()) {
        let (train, test) = random_split(n, f, seed).unwrap();
        prop_assert_eq!(test.len(), test_count(f, n));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(random_split(n, f, seed).unwrap(), (train, test));
    }

    #[test]
    fn stratified_split_preserves_each_stratum(
        labels in prop::collection::vec(any::<bool>(), 2..300),
        f in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let (train, test) = stratified_split(&labels, f, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for class in [false, true] {
            let size = labels.iter().filter(|&&l| l == class).count();
            let in_test = test.iter().filter(|&&i| labels[i] == class).count();
            prop_assert_eq!(in_test, test_count(f, size));
        }
    }

    #[test]
    fn chi_square_p_matches_reference(
        table in prop::collection::vec(prop::collection::vec(1u64..200, 2..5), 2..5),
    ) {
        let cols = table[0].len();
        let table: Vec<Vec<u64>> = table.into_iter().map(|mut r| { r.resize(cols, 1); r }).collect();
        let got = chi_square_p(&table).unwrap();
        prop_assert_eq!(got.df, ((table.len() - 1) * (cols - 1)) as f64);
        let reference = 1.0 - ChiSquared::new(got.df).unwrap().cdf(got.statistic);
        prop_assert!((got.p - reference).abs() < 1e-6, "{} vs {}", got.p, reference);
    }

    #[test]
    fn welch_p_matches_reference(
        a in prop::collection::vec(-50.0f64..50.0, 2..40),
        b in prop::collection::vec(-50.0f64..80.0, 2..40),
    ) {
        let got = welch_t_p(&a, &b).unwrap();
        let reference = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, got.df).unwrap().cdf(got.t.abs()));
        prop_assert!((got.p - reference).abs() < 1e-6, "{} vs {}", got.p, reference);
    }
}

proptest! {
    #[test]
    fn flipping_labels_and_negating_scores_preserves_auc((scores, labels) in scored_sample()) {
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = roc_auc(&scores, &labels).unwrap().auc;
        let b = roc_auc(&negated, &flipped).unwrap().auc;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
