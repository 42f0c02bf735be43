mod common;

use proptest::prelude::*;

use cirrhosis_horizon::gbdt::{
    leaf_weight, log_loss, sigmoid, split_gain, train_columns, train_with, EarlyStopping, GbdtModel, GbdtParams,
    TrainOptions,
};
use common::checks;

#[test]
fn derivatives_match_finite_differences() {
    println!("{}", checks::gradients_match_finite_differences(100).unwrap());
}

#[test]
fn loss_falls_monotonically_on_separable_data() {
    println!("{}", checks::separable_objective_non_increasing().unwrap());
}

#[test]
fn split_search_matches_exhaustive_enumeration() {
    println!("{}", checks::split_matches_brute_force(200).unwrap());
}

#[test]
fn leaf_weight_hand_example() {
    checks::leaf_weight_example().unwrap();
    assert!(leaf_weight(1.0, 0.0, 0.0).is_err());
}

#[test]
fn gain_formula_by_hand() {
    // GL=-2, HL=3, GR=2, HR=1, lambda 1: 0.5 * (4/4 + 4/2 - 0/5) = 1.5
    assert!((split_gain(-2.0, 3.0, 2.0, 1.0, 1.0, 0.0) - 1.5).abs() < 1e-15);
    assert!((split_gain(-2.0, 3.0, 2.0, 1.0, 1.0, 0.25) - 1.25).abs() < 1e-15);
}

#[test]
fn log_loss_is_stable_at_extreme_scores() {
    assert!(log_loss(800.0, 1).abs() < 1e-300);
    assert!((log_loss(-800.0, 1) - 800.0).abs() < 1e-9);
    assert!((log_loss(0.0, 0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert_eq!(sigmoid(-1000.0), 0.0);
}

#[test]
fn training_is_byte_reproducible_across_workers() {
    let m = checks::small_matrix(120, 240, 11);
    println!("{}", checks::training_is_deterministic(&m).unwrap());
}

#[test]
fn missing_values_follow_the_learned_direction() {
    let x: Vec<f64> = (0..40).map(|i| if i % 4 == 0 { f64::NAN } else { f64::from(i) }).collect();
    // Missing rows are all positive; so are the high values.
    let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 4 == 0 || i >= 20)).collect();
    let params = GbdtParams {
        num_rounds: 20,
        max_depth: 1,
        ..GbdtParams::default()
    };
    let (model, raw, _) = train_columns(&[x], &labels, vec!["x".into()], &params).unwrap();
    let p_missing = model.predict_proba_row(&[f64::NAN]);
    let p_low = model.predict_proba_row(&[3.0]);
    assert!(p_missing > 0.5 && p_low < 0.5, "{p_missing} {p_low}");
    for (s, y) in raw.iter().zip(&labels) {
        assert_eq!(*s > 0.0, *y == 1);
    }
}

#[test]
fn single_class_and_bad_params_are_rejected() {
    let cols = vec![vec![1.0, 2.0, 3.0]];
    let err = train_columns(&cols, &[1, 1, 1], vec!["a".into()], &GbdtParams::default());
    assert!(err.is_err());
    for bad in [
        GbdtParams { learning_rate: 0.0, ..GbdtParams::default() },
        GbdtParams { subsample: 1.5, ..GbdtParams::default() },
        GbdtParams { num_rounds: 0, ..GbdtParams::default() },
        GbdtParams { lambda: -1.0, ..GbdtParams::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn early_stopping_keeps_the_best_round() {
    let m = checks::small_matrix(120, 240, 5);
    let params = GbdtParams { num_rounds: 400, learning_rate: 0.3, ..GbdtParams::default() };
    let out = train_with(
        &m,
        &params,
        &TrainOptions {
            threads: Some(2),
            early_stopping: Some(EarlyStopping { validation_fraction: 0.25, patience: 10 }),
        },
    )
    .unwrap();
    let val: Vec<f64> = out.history.iter().map(|h| h.validation_loss.unwrap()).collect();
    let best = val.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(val[out.model.trees.len() - 1], best);
    assert!(out.history.len() < 400);
    assert!(out.train_rows.len() < m.n_rows());
}

#[test]
fn model_json_round_trips_and_rejects_tampering() {
    let m = checks::small_matrix(60, 120, 2);
    let model = train_with(&m, &GbdtParams { num_rounds: 15, ..GbdtParams::default() }, &TrainOptions::default())
        .unwrap()
        .model;
    let text = model.to_json();
    let back = GbdtModel::from_json(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.to_json(), text);
    assert!(GbdtModel::from_json(&text.replacen("\"version\": 1", "\"version\": 99", 1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trees_respect_depth_and_min_child_weight(
        seed in any::<u64>(),
        depth in 1usize..5,
        mcw in 0.0f64..3.0,
    ) {
        use rand::Rng;
        let mut r = common::rng(seed);
        let n = 80;
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(cols[0][i] + 0.3 * r.gen_range(0.0..1.0) > 0.6)).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let params = GbdtParams { num_rounds: 5, max_depth: depth, min_child_weight: mcw, ..GbdtParams::default() };
        let (model, _, history) = train_columns(&cols, &labels, vec!["a".into(), "b".into(), "c".into()], &params).unwrap();
        prop_assert_eq!(history.len(), 5);
        for t in &model.trees {
            prop_assert!(t.depth() <= depth);
            prop_assert!(t.leaves().all(f64::is_finite));
        }
    }
}

#[test]
fn an_empty_child_has_zero_gain() {
    for (gl, hl, lambda) in [(-3.0, 2.0, 1.0), (0.5, 0.25, 0.5), (7.0, 9.0, 2.5)] {
        assert_eq!(split_gain(gl, hl, 0.0, 0.0, lambda, 0.0), 0.0);
    }
}

#[test]
fn regularized_objective_never_rises() {
    let m = checks::small_matrix(100, 200, 8);
    for eta in [0.3, 1.0] {
        let params = GbdtParams { num_rounds: 60, learning_rate: eta, ..GbdtParams::default() };
        let out = train_with(&m, &params, &TrainOptions::default()).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12, "eta {eta}: {:?}", w);
        }
    }
}

#[test]
fn stored_training_scores_replay_exactly() {
    let m = checks::small_matrix(80, 160, 6);
    let out = train_with(&m, &GbdtParams { num_rounds: 40, ..GbdtParams::default() }, &TrainOptions::default()).unwrap();
    let replay = out.model.predict_raw(&m).unwrap();
    for (a, b) in replay.iter().zip(&out.train_raw_scores) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}
