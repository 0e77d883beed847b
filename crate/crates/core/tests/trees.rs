mod common;

use common::*;
use forecast_workbench::dataset::{synth_generate, ColumnSchema, Dgp, GeneratorSpec};
use forecast_workbench::evaluation::rmse;
use forecast_workbench::tree::{
    fit_gradient_boosting, fit_random_forest, fit_regression_tree, BoostParams, ForestParams,
    Targets, TreeEnsemble, TreeNode, TreeParams,
};
use forecast_workbench::{Matrix, Predictor};

fn nonlinear_data(seed: u64) -> (Matrix, Vec<f64>) {
    let schema = ColumnSchema::default();
    let spec = GeneratorSpec::new(Dgp::Nonlinear, &schema);
    let frame = synth_generate(seed, 96, &schema, &spec).unwrap();
    (
        frame.matrix(&schema.features).unwrap(),
        frame.column(&schema.target).unwrap().to_vec(),
    )
}

#[test]
fn step_split_lands_between_straddling_values() {
    let xs = [0.1, 0.2, 0.35, 0.45, 0.6, 0.7, 0.9];
    let y: Vec<f64> = xs
        .iter()
        .map(|v| if *v < 0.5 { 0.0 } else { 1.0 })
        .collect();
    let x = Matrix::from_columns(&[xs.to_vec()]).unwrap();
    let params = TreeParams {
        max_depth: 1,
        ..TreeParams::default()
    };
    let tree = fit_regression_tree(&x, Targets::Plain(&y), &params).unwrap();
    match tree.nodes()[0] {
        TreeNode::Split {
            feature, threshold, ..
        } => {
            assert_eq!(feature, 0);
            assert!((threshold - 0.525).abs() < 1e-12);
        }
        _ => panic!("expected a split"),
    }
}

#[test]
fn every_row_reaches_one_leaf_with_constant_value() {
    let (x, y) = nonlinear_data(1);
    let params = TreeParams {
        max_depth: 5,
        ..TreeParams::default()
    };
    let tree = fit_regression_tree(&x, Targets::Plain(&y), &params).unwrap();
    for row in x.rows_iter() {
        let leaf = tree.leaf_index(row);
        assert!(matches!(tree.nodes()[leaf], TreeNode::Leaf { .. }));
        assert_eq!(tree.predict_row(row), tree.nodes()[leaf].value());
    }
}

#[test]
fn deeper_forest_fits_training_data_better() {
    for seed in 0..3 {
        let (x, y) = nonlinear_data(seed);
        let fit = |depth| {
            let p = ForestParams {
                n_estimators: 50,
                max_depth: depth,
                max_features: 6,
                min_samples_leaf: 1,
                seed,
            };
            let m = fit_random_forest(&x, &y, &p).unwrap();
            rmse(&y, &m.predict(&x).unwrap()).unwrap()
        };
        assert!(fit(9) <= fit(2));
    }
}

#[test]
fn forest_prediction_within_tree_range() {
    let (x, y) = nonlinear_data(4);
    let p = ForestParams {
        n_estimators: 30,
        max_depth: 4,
        max_features: 5,
        min_samples_leaf: 2,
        seed: 4,
    };
    let m = fit_random_forest(&x, &y, &p).unwrap();
    for row in x.rows_iter() {
        let preds: Vec<f64> = m
            .ensemble
            .trees
            .iter()
            .map(|t| t.predict_row(row))
            .collect();
        let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f = m.predict_row(row);
        assert!(f >= lo - 1e-12 && f <= hi + 1e-12);
    }
}

#[test]
fn one_deep_round_isolates_every_residual() {
    let mut r = rng(5);
    let x = normal_matrix(&mut r, 40, 3);
    let y = normals(&mut r, 40);
    let params = BoostParams {
        learning_rate: 1.0,
        n_estimators: 1,
        max_depth: 12,
        subsample: 1.0,
        colsample_bytree: 1.0,
        reg_lambda: 0.0,
        min_split_gain: 0.0,
        base_score: None,
        seed: 0,
    };
    let m = fit_gradient_boosting(&x, &y, &params).unwrap();
    let pred = m.predict(&x).unwrap();
    assert!(max_abs_diff(&pred, &y) < 1e-9);
}

#[test]
fn full_sample_boosting_loss_is_monotone() {
    let (x, y) = nonlinear_data(6);
    let params = BoostParams {
        n_estimators: 80,
        max_depth: 3,
        learning_rate: 0.2,
        ..BoostParams::default()
    };
    let m = fit_gradient_boosting(&x, &y, &params).unwrap();
    assert_eq!(m.training_loss.len(), 81);
    assert!(m.training_loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn fixed_seed_models_are_identical_across_thread_counts() {
    let (x, y) = nonlinear_data(7);
    let fp = ForestParams {
        n_estimators: 40,
        max_depth: 6,
        max_features: 4,
        min_samples_leaf: 1,
        seed: 9,
    };
    let bp = BoostParams {
        n_estimators: 40,
        subsample: 0.7,
        colsample_bytree: 0.6,
        seed: 9,
        ..BoostParams::default()
    };
    let fit = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            (
                fit_random_forest(&x, &y, &fp).unwrap(),
                fit_gradient_boosting(&x, &y, &bp).unwrap(),
            )
        })
    };
    let (f1, b1) = fit(1);
    let (f4, b4) = fit(4);
    assert_eq!(f1, f4);
    assert_eq!(b1, b4);
}

#[test]
fn ensemble_json_round_trip_preserves_predictions() {
    let (x, y) = nonlinear_data(8);
    let bp = BoostParams {
        n_estimators: 25,
        seed: 2,
        ..BoostParams::default()
    };
    let m = fit_gradient_boosting(&x, &y, &bp).unwrap();
    let back = TreeEnsemble::from_json(&m.ensemble.to_json().unwrap()).unwrap();
    assert_eq!(back, m.ensemble);
    assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
}
