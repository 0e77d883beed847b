#![allow(dead_code)]

use forecast_workbench::seeds;
use forecast_workbench::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    seeds::rng(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn uniforms(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `n × p` matrix of independent standard normals.
pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
    let cols: Vec<Vec<f64>> = (0..p).map(|_| normals(rng, n)).collect();
    Matrix::from_columns(&cols).unwrap()
}

pub fn to_na(x: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(x.nrows(), x.ncols(), x.as_slice())
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Simulates `y_t = c + φ y_{t−1} + e_t + θ e_{t−1}` after a burn-in.
pub fn simulate_arma(rng: &mut ChaCha8Rng, n: usize, c: f64, phi: f64, theta: f64) -> Vec<f64> {
    let burn = 200;
    let e = normals(rng, n + burn + 1);
    let mut y = vec![c / (1.0 - phi)];
    for t in 1..=n + burn {
        let prev = y[t - 1];
        y.push(c + phi * prev + e[t] + theta * e[t - 1]);
    }
    y[burn + 1..].to_vec()
}

use forecast_workbench::tree::{fit_gradient_boosting, BoostParams, BoostedModel};

/// A boosted model with randomly drawn shape, trained on a random
/// nonlinear target, plus the data it was trained on.
pub fn random_boosted_model(seed: u64) -> (BoostedModel, Matrix) {
    let mut r = rng(seed);
    let p = r.random_range(2..=6);
    let n = 60;
    let x = normal_matrix(&mut r, n, p);
    let w = normals(&mut r, p);
    let y: Vec<f64> = x
        .rows_iter()
        .map(|row| {
            row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
                + row[0] * row[p - 1]
                + (2.0 * row[1]).sin()
        })
        .collect();
    let params = BoostParams {
        learning_rate: r.random_range(0.05..0.5),
        n_estimators: r.random_range(1..=20),
        max_depth: r.random_range(1..=4),
        subsample: r.random_range(0.5..1.0),
        colsample_bytree: r.random_range(0.5..1.0),
        reg_lambda: r.random_range(0.0..2.0),
        min_split_gain: 0.0,
        base_score: None,
        seed,
    };
    (fit_gradient_boosting(&x, &y, &params).unwrap(), x)
}
