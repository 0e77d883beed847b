mod common;

use common::*;
use forecast_workbench::dataset::{synth_generate, ColumnSchema, Dgp, GeneratorSpec};
use forecast_workbench::linear::{
    fit_linear, fit_linear_with, lambda_max, penalized_objective, PenaltySpec, SolverOptions,
};
use forecast_workbench::model::{Family, ParamSet};
use forecast_workbench::Matrix;
use nalgebra::{DMatrix, DVector};

fn centered(x: &Matrix, y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = to_na(x);
    for mut c in a.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    let my = mean(y);
    (a, DVector::from_iterator(y.len(), y.iter().map(|v| v - my)))
}

/// `(XᵀX/n + λI)⁻¹ Xᵀy/n` on centered data.
fn ridge_closed_form(x: &Matrix, y: &[f64], lambda: f64) -> Vec<f64> {
    let (a, b) = centered(x, y);
    let n = y.len() as f64;
    let p = a.ncols();
    let lhs = a.transpose() * &a / n + DMatrix::identity(p, p) * lambda;
    let rhs = a.transpose() * b / n;
    lhs.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn ridge_matches_closed_form() {
    for (seed, p, lambda) in [(1, 2, 0.3), (2, 5, 0.05), (3, 8, 0.9)] {
        let mut r = rng(seed);
        let x = normal_matrix(&mut r, 60, p);
        let noise = normals(&mut r, 60);
        let y: Vec<f64> = x
            .rows_iter()
            .zip(&noise)
            .map(|(row, e)| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| (j as f64 - 1.0) * v)
                    .sum::<f64>()
                    + e
            })
            .collect();
        let m = fit_linear(&x, &y, PenaltySpec::ridge(lambda)).unwrap();
        let oracle = ridge_closed_form(&x, &y, lambda);
        assert!(
            max_abs_diff(&m.coefficients, &oracle) < 1e-8,
            "{:?} vs {oracle:?}",
            m.coefficients
        );
    }
}

/// Centered columns, mutually orthogonal, with `XᵀX/n = I`.
fn orthonormal_design(seed: u64, n: usize, p: usize) -> Matrix {
    let mut r = rng(seed);
    let (a, _) = centered(&normal_matrix(&mut r, n, p), &vec![0.0; n]);
    let q = a.qr().q();
    let scaled = q * (n as f64).sqrt();
    let cols: Vec<Vec<f64>> = scaled
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    Matrix::from_columns(&cols).unwrap()
}

#[test]
fn lasso_on_orthonormal_design_soft_thresholds_ols() {
    let n = 80;
    let x = orthonormal_design(11, n, 6);
    let mut r = rng(12);
    let beta = [3.0, -2.0, 0.5, -0.2, 0.05, 0.0];
    let noise = normals(&mut r, n);
    let y: Vec<f64> = x
        .rows_iter()
        .zip(&noise)
        .map(|(row, e)| 1.0 + row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 0.3 * e)
        .collect();
    let ols: Vec<f64> = (0..6)
        .map(|j| x.column(j).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect();
    for lambda in [0.01, 0.1, 0.4, 1.0, 2.5] {
        let m = fit_linear(&x, &y, PenaltySpec::lasso(lambda)).unwrap();
        let oracle: Vec<f64> = ols
            .iter()
            .map(|b| b.signum() * (b.abs() - lambda).max(0.0))
            .collect();
        assert!(max_abs_diff(&m.coefficients, &oracle) < 1e-6, "λ={lambda}");
        for (c, o) in m.coefficients.iter().zip(&oracle) {
            if *o == 0.0 {
                assert_eq!(*c, 0.0, "annihilated coefficients must be exactly zero");
            }
        }
    }
}

#[test]
fn full_shrinkage_at_lambda_max() {
    let mut r = rng(21);
    let x = normal_matrix(&mut r, 40, 5);
    let y: Vec<f64> = x
        .rows_iter()
        .map(|row| row[0] - 2.0 * row[3] + 4.0)
        .collect();
    let xs = forecast_workbench::dataset::Standardizer::fit(&x)
        .apply(&x)
        .unwrap();
    let lmax = lambda_max(&xs, &y);
    for scale in [1.0, 1.5, 10.0] {
        let m = fit_linear(&xs, &y, PenaltySpec::lasso(lmax * scale)).unwrap();
        assert!(m.coefficients.iter().all(|c| *c == 0.0));
        assert!((m.intercept - mean(&y)).abs() < 1e-12);
    }
    let just_below = fit_linear(&xs, &y, PenaltySpec::lasso(lmax * 0.98)).unwrap();
    assert!(just_below.coefficients.iter().any(|c| *c != 0.0));
}

#[test]
fn ols_and_unpenalized_lasso_match_normal_equations() {
    let mut r = rng(31);
    let x = normal_matrix(&mut r, 50, 4);
    let y: Vec<f64> = normals(&mut r, 50)
        .iter()
        .zip(x.rows_iter())
        .map(|(e, row)| e + row[1])
        .collect();
    let oracle = ridge_closed_form(&x, &y, 0.0);
    let ols = fit_linear(&x, &y, PenaltySpec::ols()).unwrap();
    assert!(max_abs_diff(&ols.coefficients, &oracle) < 1e-8);
    let cd = fit_linear(&x, &y, PenaltySpec::new(0.0, 1.0).unwrap()).unwrap();
    assert!(max_abs_diff(&cd.coefficients, &oracle) < 1e-8);
}

#[test]
fn objective_never_increases_across_sweeps() {
    let mut r = rng(41);
    let base = normal_matrix(&mut r, 70, 3);
    // strongly correlated columns make coordinate descent take many sweeps
    let extra: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            base.column(j)
                .iter()
                .zip(normals(&mut r, 70))
                .map(|(a, e)| a + 0.05 * e)
                .collect()
        })
        .collect();
    let mut cols: Vec<Vec<f64>> = (0..3).map(|j| base.column(j)).collect();
    cols.extend(extra);
    let x = Matrix::from_columns(&cols).unwrap();
    let y: Vec<f64> = x.rows_iter().map(|row| row[0] + row[4] - row[2]).collect();
    for penalty in [
        PenaltySpec::new(0.05, 0.5).unwrap(),
        PenaltySpec::lasso(0.01),
        PenaltySpec::ridge(0.1),
    ] {
        let m = fit_linear_with(&x, &y, penalty, &SolverOptions::default()).unwrap();
        let trace = &m.report.objective_trace;
        assert!(trace.len() > 1);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{w:?}");
        }
        let last = penalized_objective(&x, &y, m.intercept, &m.coefficients, &penalty);
        assert!((last - trace[trace.len() - 1]).abs() < 1e-9);
    }
}

#[test]
fn noiseless_linear_dgp_is_recovered() {
    let schema = ColumnSchema::default();
    let mut spec = GeneratorSpec::new(Dgp::Linear, &schema);
    spec.noise_sd = 0.0;
    let frame = synth_generate(5, 80, &schema, &spec).unwrap();
    let x = frame.matrix(&schema.features).unwrap();
    let y = frame.column(&schema.target).unwrap();
    let model = Family::Ols.fit(&ParamSet::default(), &x, y, 0).unwrap();
    let (intercept, slopes) = model.raw_linear_form().unwrap();
    assert!((intercept - spec.intercept).abs() < 1e-6);
    for (name, coef) in spec.drivers.iter().zip(&spec.coefficients) {
        let j = schema.features.iter().position(|f| f == name).unwrap();
        assert!((slopes[j] - coef).abs() < 1e-6);
    }
    let pred = model.predictor().unwrap().predict(&x).unwrap();
    assert!(max_abs_diff(&pred, y) < 1e-8);
}
