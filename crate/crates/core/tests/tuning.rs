mod common;

use common::*;
use forecast_workbench::model::{Family, ParamGrid, ParamValue};
use forecast_workbench::tuning::{grid_search, kfold_indices, CvPlan};
use forecast_workbench::Matrix;

/// Ten near-copies of one latent column plus a noisy target.
fn collinear(seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = rng(seed);
    let n = 30;
    let z = normals(&mut r, n);
    let cols: Vec<Vec<f64>> = (0..10)
        .map(|_| {
            z.iter()
                .zip(normals(&mut r, n))
                .map(|(a, e)| a + 0.05 * e)
                .collect()
        })
        .collect();
    let y: Vec<f64> = z
        .iter()
        .zip(normals(&mut r, n))
        .map(|(a, e)| a + e)
        .collect();
    (Matrix::from_columns(&cols).unwrap(), y)
}

fn lambda_grid(values: &[f64]) -> ParamGrid {
    let mut g = ParamGrid::default();
    g.insert(
        "lambda",
        values.iter().map(|v| ParamValue::Num(*v)).collect(),
    );
    g
}

#[test]
fn ridge_penalty_wins_on_collinear_data() {
    let grid = lambda_grid(&[0.0, 0.5]);
    let wins = (0..20)
        .filter(|&seed| {
            let (x, y) = collinear(seed);
            let res = grid_search(Family::Ridge, &grid, &x, &y, &CvPlan::default(), seed).unwrap();
            res.best == 1
        })
        .count();
    assert!(wins >= 18, "λ=0.5 won {wins}/20");
}

#[test]
fn table_is_complete_and_justifies_the_winner() {
    let (x, y) = collinear(99);
    let mut grid = lambda_grid(&[0.001, 0.01, 0.1, 0.5]);
    grid.insert("alpha", vec![ParamValue::Num(0.2), ParamValue::Num(0.8)]);
    let res = grid_search(Family::ElasticNet, &grid, &x, &y, &CvPlan::default(), 1).unwrap();
    let cells = grid.cells().unwrap();
    assert_eq!(res.rows.len(), cells.len());
    for (row, cell) in res.rows.iter().zip(&cells) {
        assert_eq!(&row.params, cell);
    }
    let min = res
        .rows
        .iter()
        .map(|r| r.mean_mse)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(res.best_row().mean_mse, min);
    let mut ranks: Vec<usize> = res.rows.iter().map(|r| r.rank).collect();
    ranks.sort_unstable();
    assert_eq!(ranks, (1..=cells.len()).collect::<Vec<_>>());
}

#[test]
fn fold_scores_do_not_depend_on_other_cells() {
    let (x, y) = collinear(5);
    let plan = CvPlan {
        shuffle: true,
        seed: 4,
        ..CvPlan::default()
    };
    let small = grid_search(Family::Ridge, &lambda_grid(&[0.2]), &x, &y, &plan, 7).unwrap();
    let big = grid_search(
        Family::Ridge,
        &lambda_grid(&[0.9, 0.2, 0.01]),
        &x,
        &y,
        &plan,
        7,
    )
    .unwrap();
    assert_eq!(small.rows[0].fold_mse, big.rows[1].fold_mse);
    assert_eq!(
        kfold_indices(30, &plan).unwrap(),
        kfold_indices(30, &plan).unwrap()
    );
}

#[test]
fn failing_cells_score_infinity() {
    let (x, y) = collinear(6);
    let mut grid = ParamGrid::default();
    grid.insert("n_estimators", vec![ParamValue::Num(10.0)]);
    grid.insert(
        "max_features",
        vec![ParamValue::Num(50.0), ParamValue::Num(3.0)],
    );
    let res = grid_search(Family::RandomForest, &grid, &x, &y, &CvPlan::default(), 0).unwrap();
    assert!(res.rows[0].mean_mse.is_infinite() && res.rows[0].error.is_some());
    assert_eq!(res.best, 1);
    assert!(res.to_csv("").contains("random_forest,10,50,inf,inf,2"));
}
