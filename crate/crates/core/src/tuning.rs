//! K-fold cross-validation and exhaustive grid search.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mean, select, Matrix};
use crate::model::{Family, ParamGrid, ParamSet};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvPlan {
    pub k: usize,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            k: 5,
            shuffle: false,
            seed: 0,
        }
    }
}

/// Validation indices for each fold. Contiguous blocks unless shuffled;
/// the first `n % k` folds get one extra row.
pub fn kfold_indices(n: usize, plan: &CvPlan) -> Result<Vec<Vec<usize>>> {
    if plan.k < 2 || plan.k > n {
        return Err(Error::invalid(format!(
            "cannot split {n} rows into {} folds",
            plan.k
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if plan.shuffle {
        order.shuffle(&mut seeds::rng(plan.seed));
    }
    let (base, extra) = (n / plan.k, n % plan.k);
    let mut folds = Vec::with_capacity(plan.k);
    let mut start = 0;
    for f in 0..plan.k {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// One grid cell's cross-validated score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub params: ParamSet,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
    pub sd_mse: f64,
    pub rank: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSearch {
    pub family: Family,
    pub param_names: Vec<String>,
    pub rows: Vec<CvRow>,
    pub best: usize,
}

impl GridSearch {
    pub fn best_params(&self) -> &ParamSet {
        &self.rows[self.best].params
    }

    pub fn best_row(&self) -> &CvRow {
        &self.rows[self.best]
    }

    /// CSV with one row per cell in grid order.
    pub fn to_csv(&self, comment: &str) -> String {
        let mut out = String::new();
        if !comment.is_empty() {
            out.push_str(&format!("# {comment}\n"));
        }
        let mut header = vec!["family".to_string()];
        header.extend(self.param_names.iter().cloned());
        header.extend(["mean_mse", "sd_mse", "rank"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![self.family.name().to_string()];
            for name in &self.param_names {
                cells.push(
                    row.params
                        .get(name)
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                );
            }
            cells.push(row.mean_mse.to_string());
            cells.push(row.sd_mse.to_string());
            cells.push(row.rank.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Cross-validated MSE for one parameter set. Every fold fit shares the
/// seed `derive(seed, "fold", f)` so cells differ only in their parameters.
pub fn cv_score(
    family: Family,
    params: &ParamSet,
    x: &Matrix,
    y: &[f64],
    folds: &[Vec<usize>],
    seed: u64,
) -> Result<Vec<f64>> {
    let n = x.nrows();
    let mut in_fold = vec![usize::MAX; n];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_fold[i] = f;
        }
    }
    folds
        .iter()
        .enumerate()
        .map(|(f, fold)| {
            let train: Vec<usize> = (0..n).filter(|&i| in_fold[i] != f).collect();
            let model = family.fit(
                params,
                &x.select_rows(&train),
                &select(y, &train),
                seeds::derive(seed, "fold", f as u64),
            )?;
            let pred = model.predict(&x.select_rows(fold))?;
            let sq: Vec<f64> = fold
                .iter()
                .zip(&pred)
                .map(|(&i, p)| (y[i] - p).powi(2))
                .collect();
            Ok(mean(&sq))
        })
        .collect()
}

/// Scores every grid cell by K-fold MSE. Cells whose fit fails score +∞;
/// the winner is the lowest mean MSE, ties going to the earliest cell.
pub fn grid_search(
    family: Family,
    grid: &ParamGrid,
    x: &Matrix,
    y: &[f64],
    plan: &CvPlan,
    seed: u64,
) -> Result<GridSearch> {
    if family.is_time_series() {
        return Err(Error::Unsupported(format!(
            "{family} is selected by information criterion, not grid search"
        )));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    let cells = grid.cells()?;
    // Parameter-name errors are configuration mistakes, not per-cell failures.
    if let Some(cell) = cells.first() {
        if let Err(e @ Error::Config(_)) = family.fit(cell, &Matrix::zeros(0, x.ncols()), &[], seed)
        {
            return Err(e);
        }
    }
    let folds = kfold_indices(x.nrows(), plan)?;
    let mut rows: Vec<CvRow> = cells
        .into_par_iter()
        .map(
            |params| match cv_score(family, &params, x, y, &folds, seed) {
                Ok(fold_mse) if fold_mse.iter().all(|v| v.is_finite()) => {
                    let m = mean(&fold_mse);
                    let var = fold_mse.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                        / (fold_mse.len() - 1) as f64;
                    CvRow {
                        params,
                        fold_mse,
                        mean_mse: m,
                        sd_mse: var.sqrt(),
                        rank: 0,
                        error: None,
                    }
                }
                outcome => CvRow {
                    params,
                    fold_mse: Vec::new(),
                    mean_mse: f64::INFINITY,
                    sd_mse: f64::INFINITY,
                    rank: 0,
                    error: Some(match outcome {
                        Err(e) => e.to_string(),
                        Ok(_) => "non-finite fold error".into(),
                    }),
                },
            },
        )
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a].mean_mse.total_cmp(&rows[b].mean_mse));
    for (r, &i) in order.iter().enumerate() {
        rows[i].rank = r + 1;
    }
    Ok(GridSearch {
        family,
        param_names: grid.names(),
        best: order[0],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamValue;

    #[test]
    fn folds_partition_rows() {
        let folds = kfold_indices(12, &CvPlan::default()).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, [3, 3, 2, 2, 2]);
        assert_eq!(folds[0], [0, 1, 2]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());

        let plan = CvPlan {
            shuffle: true,
            seed: 9,
            ..CvPlan::default()
        };
        let a = kfold_indices(40, &plan).unwrap();
        assert_eq!(a, kfold_indices(40, &plan).unwrap());
        assert!(kfold_indices(4, &CvPlan::default()).is_err());
    }

    #[test]
    fn grid_search_prefers_small_penalty_on_clean_data() {
        let n = 60;
        let xs: Vec<f64> = (0..n).map(|i| ((i * 37) % 23) as f64 / 5.0).collect();
        let y: Vec<f64> = xs.iter().map(|v| 1.0 + 2.0 * v).collect();
        let x = Matrix::from_columns(&[xs]).unwrap();
        let mut grid = ParamGrid::default();
        grid.insert(
            "lambda",
            vec![
                ParamValue::Num(5.0),
                ParamValue::Num(0.001),
                ParamValue::Num(1.0),
            ],
        );
        let res = grid_search(Family::Ridge, &grid, &x, &y, &CvPlan::default(), 1).unwrap();
        assert_eq!(res.best, 1);
        assert_eq!(res.rows[1].rank, 1);
        let csv = res.to_csv("");
        assert!(csv.starts_with("family,lambda,mean_mse,sd_mse,rank\nridge,5,"));
    }

    #[test]
    fn bad_parameter_name_is_config_error() {
        let x = Matrix::from_columns(&[vec![0.0; 10]]).unwrap();
        let mut grid = ParamGrid::default();
        grid.insert("lamda", vec![ParamValue::Num(1.0)]);
        let err = grid_search(Family::Ridge, &grid, &x, &[0.0; 10], &CvPlan::default(), 0);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
