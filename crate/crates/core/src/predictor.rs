use crate::error::Result;
use crate::matrix::Matrix;

/// A fitted model that maps one feature row to one prediction.
///
/// Rows are always in the raw feature space; models that standardize
/// internally carry their own statistics.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.n_features())?;
        Ok(x.rows_iter().map(|r| self.predict_row(r)).collect())
    }
}

/// Wraps a plain function as a [`Predictor`].
pub struct FnPredictor<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}
