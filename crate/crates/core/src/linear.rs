//! OLS, ridge, lasso and elastic net by cyclic coordinate descent.
//!
//! Objective, with `n` rows and an unpenalized intercept `b`:
//!
//! ```text
//! (1/(2n))·‖y − b − Xβ‖² + λ·(α‖β‖₁ + ((1−α)/2)‖β‖²)
//! ```
//!
//! `α = 0` is ridge, `α = 1` is lasso. `λ = 0` bypasses coordinate descent
//! and solves the normal equations directly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::predictor::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub alpha: f64,
}

impl PenaltySpec {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let p = Self { lambda, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn ols() -> Self {
        Self {
            lambda: 0.0,
            alpha: 1.0,
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self { lambda, alpha: 0.0 }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self { lambda, alpha: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn penalty(&self, beta: &[f64]) -> f64 {
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        self.lambda * (self.alpha * l1 + 0.5 * (1.0 - self.alpha) * l2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the largest coordinate update in a sweep falls below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub sweeps: usize,
    pub converged: bool,
    /// Normal equations were singular and a `1e-10` ridge jitter was added.
    pub jittered: bool,
    /// Penalized objective after each full sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub penalty: PenaltySpec,
    /// Applied to raw rows before the linear map, when present.
    pub scaler: Option<Standardizer>,
    pub report: FitReport,
}

impl LinearModel {
    /// Intercept and slopes expressed on the raw (unstandardized) feature scale.
    pub fn raw_coefficients(&self) -> (f64, Vec<f64>) {
        match &self.scaler {
            None => (self.intercept, self.coefficients.clone()),
            Some(s) => {
                let slopes: Vec<f64> = self
                    .coefficients
                    .iter()
                    .zip(&s.scales)
                    .map(|(b, sc)| b / sc)
                    .collect();
                let shift: f64 = slopes.iter().zip(&s.means).map(|(b, m)| b * m).sum();
                (self.intercept - shift, slopes)
            }
        }
    }

    pub fn with_scaler(mut self, scaler: Standardizer) -> Self {
        self.scaler = Some(scaler);
        self
    }
}

impl Predictor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.scaler {
            None => {
                self.intercept
                    + row
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(x, b)| x * b)
                        .sum::<f64>()
            }
            Some(s) => {
                let mut acc = self.intercept;
                for j in 0..self.coefficients.len() {
                    acc += self.coefficients[j] * (row[j] - s.means[j]) / s.scales[j];
                }
                acc
            }
        }
    }
}

/// `(1/(2n))‖y − b − Xβ‖² + penalty(β)`.
pub fn penalized_objective(
    x: &Matrix,
    y: &[f64],
    intercept: f64,
    beta: &[f64],
    penalty: &PenaltySpec,
) -> f64 {
    let n = y.len() as f64;
    let rss: f64 = x
        .rows_iter()
        .zip(y)
        .map(|(row, yi)| {
            let fit: f64 = intercept + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            (yi - fit).powi(2)
        })
        .sum();
    rss / (2.0 * n) + penalty.penalty(beta)
}

/// Smallest λ at which the lasso (`α = 1`) sets every coefficient to zero.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    (0..x.ncols())
        .map(|j| {
            (0..x.nrows())
                .map(|i| x.get(i, j) * (y[i] - ybar))
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max)
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn fit_linear(x: &Matrix, y: &[f64], penalty: PenaltySpec) -> Result<LinearModel> {
    fit_linear_with(x, y, penalty, &SolverOptions::default())
}

/// Fits on an already-standardized design. The returned model has no scaler;
/// attach one with [`LinearModel::with_scaler`].
pub fn fit_linear_with(
    x: &Matrix,
    y: &[f64],
    penalty: PenaltySpec,
    opts: &SolverOptions,
) -> Result<LinearModel> {
    penalty.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::invalid("linear fit needs at least 2 rows"));
    }
    if y.iter().chain(x.as_slice()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite input to linear fit".into()));
    }
    if penalty.lambda == 0.0 {
        return solve_normal_equations(x, y, penalty);
    }
    Ok(coordinate_descent(x, y, penalty, opts))
}

fn coordinate_descent(
    x: &Matrix,
    y: &[f64],
    penalty: PenaltySpec,
    opts: &SolverOptions,
) -> LinearModel {
    let n = x.nrows();
    let p = x.ncols();
    let nf = n as f64;
    // column-major copy keeps the inner loops contiguous
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let sq: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf)
        .collect();
    let l1 = penalty.lambda * penalty.alpha;
    let l2 = penalty.lambda * (1.0 - penalty.alpha);

    let mut beta = vec![0.0; p];
    let mut intercept = y.iter().sum::<f64>() / nf;
    let mut resid: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let mut report = FitReport::default();

    while report.sweeps < opts.max_sweeps {
        report.sweeps += 1;
        let mut max_step: f64 = 0.0;
        for j in 0..p {
            let col = &cols[j];
            let denom = sq[j] + l2;
            let updated = if denom > 0.0 {
                let z =
                    col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + sq[j] * beta[j];
                soft_threshold(z, l1) / denom
            } else {
                0.0
            };
            let step = updated - beta[j];
            if step != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= a * step;
                }
                beta[j] = updated;
                max_step = max_step.max(step.abs());
            }
        }
        let shift = resid.iter().sum::<f64>() / nf;
        if shift != 0.0 {
            intercept += shift;
            resid.iter_mut().for_each(|r| *r -= shift);
            max_step = max_step.max(shift.abs());
        }
        let rss: f64 = resid.iter().map(|r| r * r).sum();
        report
            .objective_trace
            .push(rss / (2.0 * nf) + penalty.penalty(&beta));
        if max_step < opts.tolerance {
            report.converged = true;
            break;
        }
    }
    LinearModel {
        intercept,
        coefficients: beta,
        penalty,
        scaler: None,
        report,
    }
}

fn solve_normal_equations(x: &Matrix, y: &[f64], penalty: PenaltySpec) -> Result<LinearModel> {
    let n = x.nrows();
    let p = x.ncols();
    let nf = n as f64;
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / nf)
        .collect();
    let ybar = y.iter().sum::<f64>() / nf;
    let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let gram = xc.transpose() * &xc / nf;
    let rhs = xc.transpose() * yc / nf;

    let well_conditioned = |g: &DMatrix<f64>| -> Option<DVector<f64>> {
        let chol = g.clone().cholesky()?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
            (lo.min(d.abs()), hi.max(d.abs()))
        });
        if p > 0 && (lo / hi).powi(2) < 1e-13 {
            return None;
        }
        Some(chol.solve(&rhs))
    };

    let (beta, jittered) = match well_conditioned(&gram) {
        Some(b) => (b, false),
        None => {
            let jittered = &gram + DMatrix::identity(p, p) * 1e-10;
            let b = jittered
                .cholesky()
                .ok_or_else(|| Error::Numerical("normal equations unsolvable".into()))?
                .solve(&rhs);
            (b, true)
        }
    };
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = ybar
        - coefficients
            .iter()
            .zip(&means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite OLS solution".into()));
    }
    Ok(LinearModel {
        intercept,
        coefficients,
        penalty,
        scaler: None,
        report: FitReport {
            sweeps: 0,
            converged: true,
            jittered,
            objective_trace: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line_recovered() {
        let x = Matrix::from_columns(&[vec![-1.5, -0.5, 0.5, 1.5]]).unwrap();
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v).collect();
        let m = fit_linear(&x, &y, PenaltySpec::ols()).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.intercept, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_columns_jitter() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x = Matrix::from_columns(&[a.clone(), a.clone()]).unwrap();
        let y: Vec<f64> = a.iter().map(|v| 3.0 * v + 1.0).collect();
        let m = fit_linear(&x, &y, PenaltySpec::ols()).unwrap();
        assert!(m.report.jittered);
        // minimum-norm split of the slope
        assert_abs_diff_eq!(m.coefficients[0], 1.5, epsilon = 1e-4);
        assert_abs_diff_eq!(m.coefficients[1], 1.5, epsilon = 1e-4);
        let pred = m.predict(&x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert_abs_diff_eq!(p, t, epsilon = 1e-6);
        }
    }

    #[test]
    fn prediction_contracts() {
        let m = LinearModel {
            intercept: 0.5,
            coefficients: vec![1.0, 0.0],
            penalty: PenaltySpec::ols(),
            scaler: None,
            report: FitReport::default(),
        };
        assert_eq!(m.predict_row(&[3.0, 99.0]), 3.5);
        let zero = LinearModel {
            coefficients: vec![0.0, 0.0],
            ..m.clone()
        };
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-7.0, 4.0]]).unwrap();
        assert_eq!(zero.predict(&x).unwrap(), vec![0.5, 0.5]);
        let wrong = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(m.predict(&wrong).is_err());
    }

    #[test]
    fn raw_coefficients_match_scaled_prediction() {
        let x = Matrix::from_rows(&[
            vec![1.0, 10.0],
            vec![2.0, 30.0],
            vec![4.0, 20.0],
            vec![3.0, 50.0],
        ])
        .unwrap();
        let y = vec![1.0, 2.0, 2.5, 4.0];
        let s = Standardizer::fit(&x);
        let m = fit_linear(
            &s.apply(&x).unwrap(),
            &y,
            PenaltySpec::new(0.1, 0.5).unwrap(),
        )
        .unwrap()
        .with_scaler(s);
        let (b, w) = m.raw_coefficients();
        for row in x.rows_iter() {
            let direct = b + row[0] * w[0] + row[1] * w[1];
            assert_abs_diff_eq!(direct, m.predict_row(row), epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_penalties_rejected() {
        assert!(PenaltySpec::new(-0.1, 0.5).is_err());
        assert!(PenaltySpec::new(0.1, 1.5).is_err());
        let x = Matrix::from_columns(&[vec![1.0]]).unwrap();
        assert!(fit_linear(&x, &[1.0], PenaltySpec::ridge(0.1)).is_err());
    }
}
