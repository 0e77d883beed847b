//! ε-insensitive support vector regression solved by SMO.
//!
//! The dual is written over `2n` variables `a = (α, α*)` with signs
//! `s = (+1…, −1…)`:
//!
//! ```text
//! min ½ aᵀQa + pᵀa   s.t.  sᵀa = 0,  0 ≤ a ≤ C
//! Q_tu = s_t s_u K(x_t mod n, x_u mod n),  p = (ε − y, ε + y)
//! ```
//!
//! Each iteration updates the maximal KKT-violating pair analytically.
//! The fitted function is `Σ (αᵢ − αᵢ*) K(xᵢ, x) + b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::predictor::Predictor;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, gamma, .. } => {
                if degree < 1 {
                    return Err(Error::invalid("polynomial degree must be >= 1"));
                }
                if !(gamma > 0.0) {
                    return Err(Error::invalid("gamma must be > 0"));
                }
                Ok(())
            }
            KernelSpec::Rbf { gamma } => {
                if !(gamma > 0.0) {
                    return Err(Error::invalid("gamma must be > 0"));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Polynomial {
                degree,
                gamma,
                coef0,
            } => (gamma * dot(a, b) + coef0).powi(degree as i32),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (p · var(X))` over all entries of `x`; `1/p` if `x` is constant.
pub fn default_gamma(x: &Matrix) -> f64 {
    let p = x.ncols().max(1) as f64;
    let v = x.as_slice();
    if v.is_empty() {
        return 1.0 / p;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64;
    if var > 0.0 {
        1.0 / (p * var)
    } else {
        1.0 / p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoOptions {
    /// Stop when the maximal violation `m(a) − M(a)` drops to this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub record_trace: bool,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 100_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// Training rows in the (standardized) space the model was fitted in.
    pub rows: Matrix,
    /// `αᵢ − αᵢ*` per training row.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective in maximization form, `−(½aᵀQa + pᵀa)`.
    pub dual_objective: f64,
    /// Final maximal KKT violation.
    pub violation: f64,
    pub scaler: Option<Standardizer>,
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl SvrModel {
    pub fn with_scaler(mut self, scaler: Standardizer) -> Self {
        self.scaler = Some(scaler);
        self
    }

    pub fn n_support(&self) -> usize {
        self.dual_coef.iter().filter(|c| **c != 0.0).count()
    }

    /// `w = Σ (αᵢ − αᵢ*) xᵢ` for the linear kernel, in the fitted space.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != KernelSpec::Linear {
            return None;
        }
        let mut w = vec![0.0; self.rows.ncols()];
        for (i, c) in self.dual_coef.iter().enumerate() {
            if *c != 0.0 {
                for (wj, xj) in w.iter_mut().zip(self.rows.row(i)) {
                    *wj += c * xj;
                }
            }
        }
        Some(w)
    }

    /// Intercept and slopes on the raw feature scale (linear kernel only).
    pub fn raw_linear_form(&self) -> Option<(f64, Vec<f64>)> {
        let w = self.linear_weights()?;
        Some(match &self.scaler {
            None => (self.bias, w),
            Some(s) => {
                let slopes: Vec<f64> = w.iter().zip(&s.scales).map(|(a, b)| a / b).collect();
                let shift: f64 = slopes.iter().zip(&s.means).map(|(a, m)| a * m).sum();
                (self.bias - shift, slopes)
            }
        })
    }

    fn decision(&self, z: &[f64]) -> f64 {
        let mut acc = self.bias;
        for (i, c) in self.dual_coef.iter().enumerate() {
            if *c != 0.0 {
                acc += c * self.kernel.eval(self.rows.row(i), z);
            }
        }
        acc
    }
}

impl Predictor for SvrModel {
    fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.scaler {
            None => self.decision(row),
            Some(s) => {
                let mut z = vec![0.0; row.len()];
                s.apply_row_into(row, &mut z);
                self.decision(&z)
            }
        }
    }
}

pub fn fit_svr(
    x: &Matrix,
    y: &[f64],
    c: f64,
    epsilon: f64,
    kernel: KernelSpec,
) -> Result<SvrModel> {
    fit_svr_with(x, y, c, epsilon, kernel, &SmoOptions::default())
}

pub fn fit_svr_with(
    x: &Matrix,
    y: &[f64],
    c: f64,
    epsilon: f64,
    kernel: KernelSpec,
    opts: &SmoOptions,
) -> Result<SvrModel> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: n,
        });
    }
    if n < 2 {
        return Err(Error::invalid("SVR needs at least 2 rows"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("C must be > 0, got {c}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    kernel.validate()?;

    let gram: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| kernel.eval(x.row(i), x.row(j))).collect())
        .collect();

    let m = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let q = |t: usize, u: usize| sign(t) * sign(u) * gram[t % n][u % n];
    let lin: Vec<f64> = (0..m)
        .map(|t| {
            if t < n {
                epsilon - y[t]
            } else {
                epsilon + y[t - n]
            }
        })
        .collect();

    let mut a = vec![0.0; m];
    let mut grad = lin.clone();
    let objective = |a: &[f64], grad: &[f64]| -> f64 {
        -0.5 * a
            .iter()
            .zip(grad.iter().zip(&lin))
            .map(|(ai, (g, p))| ai * (g + p))
            .sum::<f64>()
    };
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(0.0);
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut violation;
    loop {
        // maximal violating pair
        let (mut i_best, mut g_max) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j_best, mut g_min) = (usize::MAX, f64::INFINITY);
        for t in 0..m {
            let s = sign(t);
            let v = -s * grad[t];
            let up = if s > 0.0 { a[t] < c } else { a[t] > 0.0 };
            let low = if s > 0.0 { a[t] > 0.0 } else { a[t] < c };
            if up && v > g_max {
                g_max = v;
                i_best = t;
            }
            if low && v < g_min {
                g_min = v;
                j_best = t;
            }
        }
        violation = g_max - g_min;
        if i_best == usize::MAX || j_best == usize::MAX || violation <= opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let (i, j) = (i_best, j_best);
        let (old_i, old_j) = (a[i], a[j]);
        let (qii, qjj, qij) = (q(i, i), q(j, j), q(i, j));
        if sign(i) != sign(j) {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (di, dj) = (a[i] - old_i, a[j] - old_j);
        for t in 0..m {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
        if opts.record_trace {
            trace.push(objective(&a, &grad));
        }
    }

    // bias from free variables, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..m {
        let s = sign(t);
        let yg = s * grad[t];
        if a[t] >= c {
            if s < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a[t] <= 0.0 {
            if s > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        0.5 * (ub + lb)
    };
    let dual_coef: Vec<f64> = (0..n).map(|i| a[i] - a[i + n]).collect();
    Ok(SvrModel {
        rows: x.clone(),
        dual_coef,
        bias: -rho,
        kernel,
        c,
        epsilon,
        converged,
        iterations,
        dual_objective: objective(&a, &grad),
        violation,
        scaler: None,
        objective_trace: trace,
    })
}
