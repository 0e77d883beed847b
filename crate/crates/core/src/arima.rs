//! ARIMA / SARIMA benchmark fitted by conditional sum of squares.
//!
//! After seasonal then ordinary differencing the working series `w` follows
//!
//! ```text
//! φ(B)Φ(Bˢ)·w_t = c + θ(B)Θ(Bˢ)·e_t
//! ```
//!
//! Innovations before the first full AR window are taken as zero and the
//! sum of the remaining squared innovations is minimized with a multistart
//! Nelder–Mead search. The constant `c` is estimated only when no
//! differencing is applied.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::NelderMead;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(default, rename = "P")]
    pub seasonal_p: usize,
    #[serde(default, rename = "D")]
    pub seasonal_d: usize,
    #[serde(default, rename = "Q")]
    pub seasonal_q: usize,
    #[serde(default = "one")]
    pub s: usize,
}

fn one() -> usize {
    1
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            s: 1,
        }
    }

    pub fn seasonal(mut self, p: usize, d: usize, q: usize, s: usize) -> Self {
        self.seasonal_p = p;
        self.seasonal_d = d;
        self.seasonal_q = q;
        self.s = s;
        self
    }

    pub fn is_seasonal(&self) -> bool {
        self.seasonal_p + self.seasonal_d + self.seasonal_q > 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::invalid("season length must be >= 1"));
        }
        if self.is_seasonal() && self.s < 2 {
            return Err(Error::invalid("seasonal terms require a season length > 1"));
        }
        Ok(())
    }

    pub fn has_intercept(&self) -> bool {
        self.d + self.seasonal_d == 0
    }

    /// Estimated coefficients, including the constant when present.
    pub fn n_params(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + usize::from(self.has_intercept())
    }

    /// Shortest series `fit_css` accepts.
    pub fn min_length(&self) -> usize {
        self.d
            + self.seasonal_d * self.s
            + 3 * (self.p + self.q + self.s * (self.seasonal_p + self.seasonal_q))
            + 10
    }

    fn max_ar_lag(&self) -> usize {
        self.p + self.s * self.seasonal_p
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if self.is_seasonal() {
            write!(
                f,
                "({},{},{})[{}]",
                self.seasonal_p, self.seasonal_d, self.seasonal_q, self.s
            )?;
        }
        Ok(())
    }
}

/// Lags and initial values needed to undo differencing.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffState {
    /// `(lag, first lag values of the input to that step)`, in application order.
    steps: Vec<(usize, Vec<f64>)>,
}

fn diff_once(y: &[f64], lag: usize) -> Vec<f64> {
    (lag..y.len()).map(|t| y[t] - y[t - lag]).collect()
}

/// Seasonal differences (`D` times at lag `s`) followed by ordinary ones.
pub fn difference(y: &[f64], d: usize, seasonal_d: usize, s: usize) -> Result<Vec<f64>> {
    difference_with_state(y, d, seasonal_d, s).map(|(w, _)| w)
}

pub fn difference_with_state(
    y: &[f64],
    d: usize,
    seasonal_d: usize,
    s: usize,
) -> Result<(Vec<f64>, DiffState)> {
    let needed = d + seasonal_d * s + 1;
    if y.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            actual: y.len(),
        });
    }
    let lags = std::iter::repeat_n(s, seasonal_d).chain(std::iter::repeat_n(1, d));
    let mut cur = y.to_vec();
    let mut steps = Vec::new();
    for lag in lags {
        steps.push((lag, cur[..lag].to_vec()));
        cur = diff_once(&cur, lag);
    }
    Ok((cur, DiffState { steps }))
}

/// Inverts [`difference_with_state`].
pub fn integrate(w: &[f64], state: &DiffState) -> Vec<f64> {
    let mut cur = w.to_vec();
    for (lag, head) in state.steps.iter().rev() {
        let mut up = head.clone();
        up.reserve(cur.len());
        for (t, v) in cur.iter().enumerate() {
            let prev = up[t];
            up.push(v + prev);
        }
        debug_assert_eq!(up.len(), cur.len() + lag);
        cur = up;
    }
    cur
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub sigma2: f64,
    pub css: f64,
    pub aic: f64,
    /// Innovations entering the sum of squares.
    pub n_used: usize,
    /// Length of the undifferenced series the model was fitted on.
    pub n_obs: usize,
    pub converged: bool,
    pub stationary: bool,
    pub invertible: bool,
    /// CSS at each multistart initial point.
    pub start_css: Vec<f64>,
}

/// Multiplies `(1 + Σ a_i Bⁱ)(1 + Σ b_k B^{sk})` and returns the sparse
/// nonzero lags beyond zero.
fn expand(short: &[f64], seasonal: &[f64], s: usize) -> Vec<(usize, f64)> {
    let mut dense = vec![0.0; short.len() + s * seasonal.len() + 1];
    let a: Vec<f64> = std::iter::once(1.0).chain(short.iter().copied()).collect();
    let b: Vec<f64> = std::iter::once(1.0)
        .chain(seasonal.iter().copied())
        .collect();
    for (i, ai) in a.iter().enumerate() {
        for (k, bk) in b.iter().enumerate() {
            dense[i + s * k] += ai * bk;
        }
    }
    dense
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| *v != 0.0)
        .collect()
}

struct Polys {
    intercept: f64,
    /// `w_t = c + Σ ar·w_{t−l} + Σ ma·e_{t−l} + e_t`
    ar: Vec<(usize, f64)>,
    ma: Vec<(usize, f64)>,
}

fn unpack(order: &ArimaOrder, params: &[f64]) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut it = params.iter().copied();
    let c = if order.has_intercept() {
        it.next().unwrap_or(0.0)
    } else {
        0.0
    };
    let mut take = |k: usize| -> Vec<f64> { (0..k).map(|_| it.next().unwrap_or(0.0)).collect() };
    let ar = take(order.p);
    let ma = take(order.q);
    let sar = take(order.seasonal_p);
    let sma = take(order.seasonal_q);
    (c, ar, ma, sar, sma)
}

fn polys(order: &ArimaOrder, params: &[f64]) -> Polys {
    let (c, ar, ma, sar, sma) = unpack(order, params);
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    let ar_exp = expand(&neg(&ar), &neg(&sar), order.s)
        .into_iter()
        .map(|(l, v)| (l, -v))
        .collect();
    Polys {
        intercept: c,
        ar: ar_exp,
        ma: expand(&ma, &sma, order.s),
    }
}

/// Conditional innovations; zero before the first full AR window.
fn innovations(w: &[f64], order: &ArimaOrder, pol: &Polys) -> Vec<f64> {
    let start = order.max_ar_lag().min(w.len());
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut v = w[t] - pol.intercept;
        for &(l, a) in &pol.ar {
            v -= a * w[t - l];
        }
        for &(l, m) in &pol.ma {
            if l <= t {
                v -= m * e[t - l];
            }
        }
        e[t] = v;
    }
    e
}

fn css_value(w: &[f64], order: &ArimaOrder, params: &[f64]) -> f64 {
    let e = innovations(w, order, &polys(order, params));
    let v: f64 = e[order.max_ar_lag().min(w.len())..]
        .iter()
        .map(|x| x * x)
        .sum();
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// True when every root of `1 − Σ c_l Bˡ` lies outside the unit circle.
///
/// Schur–Cohn step-down: the polynomial is stable exactly when every
/// reflection coefficient has modulus below one.
fn roots_outside_unit_circle(lags: &[(usize, f64)]) -> bool {
    let degree = lags.iter().map(|(l, _)| *l).max().unwrap_or(0);
    let mut a = vec![0.0; degree + 1];
    for &(l, c) in lags {
        a[l] += c;
    }
    for k in (1..=degree).rev() {
        let r = a[k];
        if !(r.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for j in 1..k {
            a[j] = (prev[j] + r * prev[k - j]) / denom;
        }
    }
    true
}

fn aic(css: f64, n_used: usize, k: usize) -> f64 {
    let n = n_used as f64;
    let ratio = (css / n).max(f64::MIN_POSITIVE);
    n * ratio.ln() + 2.0 * (k as f64 + 1.0)
}

pub fn fit_css(y: &[f64], order: &ArimaOrder) -> Result<ArimaFit> {
    fit_css_seeded(y, order, 0)
}

/// Minimizes the conditional sum of squares from the zero vector (constant at
/// the sample mean of the differenced series) and four perturbations of it.
pub fn fit_css_seeded(y: &[f64], order: &ArimaOrder, seed: u64) -> Result<ArimaFit> {
    order.validate()?;
    let needed = order.min_length();
    if y.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            actual: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in series".into()));
    }
    let w = difference(y, order.d, order.seasonal_d, order.s)?;
    let k = order.n_params();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();

    let mut base = vec![0.0; k];
    if order.has_intercept() {
        base[0] = mean;
    }
    let mut starts = vec![base.clone()];
    for s in 0..4u64 {
        let mut rng = seeds::rng(seeds::derive(seed, "arima", s));
        let mut x = base.clone();
        for (i, v) in x.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let scale = if i == 0 && order.has_intercept() {
                0.3 * sd.max(1e-3)
            } else {
                0.3
            };
            *v += scale * z;
        }
        starts.push(x);
    }

    let objective = |p: &[f64]| css_value(&w, order, p);
    let start_css: Vec<f64> = starts.iter().map(|s| objective(s)).collect();
    let nm = NelderMead {
        max_evaluations: 600 * (k + 1),
        ..NelderMead::default()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = false;
    for s in &starts {
        let mut m = nm.minimize(objective, s);
        // one restart from the optimum re-expands a collapsed simplex
        let again = NelderMead { step: 0.02, ..nm }.minimize(objective, &m.x);
        if again.value <= m.value {
            m = crate::optimize::Minimum {
                converged: again.converged,
                ..again
            };
        }
        if m.value.is_finite() {
            converged |= m.converged;
            if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
                best = Some((m.x, m.value));
            }
        }
    }
    let (params, css) = match best {
        Some(b) => b,
        None => (base.clone(), start_css[0]),
    };
    let n_used = w.len() - order.max_ar_lag().min(w.len());
    if n_used == 0 {
        return Err(Error::SeriesTooShort {
            needed: needed + 1,
            actual: y.len(),
        });
    }
    let pol = polys(order, &params);
    let (intercept, ar, ma, seasonal_ar, seasonal_ma) = unpack(order, &params);
    let stationary = roots_outside_unit_circle(&pol.ar);
    let ma_neg: Vec<(usize, f64)> = pol.ma.iter().map(|&(l, m)| (l, -m)).collect();
    let invertible = roots_outside_unit_circle(&ma_neg);
    Ok(ArimaFit {
        order: *order,
        intercept,
        ar,
        ma,
        seasonal_ar,
        seasonal_ma,
        sigma2: css / n_used as f64,
        css,
        aic: aic(css, n_used, k),
        n_used,
        n_obs: y.len(),
        converged: converged && css.is_finite(),
        stationary,
        invertible,
        start_css,
    })
}

impl ArimaFit {
    fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.order.n_params());
        if self.order.has_intercept() {
            v.push(self.intercept);
        }
        v.extend(&self.ar);
        v.extend(&self.ma);
        v.extend(&self.seasonal_ar);
        v.extend(&self.seasonal_ma);
        v
    }
}

/// `h` recursive point forecasts on the original scale of `y`.
pub fn forecast(fit: &ArimaFit, y: &[f64], h: usize) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be >= 1"));
    }
    if y.len() != fit.n_obs {
        return Err(Error::invalid(format!(
            "fit was produced on {} observations, got {}",
            fit.n_obs,
            y.len()
        )));
    }
    let order = &fit.order;
    let pol = polys(order, &fit.params());
    let (w, state) = difference_with_state(y, order.d, order.seasonal_d, order.s)?;
    let mut e = innovations(&w, order, &pol);
    let mut ext = w.clone();
    for _ in 0..h {
        let t = ext.len();
        let mut v = pol.intercept;
        for &(l, a) in &pol.ar {
            if l <= t {
                v += a * ext[t - l];
            }
        }
        for &(l, m) in &pol.ma {
            if l <= t {
                v += m * e[t - l];
            }
        }
        ext.push(v);
        e.push(0.0);
    }
    let level = integrate(&ext, &state);
    Ok(level[y.len()..].to_vec())
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateOutcome {
    pub order: ArimaOrder,
    pub aic: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub order: ArimaOrder,
    pub fit: ArimaFit,
    pub candidates: Vec<CandidateOutcome>,
}

/// Non-seasonal `p, q ∈ {0..3}`, `d ∈ {0, 1}`.
pub fn nonseasonal_candidates() -> Vec<ArimaOrder> {
    let mut v = Vec::new();
    for d in 0..=1 {
        for p in 0..=3 {
            for q in 0..=3 {
                v.push(ArimaOrder::new(p, d, q));
            }
        }
    }
    v
}

/// Seasonal orders with `(P, D, Q) ∈ {0,1}³ \ {(0,0,0)}` over the
/// non-seasonal grid, season length `s`.
pub fn seasonal_candidates(s: usize) -> Vec<ArimaOrder> {
    let mut v = Vec::new();
    for base in nonseasonal_candidates() {
        for sp in 0..=1 {
            for sd in 0..=1 {
                for sq in 0..=1 {
                    if sp + sd + sq > 0 {
                        v.push(base.seasonal(sp, sd, sq, s));
                    }
                }
            }
        }
    }
    v
}

/// Full grid: non-seasonal orders followed by their seasonal extensions at `s = 12`.
pub fn default_candidates() -> Vec<ArimaOrder> {
    let mut v = nonseasonal_candidates();
    v.extend(seasonal_candidates(12));
    v
}

/// Minimum-AIC converged candidate. Ties go to fewer parameters, then to
/// the earlier candidate. Candidates that cannot be fitted are skipped.
pub fn select_order(y: &[f64], candidates: &[ArimaOrder], seed: u64) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate list"));
    }
    let fits: Vec<Result<ArimaFit>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, o)| fit_css_seeded(y, o, seeds::derive(seed, "candidate", i as u64)))
        .collect();
    let mut best: Option<(usize, &ArimaFit)> = None;
    let mut outcomes = Vec::with_capacity(candidates.len());
    for (i, (order, fit)) in candidates.iter().zip(&fits).enumerate() {
        match fit {
            Ok(f) => {
                outcomes.push(CandidateOutcome {
                    order: *order,
                    aic: Some(f.aic),
                    converged: f.converged,
                    error: None,
                });
                if !f.converged || !f.aic.is_finite() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((_, b)) => {
                        let tol = 1e-9 * (1.0 + b.aic.abs());
                        if f.aic < b.aic - tol {
                            true
                        } else if (f.aic - b.aic).abs() <= tol {
                            order.n_params() < b.order.n_params()
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((i, f));
                }
            }
            Err(e) => outcomes.push(CandidateOutcome {
                order: *order,
                aic: None,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    let (i, fit) = best.ok_or_else(|| Error::Numerical("no ARIMA candidate converged".into()))?;
    Ok(Selection {
        order: candidates[i],
        fit: fit.clone(),
        candidates: outcomes,
    })
}

/// ARIMA benchmark bound to the history it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub fit: ArimaFit,
    pub history: Vec<f64>,
}

impl ArimaModel {
    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        forecast(&self.fit, &self.history, h)
    }
}
