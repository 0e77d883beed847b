//! Forecast accuracy: MAE, RMSE, RMSE reduction against a benchmark and the
//! Diebold–Mariano test of equal squared-error loss.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

fn errors(actual: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    if actual.is_empty() {
        return Err(Error::invalid("empty forecast vector"));
    }
    if actual.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: pred.len(),
        });
    }
    Ok(actual.iter().zip(pred).map(|(a, p)| a - p).collect())
}

pub fn mae(actual: &[f64], pred: &[f64]) -> Result<f64> {
    let e = errors(actual, pred)?;
    Ok(e.iter().map(|v| v.abs()).sum::<f64>() / e.len() as f64)
}

pub fn rmse(actual: &[f64], pred: &[f64]) -> Result<f64> {
    let e = errors(actual, pred)?;
    Ok((e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt())
}

/// `100 · (benchmark − model) / benchmark`.
pub fn rmse_reduction(benchmark_rmse: f64, model_rmse: f64) -> Result<f64> {
    if !(benchmark_rmse > 0.0) {
        return Err(Error::invalid(format!(
            "benchmark RMSE must be positive, got {benchmark_rmse}"
        )));
    }
    Ok(100.0 * (benchmark_rmse - model_rmse) / benchmark_rmse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmallSample {
    /// Correct when fewer than 50 forecasts are compared.
    #[default]
    Auto,
    On,
    Off,
}

impl SmallSample {
    pub fn resolve(self, n: usize) -> bool {
        match self {
            SmallSample::Auto => n < 50,
            SmallSample::On => true,
            SmallSample::Off => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub n: usize,
    /// Largest autocovariance lag in the long-run variance (`h − 1`).
    pub truncation_lag: usize,
    pub small_sample_corrected: bool,
}

/// Diebold–Mariano test on squared-error loss.
///
/// `d_t = e_a,t² − e_b,t²` with `a` the benchmark, so a positive statistic
/// favours the candidate `b`. The long-run variance of `d` uses Bartlett
/// weights `1 − k/h` up to lag `h − 1`. Two-sided p-values come from the
/// standard normal, or from `t_{n−1}` after the Harvey–Leybourne–Newbold
/// rescaling when `small_sample` is set.
pub fn dm_test(
    errors_a: &[f64],
    errors_b: &[f64],
    horizon: usize,
    small_sample: bool,
) -> Result<DmResult> {
    let n = errors_a.len();
    if n != errors_b.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: errors_b.len(),
        });
    }
    if n < 8 {
        return Err(Error::invalid(format!(
            "DM test needs at least 8 forecasts, got {n}"
        )));
    }
    if horizon == 0 || horizon >= n {
        return Err(Error::invalid(format!(
            "DM horizon must lie in 1..{n}, got {horizon}"
        )));
    }
    let lag = horizon - 1;
    let d: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(a, b)| a * a - b * b)
        .collect();
    if d.iter().all(|v| *v == 0.0) {
        return Ok(DmResult {
            statistic: 0.0,
            pvalue: 1.0,
            n,
            truncation_lag: lag,
            small_sample_corrected: small_sample,
        });
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |k: usize| -> f64 {
        (k..n)
            .map(|t| (d[t] - mean) * (d[t - k] - mean))
            .sum::<f64>()
            / nf
    };
    let h = horizon as f64;
    let lrv = autocov(0)
        + 2.0
            * (1..=lag)
                .map(|k| (1.0 - k as f64 / h) * autocov(k))
                .sum::<f64>();
    if !(lrv > 0.0) {
        return Err(Error::Numerical(
            "non-positive long-run variance of the loss differential".into(),
        ));
    }
    let dm = mean / (lrv / nf).sqrt();
    let (statistic, pvalue) = if small_sample {
        let factor = ((nf + 1.0 - 2.0 * h + h * (h - 1.0) / nf) / nf).sqrt();
        let s = dm * factor;
        let t = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
        (s, 2.0 * t.sf(s.abs()))
    } else {
        let z = Normal::standard();
        (dm, 2.0 * z.sf(dm.abs()))
    };
    Ok(DmResult {
        statistic,
        pvalue: pvalue.clamp(0.0, 1.0),
        n,
        truncation_lag: lag,
        small_sample_corrected: small_sample,
    })
}

/// One model's row of the accuracy report. Empty cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub rmse_reduction_pct: Option<f64>,
    pub dm_stat: Option<f64>,
    pub dm_pvalue: Option<f64>,
}

impl MetricRow {
    pub fn failed(model: &str) -> Self {
        Self {
            model: model.to_string(),
            mae: None,
            rmse: None,
            rmse_reduction_pct: None,
            dm_stat: None,
            dm_pvalue: None,
        }
    }
}

/// Both DM variants for one candidate, for audit alongside the main report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmAudit {
    pub model: String,
    pub asymptotic: DmResult,
    pub corrected: DmResult,
}

/// Benchmark row first (blank reduction and DM cells), then one row per
/// candidate. Candidates whose forecasts are missing become failed rows.
pub fn metric_table(
    actual: &[f64],
    benchmark: (&str, &[f64]),
    candidates: &[(String, Option<Vec<f64>>)],
    horizon: usize,
    small_sample: SmallSample,
) -> Result<(Vec<MetricRow>, Vec<DmAudit>)> {
    let (bench_id, bench_pred) = benchmark;
    let bench_rmse = rmse(actual, bench_pred)?;
    let bench_err = errors(actual, bench_pred)?;
    let correct = small_sample.resolve(actual.len());
    let mut rows = vec![MetricRow {
        model: bench_id.to_string(),
        mae: Some(mae(actual, bench_pred)?),
        rmse: Some(bench_rmse),
        rmse_reduction_pct: None,
        dm_stat: None,
        dm_pvalue: None,
    }];
    let mut audits = Vec::new();
    for (id, pred) in candidates {
        let Some(pred) = pred else {
            rows.push(MetricRow::failed(id));
            continue;
        };
        let err = errors(actual, pred)?;
        let r = rmse(actual, pred)?;
        let dm = match (
            dm_test(&bench_err, &err, horizon, false),
            dm_test(&bench_err, &err, horizon, true),
        ) {
            (Ok(a), Ok(c)) => {
                audits.push(DmAudit {
                    model: id.clone(),
                    asymptotic: a,
                    corrected: c,
                });
                Some(if correct { c } else { a })
            }
            _ => None,
        };
        rows.push(MetricRow {
            model: id.clone(),
            mae: Some(mae(actual, pred)?),
            rmse: Some(r),
            rmse_reduction_pct: rmse_reduction(bench_rmse, r).ok(),
            dm_stat: dm.map(|d| d.statistic),
            dm_pvalue: dm.map(|d| d.pvalue),
        });
    }
    Ok((rows, audits))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `model,mae,rmse,rmse_reduction_pct,dm_stat,dm_pvalue`, values printed at
/// full round-trip precision.
pub fn metrics_csv(rows: &[MetricRow], comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str("model,mae,rmse,rmse_reduction_pct,dm_stat,dm_pvalue\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.model,
            cell(r.mae),
            cell(r.rmse),
            cell(r.rmse_reduction_pct),
            cell(r.dm_stat),
            cell(r.dm_pvalue)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn metric_hand_values() {
        let zero = [0.0, 0.0];
        assert_eq!(mae(&[1.0, -1.0], &zero).unwrap(), 1.0);
        assert_eq!(rmse(&[1.0, -1.0], &zero).unwrap(), 1.0);
        assert_eq!(mae(&[3.0, 4.0], &zero).unwrap(), 3.5);
        assert_abs_diff_eq!(rmse(&[3.0, 4.0], &zero).unwrap(), 12.5f64.sqrt());
        assert_eq!(rmse(&[2.0, 5.0], &[2.0, 5.0]).unwrap(), 0.0);
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn reduction_cases() {
        assert_eq!(rmse_reduction(0.67, 0.67).unwrap(), 0.0);
        assert!(rmse_reduction(0.0, 0.1).is_err());
        assert!(rmse_reduction(1.0, 0.2).unwrap() > rmse_reduction(1.0, 0.3).unwrap());
    }

    #[test]
    fn dm_identical_and_antisymmetric() {
        let a = [0.3, -0.2, 0.5, 0.1, -0.7, 0.4, 0.2, -0.1, 0.6, -0.3];
        let b = [0.1, -0.1, 0.2, 0.3, -0.2, 0.1, 0.1, -0.4, 0.2, -0.1];
        let same = dm_test(&a, &a, 1, false).unwrap();
        assert_eq!((same.statistic, same.pvalue), (0.0, 1.0));
        for small in [false, true] {
            for h in [1, 3] {
                let ab = dm_test(&a, &b, h, small).unwrap();
                let ba = dm_test(&b, &a, h, small).unwrap();
                assert_eq!(ab.statistic, -ba.statistic);
                assert_eq!(ab.pvalue, ba.pvalue);
            }
        }
        assert!(dm_test(&a[..7], &b[..7], 1, false).is_err());
        assert!(dm_test(&a, &b[..9], 1, false).is_err());
    }

    #[test]
    fn dm_constant_nonzero_differential_is_degenerate() {
        let a = [2.0; 10];
        let b = [1.0; 10];
        assert!(matches!(
            dm_test(&a, &b, 1, false),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            MetricRow {
                model: "arima".into(),
                mae: Some(0.63),
                rmse: Some(0.67),
                rmse_reduction_pct: None,
                dm_stat: None,
                dm_pvalue: None,
            },
            MetricRow::failed("svr"),
        ];
        let s = metrics_csv(&rows, None);
        assert_eq!(
            s,
            "model,mae,rmse,rmse_reduction_pct,dm_stat,dm_pvalue\narima,0.63,0.67,,,\nsvr,,,,,\n"
        );
    }
}
