//! Dependence data, outlier filtering, polynomial functional forms, and
//! summary-plot records derived from a [`ShapMatrix`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::shapley::{global_importance, ShapMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DependencePoint {
    pub row_index: usize,
    pub x_value: f64,
    pub shap_value: f64,
    pub color_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorBy {
    #[default]
    None,
    /// Feature whose raw values best explain the residual spread.
    Auto,
    Feature(String),
}

fn feature_index(names: &[String], name: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Residuals of an ordinary least-squares line of `y` on `x`.
fn line_residuals(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    x.iter()
        .zip(y)
        .map(|(a, b)| b - my - slope * (a - mx))
        .collect()
}

/// One point per explained row for `feature`, with the chosen coloring
/// feature's name when there is one.
pub fn dependence_data(
    m: &ShapMatrix,
    x: &Matrix,
    names: &[String],
    feature: &str,
    color_by: &ColorBy,
) -> Result<(Vec<DependencePoint>, Option<String>)> {
    if x.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: x.nrows(),
        });
    }
    x.check_cols(names.len())?;
    let j = feature_index(names, feature)?;
    let xs = x.column(j);
    let shap = m.phi.column(j);
    let color = match color_by {
        ColorBy::None => None,
        ColorBy::Feature(name) => Some(feature_index(names, name)?),
        ColorBy::Auto => {
            let resid = line_residuals(&xs, &shap);
            let mut best: Option<(usize, f64)> = None;
            for c in (0..names.len()).filter(|&c| c != j) {
                let r = pearson(&x.column(c), &resid).abs();
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((c, r));
                }
            }
            best.map(|(c, _)| c)
        }
    };
    let points = (0..x.nrows())
        .map(|i| DependencePoint {
            row_index: i,
            x_value: xs[i],
            shap_value: shap[i],
            color_value: color.map(|c| x.get(i, c)),
        })
        .collect();
    Ok((points, color.map(|c| names[c].clone())))
}

pub fn dependence_csv(points: &[DependencePoint], row_offset: usize, comment: &str) -> String {
    let mut out = String::new();
    if !comment.is_empty() {
        out.push_str(&format!("# {comment}\n"));
    }
    out.push_str("row_index,x_value,shap_value,color_value\n");
    for p in points {
        let color = p.color_value.map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.row_index + row_offset,
            p.x_value,
            p.shap_value,
            color
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimAxis {
    #[default]
    Feature,
    Shap,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierRule {
    /// Fence multiplier on the interquartile range.
    pub k: f64,
    pub axis: TrimAxis,
}

impl Default for OutlierRule {
    fn default() -> Self {
        OutlierRule {
            k: 1.5,
            axis: TrimAxis::Feature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Filtered {
    pub points: Vec<DependencePoint>,
    pub removed: usize,
    /// Set when trimming would have left fewer than four points, in which
    /// case `points` is the unmodified input.
    pub guarded: bool,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn fence(values: impl Iterator<Item = f64>, k: f64) -> Option<(f64, f64)> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75));
    let iqr = q3 - q1;
    (iqr > 0.0).then_some((q1 - k * iqr, q3 + k * iqr))
}

/// Drops points outside the IQR fence, re-fencing the survivors until
/// nothing more is removed. The result is therefore a fixed point.
pub fn filter_outliers(points: &[DependencePoint], rule: &OutlierRule) -> Filtered {
    let mut kept = points.to_vec();
    loop {
        let fx = match rule.axis {
            TrimAxis::Feature | TrimAxis::Both => fence(kept.iter().map(|p| p.x_value), rule.k),
            TrimAxis::Shap => None,
        };
        let fs = match rule.axis {
            TrimAxis::Shap | TrimAxis::Both => fence(kept.iter().map(|p| p.shap_value), rule.k),
            TrimAxis::Feature => None,
        };
        let inside = |v: f64, f: Option<(f64, f64)>| f.is_none_or(|(lo, hi)| v >= lo && v <= hi);
        let next: Vec<DependencePoint> = kept
            .iter()
            .copied()
            .filter(|p| inside(p.x_value, fx) && inside(p.shap_value, fs))
            .collect();
        if next.len() == kept.len() {
            break;
        }
        if next.len() < 4 {
            return Filtered {
                points: points.to_vec(),
                removed: 0,
                guarded: true,
            };
        }
        kept = next;
    }
    Filtered {
        removed: points.len() - kept.len(),
        points: kept,
        guarded: false,
    }
}

/// Least-squares polynomial of degree 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyFit {
    pub degree: usize,
    /// Ascending powers.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n_points: usize,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c)
    }
}

/// Fits `y ≈ Σ c_k x^k` on centered and scaled `x`, then maps the
/// coefficients back to the raw scale.
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    let n = x.len();
    if !(1..=2).contains(&degree) {
        return Err(Error::invalid(format!(
            "polynomial degree {degree} is not 1 or 2"
        )));
    }
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    if n < degree + 2 {
        return Err(Error::invalid(format!(
            "{n} points are too few for a degree-{degree} fit"
        )));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::invalid("all x values are equal"));
    }
    let (c, s) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    let design = DMatrix::from_fn(n, degree + 1, |i, k| ((x[i] - c) / s).powi(k as i32));
    let svd = design.clone().svd(true, true);
    let a = svd
        .solve(&DVector::from_column_slice(y), 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let fitted = &design * &a;
    let ssr: f64 = fitted.iter().zip(y).map(|(f, v)| (v - f).powi(2)).sum();
    let my = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - ssr / sst };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - degree - 1) as f64;
    let coefficients = match degree {
        1 => vec![a[0] - a[1] * c / s, a[1] / s],
        _ => vec![
            a[0] - a[1] * c / s + a[2] * c * c / (s * s),
            a[1] / s - 2.0 * a[2] * c / (s * s),
            a[2] / (s * s),
        ],
    };
    Ok(PolyFit {
        degree,
        coefficients,
        r2,
        adj_r2,
        n_points: n,
    })
}

/// Picks degree 1 or 2 by adjusted R², preferring degree 1 on ties.
pub fn fit_functional_form(points: &[DependencePoint]) -> Result<PolyFit> {
    if points.len() < 4 {
        return Err(Error::invalid(format!(
            "functional form needs at least 4 points, got {}",
            points.len()
        )));
    }
    let x: Vec<f64> = points.iter().map(|p| p.x_value).collect();
    let y: Vec<f64> = points.iter().map(|p| p.shap_value).collect();
    let line = fit_polynomial(&x, &y, 1)?;
    let mut distinct = x.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Ok(line);
    }
    let quad = fit_polynomial(&x, &y, 2)?;
    Ok(if quad.adj_r2 > line.adj_r2 + 1e-9 {
        quad
    } else {
        line
    })
}

/// Real roots of the fitted polynomial inside `[lo, hi]`, ascending.
pub fn zero_crossings(fit: &PolyFit, lo: f64, hi: f64) -> Vec<f64> {
    let c = &fit.coefficients;
    let (c0, c1, c2) = (
        c[0],
        c.get(1).copied().unwrap_or(0.0),
        c.get(2).copied().unwrap_or(0.0),
    );
    let mut roots = Vec::new();
    if c2 == 0.0 {
        if c1 != 0.0 {
            roots.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
            if q == 0.0 {
                roots.push(0.0);
            } else {
                roots.push(q / c2);
                roots.push(c0 / q);
            }
        }
    }
    // one Newton step tidies the last bits of each root
    let deriv = |x: f64| c1 + 2.0 * c2 * x;
    let mut roots: Vec<f64> = roots
        .into_iter()
        .map(|r| {
            let d = deriv(r);
            let polished = if d != 0.0 { r - fit.eval(r) / d } else { r };
            if polished.is_finite() && fit.eval(polished).abs() <= fit.eval(r).abs() {
                polished
            } else {
                r
            }
        })
        .filter(|r| *r >= lo && *r <= hi)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
}

/// Everything `functional_form.json` records for one feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalForm {
    pub feature: String,
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub crossings: Vec<f64>,
    pub n_points: usize,
    pub outliers_removed: usize,
    pub outlier_guard: bool,
}

/// Filters, fits, and locates zero crossings over the filtered range.
pub fn functional_form(
    feature: &str,
    points: &[DependencePoint],
    rule: &OutlierRule,
) -> Result<FunctionalForm> {
    let filtered = filter_outliers(points, rule);
    let fit = fit_functional_form(&filtered.points)?;
    let xs = filtered.points.iter().map(|p| p.x_value);
    let lo = xs.clone().fold(f64::INFINITY, f64::min);
    let hi = xs.fold(f64::NEG_INFINITY, f64::max);
    Ok(FunctionalForm {
        feature: feature.to_string(),
        degree: fit.degree,
        crossings: zero_crossings(&fit, lo, hi),
        coefficients: fit.coefficients,
        r2: fit.r2,
        adj_r2: fit.adj_r2,
        n_points: fit.n_points,
        outliers_removed: filtered.removed,
        outlier_guard: filtered.guarded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub feature: usize,
    pub row_index: usize,
    pub shap_value: f64,
    /// Min-max scaled raw value; 0.5 for a constant feature.
    pub normalized_value: f64,
}

/// Records for a beeswarm summary plot, features in importance order.
pub fn summary_plot_data(m: &ShapMatrix, x: &Matrix) -> Result<Vec<SummaryRecord>> {
    if x.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: x.nrows(),
        });
    }
    x.check_cols(m.n_features())?;
    let mut out = Vec::with_capacity(x.nrows() * x.ncols());
    for imp in global_importance(m) {
        let j = imp.feature;
        let col = x.column(j);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (i, v) in col.iter().enumerate() {
            out.push(SummaryRecord {
                feature: j,
                row_index: i,
                shap_value: m.phi.get(i, j),
                normalized_value: if hi > lo { (v - lo) / (hi - lo) } else { 0.5 },
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xy: &[(f64, f64)]) -> Vec<DependencePoint> {
        xy.iter()
            .enumerate()
            .map(|(i, &(x, s))| DependencePoint {
                row_index: i,
                x_value: x,
                shap_value: s,
                color_value: None,
            })
            .collect()
    }

    #[test]
    fn exact_line_and_parabola() {
        let line = pts(&(0..8)
            .map(|i| (i as f64, 2.0 * i as f64 - 1.0))
            .collect::<Vec<_>>());
        let f = fit_functional_form(&line).unwrap();
        assert_eq!(f.degree, 1);
        assert!((f.coefficients[0] + 1.0).abs() < 1e-10 && (f.coefficients[1] - 2.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let para = pts(&(-4..=4)
            .map(|i| (i as f64, (i * i) as f64))
            .collect::<Vec<_>>());
        assert_eq!(fit_functional_form(&para).unwrap().degree, 2);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_functional_form(&pts(&[(1.0, 1.0), (2.0, 2.0), (3.0, 1.0)])).is_err());
        assert!(fit_functional_form(&pts(&[(1.0, 1.0); 5])).is_err());
    }

    #[test]
    fn crossings() {
        let lin = PolyFit {
            degree: 1,
            coefficients: vec![6.6, -1.0],
            r2: 1.0,
            adj_r2: 1.0,
            n_points: 5,
        };
        assert_eq!(zero_crossings(&lin, 3.0, 9.0), [6.6]);
        let none = PolyFit {
            degree: 2,
            coefficients: vec![1.0, 0.0, 1.0],
            ..lin.clone()
        };
        assert!(zero_crossings(&none, -10.0, 10.0).is_empty());
        let two = PolyFit {
            degree: 2,
            coefficients: vec![3.0, -4.0, 1.0],
            ..lin
        };
        assert_eq!(zero_crossings(&two, 0.0, 4.0), [1.0, 3.0]);
        assert_eq!(zero_crossings(&two, 0.0, 2.0), [1.0]);
    }

    #[test]
    fn outlier_cases() {
        let mut xy: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64, 0.0)).collect();
        let base = filter_outliers(&pts(&xy), &OutlierRule::default());
        assert_eq!(base.removed, 0);
        xy.push((1000.0, 0.0));
        let f = filter_outliers(&pts(&xy), &OutlierRule::default());
        assert_eq!(f.removed, 1);
        assert!(f.points.iter().all(|p| p.x_value < 100.0));
        let same = filter_outliers(&pts(&[(2.0, 1.0); 6]), &OutlierRule::default());
        assert_eq!(same.points.len(), 6);
        let again = filter_outliers(&f.points, &OutlierRule::default());
        assert_eq!(again.points, f.points);
    }

    #[test]
    fn guard_keeps_four_points() {
        let f = filter_outliers(
            &pts(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (50.0, 0.0)]),
            &OutlierRule::default(),
        );
        assert_eq!(f.points.len(), 5);
        assert!(f.guarded);
    }
}
