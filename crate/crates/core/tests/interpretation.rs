mod common;

use common::*;
use forecast_workbench::dataset::{synth_generate, ColumnSchema, Dgp, GeneratorSpec};
use forecast_workbench::interpretation::{
    dependence_data, filter_outliers, fit_functional_form, fit_polynomial, functional_form,
    summary_plot_data, zero_crossings, ColorBy, DependencePoint, OutlierRule, TrimAxis,
};
use forecast_workbench::model::{Family, ParamSet, ParamValue};
use forecast_workbench::predictor::FnPredictor;
use forecast_workbench::shapley::{
    explain_matrix, explain_model, global_importance, BackgroundSet, Engine,
};
use forecast_workbench::Matrix;

fn points(xs: &[f64], ys: &[f64]) -> Vec<DependencePoint> {
    xs.iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (x, s))| DependencePoint {
            row_index: i,
            x_value: *x,
            shap_value: *s,
            color_value: None,
        })
        .collect()
}

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

#[test]
fn auto_coloring_finds_interaction_partner() {
    let mut r = rng(3);
    let x = normal_matrix(&mut r, 60, 3);
    let f = FnPredictor::new(3, |v: &[f64]| v[0] * v[1] + 0.3 * v[2]);
    let bg = BackgroundSet::new(x.clone()).unwrap();
    let shap = explain_matrix(&Engine::Exact(&f), &x, &bg).unwrap();
    let (pts, color) = dependence_data(&shap, &x, &names(3), "x1", &ColorBy::Auto).unwrap();
    assert_eq!(color.as_deref(), Some("x2"));
    assert_eq!(pts.len(), 60);
    assert!(pts
        .iter()
        .enumerate()
        .all(|(i, p)| p.row_index == i && p.color_value == Some(x.get(i, 1))));

    let (plain, none) = dependence_data(&shap, &x, &names(3), "x1", &ColorBy::None).unwrap();
    assert!(none.is_none() && plain.iter().all(|p| p.color_value.is_none()));
    assert!(dependence_data(&shap, &x, &names(3), "x9", &ColorBy::None).is_err());
}

/// Adding x² raises adjusted R² exactly when its partial F statistic
/// exceeds 1, so on a true line degree 1 is kept with probability
/// `P(F(1, n−3) ≤ 1)` whatever the noise scale.
#[test]
fn noisy_line_selection_rate_matches_f_distribution() {
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};
    let n = 60;
    let reps = 400;
    let kept = (0..reps)
        .filter(|&seed| {
            let mut r = rng(50 + seed);
            let xs = uniforms(&mut r, n, 0.0, 10.0);
            let noise = normals(&mut r, n);
            let ys: Vec<f64> = xs
                .iter()
                .zip(&noise)
                .map(|(x, e)| 2.0 * x - 1.0 + 0.1 * e)
                .collect();
            fit_functional_form(&points(&xs, &ys)).unwrap().degree == 1
        })
        .count();
    let expected = FisherSnedecor::new(1.0, (n - 3) as f64).unwrap().cdf(1.0);
    let rate = kept as f64 / reps as f64;
    assert!(
        (rate - expected).abs() <= 0.07,
        "kept degree 1 at rate {rate}, expected {expected}"
    );
}

#[test]
fn nested_fits_and_crossing_residuals() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let xs = uniforms(&mut r, 30, -3.0, 5.0);
        let ys: Vec<f64> = normals(&mut r, 30)
            .iter()
            .zip(&xs)
            .map(|(e, x)| x * x - 2.0 * x - 1.0 + e)
            .collect();
        let l = fit_polynomial(&xs, &ys, 1).unwrap();
        let q = fit_polynomial(&xs, &ys, 2).unwrap();
        assert!(q.r2 >= l.r2 - 1e-12);
        for fit in [&l, &q] {
            let bound = 1e-8 * (1.0 + fit.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs())));
            for c in zero_crossings(fit, -3.0, 5.0) {
                assert!(fit.eval(c).abs() <= bound);
            }
        }
    }
}

#[test]
fn filtering_is_idempotent_on_assorted_sets() {
    let mut sets: Vec<Vec<DependencePoint>> = Vec::new();
    for seed in 0..30 {
        let mut r = rng(seed);
        let n = 4 + (seed as usize % 40);
        let mut xs = normals(&mut r, n);
        if seed % 3 == 0 {
            xs[0] *= 100.0;
        }
        if seed % 5 == 0 {
            xs.iter_mut().for_each(|v| *v = v.exp().powi(3));
        }
        let ys = normals(&mut r, n);
        sets.push(points(&xs, &ys));
    }
    for axis in [TrimAxis::Feature, TrimAxis::Shap, TrimAxis::Both] {
        for k in [0.5, 1.5, 3.0] {
            let rule = OutlierRule { k, axis };
            for s in &sets {
                let once = filter_outliers(s, &rule);
                let twice = filter_outliers(&once.points, &rule);
                assert_eq!(once.points, twice.points);
                assert!(once.points.len() >= 4 || once.points.len() == s.len());
            }
        }
    }
}

#[test]
fn summary_records_follow_importance() {
    let mut r = rng(11);
    let mut x = normal_matrix(&mut r, 25, 3);
    for i in 0..25 {
        x.set(i, 2, 4.0);
    }
    let f = FnPredictor::new(3, |v: &[f64]| 0.2 * v[0] + 3.0 * v[1] + v[2]);
    let bg = BackgroundSet::new(x.clone()).unwrap();
    let shap = explain_matrix(&Engine::Exact(&f), &x, &bg).unwrap();
    let recs = summary_plot_data(&shap, &x).unwrap();
    assert_eq!(recs.len(), 75);
    let order: Vec<usize> = recs.chunks(25).map(|c| c[0].feature).collect();
    let ranked: Vec<usize> = global_importance(&shap).iter().map(|f| f.feature).collect();
    assert_eq!(order, ranked);
    assert!(recs
        .iter()
        .filter(|r| r.feature == 2)
        .all(|r| r.normalized_value == 0.5));
    assert!(recs
        .iter()
        .all(|r| (0.0..=1.0).contains(&r.normalized_value)));
}

#[test]
fn boosted_model_recovers_quadratic_shape() {
    let schema = ColumnSchema::default();
    let mut spec = GeneratorSpec::new(Dgp::Quadratic, &schema);
    spec.noise_sd = 0.05;
    let frame = synth_generate(17, 240, &schema, &spec).unwrap();
    let x = frame.matrix(&schema.features).unwrap();
    let y = frame.column(&schema.target).unwrap();
    let params = ParamSet::default()
        .with("n_estimators", ParamValue::Num(300.0))
        .with("max_depth", ParamValue::Num(2.0))
        .with("learning_rate", ParamValue::Num(0.1));
    let model = Family::Xgb.fit(&params, &x, y, 17).unwrap();
    let bg = BackgroundSet::sample(&x, 100, 1).unwrap();
    let shap = explain_model(&model, &x, &bg).unwrap();
    let (pts, _) = dependence_data(&shap, &x, &schema.features, "ATMD", &ColorBy::None).unwrap();
    let form = functional_form("ATMD", &pts, &OutlierRule::default()).unwrap();
    assert_eq!(form.degree, 2);
    // φ(a) = a² − 0.5a − K with K the background mean of the same expression
    let k = bg
        .rows()
        .column(2)
        .iter()
        .map(|b| b * b - 0.5 * b)
        .sum::<f64>()
        / bg.len() as f64;
    let disc = (0.25 + 4.0 * k).sqrt();
    let roots = [(0.5 - disc) / 2.0, (0.5 + disc) / 2.0];
    for c in &form.crossings {
        assert!(
            roots.iter().any(|r| (r - c).abs() <= 0.2),
            "{c} vs {roots:?}"
        );
    }
    assert_eq!(global_importance(&shap)[0].feature, 2);
}

#[test]
fn guard_returns_input_when_too_few_survive() {
    let pts = points(&[0.0, 0.0, 0.0, 1.0, 50.0], &[0.0; 5]);
    let f = filter_outliers(&pts, &OutlierRule::default());
    assert!(f.guarded);
    assert_eq!(f.points, pts);
    let m = Matrix::from_columns(&[vec![1.0; 4]]).unwrap();
    assert_eq!(m.nrows(), 4);
}
