mod common;

use common::*;
use forecast_workbench::arima::{fit_css_seeded, forecast, select_order, ArimaOrder};

#[test]
fn ar1_coefficient_recovered() {
    let mut errs = Vec::new();
    for seed in 0..20 {
        let y = simulate_arma(&mut rng(seed), 400, 0.5, 0.8, 0.0);
        let fit = fit_css_seeded(&y, &ArimaOrder::new(1, 0, 0), seed).unwrap();
        // conditional sum of squares for AR(1) is least squares of y_t on y_{t−1}
        let (prev, next) = (&y[..y.len() - 1], &y[1..]);
        let (mp, mn) = (mean(prev), mean(next));
        let ols = prev
            .iter()
            .zip(next)
            .map(|(a, b)| (a - mp) * (b - mn))
            .sum::<f64>()
            / prev.iter().map(|a| (a - mp).powi(2)).sum::<f64>();
        assert!((fit.ar[0] - ols).abs() < 1e-6);
        let e = (fit.ar[0] - 0.8).abs();
        assert!(e <= 0.1, "seed {seed}: φ̂ = {}", fit.ar[0]);
        errs.push(e);
    }
    assert!(mean(&errs) <= 0.05);
}

#[test]
fn white_noise_gives_small_ar_coefficient() {
    for seed in 0..20 {
        let y = normals(&mut rng(200 + seed), 400);
        let fit = fit_css_seeded(&y, &ArimaOrder::new(1, 0, 0), seed).unwrap();
        assert!(fit.ar[0].abs() <= 0.15, "seed {seed}: φ̂ = {}", fit.ar[0]);
    }
}

#[test]
fn ma1_coefficient_recovered() {
    for seed in 0..20 {
        let y = simulate_arma(&mut rng(300 + seed), 400, 0.0, 0.0, 0.5);
        let fit = fit_css_seeded(&y, &ArimaOrder::new(0, 0, 1), seed).unwrap();
        assert!(
            (fit.ma[0] - 0.5).abs() <= 0.15,
            "seed {seed}: θ̂ = {}",
            fit.ma[0]
        );
        assert!(fit.invertible);
    }
}

#[test]
fn ar1_forecast_follows_closed_form() {
    let y = simulate_arma(&mut rng(7), 300, 1.0, 0.6, 0.0);
    let fit = fit_css_seeded(&y, &ArimaOrder::new(1, 0, 0), 7).unwrap();
    let (c, phi) = (fit.intercept, fit.ar[0]);
    let last = *y.last().unwrap();
    let fc = forecast(&fit, &y, 24).unwrap();
    for (h, v) in fc.iter().enumerate() {
        let h = h as i32 + 1;
        let oracle = c * (1.0 - phi.powi(h)) / (1.0 - phi) + phi.powi(h) * last;
        assert!((v - oracle).abs() < 1e-6);
    }
    // forecasts decay monotonically toward the process mean
    let mu = c / (1.0 - phi);
    let gaps: Vec<f64> = fc.iter().map(|v| (v - mu).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn optimum_beats_every_start() {
    let y = simulate_arma(&mut rng(8), 200, 0.2, 0.5, 0.3);
    for order in [
        ArimaOrder::new(1, 0, 1),
        ArimaOrder::new(2, 0, 1),
        ArimaOrder::new(1, 1, 1),
    ] {
        let fit = fit_css_seeded(&y, &order, 3).unwrap();
        assert!(!fit.start_css.is_empty());
        assert!(fit.start_css.iter().all(|s| fit.css <= *s + 1e-12));
    }
}

#[test]
fn aic_selects_true_ar1_order() {
    let candidates = [
        ArimaOrder::new(0, 0, 0),
        ArimaOrder::new(1, 0, 0),
        ArimaOrder::new(2, 0, 0),
    ];
    let hits = (0..20)
        .filter(|&seed| {
            let y = simulate_arma(&mut rng(400 + seed), 200, 0.0, 0.7, 0.0);
            select_order(&y, &candidates, seed).unwrap().order == candidates[1]
        })
        .count();
    assert!(hits >= 16, "selected (1,0,0) in {hits}/20 seeds");
}
