// AIC order selection over the default candidate set and multi-step
// forecasts from the chosen ARIMA model. Conditional sum of squares does
// not enforce stationarity or invertibility; the fit only reports them.

use forecast_workbench::arima::{
    default_candidates, forecast, nonseasonal_candidates, select_order,
};
use forecast_workbench::seeds;
use forecast_workbench::Result;
use rand_distr::{Distribution, StandardNormal};

pub fn run_example() -> Result<()> {
    // ARMA(1,1) around a level of 4
    let mut rng = seeds::rng(11);
    let (mut y, mut prev, mut prev_e) = (Vec::new(), 4.0, 0.0);
    for _ in 0..150 {
        let e: f64 = StandardNormal.sample(&mut rng);
        let v = 4.0 + 0.7 * (prev - 4.0) + e + 0.4 * prev_e;
        y.push(v);
        prev = v;
        prev_e = e;
    }

    for (label, candidates) in [
        ("non-seasonal", nonseasonal_candidates()),
        ("full", default_candidates()),
    ] {
        let sel = select_order(&y, &candidates, 0)?;
        let mut ranked: Vec<_> = sel
            .candidates
            .iter()
            .filter(|c| c.converged)
            .filter_map(|c| c.aic.map(|a| (a, c.order)))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        println!(
            "{label} grid: {} candidates, {} converged; best three by AIC:",
            sel.candidates.len(),
            ranked.len()
        );
        for (aic, order) in ranked.iter().take(3) {
            println!("  {order:<22} aic {aic:.2}");
        }
        let f = &sel.fit;
        println!(
            "  selected {}: c={:.3} ar={:.3?} ma={:.3?} σ²={:.3}, stationary {}, invertible {}",
            sel.order, f.intercept, f.ar, f.ma, f.sigma2, f.stationary, f.invertible
        );
        let fc = forecast(f, &y, 6)?;
        println!("  6-step forecast {:.2?}", fc);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
