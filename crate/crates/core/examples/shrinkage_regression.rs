// OLS, ridge, lasso and elastic net on a sparse linear problem, tracing how
// the lasso path empties out as the penalty grows.

use forecast_workbench::dataset::{synth_generate, ColumnSchema, Dgp, GeneratorSpec, Standardizer};
use forecast_workbench::linear::{fit_linear, lambda_max, PenaltySpec};
use forecast_workbench::Result;

pub fn run_example() -> Result<()> {
    let schema = ColumnSchema::default();
    let spec = GeneratorSpec::new(Dgp::Linear, &schema);
    let frame = synth_generate(7, 120, &schema, &spec)?;
    let x = Standardizer::fit(&frame.matrix(&schema.features)?)
        .apply(&frame.matrix(&schema.features)?)?;
    let y = frame.column(&schema.target)?;
    println!(
        "true drivers {:?} with coefficients {:?}",
        spec.drivers, spec.coefficients
    );

    for (name, penalty) in [
        ("ols", PenaltySpec::ols()),
        ("ridge", PenaltySpec::ridge(0.1)),
        ("lasso", PenaltySpec::lasso(0.05)),
        ("elastic net", PenaltySpec::new(0.05, 0.5)?),
    ] {
        let m = fit_linear(&x, y, penalty)?;
        let nonzero = m.coefficients.iter().filter(|c| **c != 0.0).count();
        let top: Vec<String> = ranked(&m.coefficients, &schema.features)
            .into_iter()
            .take(3)
            .collect();
        println!(
            "{name:>12}: {nonzero:>2} non-zero, largest {top:?}, {} sweeps",
            m.report.sweeps
        );
    }

    let lmax = lambda_max(&x, y);
    println!("\nlasso path (λ_max = {lmax:.4})");
    for frac in [1.0, 0.5, 0.2, 0.05, 0.01] {
        let m = fit_linear(&x, y, PenaltySpec::lasso(lmax * frac))?;
        let active: Vec<&str> = schema
            .features
            .iter()
            .zip(&m.coefficients)
            .filter(|(_, c)| **c != 0.0)
            .map(|(f, _)| f.as_str())
            .collect();
        println!("  λ = {:>8.5}: {active:?}", lmax * frac);
    }
    Ok(())
}

fn ranked(coef: &[f64], names: &[String]) -> Vec<String> {
    let mut idx: Vec<usize> = (0..coef.len()).collect();
    idx.sort_by(|a, b| coef[*b].abs().total_cmp(&coef[*a].abs()));
    idx.into_iter()
        .map(|j| format!("{}={:+.3}", names[j], coef[j]))
        .collect()
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
