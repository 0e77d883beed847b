// ε-SVR with linear, polynomial and RBF kernels on a smooth 1-d curve.

use forecast_workbench::svr::{fit_svr, KernelSpec};
use forecast_workbench::{Matrix, Predictor, Result};

pub fn run_example() -> Result<()> {
    let xs: Vec<f64> = (0..80).map(|i| -3.0 + 6.0 * i as f64 / 79.0).collect();
    let y: Vec<f64> = xs.iter().map(|v| v.sin() + 0.3 * v).collect();
    let x = Matrix::from_columns(std::slice::from_ref(&xs))?;

    for (name, kernel) in [
        ("linear", KernelSpec::Linear),
        (
            "cubic",
            KernelSpec::Polynomial {
                degree: 3,
                gamma: 0.5,
                coef0: 1.0,
            },
        ),
        ("rbf", KernelSpec::Rbf { gamma: 0.5 }),
    ] {
        for epsilon in [0.01, 0.1, 0.3] {
            let m = fit_svr(&x, &y, 10.0, epsilon, kernel)?;
            let fit = m.predict(&x)?;
            let worst = fit
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            println!(
                "{name:<6} ε={epsilon:<4} support vectors {:>2}/80, max |residual| {worst:.3}, converged {}",
                m.n_support(),
                m.converged
            );
        }
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
