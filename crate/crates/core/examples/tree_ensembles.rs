// Random forest and gradient boosting on a nonlinear target, with the
// ensembles serialized to JSON and read back.

use forecast_workbench::dataset::{
    chrono_split, synth_generate, ColumnSchema, Dgp, GeneratorSpec, SplitSpec,
};
use forecast_workbench::evaluation::rmse;
use forecast_workbench::tree::{
    fit_gradient_boosting, fit_random_forest, BoostParams, ForestParams, TreeEnsemble,
};
use forecast_workbench::{Predictor, Result};

pub fn run_example() -> Result<()> {
    let schema = ColumnSchema::default();
    let frame = synth_generate(
        3,
        120,
        &schema,
        &GeneratorSpec::new(Dgp::Nonlinear, &schema),
    )?;
    let (train, test) = chrono_split(&frame, SplitSpec { test_months: 24 })?;
    let (x, y) = (
        train.matrix(&schema.features)?,
        train.column(&schema.target)?,
    );
    let (xt, yt) = (test.matrix(&schema.features)?, test.column(&schema.target)?);

    let forest = fit_random_forest(
        &x,
        y,
        &ForestParams {
            n_estimators: 200,
            max_depth: 8,
            max_features: 6,
            ..Default::default()
        },
    )?;
    println!("forest   test rmse {:.4}", rmse(yt, &forest.predict(&xt)?)?);

    for (lr, rounds) in [(0.3, 50), (0.1, 200), (0.03, 600)] {
        let params = BoostParams {
            learning_rate: lr,
            n_estimators: rounds,
            max_depth: 3,
            subsample: 0.8,
            ..Default::default()
        };
        let boosted = fit_gradient_boosting(&x, y, &params)?;
        let loss = &boosted.training_loss;
        println!(
            "boosting lr={lr:<5} rounds={rounds:<4} train mse {:.4} -> {:.4}, test rmse {:.4}",
            loss[0],
            loss[loss.len() - 1],
            rmse(yt, &boosted.predict(&xt)?)?
        );
    }

    let json = forest.ensemble.to_json()?;
    let back = TreeEnsemble::from_json(&json)?;
    assert_eq!(back.predict(&xt)?, forest.predict(&xt)?);
    println!(
        "forest JSON: {} bytes, {} trees, round trip exact",
        json.len(),
        back.trees.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
