// Accuracy table against an ARIMA benchmark: MAE, RMSE, RMSE reduction
// and Diebold-Mariano tests, on a chronological 80:20 split.

use forecast_workbench::arima::{nonseasonal_candidates, select_order};
use forecast_workbench::dataset::{
    chrono_split, synth_generate, ColumnSchema, Dgp, GeneratorSpec, SplitSpec,
};
use forecast_workbench::evaluation::{metric_table, metrics_csv, SmallSample};
use forecast_workbench::model::{Family, ParamSet, ParamValue};
use forecast_workbench::Result;

pub fn run_example() -> Result<()> {
    let schema = ColumnSchema::default();
    let frame = synth_generate(
        21,
        96,
        &schema,
        &GeneratorSpec::new(Dgp::Nonlinear, &schema),
    )?;
    let (train, test) = chrono_split(&frame, SplitSpec { test_months: 19 })?;
    let (x, y) = (
        train.matrix(&schema.features)?,
        train.column(&schema.target)?,
    );
    let xt = test.matrix(&schema.features)?;
    let actual = test.column(&schema.target)?;

    let bench = select_order(y, &nonseasonal_candidates(), 0)?;
    let bench_fc = forecast_workbench::arima::forecast(&bench.fit, y, actual.len())?;

    let num = |k: &str, v: f64| ParamSet::default().with(k, ParamValue::Num(v));
    let mut candidates = Vec::new();
    for (id, family, params) in [
        ("ridge", Family::Ridge, num("lambda", 0.1)),
        ("lasso", Family::Lasso, num("lambda", 0.02)),
        ("rf", Family::RandomForest, num("n_estimators", 200.0)),
        (
            "xgb",
            Family::Xgb,
            num("n_estimators", 300.0).with("max_depth", ParamValue::Num(3.0)),
        ),
        ("svr", Family::Svr, num("c", 5.0)),
    ] {
        let m = family.fit(&params, &x, y, 0)?;
        candidates.push((id.to_string(), Some(m.predict(&xt)?)));
    }
    let (rows, _) = metric_table(
        actual,
        ("arima", &bench_fc),
        &candidates,
        1,
        SmallSample::Auto,
    )?;
    println!("benchmark order {}", bench.order);
    print!("{}", metrics_csv(&rows, None));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
