// K-fold grid search for an elastic net, printing the full tuning table.

use forecast_workbench::dataset::{synth_generate, ColumnSchema, Dgp, GeneratorSpec};
use forecast_workbench::model::{log_space, Family, ParamGrid, ParamValue};
use forecast_workbench::tuning::{grid_search, kfold_indices, CvPlan};
use forecast_workbench::Result;

pub fn run_example() -> Result<()> {
    let schema = ColumnSchema::default();
    let frame = synth_generate(5, 96, &schema, &GeneratorSpec::new(Dgp::Linear, &schema))?;
    let (x, y) = (
        frame.matrix(&schema.features)?,
        frame.column(&schema.target)?,
    );

    let plan = CvPlan::default();
    let folds = kfold_indices(y.len(), &plan)?;
    println!(
        "{} folds of sizes {:?}",
        folds.len(),
        folds.iter().map(Vec::len).collect::<Vec<_>>()
    );

    let mut grid = ParamGrid::default();
    grid.insert("lambda", log_space(0.001, 0.9, 5));
    grid.insert("alpha", vec![ParamValue::Num(0.2), ParamValue::Num(0.8)]);
    let search = grid_search(Family::ElasticNet, &grid, &x, y, &plan, 1)?;
    print!("{}", search.to_csv("elastic net tuning"));
    let best = search.best_row();
    println!(
        "best: {} (mean mse {:.5} ± {:.5})",
        best.params, best.mean_mse, best.sd_mse
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
