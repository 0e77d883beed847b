// Dependence data, IQR outlier filtering and polynomial functional forms
// for the drivers of a fitted random forest.

use forecast_workbench::dataset::{synth_generate, ColumnSchema, Dgp, GeneratorSpec};
use forecast_workbench::interpretation::{dependence_data, functional_form, ColorBy, OutlierRule};
use forecast_workbench::model::{Family, ParamSet, ParamValue};
use forecast_workbench::shapley::{explain_model, BackgroundSet};
use forecast_workbench::Result;

pub fn run_example() -> Result<()> {
    let schema = ColumnSchema::default();
    let spec = GeneratorSpec::new(Dgp::Nonlinear, &schema);
    let frame = synth_generate(4, 120, &schema, &spec)?;
    let (x, y) = (
        frame.matrix(&schema.features)?,
        frame.column(&schema.target)?,
    );
    let params = ParamSet::default()
        .with("n_estimators", ParamValue::Num(150.0))
        .with("max_features", ParamValue::Num(8.0));
    let model = Family::RandomForest.fit(&params, &x, y, 0)?;
    let shap = explain_model(&model, &x, &BackgroundSet::sample(&x, 60, 0)?)?;

    for feature in &spec.drivers {
        let (points, color) =
            dependence_data(&shap, &x, &schema.features, feature, &ColorBy::Auto)?;
        let form = functional_form(feature, &points, &OutlierRule::default())?;
        println!(
            "{feature:<5} degree {} coefficients {:?} adj R² {:.3}, {} outliers removed, crossings {:?}, colored by {}",
            form.degree,
            form.coefficients.iter().map(|c| format!("{c:+.3}")).collect::<Vec<_>>(),
            form.adj_r2,
            form.outliers_removed,
            form.crossings.iter().map(|c| format!("{c:.2}")).collect::<Vec<_>>(),
            color.unwrap_or_default()
        );
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
