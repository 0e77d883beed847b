// Shapley attributions for a boosted model: global importance, one local
// breakdown, and a check that the tree algorithm agrees with brute force.

use forecast_workbench::dataset::{synth_generate, ColumnSchema, Dgp, GeneratorSpec};
use forecast_workbench::model::{Family, ParamSet, ParamValue};
use forecast_workbench::shapley::{exact_shapley, explain_model, global_importance, BackgroundSet};
use forecast_workbench::Result;

pub fn run_example() -> Result<()> {
    let schema = ColumnSchema::default();
    let spec = GeneratorSpec::new(Dgp::Nonlinear, &schema);
    let frame = synth_generate(2, 96, &schema, &spec)?;
    let (x, y) = (
        frame.matrix(&schema.features)?,
        frame.column(&schema.target)?,
    );
    let params = ParamSet::default()
        .with("n_estimators", ParamValue::Num(200.0))
        .with("max_depth", ParamValue::Num(3.0));
    let model = Family::Xgb.fit(&params, &x, y, 0)?;

    let background = BackgroundSet::sample(&x, 50, 9)?;
    let shap = explain_model(&model, &x, &background)?;
    println!(
        "true drivers {:?}; base value {:.4}",
        spec.drivers, shap.base_value
    );
    for (rank, f) in global_importance(&shap).iter().take(5).enumerate() {
        println!(
            "  {}. {:<6} mean|φ| {:.4}",
            rank + 1,
            schema.features[f.feature],
            f.mean_abs_shap
        );
    }

    let row = 40;
    let mut local: Vec<(usize, f64)> = shap.phi.row(row).iter().copied().enumerate().collect();
    local.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!(
        "row {row}: prediction {:.4} = base {:.4} + Σφ",
        shap.predictions[row], shap.base_value
    );
    for (j, v) in local.iter().take(4) {
        println!("  {:<6} {v:+.4}", schema.features[*j]);
    }
    println!("largest efficiency gap {:.1e}", shap.max_efficiency_gap());

    // brute force over all 2^12 coalitions agrees with the tree algorithm
    let names: Vec<String> = schema.features[..12].to_vec();
    let x12 = frame.matrix(&names)?;
    let model12 = Family::Xgb.fit(&params, &x12, y, 0)?;
    let small = BackgroundSet::sample(&x12, 6, 1)?;
    let tree = explain_model(&model12, &x12.select_rows(&[row]), &small)?;
    let brute = exact_shapley(
        model12.predictor().expect("tree model predicts"),
        x12.row(row),
        &small,
    )?;
    let gap = tree
        .phi
        .row(0)
        .iter()
        .zip(&brute)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("tree algorithm vs enumeration on 12 features: max gap {gap:.1e}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
