// The whole workflow from a TOML configuration: tuning and scoring every
// roster model, a split sweep, and an explanation of the boosted model.
// Pass an output directory as the first argument to keep the files.

use std::path::PathBuf;

use forecast_workbench::pipeline::{cmd_explain, cmd_run, cmd_split_sweep, RunConfig};
use forecast_workbench::Result;

const CONFIG: &str = r#"
seed = 42
split_months = [24, 16, 12, 9, 6]
primary_split = 16

[data.synth]
n = 96
dgp = "nonlinear"

[arima]
orders = [{p=1,d=0,q=0}, {p=2,d=0,q=0}, {p=1,d=0,q=1}, {p=0,d=1,q=1}]

[[models]]
id = "arima"
family = "arima"

[[models]]
id = "lasso"
family = "lasso"

[[models]]
id = "xgb"
family = "xgb"
[models.grid]
learning_rate = [0.05, 0.2]
n_estimators = [150]
max_depth = [2, 4]

[explain]
features = ["ATMD", "CC", "IR"]
"#;

pub fn run_example() -> Result<()> {
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    let scratch;
    cfg.output_dir = match std::env::args().nth(1) {
        Some(dir) => PathBuf::from(dir),
        None => {
            scratch =
                std::env::temp_dir().join(format!("workbench-example-{}", std::process::id()));
            scratch.clone()
        }
    };
    println!("{}", cfg.header());
    for report in [
        cmd_run(&cfg)?,
        cmd_split_sweep(&cfg)?,
        cmd_explain(&cfg, "xgb")?,
    ] {
        for w in &report.warnings {
            println!("warning: {w}");
        }
    }
    for name in ["metrics.csv", "split_sweep.csv", "importance.csv"] {
        let text = std::fs::read_to_string(cfg.output_dir.join(name))?;
        println!("\n== {name}");
        for line in text.lines().skip(1).take(8) {
            println!("{line}");
        }
    }
    if std::env::args().nth(1).is_none() {
        std::fs::remove_dir_all(&cfg.output_dir)?;
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
