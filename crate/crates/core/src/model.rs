//! Model families, hyperparameter sets, and the fitted-model sum type.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::arima::ArimaModel;
use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::linear::{fit_linear, LinearModel, PenaltySpec};
use crate::matrix::Matrix;
use crate::predictor::Predictor;
use crate::svr::{default_gamma, fit_svr, KernelSpec, SvrModel};
use crate::tree::{
    fit_gradient_boosting, fit_random_forest, BoostParams, BoostedModel, ForestModel, ForestParams,
    TreeEnsemble,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Arima,
    Sarima,
    Ols,
    Ridge,
    Lasso,
    ElasticNet,
    RandomForest,
    #[serde(alias = "gradient_boosting")]
    Xgb,
    Svr,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Arima,
        Family::Sarima,
        Family::Ols,
        Family::Ridge,
        Family::Lasso,
        Family::ElasticNet,
        Family::RandomForest,
        Family::Xgb,
        Family::Svr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Arima => "arima",
            Family::Sarima => "sarima",
            Family::Ols => "ols",
            Family::Ridge => "ridge",
            Family::Lasso => "lasso",
            Family::ElasticNet => "elastic_net",
            Family::RandomForest => "random_forest",
            Family::Xgb => "xgb",
            Family::Svr => "svr",
        }
    }

    /// Univariate benchmark families forecast from their own history.
    pub fn is_time_series(self) -> bool {
        matches!(self, Family::Arima | Family::Sarima)
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            Family::Arima | Family::Sarima | Family::Ols => &[],
            Family::Ridge | Family::Lasso => &["lambda"],
            Family::ElasticNet => &["lambda", "alpha"],
            Family::RandomForest => &[
                "n_estimators",
                "max_depth",
                "max_features",
                "min_samples_leaf",
            ],
            Family::Xgb => &[
                "learning_rate",
                "n_estimators",
                "max_depth",
                "subsample",
                "colsample_bytree",
                "reg_lambda",
                "min_split_gain",
            ],
            Family::Svr => &["c", "epsilon", "kernel", "gamma", "degree", "coef0"],
        }
    }

    /// Default search grid. Continuous ranges are log-spaced; tree ensembles
    /// use three points per axis to keep the sweep tractable.
    pub fn default_grid(self) -> ParamGrid {
        let mut g = ParamGrid::default();
        match self {
            Family::Arima | Family::Sarima | Family::Ols => {}
            Family::Ridge | Family::Lasso => {
                g.insert("lambda", log_space(0.001, 0.9, 10));
            }
            Family::ElasticNet => {
                g.insert("lambda", log_space(0.001, 0.9, 10));
                g.insert("alpha", log_space(0.05, 0.95, 10));
            }
            Family::RandomForest => {
                g.insert("max_depth", int_log_space(2, 50, 3));
                g.insert("max_features", int_log_space(2, 20, 3));
                g.insert("n_estimators", int_log_space(10, 1000, 3));
            }
            Family::Xgb => {
                g.insert("learning_rate", log_space(0.005, 0.5, 3));
                g.insert("n_estimators", int_log_space(10, 1000, 3));
                g.insert("max_depth", nums(&[2.0, 4.0, 6.0, 8.0, 10.0]));
                g.insert("subsample", log_space(0.1, 0.9, 3));
                g.insert("colsample_bytree", log_space(0.1, 0.9, 3));
            }
            Family::Svr => {
                g.insert("c", log_space(0.1, 50.0, 10));
                g.insert("epsilon", log_space(0.0005, 1.0, 10));
                g.insert(
                    "kernel",
                    ["linear", "poly", "rbf"]
                        .iter()
                        .map(|k| ParamValue::Text(k.to_string()))
                        .collect(),
                );
            }
        }
        g
    }

    /// Fits a feature-based family on raw rows. Linear and SVR families
    /// standardize with statistics from `x`; tree families see raw values.
    pub fn fit(self, params: &ParamSet, x: &Matrix, y: &[f64], seed: u64) -> Result<TrainedModel> {
        params.check_names(self)?;
        match self {
            Family::Arima | Family::Sarima => Err(Error::Unsupported(format!(
                "{} forecasts from its own history and has no feature fit",
                self.name()
            ))),
            Family::Ols | Family::Ridge | Family::Lasso | Family::ElasticNet => {
                let penalty = match self {
                    Family::Ols => PenaltySpec::ols(),
                    Family::Ridge => PenaltySpec::ridge(params.num("lambda", 1.0)?),
                    Family::Lasso => PenaltySpec::lasso(params.num("lambda", 1.0)?),
                    _ => PenaltySpec::new(params.num("lambda", 1.0)?, params.num("alpha", 0.5)?)?,
                };
                let scaler = Standardizer::fit(x);
                let z = scaler.apply(x)?;
                Ok(TrainedModel::Linear(
                    fit_linear(&z, y, penalty)?.with_scaler(scaler),
                ))
            }
            Family::RandomForest => {
                let fp = ForestParams {
                    n_estimators: params.int("n_estimators", 100)?,
                    max_depth: params.int("max_depth", 9)?,
                    max_features: params.int("max_features", x.ncols().min(4))?,
                    min_samples_leaf: params.int("min_samples_leaf", 1)?,
                    seed,
                };
                Ok(TrainedModel::Forest(fit_random_forest(x, y, &fp)?))
            }
            Family::Xgb => {
                let d = BoostParams::default();
                let bp = BoostParams {
                    learning_rate: params.num("learning_rate", d.learning_rate)?,
                    n_estimators: params.int("n_estimators", d.n_estimators)?,
                    max_depth: params.int("max_depth", d.max_depth)?,
                    subsample: params.num("subsample", d.subsample)?,
                    colsample_bytree: params.num("colsample_bytree", d.colsample_bytree)?,
                    reg_lambda: params.num("reg_lambda", d.reg_lambda)?,
                    min_split_gain: params.num("min_split_gain", d.min_split_gain)?,
                    base_score: None,
                    seed,
                };
                Ok(TrainedModel::Boosted(fit_gradient_boosting(x, y, &bp)?))
            }
            Family::Svr => {
                let scaler = Standardizer::fit(x);
                let z = scaler.apply(x)?;
                let gamma = match params.get("gamma") {
                    Some(_) => params.num("gamma", 1.0)?,
                    None => default_gamma(&z),
                };
                let kernel = match params.text("kernel", "rbf")?.as_str() {
                    "linear" => KernelSpec::Linear,
                    "poly" | "polynomial" => KernelSpec::Polynomial {
                        degree: params.int("degree", 3)? as u32,
                        gamma,
                        coef0: params.num("coef0", 0.0)?,
                    },
                    "rbf" => KernelSpec::Rbf { gamma },
                    other => return Err(Error::invalid(format!("unknown kernel `{other}`"))),
                };
                let m = fit_svr(
                    &z,
                    y,
                    params.num("c", 1.0)?,
                    params.num("epsilon", 0.1)?,
                    kernel,
                )?;
                Ok(TrainedModel::Svr(m.with_scaler(scaler)))
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .or((s == "gradient_boosting").then_some(Family::Xgb))
            .ok_or_else(|| Error::Config(format!("unknown model family `{s}`")))
    }
}

/// `k` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, k: usize) -> Vec<ParamValue> {
    if k == 1 {
        return vec![ParamValue::Num(lo)];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| {
            let v = if i == 0 {
                lo
            } else if i == k - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (k - 1) as f64).exp()
            };
            ParamValue::Num(v)
        })
        .collect()
}

/// Log-spaced integers, rounded and deduplicated.
pub fn int_log_space(lo: usize, hi: usize, k: usize) -> Vec<ParamValue> {
    let mut out: Vec<f64> = Vec::new();
    for v in log_space(lo as f64, hi as f64, k) {
        if let ParamValue::Num(x) = v {
            let r = x.round();
            if !out.contains(&r) {
                out.push(r);
            }
        }
    }
    nums(&out)
}

fn nums(v: &[f64]) -> Vec<ParamValue> {
    v.iter().map(|x| ParamValue::Num(*x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// One grid cell: parameter name → value, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet(pub IndexMap<String, ParamValue>);

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn with(mut self, name: &str, v: ParamValue) -> Self {
        self.0.insert(name.to_string(), v);
        self
    }

    fn check_names(&self, family: Family) -> Result<()> {
        let allowed = family.allowed_params();
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!(
                "parameter `{k}` is not valid for family {family}"
            ))),
            None => Ok(()),
        }
    }

    fn num(&self, name: &str, default: f64) -> Result<f64> {
        match self.0.get(name) {
            None => Ok(default),
            Some(ParamValue::Num(v)) => Ok(*v),
            Some(ParamValue::Text(s)) => Err(Error::invalid(format!(
                "parameter `{name}` expects a number, got `{s}`"
            ))),
        }
    }

    fn int(&self, name: &str, default: usize) -> Result<usize> {
        let v = self.num(name, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            return Err(Error::invalid(format!(
                "parameter `{name}` expects a non-negative integer, got {v}"
            )));
        }
        Ok(v as usize)
    }

    fn text(&self, name: &str, default: &str) -> Result<String> {
        match self.0.get(name) {
            None => Ok(default.to_string()),
            Some(ParamValue::Text(s)) => Ok(s.clone()),
            Some(ParamValue::Num(v)) => Err(Error::invalid(format!(
                "parameter `{name}` expects text, got {v}"
            ))),
        }
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Ordered map of parameter name → candidate values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid(pub IndexMap<String, Vec<ParamValue>>);

impl ParamGrid {
    pub fn insert(&mut self, name: &str, values: Vec<ParamValue>) {
        self.0.insert(name.to_string(), values);
    }

    pub fn names(&self) -> Vec<String> {
        self.0.keys().cloned().collect()
    }

    /// Cartesian product with the first parameter varying slowest.
    /// An empty grid has exactly one (empty) cell.
    pub fn cells(&self) -> Result<Vec<ParamSet>> {
        let mut cells = vec![ParamSet::default()];
        for (name, values) in &self.0 {
            if values.is_empty() {
                return Err(Error::Config(format!(
                    "grid parameter `{name}` has no values"
                )));
            }
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    values
                        .iter()
                        .map(move |v| c.clone().with(name, v.clone()))
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        Ok(cells)
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Linear(LinearModel),
    Forest(ForestModel),
    Boosted(BoostedModel),
    Svr(SvrModel),
    Arima(ArimaModel),
}

impl TrainedModel {
    /// Row predictor for feature-based models; `None` for ARIMA.
    pub fn predictor(&self) -> Option<&dyn Predictor> {
        match self {
            TrainedModel::Linear(m) => Some(m),
            TrainedModel::Forest(m) => Some(m),
            TrainedModel::Boosted(m) => Some(m),
            TrainedModel::Svr(m) => Some(m),
            TrainedModel::Arima(_) => None,
        }
    }

    pub fn tree_ensemble(&self) -> Option<&TreeEnsemble> {
        match self {
            TrainedModel::Forest(m) => Some(&m.ensemble),
            TrainedModel::Boosted(m) => Some(&m.ensemble),
            _ => None,
        }
    }

    /// Exact affine form `(intercept, slopes)` on the raw feature scale,
    /// for linear models and linear-kernel SVR.
    pub fn raw_linear_form(&self) -> Option<(f64, Vec<f64>)> {
        match self {
            TrainedModel::Linear(m) => Some(m.raw_coefficients()),
            TrainedModel::Svr(m) => m.raw_linear_form(),
            _ => None,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self.predictor() {
            Some(p) => p.predict(x),
            None => Err(Error::Unsupported(
                "ARIMA models forecast by horizon, not by feature row".into(),
            )),
        }
    }
}
