//! Config-driven orchestration: run, split sweep, explain, and synth.
//!
//! Every file a command writes starts with `# config_hash=<hex>, seed=<n>`
//! (JSON files carry the same two values as fields instead).

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arima::{
    nonseasonal_candidates, seasonal_candidates, select_order, ArimaModel, ArimaOrder,
    CandidateOutcome,
};
use crate::dataset::{
    chrono_split, load_frame, log_transform, synth_generate, ColumnSchema, Dgp, GeneratorSpec,
    SeriesFrame, SplitSpec, YearMonth,
};
use crate::error::{Error, Result};
use crate::evaluation::{mae, metric_table, metrics_csv, rmse, DmAudit, MetricRow, SmallSample};
use crate::interpretation::{
    dependence_csv, dependence_data, functional_form, summary_plot_data, ColorBy, OutlierRule,
};
use crate::model::{Family, ParamGrid, ParamSet, TrainedModel};
use crate::seeds;
use crate::shapley::{explain_model, global_importance, shap_csv, BackgroundSet, ShapMatrix};
use crate::tuning::{grid_search, CvPlan, GridSearch};

/// Where the data comes from: a CSV file or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    /// CSV path, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub dgp: Dgp,
    /// Overrides the default driver choice.
    pub drivers: Option<Vec<String>>,
    pub noise_sd: Option<f64>,
    pub noise_ar: Option<f64>,
    pub feature_ar: Option<f64>,
    pub start: Option<YearMonth>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 96,
            dgp: Dgp::Nonlinear,
            drivers: None,
            noise_sd: None,
            noise_ar: None,
            feature_ar: None,
            start: None,
        }
    }
}

impl SynthConfig {
    pub fn generator(&self, schema: &ColumnSchema) -> GeneratorSpec {
        let mut g = GeneratorSpec::new(self.dgp, schema);
        if let Some(d) = &self.drivers {
            g.coefficients = [1.5, -0.8, 0.6]
                .iter()
                .cycle()
                .take(d.len())
                .copied()
                .collect();
            g.drivers = d.clone();
        }
        g.noise_sd = self.noise_sd.unwrap_or(g.noise_sd);
        g.noise_ar = self.noise_ar.unwrap_or(g.noise_ar);
        g.feature_ar = self.feature_ar.unwrap_or(g.feature_ar);
        g.start = self.start.unwrap_or(g.start);
        g
    }
}

/// One roster entry. Without a grid the family's default grid is searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<ParamGrid>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        ModelSpec {
            id: family.name().to_string(),
            family,
            grid: None,
        }
    }

    pub fn with_grid(mut self, grid: ParamGrid) -> Self {
        self.grid = Some(grid);
        self
    }

    fn grid(&self) -> ParamGrid {
        self.grid
            .clone()
            .unwrap_or_else(|| self.family.default_grid())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmConfig {
    pub horizon: usize,
    pub small_sample: SmallSample,
}

impl Default for DmConfig {
    fn default() -> Self {
        DmConfig {
            horizon: 1,
            small_sample: SmallSample::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArimaConfig {
    /// Season length for the `sarima` family's candidates.
    pub season: usize,
    /// Explicit candidates for the `arima` family.
    pub orders: Option<Vec<ArimaOrder>>,
    /// Explicit candidates for the `sarima` family.
    pub seasonal_orders: Option<Vec<ArimaOrder>>,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        ArimaConfig {
            season: 12,
            orders: None,
            seasonal_orders: None,
        }
    }
}

impl ArimaConfig {
    fn candidates(&self, family: Family) -> Vec<ArimaOrder> {
        match family {
            Family::Sarima => self
                .seasonal_orders
                .clone()
                .unwrap_or_else(|| seasonal_candidates(self.season)),
            _ => self.orders.clone().unwrap_or_else(nonseasonal_candidates),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainRows {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub rows: ExplainRows,
    pub background_cap: usize,
    pub color_by: ColorBy,
    /// Features that get dependence files and functional forms; empty means all.
    pub features: Vec<String>,
    pub outliers: OutlierRule,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            rows: ExplainRows::Train,
            background_cap: 100,
            color_by: ColorBy::Auto,
            features: Vec::new(),
            outliers: OutlierRule::default(),
        }
    }
}

fn default_roster() -> Vec<ModelSpec> {
    Family::ALL.iter().map(|f| ModelSpec::new(*f)).collect()
}

/// Complete description of a run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSource,
    pub schema: ColumnSchema,
    pub split_months: Vec<usize>,
    /// Test window used by `run` and `explain`.
    pub primary_split: usize,
    pub models: Vec<ModelSpec>,
    pub cv: CvPlan,
    pub dm: DmConfig,
    pub arima: ArimaConfig,
    pub explain: ExplainConfig,
    /// Not part of the config hash.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data: DataSource {
                path: None,
                synth: Some(SynthConfig::default()),
            },
            schema: ColumnSchema::default(),
            split_months: vec![24, 16, 12, 9, 6],
            primary_split: 16,
            models: default_roster(),
            cv: CvPlan::default(),
            dm: DmConfig::default(),
            arima: ArimaConfig::default(),
            explain: ExplainConfig::default(),
            output_dir: PathBuf::from("out"),
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.schema.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        match (&self.data.path, &self.data.synth) {
            (Some(_), Some(_)) => {
                return fail("data: give either `path` or `synth`, not both".into())
            }
            (None, None) => return fail("data: one of `path` or `synth` is required".into()),
            _ => {}
        }
        if self.models.is_empty() {
            return fail("model roster is empty".into());
        }
        if !self.models.iter().any(|m| m.family.is_time_series()) {
            return fail("roster needs an arima or sarima benchmark".into());
        }
        for (i, m) in self.models.iter().enumerate() {
            let safe = !m.id.is_empty()
                && m.id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !safe {
                return fail(format!(
                    "model id `{}` must be non-empty [A-Za-z0-9_-]",
                    m.id
                ));
            }
            if self.models[..i].iter().any(|o| o.id == m.id) {
                return fail(format!("duplicate model id `{}`", m.id));
            }
            if let Some(g) = &m.grid {
                if m.family.is_time_series() && !g.0.is_empty() {
                    return fail(format!("model `{}`: ARIMA families take no grid", m.id));
                }
                g.cells()
                    .map_err(|e| Error::Config(format!("model `{}`: {e}", m.id)))?;
            }
        }
        if self.split_months.is_empty() || self.split_months.contains(&0) || self.primary_split == 0
        {
            return fail("split months must be positive".into());
        }
        if self.cv.k < 2 {
            return fail("cv.k must be at least 2".into());
        }
        if self.dm.horizon == 0 {
            return fail("dm.horizon must be at least 1".into());
        }
        if self.explain.background_cap == 0 {
            return fail("explain.background_cap must be positive".into());
        }
        if !(self.explain.outliers.k >= 0.0) {
            return fail("explain.outliers.k must be non-negative".into());
        }
        for f in &self.explain.features {
            if !self.schema.features.contains(f) {
                return fail(format!("explain feature `{f}` is not in the schema"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (output directory excluded).
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn header(&self) -> String {
        format!("config_hash={}, seed={}", self.config_hash(), self.seed)
    }

    pub fn benchmark(&self) -> &ModelSpec {
        self.models
            .iter()
            .find(|m| m.family.is_time_series())
            .expect("validated roster has a benchmark")
    }

    pub fn model(&self, id: &str) -> Result<&ModelSpec> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::Config(format!("model `{id}` is not in the roster")))
    }

    /// Loads or generates the frame, then applies the log transform.
    pub fn load_data(&self) -> Result<SeriesFrame> {
        let frame = match (&self.data.path, &self.data.synth) {
            (Some(p), _) => {
                let path = self.base_dir.join(p);
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
                load_frame(&text, &self.schema)?
            }
            (None, Some(s)) => {
                synth_generate(self.seed, s.n, &self.schema, &s.generator(&self.schema))?
            }
            (None, None) => return Err(Error::Config("no data source".into())),
        };
        let frame = log_transform(&frame, &self.schema.log_columns)?;
        for &m in self.split_months.iter().chain([&self.primary_split]) {
            if m >= frame.n_rows() {
                return Err(Error::Config(format!(
                    "test window of {m} months leaves no training data in {} rows",
                    frame.n_rows()
                )));
            }
        }
        Ok(frame)
    }

    fn model_seed(&self, id: &str, test_months: usize) -> u64 {
        seeds::derive(self.seed, &format!("model/{id}/{test_months}"), 0)
    }

    fn cv_plan(&self) -> CvPlan {
        CvPlan {
            seed: seeds::derive(self.seed, "cv", self.cv.seed),
            ..self.cv
        }
    }
}

/// A model tuned and refitted on one training window.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub id: String,
    pub model: TrainedModel,
    pub params: Option<ParamSet>,
    pub cv: Option<GridSearch>,
    pub arima_candidates: Option<Vec<CandidateOutcome>>,
}

/// Train/test frames and derived matrices for one split.
pub struct SplitData {
    pub test_months: usize,
    pub train: SeriesFrame,
    pub test: SeriesFrame,
}

impl SplitData {
    pub fn new(frame: &SeriesFrame, test_months: usize) -> Result<Self> {
        let (train, test) = chrono_split(frame, SplitSpec { test_months })?;
        Ok(SplitData {
            test_months,
            train,
            test,
        })
    }
}

/// Tunes (grid search or order selection) and refits one roster entry on
/// the training window.
pub fn fit_model(cfg: &RunConfig, spec: &ModelSpec, split: &SplitData) -> Result<FittedModel> {
    let seed = cfg.model_seed(&spec.id, split.test_months);
    let y = split.train.column(&cfg.schema.target)?;
    if spec.family.is_time_series() {
        let sel = select_order(y, &cfg.arima.candidates(spec.family), seed)?;
        return Ok(FittedModel {
            id: spec.id.clone(),
            model: TrainedModel::Arima(ArimaModel {
                fit: sel.fit,
                history: y.to_vec(),
            }),
            params: None,
            cv: None,
            arima_candidates: Some(sel.candidates),
        });
    }
    let x = split.train.matrix(&cfg.schema.features)?;
    let search = grid_search(spec.family, &spec.grid(), &x, y, &cfg.cv_plan(), seed)?;
    if !search.best_row().mean_mse.is_finite() {
        return Err(Error::Numerical(format!(
            "every grid cell failed for `{}`: {}",
            spec.id,
            search.best_row().error.clone().unwrap_or_default()
        )));
    }
    let params = search.best_params().clone();
    let model = spec.family.fit(&params, &x, y, seed)?;
    Ok(FittedModel {
        id: spec.id.clone(),
        model,
        params: Some(params),
        cv: Some(search),
        arima_candidates: None,
    })
}

/// Out-of-sample forecasts over the test window.
pub fn forecast_test(cfg: &RunConfig, fitted: &FittedModel, split: &SplitData) -> Result<Vec<f64>> {
    match &fitted.model {
        TrainedModel::Arima(m) => m.forecast(split.test_months),
        other => other.predict(&split.test.matrix(&cfg.schema.features)?),
    }
}

/// Everything one split produces.
pub struct SplitOutcome {
    pub test_months: usize,
    pub months: Vec<YearMonth>,
    pub actual: Vec<f64>,
    pub fitted: Vec<Option<FittedModel>>,
    /// Forecasts per roster entry, `None` when the family failed.
    pub forecasts: Vec<Option<Vec<f64>>>,
    pub warnings: Vec<String>,
}

/// Fits and forecasts every roster entry on one split. Failures other than
/// configuration mistakes become warnings; the benchmark must succeed.
pub fn evaluate_split(
    cfg: &RunConfig,
    frame: &SeriesFrame,
    test_months: usize,
) -> Result<SplitOutcome> {
    let split = SplitData::new(frame, test_months)?;
    let mut out = SplitOutcome {
        test_months,
        months: (0..test_months).map(|r| split.test.month(r)).collect(),
        actual: split.test.column(&cfg.schema.target)?.to_vec(),
        fitted: Vec::new(),
        forecasts: Vec::new(),
        warnings: Vec::new(),
    };
    let bench_id = cfg.benchmark().id.clone();
    for spec in &cfg.models {
        let result = fit_model(cfg, spec, &split).and_then(|f| {
            let fc = forecast_test(cfg, &f, &split)?;
            if fc.iter().all(|v| v.is_finite()) {
                Ok((f, fc))
            } else {
                Err(Error::Numerical("non-finite forecast".into()))
            }
        });
        match result {
            Ok((f, fc)) => {
                out.fitted.push(Some(f));
                out.forecasts.push(Some(fc));
            }
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) if spec.id == bench_id => {
                return Err(Error::Numerical(format!(
                    "benchmark `{bench_id}` failed: {e}"
                )));
            }
            Err(e) => {
                out.warnings.push(format!(
                    "model `{}` failed on {test_months}-month split: {e}",
                    spec.id
                ));
                out.fitted.push(None);
                out.forecasts.push(None);
            }
        }
    }
    Ok(out)
}

/// Names and paths written by a command, plus non-fatal warnings.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    report: Report,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir,
            report: Report::default(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.report.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, cfg: &RunConfig, body: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'b, T> {
            config_hash: String,
            seed: u64,
            #[serde(flatten)]
            body: &'b T,
        }
        let doc = Doc {
            config_hash: cfg.config_hash(),
            seed: cfg.seed,
            body,
        };
        self.write(name, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }
}

fn comment_line(cfg: &RunConfig) -> String {
    format!("# {}\n", cfg.header())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct Selected {
    family: Family,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<ParamSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<String>,
}

/// Metric rows and both DM variants for one split.
pub fn split_metrics(
    cfg: &RunConfig,
    outcome: &SplitOutcome,
) -> Result<(Vec<MetricRow>, Vec<DmAudit>)> {
    let bench = cfg.benchmark();
    let bi = cfg
        .models
        .iter()
        .position(|m| m.id == bench.id)
        .expect("benchmark in roster");
    let bench_fc = outcome.forecasts[bi]
        .as_deref()
        .expect("benchmark succeeded");
    let candidates: Vec<(String, Option<Vec<f64>>)> = cfg
        .models
        .iter()
        .zip(&outcome.forecasts)
        .enumerate()
        .filter(|(i, _)| *i != bi)
        .map(|(_, (m, f))| (m.id.clone(), f.clone()))
        .collect();
    let horizon = cfg
        .dm
        .horizon
        .min(outcome.actual.len().saturating_sub(1))
        .max(1);
    metric_table(
        &outcome.actual,
        (&bench.id, bench_fc),
        &candidates,
        horizon,
        cfg.dm.small_sample,
    )
}

/// Tunes every roster family on the primary split and writes forecasts,
/// the accuracy report, DM audits, and tuning tables.
pub fn cmd_run(cfg: &RunConfig) -> Result<Report> {
    let frame = cfg.load_data()?;
    let outcome = evaluate_split(cfg, &frame, cfg.primary_split)?;
    let (rows, audits) = split_metrics(cfg, &outcome)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    let head = comment_line(cfg);

    let mut fc = head.clone();
    fc.push_str("month,actual");
    for m in &cfg.models {
        fc.push(',');
        fc.push_str(&m.id);
    }
    fc.push('\n');
    for (r, month) in outcome.months.iter().enumerate() {
        fc.push_str(&format!("{month},{}", outcome.actual[r]));
        for f in &outcome.forecasts {
            fc.push(',');
            fc.push_str(&opt(f.as_ref().map(|v| v[r])));
        }
        fc.push('\n');
    }
    w.write("forecasts.csv", &fc)?;
    w.write("metrics.csv", &metrics_csv(&rows, Some(&cfg.header())))?;

    let mut dm = head.clone();
    dm.push_str("model,n,truncation_lag,dm_stat,dm_pvalue,hln_stat,hln_pvalue\n");
    for a in &audits {
        dm.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            a.model,
            a.asymptotic.n,
            a.asymptotic.truncation_lag,
            a.asymptotic.statistic,
            a.asymptotic.pvalue,
            a.corrected.statistic,
            a.corrected.pvalue
        ));
    }
    w.write("dm_tests.csv", &dm)?;

    let mut selected: IndexMap<String, Selected> = IndexMap::new();
    for (spec, fitted) in cfg.models.iter().zip(&outcome.fitted) {
        let Some(f) = fitted else { continue };
        if let Some(cv) = &f.cv {
            w.write(&format!("cv_{}.csv", spec.id), &cv.to_csv(&cfg.header()))?;
        }
        let mut order = None;
        if let Some(cands) = &f.arima_candidates {
            let mut t = head.clone();
            t.push_str("p,d,q,P,D,Q,s,aic,converged,error\n");
            for c in cands {
                let o = c.order;
                let err = c
                    .error
                    .clone()
                    .unwrap_or_default()
                    .replace([',', '\n'], ";");
                t.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    o.p,
                    o.d,
                    o.q,
                    o.seasonal_p,
                    o.seasonal_d,
                    o.seasonal_q,
                    o.s,
                    opt(c.aic),
                    c.converged,
                    err
                ));
            }
            w.write(&format!("arima_{}.csv", spec.id), &t)?;
            if let TrainedModel::Arima(m) = &f.model {
                order = Some(m.fit.order.to_string());
            }
        }
        selected.insert(
            spec.id.clone(),
            Selected {
                family: spec.family,
                params: f.params.clone(),
                order,
            },
        );
    }
    w.json(
        "selected.json",
        cfg,
        &IndexMap::from([("models", selected)]),
    )?;
    w.report.warnings = outcome.warnings;
    Ok(w.report)
}

/// Reruns tuning and evaluation for every test window in `split_months`.
pub fn cmd_split_sweep(cfg: &RunConfig) -> Result<Report> {
    let frame = cfg.load_data()?;
    let mut csv = comment_line(cfg);
    csv.push_str("model,test_months,rmse,mae\n");
    let mut warnings = Vec::new();
    for &m in &cfg.split_months {
        let outcome = evaluate_split(cfg, &frame, m)?;
        for (spec, f) in cfg.models.iter().zip(&outcome.forecasts) {
            let (r, a) = match f {
                Some(f) => (
                    Some(rmse(&outcome.actual, f)?),
                    Some(mae(&outcome.actual, f)?),
                ),
                None => (None, None),
            };
            csv.push_str(&format!("{},{m},{},{}\n", spec.id, opt(r), opt(a)));
        }
        warnings.extend(outcome.warnings);
    }
    let mut w = Writer::new(&cfg.output_dir)?;
    w.write("split_sweep.csv", &csv)?;
    w.report.warnings = warnings;
    Ok(w.report)
}

/// In-memory products of an explanation, before they are written out.
pub struct Explanation {
    pub fitted: FittedModel,
    pub feature_names: Vec<String>,
    pub months: Vec<YearMonth>,
    pub rows: crate::matrix::Matrix,
    pub shap: ShapMatrix,
}

/// Fits `model_id` on the primary split exactly as `run` does and explains
/// the configured rows against a training-set background.
pub fn explain(cfg: &RunConfig, model_id: &str) -> Result<Explanation> {
    let spec = cfg.model(model_id)?;
    if spec.family.is_time_series() {
        return Err(Error::Unsupported(format!(
            "`{model_id}` is a univariate ARIMA model with no features to explain"
        )));
    }
    let frame = cfg.load_data()?;
    let split = SplitData::new(&frame, cfg.primary_split)?;
    let fitted = fit_model(cfg, spec, &split)?;
    let x_train = split.train.matrix(&cfg.schema.features)?;
    let background = BackgroundSet::sample(
        &x_train,
        cfg.explain.background_cap,
        seeds::derive(cfg.seed, "background", 0),
    )?;
    let (rows, source) = match cfg.explain.rows {
        ExplainRows::Train => (x_train, &split.train),
        ExplainRows::Test => (split.test.matrix(&cfg.schema.features)?, &split.test),
    };
    let months = (0..source.n_rows()).map(|r| source.month(r)).collect();
    let shap = explain_model(&fitted.model, &rows, &background)?;
    Ok(Explanation {
        fitted,
        feature_names: cfg.schema.features.clone(),
        months,
        rows,
        shap,
    })
}

/// Writes importance, per-row attributions, predictions, summary-plot
/// records, dependence data, and functional forms.
pub fn cmd_explain(cfg: &RunConfig, model_id: &str) -> Result<Report> {
    let ex = explain(cfg, model_id)?;
    let names = &ex.feature_names;
    let head = comment_line(cfg);
    let mut w = Writer::new(&cfg.output_dir)?;

    let mut imp = head.clone();
    imp.push_str("rank,feature,mean_abs_shap\n");
    for (r, f) in global_importance(&ex.shap).iter().enumerate() {
        imp.push_str(&format!(
            "{},{},{}\n",
            r + 1,
            names[f.feature],
            f.mean_abs_shap
        ));
    }
    w.write("importance.csv", &imp)?;
    w.write(
        "shap_values.csv",
        &shap_csv(&ex.shap, &ex.rows, names, 0, &cfg.header()),
    )?;

    let mut pred = head.clone();
    pred.push_str("row_index,month,prediction\n");
    for (i, (m, p)) in ex.months.iter().zip(&ex.shap.predictions).enumerate() {
        pred.push_str(&format!("{i},{m},{p}\n"));
    }
    w.write("predictions.csv", &pred)?;

    let mut summary = head.clone();
    summary.push_str("feature,row_index,shap_value,normalized_value\n");
    for s in summary_plot_data(&ex.shap, &ex.rows)? {
        summary.push_str(&format!(
            "{},{},{},{}\n",
            names[s.feature], s.row_index, s.shap_value, s.normalized_value
        ));
    }
    w.write("summary_plot.csv", &summary)?;

    let targets: Vec<String> = if cfg.explain.features.is_empty() {
        names.clone()
    } else {
        cfg.explain.features.clone()
    };
    let mut forms: IndexMap<String, serde_json::Value> = IndexMap::new();
    for feature in &targets {
        let (points, color) =
            dependence_data(&ex.shap, &ex.rows, names, feature, &cfg.explain.color_by)?;
        let comment = match &color {
            Some(c) => format!("{}, color_by={c}", cfg.header()),
            None => cfg.header(),
        };
        w.write(
            &format!("dependence_{feature}.csv"),
            &dependence_csv(&points, 0, &comment),
        )?;
        let form = match functional_form(feature, &points, &cfg.explain.outliers) {
            Ok(f) => serde_json::to_value(f)?,
            Err(e) => serde_json::json!({ "feature": feature, "error": e.to_string() }),
        };
        forms.insert(feature.clone(), form);
    }
    w.json(
        "functional_form.json",
        cfg,
        &serde_json::json!({ "model": model_id, "features": forms }),
    )?;
    Ok(w.report)
}

/// Writes the configured synthetic frame and its generator description.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Report> {
    let synth = cfg
        .data
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("synth needs a [data.synth] section".into()))?;
    let spec = synth.generator(&cfg.schema);
    let frame = synth_generate(cfg.seed, synth.n, &cfg.schema, &spec)?;
    let mut w = Writer::new(&cfg.output_dir)?;
    w.write("data.csv", &frame.to_csv(Some(&cfg.header())))?;
    w.json(
        "generator.json",
        cfg,
        &serde_json::json!({ "n": synth.n, "target": cfg.schema.target, "generator": spec }),
    )?;
    Ok(w.report)
}
