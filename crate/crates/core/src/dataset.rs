//! Monthly multivariate series: ingestion, transforms, chronological
//! splitting, feature standardization, and a seeded synthetic generator.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeds;

/// Calendar year-month, e.g. `2015-01`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Data(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    fn from_ordinal(o: i64) -> Self {
        Self {
            year: o.div_euclid(12) as i32,
            month: o.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn plus_months(self, k: i64) -> Self {
        Self::from_ordinal(self.ordinal() + k)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Data(format!("`{s}` is not a YYYY-MM stamp")))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(Error::Data(format!("`{s}` is not a YYYY-MM stamp")));
        }
        let year = y
            .parse()
            .map_err(|_| Error::Data(format!("`{s}` has a non-numeric year")))?;
        let month = m
            .parse()
            .map_err(|_| Error::Data(format!("`{s}` has a non-numeric month")))?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Contiguous monthly panel. All columns share `n_rows` and contain only
/// finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    start: YearMonth,
    n_rows: usize,
    columns: Vec<Column>,
}

impl SeriesFrame {
    pub fn new(start: YearMonth, columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.values.len());
        if n_rows == 0 {
            return Err(Error::Data("a frame needs at least one row".into()));
        }
        for (i, c) in columns.iter().enumerate() {
            if c.values.len() != n_rows {
                return Err(Error::Data(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    c.name,
                    c.values.len()
                )));
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Data(format!("duplicate column `{}`", c.name)));
            }
            if let Some(r) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Cell {
                    row: r,
                    column: c.name.clone(),
                    message: "non-finite value".into(),
                });
            }
        }
        Ok(Self {
            start,
            n_rows,
            columns,
        })
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn month(&self, row: usize) -> YearMonth {
        self.start.plus_months(row as i64)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn column_mut(&mut self, name: &str) -> Result<&mut Vec<f64>> {
        self.columns
            .iter_mut()
            .find(|c| c.name == name)
            .map(|c| &mut c.values)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Feature matrix with the named columns in the given order.
    pub fn matrix(&self, names: &[String]) -> Result<Matrix> {
        let cols = names
            .iter()
            .map(|n| self.column(n).map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_columns(&cols)
    }

    /// Rows `[from, to)` as a new frame.
    pub fn slice(&self, from: usize, to: usize) -> Result<SeriesFrame> {
        if from >= to || to > self.n_rows {
            return Err(Error::invalid(format!(
                "row range {from}..{to} invalid for {} rows",
                self.n_rows
            )));
        }
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: c.values[from..to].to_vec(),
            })
            .collect();
        Ok(SeriesFrame {
            start: self.month(from),
            n_rows: to - from,
            columns,
        })
    }

    /// Appends `next` below `self`; `next` must start the month after `self` ends
    /// and carry the same columns.
    pub fn concat(&self, next: &SeriesFrame) -> Result<SeriesFrame> {
        if self.month(self.n_rows) != next.start {
            return Err(Error::Data("frames are not calendar-adjacent".into()));
        }
        let mut columns = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let mut values = c.values.clone();
            values.extend_from_slice(next.column(&c.name)?);
            columns.push(Column {
                name: c.name.clone(),
                values,
            });
        }
        SeriesFrame::new(self.start, columns)
    }

    /// Serializes in the loader's format: a `date` column then every column.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str("date");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for r in 0..self.n_rows {
            out.push_str(&self.month(r).to_string());
            for c in &self.columns {
                out.push(',');
                out.push_str(&c.values[r].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Which column is the target, which are regressors, and which are logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    pub target: String,
    pub features: Vec<String>,
    #[serde(default)]
    pub log_columns: Vec<String>,
}

/// Variable labels of the payment-system, macro and capital-market panel.
pub const DEFAULT_FEATURES: [&str; 16] = [
    "RTGS", "SKNBI", "ATMD", "CC", "EM", "DC", "FT", "KUPVA", "CIC", "ER", "IR", "CSPI", "SMC",
    "ADT", "PER", "CCI",
];

pub const DEFAULT_TARGET: &str = "INF";

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            target: DEFAULT_TARGET.to_string(),
            features: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
            log_columns: Vec::new(),
        }
    }
}

impl ColumnSchema {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config("schema lists no features".into()));
        }
        if self.features.contains(&self.target) {
            return Err(Error::Config(format!(
                "target `{}` is also listed as a feature",
                self.target
            )));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].contains(f) {
                return Err(Error::Config(format!("duplicate feature `{f}`")));
            }
        }
        for l in &self.log_columns {
            if *l != self.target && !self.features.contains(l) {
                return Err(Error::Config(format!(
                    "log column `{l}` is neither the target nor a feature"
                )));
            }
        }
        Ok(())
    }

    /// Target followed by features.
    pub fn all_columns(&self) -> Vec<String> {
        std::iter::once(self.target.clone())
            .chain(self.features.iter().cloned())
            .collect()
    }
}

/// Parses delimited text whose first column is a `YYYY-MM` stamp.
///
/// Lines starting with `#` are ignored. The returned frame holds the target
/// followed by the schema's features. Cell errors carry the 1-based line
/// number within the source.
pub fn load_frame(source: &str, schema: &ColumnSchema) -> Result<SeriesFrame> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Data("empty header".into()));
    }
    for (i, h) in headers.iter().enumerate() {
        if headers.iter().take(i).any(|o| o == h) {
            return Err(Error::Data(format!("duplicate header `{h}`")));
        }
    }
    let wanted = schema.all_columns();
    let positions = wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .skip(1)
                .position(|h| h == name)
                .map(|p| p + 1)
                .ok_or_else(|| Error::MissingColumn(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let date_name = headers.get(0).unwrap_or("date").to_string();

    let mut start: Option<YearMonth> = None;
    let mut prev: Option<YearMonth> = None;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let stamp = record.get(0).unwrap_or("");
        let month: YearMonth = stamp.parse().map_err(|e: Error| Error::Cell {
            row: line,
            column: date_name.clone(),
            message: e.to_string(),
        })?;
        if let Some(p) = prev {
            let step = p.months_until(month);
            if step == 0 {
                return Err(Error::Cell {
                    row: line,
                    column: date_name.clone(),
                    message: format!("duplicate month {month}"),
                });
            }
            if step != 1 {
                return Err(Error::Cell {
                    row: line,
                    column: date_name.clone(),
                    message: format!("calendar gap: {month} follows {p}"),
                });
            }
        } else {
            start = Some(month);
        }
        prev = Some(month);
        for (k, &pos) in positions.iter().enumerate() {
            let raw = record.get(pos).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Cell {
                row: line,
                column: wanted[k].clone(),
                message: format!("non-numeric cell `{raw}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Cell {
                    row: line,
                    column: wanted[k].clone(),
                    message: format!("non-finite cell `{raw}`"),
                });
            }
            values[k].push(v);
        }
    }
    let start = start.ok_or_else(|| Error::Data("no data rows".into()))?;
    let columns = wanted
        .into_iter()
        .zip(values)
        .map(|(name, values)| Column { name, values })
        .collect();
    SeriesFrame::new(start, columns)
}

/// Replaces the named columns by their natural logarithm.
pub fn log_transform(frame: &SeriesFrame, columns: &[String]) -> Result<SeriesFrame> {
    let mut out = frame.clone();
    for name in columns {
        let col = out.column_mut(name)?;
        for (r, v) in col.iter_mut().enumerate() {
            if *v <= 0.0 {
                return Err(Error::Cell {
                    row: r,
                    column: name.clone(),
                    message: format!("cannot take log of non-positive value {v}"),
                });
            }
            *v = v.ln();
        }
    }
    Ok(out)
}

/// Inverse of [`log_transform`].
pub fn exp_transform(frame: &SeriesFrame, columns: &[String]) -> Result<SeriesFrame> {
    let mut out = frame.clone();
    for name in columns {
        for v in out.column_mut(name)?.iter_mut() {
            *v = v.exp();
        }
    }
    Ok(out)
}

/// Number of trailing months held out for testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_months: usize,
}

/// First `n - m` rows train, last `m` rows test. No shuffling.
pub fn chrono_split(frame: &SeriesFrame, spec: SplitSpec) -> Result<(SeriesFrame, SeriesFrame)> {
    let n = frame.n_rows();
    let m = spec.test_months;
    if m == 0 || m >= n {
        return Err(Error::invalid(format!(
            "test_months must lie in 1..{n}, got {m}"
        )));
    }
    Ok((frame.slice(0, n - m)?, frame.slice(n - m, n)?))
}

/// Per-feature centering and scaling learned from training data.
///
/// Scale is the population standard deviation; a zero-variance feature
/// keeps scale 1 so it is only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.nrows().max(1) as f64;
        let (means, scales) = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                let scale = if sd > 1e-12 * (1.0 + mean.abs()) {
                    sd
                } else {
                    1.0
                };
                (mean, scale)
            })
            .unzip();
        Self { means, scales }
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row_into(&self, row: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.means[j]) / self.scales[j];
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.n_features())?;
        let mut out = x.clone();
        for i in 0..x.nrows() {
            self.apply_row_into(x.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    pub fn invert(&self, z: &Matrix) -> Result<Matrix> {
        z.check_cols(self.n_features())?;
        let mut out = z.clone();
        for i in 0..z.nrows() {
            for j in 0..z.ncols() {
                out.set(i, j, z.get(i, j) * self.scales[j] + self.means[j]);
            }
        }
        Ok(out)
    }
}

/// Standardizes `features` in both frames using statistics from `train` only.
pub fn standardize_fit_apply(
    train: &SeriesFrame,
    test: &SeriesFrame,
    features: &[String],
) -> Result<(SeriesFrame, SeriesFrame, Standardizer)> {
    let stats = Standardizer::fit(&train.matrix(features)?);
    let apply = |frame: &SeriesFrame| -> Result<SeriesFrame> {
        let mut out = frame.clone();
        for (j, name) in features.iter().enumerate() {
            for v in out.column_mut(name)?.iter_mut() {
                *v = (*v - stats.means[j]) / stats.scales[j];
            }
        }
        Ok(out)
    };
    Ok((apply(train)?, apply(test)?, stats))
}

/// Shape of the synthetic target function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    /// `intercept + Σ c_k · driver_k`
    Linear,
    /// `intercept + 2·tanh(1.5·a) + 0.8·b² − 1.2·max(c, 0) − 0.3·min(c, 0)`
    Nonlinear,
    /// `intercept + a² − 0.5·a`
    Quadratic,
}

impl FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Dgp::Linear),
            "nonlinear" => Ok(Dgp::Nonlinear),
            "quadratic" => Ok(Dgp::Quadratic),
            other => Err(Error::Config(format!("unknown dgp identifier `{other}`"))),
        }
    }
}

/// Full description of a synthetic data-generating process, including the
/// drivers that truly enter the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dgp: Dgp,
    pub drivers: Vec<String>,
    /// Linear dgp only; one per driver.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub noise_sd: f64,
    pub noise_ar: f64,
    pub feature_ar: f64,
    pub start: YearMonth,
}

impl GeneratorSpec {
    /// Defaults for `dgp` over `schema`: drivers ATMD, CC, IR when present,
    /// otherwise the leading features.
    pub fn new(dgp: Dgp, schema: &ColumnSchema) -> Self {
        let preferred = ["ATMD", "CC", "IR"];
        let wanted = match dgp {
            Dgp::Quadratic => 1,
            _ => 3,
        };
        let mut drivers: Vec<String> = if preferred
            .iter()
            .all(|p| schema.features.iter().any(|f| f == p))
        {
            preferred.iter().map(|s| s.to_string()).collect()
        } else {
            schema.features.iter().take(3).cloned().collect()
        };
        drivers.truncate(wanted);
        let coefficients = [1.5, -0.8, 0.6][..drivers.len()].to_vec();
        Self {
            dgp,
            drivers,
            coefficients,
            intercept: 3.0,
            noise_sd: 0.2,
            noise_ar: 0.5,
            feature_ar: 0.5,
            start: YearMonth {
                year: 2015,
                month: 1,
            },
        }
    }

    fn required_drivers(&self) -> usize {
        match self.dgp {
            Dgp::Linear => self.coefficients.len(),
            Dgp::Nonlinear => 3,
            Dgp::Quadratic => 1,
        }
    }

    /// Noise-free target value given the drivers' values in declaration order.
    pub fn signal(&self, drivers: &[f64]) -> f64 {
        let body = match self.dgp {
            Dgp::Linear => drivers
                .iter()
                .zip(&self.coefficients)
                .map(|(x, c)| x * c)
                .sum(),
            Dgp::Nonlinear => {
                let (a, b, c) = (drivers[0], drivers[1], drivers[2]);
                2.0 * (1.5 * a).tanh() + 0.8 * b * b - 1.2 * c.max(0.0) - 0.3 * c.min(0.0)
            }
            Dgp::Quadratic => drivers[0] * drivers[0] - 0.5 * drivers[0],
        };
        self.intercept + body
    }
}

/// Generates `n` months of synthetic data: stationary AR(1) features with
/// unit variance and a target equal to the declared signal plus AR(1) noise.
pub fn synth_generate(
    seed: u64,
    n: usize,
    schema: &ColumnSchema,
    spec: &GeneratorSpec,
) -> Result<SeriesFrame> {
    schema.validate()?;
    if n < 40 {
        return Err(Error::invalid(format!(
            "synthetic series need n >= 40, got {n}"
        )));
    }
    if spec.drivers.len() != spec.required_drivers() {
        return Err(Error::Config(format!(
            "dgp {:?} needs {} drivers, got {}",
            spec.dgp,
            spec.required_drivers(),
            spec.drivers.len()
        )));
    }
    let driver_idx = spec
        .drivers
        .iter()
        .map(|d| {
            schema
                .features
                .iter()
                .position(|f| f == d)
                .ok_or_else(|| Error::Config(format!("driver `{d}` is not a schema feature")))
        })
        .collect::<Result<Vec<_>>>()?;
    if !(0.0..1.0).contains(&spec.feature_ar.abs()) || !(0.0..1.0).contains(&spec.noise_ar.abs()) {
        return Err(Error::Config("AR coefficients must lie in (-1, 1)".into()));
    }

    let mut rng = seeds::rng(seeds::derive(seed, "synth", 0));
    let innov_sd = (1.0 - spec.feature_ar * spec.feature_ar).sqrt();
    let p = schema.features.len();
    let mut features = vec![Vec::with_capacity(n); p];
    for col in features.iter_mut() {
        let mut x: f64 = rng.sample(StandardNormal);
        for _ in 0..n {
            col.push(x);
            let e: f64 = rng.sample(StandardNormal);
            x = spec.feature_ar * x + innov_sd * e;
        }
    }
    let mut target = Vec::with_capacity(n);
    let mut u = 0.0;
    let mut drivers = vec![0.0; driver_idx.len()];
    for t in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        u = spec.noise_ar * u + spec.noise_sd * e;
        for (k, &j) in driver_idx.iter().enumerate() {
            drivers[k] = features[j][t];
        }
        target.push(spec.signal(&drivers) + u);
    }
    let mut columns = vec![Column {
        name: schema.target.clone(),
        values: target,
    }];
    columns.extend(
        schema
            .features
            .iter()
            .zip(features)
            .map(|(name, values)| Column {
                name: name.clone(),
                values,
            }),
    );
    SeriesFrame::new(spec.start, columns)
}
