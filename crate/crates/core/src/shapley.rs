//! Shapley attributions under the interventional (background-marginal)
//! value function `v(S) = mean_b f(x_S, b_{-S})`.
//!
//! Three engines agree on that definition: brute-force coalition
//! enumeration for any predictor, a per-background-row tree traversal for
//! tree ensembles, and the closed form `β_j (x_j − mean_j)` for models that
//! are affine in their raw inputs.

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TrainedModel;
use crate::predictor::Predictor;
use crate::seeds;
use crate::tree::{Tree, TreeEnsemble, TreeNode};

/// Largest feature count accepted by [`exact_shapley`].
pub const MAX_EXACT_FEATURES: usize = 15;

/// Reference rows that absent features are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    rows: Matrix,
}

impl BackgroundSet {
    pub fn new(rows: Matrix) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::invalid("background set is empty"));
        }
        Ok(Self { rows })
    }

    /// All of `x` when it has at most `cap` rows, otherwise a seeded
    /// uniform subsample of `cap` rows kept in their original order.
    pub fn sample(x: &Matrix, cap: usize, seed: u64) -> Result<Self> {
        if cap == 0 {
            return Err(Error::invalid("background cap must be positive"));
        }
        if x.nrows() <= cap {
            return Self::new(x.clone());
        }
        let mut idx = index::sample(&mut seeds::rng(seed), x.nrows(), cap).into_vec();
        idx.sort_unstable();
        Self::new(x.select_rows(&idx))
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let b = self.len() as f64;
        let mut m = vec![0.0; self.n_features()];
        for row in self.rows.rows_iter() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= b);
        m
    }

    fn check(&self, x: &[f64], p: usize) -> Result<()> {
        if self.n_features() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: self.n_features(),
            });
        }
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// `v(S)` for the coalition encoded by bit `j` of `mask`.
pub fn coalition_value(
    predictor: &dyn Predictor,
    x: &[f64],
    background: &BackgroundSet,
    mask: u64,
) -> f64 {
    let mut row = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in background.rows.rows_iter() {
        for j in 0..x.len() {
            row[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
        }
        total += predictor.predict_row(&row);
    }
    total / background.len() as f64
}

/// Mean prediction over the background, `v(∅)`.
pub fn base_value(predictor: &dyn Predictor, background: &BackgroundSet) -> f64 {
    background
        .rows
        .rows_iter()
        .map(|r| predictor.predict_row(r))
        .sum::<f64>()
        / background.len() as f64
}

/// Shapley weights `s!(p−s−1)!/p!` indexed by coalition size `s`.
fn size_weights(p: usize) -> Vec<f64> {
    let mut fact = vec![1.0f64; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    (0..p)
        .map(|s| fact[s] * fact[p - s - 1] / fact[p])
        .collect()
}

/// Attributions by enumerating all `2^p` coalitions.
pub fn exact_shapley(
    predictor: &dyn Predictor,
    x: &[f64],
    background: &BackgroundSet,
) -> Result<Vec<f64>> {
    let p = predictor.n_features();
    if p > MAX_EXACT_FEATURES {
        return Err(Error::Unsupported(format!(
            "exact Shapley enumeration is limited to {MAX_EXACT_FEATURES} features, model has {p}"
        )));
    }
    background.check(x, p)?;
    let values: Vec<f64> = (0..1u64 << p)
        .map(|mask| coalition_value(predictor, x, background, mask))
        .collect();
    let w = size_weights(p);
    let mut phi = vec![0.0; p];
    for (mask, v) in values.iter().enumerate() {
        let size = mask.count_ones() as usize;
        for (i, phi_i) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *phi_i += w[size] * (values[mask | 1 << i] - v);
            }
        }
    }
    Ok(phi)
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    X,
    Z,
}

struct PathState<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    z: &'a [f64],
    side: Vec<Side>,
    /// `weights[a][b]` = `(a−1)! b! / (a+b)!`
    weights: &'a [Vec<f64>],
    phi: &'a mut [f64],
}

impl PathState<'_> {
    fn visit(&mut self, node: usize, n_x: usize, n_z: usize) {
        match self.tree.nodes()[node] {
            TreeNode::Leaf { value, .. } => {
                if n_x + n_z == 0 {
                    return;
                }
                let gain = if n_x > 0 {
                    value * self.weights[n_x][n_z]
                } else {
                    0.0
                };
                let loss = if n_z > 0 {
                    value * self.weights[n_z][n_x]
                } else {
                    0.0
                };
                for (j, s) in self.side.iter().enumerate() {
                    match s {
                        Side::X => self.phi[j] += gain,
                        Side::Z => self.phi[j] -= loss,
                        Side::Free => {}
                    }
                }
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let child = |v: f64| if v <= threshold { left } else { right };
                let (cx, cz) = (child(self.x[feature]), child(self.z[feature]));
                match self.side[feature] {
                    _ if cx == cz => self.visit(cx, n_x, n_z),
                    Side::X => self.visit(cx, n_x, n_z),
                    Side::Z => self.visit(cz, n_x, n_z),
                    Side::Free => {
                        self.side[feature] = Side::X;
                        self.visit(cx, n_x + 1, n_z);
                        self.side[feature] = Side::Z;
                        self.visit(cz, n_x, n_z + 1);
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

fn path_weights(p: usize) -> Vec<Vec<f64>> {
    let mut fact = vec![1.0f64; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    (0..=p)
        .map(|a| {
            (0..=p - a)
                .map(|b| {
                    if a == 0 {
                        0.0
                    } else {
                        fact[a - 1] * fact[b] / fact[a + b]
                    }
                })
                .collect()
        })
        .collect()
}

/// Attributions of one tree's raw output, averaged over the background.
pub fn tree_shap_single(tree: &Tree, x: &[f64], background: &BackgroundSet) -> Result<Vec<f64>> {
    let p = x.len();
    background.check(x, p)?;
    let weights = path_weights(p);
    let mut phi = vec![0.0; p];
    accumulate_tree(tree, x, background, &weights, &mut phi);
    let b = background.len() as f64;
    phi.iter_mut().for_each(|v| *v /= b);
    Ok(phi)
}

fn accumulate_tree(
    tree: &Tree,
    x: &[f64],
    background: &BackgroundSet,
    weights: &[Vec<f64>],
    phi: &mut [f64],
) {
    for z in background.rows.rows_iter() {
        let mut state = PathState {
            tree,
            x,
            z,
            side: vec![Side::Free; x.len()],
            weights,
            phi,
        };
        state.visit(0, 0, 0);
    }
}

/// Interventional tree attributions for a forest or boosted ensemble.
pub fn tree_shap(
    ensemble: &TreeEnsemble,
    x: &[f64],
    background: &BackgroundSet,
) -> Result<Vec<f64>> {
    let p = ensemble.n_features;
    background.check(x, p)?;
    let weights = path_weights(p);
    let mut phi = vec![0.0; p];
    for tree in &ensemble.trees {
        accumulate_tree(tree, x, background, &weights, &mut phi);
    }
    let scale = ensemble.tree_weight() / background.len() as f64;
    phi.iter_mut().for_each(|v| *v *= scale);
    Ok(phi)
}

/// How a model's attributions are computed.
pub enum Engine<'a> {
    Tree(&'a TreeEnsemble),
    /// `f(x) = intercept + Σ slopes_j x_j` on raw inputs.
    Affine {
        intercept: f64,
        slopes: Vec<f64>,
    },
    Exact(&'a dyn Predictor),
}

impl<'a> Engine<'a> {
    /// Trees use the tree traversal; linear models and linear-kernel SVR
    /// use their closed form; other models fall back to enumeration.
    pub fn for_model(model: &'a TrainedModel) -> Result<Self> {
        if let Some(e) = model.tree_ensemble() {
            return Ok(Engine::Tree(e));
        }
        if let Some((intercept, slopes)) = model.raw_linear_form() {
            return Ok(Engine::Affine { intercept, slopes });
        }
        match model.predictor() {
            Some(p) => Ok(Engine::Exact(p)),
            None => Err(Error::Unsupported(
                "ARIMA is univariate and has no features to attribute".into(),
            )),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Engine::Tree(e) => e.n_features,
            Engine::Affine { slopes, .. } => slopes.len(),
            Engine::Exact(p) => p.n_features(),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Engine::Tree(e) => e.predict_row(x),
            Engine::Affine { intercept, slopes } => {
                intercept + slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
            Engine::Exact(p) => p.predict_row(x),
        }
    }

    pub fn base_value(&self, background: &BackgroundSet) -> f64 {
        match self {
            Engine::Tree(e) => base_value(*e, background),
            Engine::Affine { intercept, slopes } => {
                intercept
                    + slopes
                        .iter()
                        .zip(background.column_means())
                        .map(|(b, m)| b * m)
                        .sum::<f64>()
            }
            Engine::Exact(p) => base_value(*p, background),
        }
    }

    pub fn shap_row(&self, x: &[f64], background: &BackgroundSet) -> Result<Vec<f64>> {
        match self {
            Engine::Tree(e) => tree_shap(e, x, background),
            Engine::Affine { slopes, .. } => {
                background.check(x, slopes.len())?;
                Ok(slopes
                    .iter()
                    .zip(x)
                    .zip(background.column_means())
                    .map(|((b, v), m)| b * (v - m))
                    .collect())
            }
            Engine::Exact(p) => exact_shapley(*p, x, background),
        }
    }
}

/// Attributions for a batch of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapMatrix {
    pub base_value: f64,
    /// rows × features
    pub phi: Matrix,
    /// Model output per explained row.
    pub predictions: Vec<f64>,
}

impl ShapMatrix {
    pub fn nrows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.phi.ncols()
    }

    /// Largest `|base + Σφ − prediction|` over rows.
    pub fn max_efficiency_gap(&self) -> f64 {
        self.phi
            .rows_iter()
            .zip(&self.predictions)
            .map(|(r, f)| (self.base_value + r.iter().sum::<f64>() - f).abs())
            .fold(0.0, f64::max)
    }
}

pub fn explain_matrix(
    engine: &Engine<'_>,
    rows: &Matrix,
    background: &BackgroundSet,
) -> Result<ShapMatrix> {
    if rows.nrows() == 0 {
        return Err(Error::invalid("no rows to explain"));
    }
    rows.check_cols(engine.n_features())?;
    let phi: Vec<Vec<f64>> = (0..rows.nrows())
        .into_par_iter()
        .map(|i| engine.shap_row(rows.row(i), background))
        .collect::<Result<_>>()?;
    Ok(ShapMatrix {
        base_value: engine.base_value(background),
        phi: Matrix::from_rows(&phi)?,
        predictions: rows.rows_iter().map(|r| engine.predict_row(r)).collect(),
    })
}

pub fn explain_model(
    model: &TrainedModel,
    rows: &Matrix,
    background: &BackgroundSet,
) -> Result<ShapMatrix> {
    explain_matrix(&Engine::for_model(model)?, rows, background)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub feature: usize,
    pub mean_abs_shap: f64,
}

/// Mean `|φ|` per feature, largest first; ties keep declaration order.
pub fn global_importance(m: &ShapMatrix) -> Vec<FeatureImportance> {
    let n = m.nrows().max(1) as f64;
    let mut out: Vec<FeatureImportance> = (0..m.n_features())
        .map(|j| FeatureImportance {
            feature: j,
            mean_abs_shap: m.phi.rows_iter().map(|r| r[j].abs()).sum::<f64>() / n,
        })
        .collect();
    out.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap));
    out
}

/// Long-format SHAP export; the second line records the base value.
pub fn shap_csv(
    m: &ShapMatrix,
    x: &Matrix,
    names: &[String],
    row_offset: usize,
    comment: &str,
) -> String {
    let mut out = String::new();
    if !comment.is_empty() {
        out.push_str(&format!("# {comment}\n"));
    }
    out.push_str(&format!("# base_value={}\n", m.base_value));
    out.push_str("row_index,feature,feature_value,shap_value\n");
    for (i, phi) in m.phi.rows_iter().enumerate() {
        for (j, v) in phi.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i + row_offset,
                names[j],
                x.get(i, j),
                v
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::FnPredictor;

    fn bg(rows: &[Vec<f64>]) -> BackgroundSet {
        BackgroundSet::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn product_game_by_hand() {
        let f = FnPredictor::new(2, |r: &[f64]| r[0] * r[1]);
        let b = bg(&[vec![0.0, 1.0]]);
        let phi = exact_shapley(&f, &[2.0, 3.0], &b).unwrap();
        assert!((phi[0] - 4.0).abs() < 1e-12 && (phi[1] - 2.0).abs() < 1e-12);
        assert_eq!(base_value(&f, &b), 0.0);
    }

    #[test]
    fn constant_and_dummy() {
        let b = bg(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0]]);
        let c = FnPredictor::new(3, |_: &[f64]| 7.0);
        assert_eq!(exact_shapley(&c, &[4.0, 4.0, 4.0], &b).unwrap(), [0.0; 3]);
        let f = FnPredictor::new(3, |r: &[f64]| r[0].sin() + r[2] * r[0]);
        assert_eq!(exact_shapley(&f, &[4.0, 9.0, 1.0], &b).unwrap()[1], 0.0);
    }

    #[test]
    fn feature_guard_and_empty_background() {
        let f = FnPredictor::new(16, |_: &[f64]| 0.0);
        let b = BackgroundSet::new(Matrix::zeros(1, 16)).unwrap();
        assert!(exact_shapley(&f, &[0.0; 16], &b).is_err());
        assert!(BackgroundSet::new(Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn stump_attributes_only_its_feature() {
        let tree = Tree::stump(1, 0.5, -2.0, 3.0);
        let b = bg(&[vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]]);
        let phi = tree_shap_single(&tree, &[0.0, 1.0, 0.0], &b).unwrap();
        assert_eq!(phi[0], 0.0);
        assert_eq!(phi[2], 0.0);
        assert!((phi[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn importance_sorted_with_stable_ties() {
        let m = ShapMatrix {
            base_value: 0.0,
            phi: Matrix::from_rows(&[vec![0.0, -2.0, 1.0, 2.0], vec![0.0, 2.0, -1.0, -2.0]])
                .unwrap(),
            predictions: vec![1.0, -1.0],
        };
        let order: Vec<usize> = global_importance(&m).iter().map(|f| f.feature).collect();
        assert_eq!(order, [1, 3, 2, 0]);
    }

    #[test]
    fn background_sample_is_seeded_subset() {
        let x = Matrix::from_columns(&[(0..300).map(f64::from).collect()]).unwrap();
        let a = BackgroundSet::sample(&x, 100, 5).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, BackgroundSet::sample(&x, 100, 5).unwrap());
        assert_eq!(BackgroundSet::sample(&x, 1000, 5).unwrap().len(), 300);
    }

    #[test]
    fn tree_engine_matches_enumeration() {
        use crate::tree::{fit_gradient_boosting, BoostParams};
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| {
                (0..n)
                    .map(|i| (((i * (7 + 3 * j) + j) % 17) as f64).sin())
                    .collect()
            })
            .collect();
        let x = Matrix::from_columns(&cols).unwrap();
        let y: Vec<f64> = x
            .rows_iter()
            .map(|r| r[0] * r[1] + r[2].abs() - r[3])
            .collect();
        let params = BoostParams {
            n_estimators: 15,
            max_depth: 4,
            ..BoostParams::default()
        };
        let m = fit_gradient_boosting(&x, &y, &params).unwrap();
        let b = BackgroundSet::new(x.select_rows(&[1, 5, 9, 13, 22, 40])).unwrap();
        for i in [0, 17, 33] {
            let t = tree_shap(&m.ensemble, x.row(i), &b).unwrap();
            let e = exact_shapley(&m.ensemble, x.row(i), &b).unwrap();
            for (a, c) in t.iter().zip(&e) {
                assert!((a - c).abs() < 1e-9, "{t:?} vs {e:?}");
            }
        }
    }
}
