//! One-vs-rest linear support vector classification.
//!
//! Binary problems are solved in the dual by coordinate descent. The bias
//! is learned as the weight of a constant feature of value `bias_scale`, so
//! it is regularized together with the weights. With per-sample costs `c_i`
//! the primal objective is
//!
//! ```text
//! 1/2 (|w|^2 + b_w^2) + C * sum_i c_i * L(y_i (w.x_i + b_w * bias_scale))
//! ```
//!
//! where `L` is the hinge or squared hinge loss.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::NormConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureSpace, FeatureVector, GramProfile};
use crate::registry::Registry;

/// Per-class error weights `N / (C * (n_i + 1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: BTreeMap<String, f64>,
    pub total: usize,
    pub n_classes: usize,
}

impl ClassWeights {
    pub fn get(&self, class: &str) -> Option<f64> {
        self.weights.get(class).copied()
    }
}

pub fn class_weights<S: AsRef<str>>(labels: &[S]) -> Result<ClassWeights> {
    if labels.is_empty() {
        return Err(Error::Param("class weights need at least one label".into()));
    }
    let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *sizes.entry(l.as_ref().to_string()).or_insert(0) += 1;
    }
    let total = labels.len();
    let n_classes = sizes.len();
    let weights = sizes
        .into_iter()
        .map(|(c, n)| (c, total as f64 / (n_classes as f64 * (n as f64 + 1.0))))
        .collect();
    Ok(ClassWeights {
        weights,
        total,
        n_classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub c_reg: f64,
    /// Solver name in [`solver_registry`]: `hinge` or `squared_hinge`.
    pub loss: String,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub bias_scale: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            c_reg: 1.0,
            loss: "squared_hinge".into(),
            tol: 1e-4,
            max_iter: 10_000,
            seed: 0,
            bias_scale: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_reg > 0.0 && self.c_reg.is_finite()) {
            return Err(Error::Param(format!("c_reg must be positive, got {}", self.c_reg)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Param(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Param("max_iter must be at least 1".into()));
        }
        if !(self.bias_scale >= 0.0 && self.bias_scale.is_finite()) {
            return Err(Error::Param(format!("bias_scale must be >= 0, got {}", self.bias_scale)));
        }
        solver_registry().get(&self.loss)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Hinge,
    SquaredHinge,
}

impl Loss {
    pub fn eval(self, margin: f64) -> f64 {
        let h = (1.0 - margin).max(0.0);
        match self {
            Loss::Hinge => h,
            Loss::SquaredHinge => h * h,
        }
    }
}

/// A binary training set: rows, labels in {-1, +1}, per-sample costs.
#[derive(Debug, Clone, Copy)]
pub struct BinaryProblem<'a> {
    pub rows: &'a [&'a FeatureVector],
    pub labels: &'a [f64],
    pub costs: &'a [f64],
    pub dim: usize,
}

impl BinaryProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.labels.len() || self.rows.len() != self.costs.len() {
            return Err(Error::Param(format!(
                "{} rows, {} labels, {} costs",
                self.rows.len(),
                self.labels.len(),
                self.costs.len()
            )));
        }
        let pos = self.labels.iter().filter(|&&y| y == 1.0).count();
        let neg = self.labels.iter().filter(|&&y| y == -1.0).count();
        if pos + neg != self.labels.len() {
            return Err(Error::Param("labels must be +1 or -1".into()));
        }
        if pos == 0 || neg == 0 {
            return Err(Error::Param("binary training needs both positive and negative samples".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.values.iter().any(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { row: i });
            }
            if let Some(&(c, _)) = r.values.last() {
                if c as usize >= self.dim {
                    return Err(Error::Dimension {
                        expected: self.dim,
                        got: c as usize + 1,
                    });
                }
            }
        }
        if self.costs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Param("sample costs must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one binary fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual variables, one per training row.
    pub alpha: Vec<f64>,
    /// Dual objective (minimization form) after each outer iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl BinaryFit {
    pub fn decision(&self, x: &FeatureVector) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(w: &[f64], x: &FeatureVector) -> f64 {
    x.values.iter().map(|&(c, v)| w[c as usize] * v).sum()
}

/// Primal objective of `(weights, bias)` on `problem`.
pub fn primal_objective(
    weights: &[f64],
    bias: f64,
    problem: &BinaryProblem<'_>,
    hp: &HyperParams,
    loss: Loss,
) -> f64 {
    let bias_w = if hp.bias_scale > 0.0 { bias / hp.bias_scale } else { 0.0 };
    let reg = 0.5 * (weights.iter().map(|w| w * w).sum::<f64>() + bias_w * bias_w);
    let data: f64 = problem
        .rows
        .iter()
        .zip(problem.labels)
        .zip(problem.costs)
        .map(|((x, &y), &c)| c * loss.eval(y * (dot(weights, x) + bias)))
        .sum();
    reg + hp.c_reg * data
}

/// A binary linear SVM trainer.
pub trait BinarySolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn loss(&self) -> Loss;
    fn solve(&self, problem: &BinaryProblem<'_>, hp: &HyperParams) -> Result<BinaryFit>;
}

/// Dual coordinate descent with random permutation of coordinates on
/// every pass; stops when the projected-gradient spread drops to `tol`.
#[derive(Debug, Clone, Copy)]
pub struct DualCoordinateDescent {
    pub loss: Loss,
}

impl BinarySolver for DualCoordinateDescent {
    fn name(&self) -> &'static str {
        match self.loss {
            Loss::Hinge => "hinge",
            Loss::SquaredHinge => "squared_hinge",
        }
    }

    fn loss(&self) -> Loss {
        self.loss
    }

    fn solve(&self, problem: &BinaryProblem<'_>, hp: &HyperParams) -> Result<BinaryFit> {
        problem.validate()?;
        let n = problem.rows.len();
        let bs = hp.bias_scale;
        // per-sample box and diagonal shift
        let (upper, diag): (Vec<f64>, Vec<f64>) = problem
            .costs
            .iter()
            .map(|&c| {
                let ci = hp.c_reg * c;
                match self.loss {
                    Loss::Hinge => (ci, 0.0),
                    Loss::SquaredHinge => (f64::INFINITY, 0.5 / ci),
                }
            })
            .unzip();
        let qii: Vec<f64> = problem
            .rows
            .iter()
            .zip(&diag)
            .map(|(x, d)| x.values.iter().map(|(_, v)| v * v).sum::<f64>() + bs * bs + d)
            .collect();

        let mut w = vec![0.0; problem.dim];
        let mut wb = 0.0;
        let mut alpha = vec![0.0; n];
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let mut objective = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        while iterations < hp.max_iter {
            iterations += 1;
            order.shuffle(&mut rng);
            let mut pg_max = f64::NEG_INFINITY;
            let mut pg_min = f64::INFINITY;
            for &i in &order {
                if qii[i] <= 0.0 {
                    continue;
                }
                let x = problem.rows[i];
                let y = problem.labels[i];
                let g = y * (dot(&w, x) + wb * bs) - 1.0 + diag[i] * alpha[i];
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == upper[i] {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 {
                    let old = alpha[i];
                    alpha[i] = (old - g / qii[i]).clamp(0.0, upper[i]);
                    let step = (alpha[i] - old) * y;
                    for &(c, v) in &x.values {
                        w[c as usize] += step * v;
                    }
                    wb += step * bs;
                }
            }
            objective.push(dual_objective(&w, wb, &alpha, &diag));
            if pg_max - pg_min <= hp.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!(
                "{} solver hit max_iter={} before reaching tol={}",
                self.name(),
                hp.max_iter,
                hp.tol
            );
        }
        Ok(BinaryFit {
            weights: w,
            bias: wb * bs,
            alpha,
            objective,
            iterations,
            converged,
        })
    }
}

fn dual_objective(w: &[f64], wb: f64, alpha: &[f64], diag: &[f64]) -> f64 {
    let wsq = w.iter().map(|v| v * v).sum::<f64>() + wb * wb;
    let shift: f64 = alpha.iter().zip(diag).map(|(a, d)| d * a * a).sum();
    let lin: f64 = alpha.iter().sum();
    0.5 * wsq + 0.5 * shift - lin
}

pub fn solver_registry() -> Registry<dyn BinarySolver> {
    let mut r: Registry<dyn BinarySolver> = Registry::new("solver");
    r.register("hinge", Arc::new(DualCoordinateDescent { loss: Loss::Hinge }));
    r.register(
        "squared_hinge",
        Arc::new(DualCoordinateDescent {
            loss: Loss::SquaredHinge,
        }),
    );
    r
}

pub fn train_binary(problem: &BinaryProblem<'_>, hp: &HyperParams) -> Result<BinaryFit> {
    hp.validate()?;
    solver_registry().get(&hp.loss)?.solve(problem, hp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub class: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
}

/// `(column, weight)` pairs.
pub type ColumnWeights = Vec<(usize, f64)>;

/// One weight vector and bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOvr {
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub class_weights: ClassWeights,
    pub reports: Vec<FitReport>,
}

impl LinearOvr {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn class_index(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::UnknownClass(class.to_string()))
    }

    /// Scores `w_c . x + b_c`, aligned with `classes`.
    pub fn decision_function(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        if let Some(&(c, _)) = x.values.last() {
            if c as usize >= self.dim() {
                return Err(Error::Dimension {
                    expected: self.dim(),
                    got: c as usize + 1,
                });
            }
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect())
    }

    pub fn predict_index(&self, x: &FeatureVector) -> Result<usize> {
        Ok(argmax(&self.decision_function(x)?))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<&str> {
        Ok(&self.classes[self.predict_index(x)?])
    }

    /// The `k` largest and `k` smallest weights of `class`, as column indices.
    pub fn top_columns(&self, class: &str, k: usize) -> Result<(ColumnWeights, ColumnWeights)> {
        if k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        let w = &self.weights[self.class_index(class)?];
        let mut cols: Vec<(usize, f64)> = w.iter().copied().enumerate().collect();
        cols.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let positive = cols.iter().take(k).copied().collect();
        cols.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let negative = cols.iter().take(k).copied().collect();
        Ok((positive, negative))
    }
}

/// First index of the maximum; earlier classes win ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Train one binary problem per class. Every sample is weighted by the
/// class weight of its true class in every subproblem.
pub fn train_ovr<S: AsRef<str> + Sync>(
    rows: &[&FeatureVector],
    labels: &[S],
    dim: usize,
    hp: &HyperParams,
) -> Result<LinearOvr> {
    hp.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::Param(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    let cw = class_weights(labels)?;
    if cw.n_classes < 2 {
        return Err(Error::Param("training needs at least two classes".into()));
    }
    let classes: Vec<String> = cw.weights.keys().cloned().collect();
    for c in &classes {
        let n = labels.iter().filter(|l| l.as_ref() == c).count();
        if n < 2 {
            log::warn!("class {c} has {n} sample(s); leave-one-out will skip it");
        }
    }
    let costs: Vec<f64> = labels.iter().map(|l| cw.weights[l.as_ref()]).collect();
    let solver = solver_registry().get(&hp.loss)?;
    let fits = classes
        .par_iter()
        .map(|c| {
            let y: Vec<f64> = labels
                .iter()
                .map(|l| if l.as_ref() == c { 1.0 } else { -1.0 })
                .collect();
            let problem = BinaryProblem {
                rows,
                labels: &y,
                costs: &costs,
                dim,
            };
            solver.solve(&problem, hp)
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = classes
        .iter()
        .zip(&fits)
        .map(|(c, f)| FitReport {
            class: c.clone(),
            iterations: f.iterations,
            converged: f.converged,
            final_objective: f.objective.last().copied().unwrap_or(0.0),
        })
        .collect();
    let (weights, biases) = fits.into_iter().map(|f| (f.weights, f.bias)).unzip();
    Ok(LinearOvr {
        classes,
        weights,
        biases,
        class_weights: cw,
        reports,
    })
}

pub const MODEL_VERSION: u32 = 1;

/// A trained classifier with everything needed to apply it to new text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelFile", into = "ModelFile")]
pub struct MulticlassLinearModel {
    pub ovr: LinearOvr,
    pub space: FeatureSpace,
    pub norm: NormConfig,
    pub hyper: HyperParams,
    pub corpus_hash: String,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config_hash: String,
    corpus_hash: String,
    classes: Vec<String>,
    biases: Vec<f64>,
    /// Nonzero `(column, weight)` pairs per class.
    weights: Vec<Vec<(u32, f64)>>,
    class_weights: ClassWeights,
    reports: Vec<FitReport>,
    hyper: HyperParams,
    norm: NormConfig,
    space: FeatureSpace,
}

impl From<MulticlassLinearModel> for ModelFile {
    fn from(m: MulticlassLinearModel) -> Self {
        let weights = m
            .ovr
            .weights
            .iter()
            .map(|w| {
                w.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, &v)| (c as u32, v))
                    .collect()
            })
            .collect();
        ModelFile {
            version: MODEL_VERSION,
            config_hash: m.config_hash,
            corpus_hash: m.corpus_hash,
            classes: m.ovr.classes,
            biases: m.ovr.biases,
            weights,
            class_weights: m.ovr.class_weights,
            reports: m.ovr.reports,
            hyper: m.hyper,
            norm: m.norm,
            space: m.space,
        }
    }
}

impl From<ModelFile> for MulticlassLinearModel {
    fn from(f: ModelFile) -> Self {
        let dim = f.space.vocab.len();
        let weights = f
            .weights
            .iter()
            .map(|sparse| {
                let mut w = vec![0.0; dim];
                for &(c, v) in sparse {
                    if let Some(slot) = w.get_mut(c as usize) {
                        *slot = v;
                    }
                }
                w
            })
            .collect();
        MulticlassLinearModel {
            ovr: LinearOvr {
                classes: f.classes,
                weights,
                biases: f.biases,
                class_weights: f.class_weights,
                reports: f.reports,
            },
            space: f.space,
            norm: f.norm,
            hyper: f.hyper,
            corpus_hash: f.corpus_hash,
            config_hash: f.config_hash,
        }
    }
}

impl MulticlassLinearModel {
    /// Fit features and classifiers on labelled profiles.
    pub fn train(
        profiles: &[&GramProfile],
        labels: &[&str],
        features: &crate::features::FeatureConfig,
        norm: &NormConfig,
        hp: &HyperParams,
    ) -> Result<Self> {
        let (space, rows) = FeatureSpace::fit(profiles, features)?;
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let ovr = train_ovr(&refs, labels, space.dim(), hp)?;
        Ok(MulticlassLinearModel {
            ovr,
            space,
            norm: norm.clone(),
            hyper: hp.clone(),
            corpus_hash: String::new(),
            config_hash: String::new(),
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.ovr.classes
    }

    pub fn decision_function(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.ovr.decision_function(x)
    }

    pub fn score_profile(&self, profile: &GramProfile) -> Result<Vec<f64>> {
        self.ovr.decision_function(&self.space.transform(profile)?)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<&str> {
        self.ovr.predict(x)
    }

    /// Positive and negative top-`k` `(gram, weight)` lists for `class`.
    #[allow(clippy::type_complexity)]
    pub fn top_coefficients(&self, class: &str, k: usize) -> Result<(Vec<(String, f64)>, Vec<(String, f64)>)> {
        let (pos, neg) = self.ovr.top_columns(class, k)?;
        let name = |v: Vec<(usize, f64)>| {
            v.into_iter()
                .map(|(c, w)| (self.space.vocab.gram(c).to_string(), w))
                .collect()
        };
        Ok((name(pos), name(neg)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(s)?;
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_VERSION as u64 => Ok(serde_json::from_value(probe)?),
            other => Err(Error::Data(format!(
                "unsupported model version {other:?}, expected {MODEL_VERSION}"
            ))),
        }
    }
}
