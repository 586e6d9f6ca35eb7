use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureSpec, FeatureVector};
use super::ClassifierError;
use crate::corpus::Category;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L2 penalty on the standardized weights; the bias is not penalized.
    pub lambda: f64,
    /// Stop once the gradient's infinity norm falls below this.
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            tol: 1e-6,
            max_epochs: 1000,
        }
    }
}

/// Row-compressed training matrix with 0/1 targets.
#[derive(Debug, Clone)]
pub struct Design {
    pub dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Design {
    pub fn new(vectors: &[FeatureVector], positive: Category) -> Self {
        let dim = vectors.first().map_or(0, FeatureVector::dim);
        let mut indptr = Vec::with_capacity(vectors.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for v in vectors {
            for (i, x) in v.entries() {
                indices.push(i as u32);
                values.push(x);
            }
            indptr.push(indices.len());
        }
        Design {
            dim,
            indptr,
            indices,
            values,
            targets: vectors
                .iter()
                .map(|v| if v.label == positive { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Builds a design from dense rows.
    pub fn from_dense(rows: &[Vec<f64>], targets: &[f64]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            for (i, &x) in r.iter().enumerate() {
                if x != 0.0 {
                    indices.push(i as u32);
                    values.push(x);
                }
            }
            indptr.push(indices.len());
        }
        Design {
            dim,
            indptr,
            indices,
            values,
            targets: targets.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }
}

/// Per-feature mean and scale from training data. Features constant over
/// the training rows get their exact value as mean and scale 1, so their
/// standardized value is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(design: &Design) -> Self {
        let n = design.rows();
        let d = design.dim;
        let mut nnz = vec![0usize; d];
        let mut sum = vec![0.0; d];
        let mut first = vec![f64::NAN; d];
        let mut constant = vec![true; d];
        for (&j, &x) in design.indices.iter().zip(&design.values) {
            let j = j as usize;
            if nnz[j] == 0 {
                first[j] = x;
            } else if x != first[j] {
                constant[j] = false;
            }
            nnz[j] += 1;
            sum[j] += x;
        }
        let mut mean = vec![0.0; d];
        for j in 0..d {
            if nnz[j] > 0 && nnz[j] < n {
                // a mix of zeros and nonzeros
                constant[j] = false;
            }
            mean[j] = if constant[j] {
                if nnz[j] == 0 {
                    0.0
                } else {
                    first[j]
                }
            } else {
                sum[j] / n as f64
            };
        }
        let mut sq = vec![0.0; d];
        for (&j, &x) in design.indices.iter().zip(&design.values) {
            let j = j as usize;
            sq[j] += (x - mean[j]).powi(2);
        }
        let scale = (0..d)
            .map(|j| {
                if constant[j] {
                    return 1.0;
                }
                let var = (sq[j] + (n - nnz[j]) as f64 * mean[j] * mean[j]) / n as f64;
                let s = var.sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }
}

/// Mean penalized negative log-likelihood over a design,
/// `(sum_i loss_i + lambda/2 |w|^2) / n`, with weights acting on
/// standardized features. Parameters are `[w_0, .., w_{d-1}, bias]`.
pub struct Objective<'a> {
    design: &'a Design,
    standardizer: &'a Standardizer,
    lambda: f64,
}

const CHUNK_ROWS: usize = 2048;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl<'a> Objective<'a> {
    pub fn new(design: &'a Design, standardizer: &'a Standardizer, lambda: f64) -> Self {
        Objective {
            design,
            standardizer,
            lambda,
        }
    }

    pub fn params_len(&self) -> usize {
        self.design.dim + 1
    }

    /// Raw-feature coefficients and intercept equivalent to `params`.
    fn raw_form(&self, params: &[f64]) -> (Vec<f64>, f64) {
        raw_form(params, self.standardizer)
    }

    fn pass(&self, params: &[f64], with_gradient: bool) -> (f64, Vec<f64>) {
        let d = self.design.dim;
        let n = self.design.rows();
        let (coef, intercept) = self.raw_form(params);
        let chunks: Vec<(f64, f64, Vec<f64>)> = (0..n.div_ceil(CHUNK_ROWS))
            .into_par_iter()
            .map(|c| {
                let mut loss = 0.0;
                let mut rsum = 0.0;
                let mut g = if with_gradient { vec![0.0; d] } else { Vec::new() };
                for i in c * CHUNK_ROWS..((c + 1) * CHUNK_ROWS).min(n) {
                    let (idx, val) = self.design.row(i);
                    let mut z = intercept;
                    for (&j, &x) in idx.iter().zip(val) {
                        z += coef[j as usize] * x;
                    }
                    let y = self.design.targets[i];
                    loss += softplus(z) - y * z;
                    if with_gradient {
                        let r = sigmoid(z) - y;
                        rsum += r;
                        for (&j, &x) in idx.iter().zip(val) {
                            g[j as usize] += r * x;
                        }
                    }
                }
                (loss, rsum, g)
            })
            .collect();
        // ordered reduction keeps results independent of thread count
        let mut loss = 0.0;
        let mut rsum = 0.0;
        let mut g = if with_gradient { vec![0.0; d] } else { Vec::new() };
        for (l, r, part) in chunks {
            loss += l;
            rsum += r;
            for (a, b) in g.iter_mut().zip(part) {
                *a += b;
            }
        }
        let w = &params[..d];
        let penalty: f64 = w.iter().map(|x| x * x).sum::<f64>() * self.lambda / 2.0;
        let nf = n as f64;
        let value = (loss + penalty) / nf;
        if !with_gradient {
            return (value, Vec::new());
        }
        let Standardizer { mean, scale } = self.standardizer;
        let mut grad = Vec::with_capacity(d + 1);
        for j in 0..d {
            grad.push(((g[j] - mean[j] * rsum) / scale[j] + self.lambda * w[j]) / nf);
        }
        grad.push(rsum / nf);
        (value, grad)
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        self.pass(params, false).0
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        self.pass(params, true)
    }
}

fn raw_form(params: &[f64], st: &Standardizer) -> (Vec<f64>, f64) {
    let d = params.len() - 1;
    let coef: Vec<f64> = (0..d).map(|j| params[j] / st.scale[j]).collect();
    let shift: f64 = (0..d).map(|j| coef[j] * st.mean[j]).sum();
    (coef, params[d] - shift)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub epochs: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub loss_history: Vec<f64>,
}

/// Logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    /// Category predicted when the probability is at least 0.5.
    pub positive: Category,
    pub negative: Category,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub vocabulary: Vec<String>,
    pub features: FeatureSpec,
    pub config: TrainConfig,
    pub seed: u64,
    pub diagnostics: TrainDiagnostics,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Minimizes the objective by full-batch gradient descent. The trial step
/// is the Barzilai-Borwein length from the previous iteration and is halved
/// until the Armijo sufficient-decrease condition holds, so the objective
/// never increases between accepted steps.
pub fn fit(
    design: &Design,
    standardizer: &Standardizer,
    config: &TrainConfig,
) -> Result<(Vec<f64>, TrainDiagnostics), ClassifierError> {
    if config.lambda.is_nan() || config.lambda < 0.0 {
        return Err(ClassifierError::InvalidConfig(format!("lambda {}", config.lambda)));
    }
    let objective = Objective::new(design, standardizer, config.lambda);
    let mut params = vec![0.0; objective.params_len()];
    let (mut value, mut grad) = objective.value_and_gradient(&params);
    if !value.is_finite() {
        return Err(ClassifierError::NonFinite);
    }
    let mut history = vec![value];
    let mut step = 1.0;
    let mut epochs = 0;
    let mut converged = inf_norm(&grad) < config.tol;
    while !converged && epochs < config.max_epochs {
        epochs += 1;
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (v, g) = objective.value_and_gradient(&trial);
            if !v.is_finite() {
                step *= 0.5;
                continue;
            }
            if v <= value - ARMIJO * step * g2 {
                accepted = Some((trial, v, g));
                break;
            }
            step *= 0.5;
        }
        let Some((next, v, g)) = accepted else {
            // no representable decrease left
            break;
        };
        let s: Vec<f64> = next.iter().zip(&params).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { step * 2.0 };
        params = next;
        value = v;
        grad = g;
        history.push(value);
        converged = inf_norm(&grad) < config.tol;
    }
    if !value.is_finite() || params.iter().any(|p| !p.is_finite()) {
        return Err(ClassifierError::NonFinite);
    }
    Ok((
        params,
        TrainDiagnostics {
            epochs,
            converged,
            grad_inf_norm: inf_norm(&grad),
            loss_history: history,
        },
    ))
}

/// Trains a model on featurized units. Standardization statistics come from
/// these vectors only.
pub fn train(
    vectors: &[FeatureVector],
    positive: Category,
    vocabulary: Vec<String>,
    features: FeatureSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel, ClassifierError> {
    let negative = positive
        .scheme()
        .categories()
        .into_iter()
        .find(|c| *c != positive)
        .expect("binary scheme");
    let has_pos = vectors.iter().any(|v| v.label == positive);
    let has_neg = vectors.iter().any(|v| v.label == negative);
    if vectors.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if !(has_pos && has_neg) {
        return Err(ClassifierError::SingleClass);
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(ClassifierError::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    let design = Design::new(vectors, positive);
    let standardizer = Standardizer::fit(&design);
    let (params, diagnostics) = fit(&design, &standardizer, config)?;
    Ok(TrainedModel {
        positive,
        negative,
        bias: params[dim],
        weights: params[..dim].to_vec(),
        standardizer,
        vocabulary,
        features,
        config: *config,
        seed,
        diagnostics,
    })
}

/// Model folded into raw-feature coefficients for fast scoring.
pub struct Predictor<'m> {
    model: &'m TrainedModel,
    coef: Vec<f64>,
    intercept: f64,
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predictor(&self) -> Predictor<'_> {
        let mut params = self.weights.clone();
        params.push(self.bias);
        let (coef, intercept) = raw_form(&params, &self.standardizer);
        Predictor {
            model: self,
            coef,
            intercept,
        }
    }

    /// Probability of the positive category.
    pub fn predict(&self, vector: &FeatureVector) -> Result<f64, ClassifierError> {
        self.predictor().probability(vector)
    }

    /// Positive iff the probability is at least 0.5.
    pub fn label_for(&self, probability: f64) -> Category {
        if probability >= 0.5 {
            self.positive
        } else {
            self.negative
        }
    }
}

impl Predictor<'_> {
    pub fn probability(&self, vector: &FeatureVector) -> Result<f64, ClassifierError> {
        if vector.dim() != self.coef.len() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.coef.len(),
                got: vector.dim(),
            });
        }
        let z = vector
            .entries()
            .fold(self.intercept, |z, (j, x)| z + self.coef[j] * x);
        Ok(sigmoid(z))
    }

    pub fn label(&self, vector: &FeatureVector) -> Result<Category, ClassifierError> {
        self.probability(vector).map(|p| self.model.label_for(p))
    }
}
