use serde::{Deserialize, Serialize};

use super::features::{build_vocabulary, vectorize_all, FeatureSet, FeatureSpec, FeatureVector};
use super::model::{train, TrainConfig, TrainedModel};
use super::ClassifierError;
use crate::cohorts::{Unit, UnitKind};
use crate::corpus::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdErrorKind {
    /// `sqrt(p (1 - p) / n)` over one test set.
    Binomial,
    /// Sample standard deviation of fold accuracies over `sqrt(k)`.
    FoldSpread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub std_error: f64,
    pub std_error_kind: StdErrorKind,
    pub correct: usize,
    pub n_test: usize,
    pub mode: UnitKind,
    pub features: FeatureSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_accuracies: Option<Vec<f64>>,
}

impl EvalReport {
    /// `accuracy ± std_error` in percent, two decimals.
    pub fn table_row(&self) -> String {
        format!("{:.2} ± {:.2} %", self.accuracy * 100.0, self.std_error * 100.0)
    }
}

/// Binomial standard error of an accuracy measured on `n` items.
pub fn binomial_std_error(accuracy: f64, n: usize) -> f64 {
    (accuracy * (1.0 - accuracy) / n as f64).sqrt()
}

/// Sample standard deviation of the fold accuracies divided by `sqrt(k)`.
pub fn fold_std_error(accuracies: &[f64]) -> f64 {
    let k = accuracies.len();
    if k < 2 {
        return 0.0;
    }
    let mean = accuracies.iter().sum::<f64>() / k as f64;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    var.sqrt() / (k as f64).sqrt()
}

fn count_correct(model: &TrainedModel, vectors: &[FeatureVector]) -> Result<usize, ClassifierError> {
    let predictor = model.predictor();
    let mut correct = 0;
    for v in vectors {
        if predictor.label(v)? == v.label {
            correct += 1;
        }
    }
    Ok(correct)
}

pub fn evaluate(
    model: &TrainedModel,
    vectors: &[FeatureVector],
    mode: UnitKind,
) -> Result<EvalReport, ClassifierError> {
    if vectors.is_empty() {
        return Err(ClassifierError::EmptyTestSet);
    }
    let correct = count_correct(model, vectors)?;
    let n = vectors.len();
    let accuracy = correct as f64 / n as f64;
    Ok(EvalReport {
        accuracy,
        std_error: binomial_std_error(accuracy, n),
        std_error_kind: StdErrorKind::Binomial,
        correct,
        n_test: n,
        mode,
        features: model.features.features,
        fold_accuracies: None,
    })
}

/// Builds the vocabulary on `train`, featurizes both sides and fits a model.
pub fn fit_units(
    corpus: &Corpus,
    train_units: &[&Unit],
    spec: &FeatureSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedModel, ClassifierError> {
    let first = train_units.first().ok_or(ClassifierError::EmptyTrainingSet)?;
    let positive = first.category.scheme().categories()[1];
    let lexical = spec.lexical_config();
    let vocab = build_vocabulary(corpus, train_units, spec.vocab_size, &lexical)?;
    let vectors = vectorize_all(
        corpus,
        train_units,
        &vocab,
        &lexical,
        spec.features.includes_nonlex(),
    );
    let terms = vocab.terms().iter().map(|t| t.to_string()).collect();
    train(&vectors, positive, terms, spec.clone(), config, seed)
}

/// Featurizes units with a trained model's vocabulary and settings.
pub fn featurize_for(model: &TrainedModel, corpus: &Corpus, units: &[&Unit]) -> Vec<FeatureVector> {
    let vocab = super::features::Vocabulary::from_terms(
        model.vocabulary.iter().map(|t| t.as_str().into()).collect(),
    );
    vectorize_all(
        corpus,
        units,
        &vocab,
        &model.features.lexical_config(),
        model.features.features.includes_nonlex(),
    )
}

/// K-fold cross-validation over `units` with precomputed folds (indices
/// into `units`). Each fold gets its own vocabulary and standardization,
/// fitted on the remaining folds.
pub fn cross_validate(
    corpus: &Corpus,
    units: &[Unit],
    folds: &[Vec<usize>],
    spec: &FeatureSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<EvalReport, ClassifierError> {
    if folds.len() < 2 {
        return Err(ClassifierError::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    let mut correct = 0;
    let mut total = 0;
    let mut accuracies = Vec::with_capacity(folds.len());
    let mode = units.first().map_or(UnitKind::Speaker, Unit::kind);
    for (k, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            return Err(ClassifierError::EmptyTestSet);
        }
        let train_units: Vec<&Unit> = folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().map(|&i| &units[i]))
            .collect();
        let test_units: Vec<&Unit> = fold.iter().map(|&i| &units[i]).collect();
        let model = fit_units(corpus, &train_units, spec, config, seed)?;
        let vectors = featurize_for(&model, corpus, &test_units);
        let c = count_correct(&model, &vectors)?;
        correct += c;
        total += vectors.len();
        accuracies.push(c as f64 / vectors.len() as f64);
    }
    Ok(EvalReport {
        accuracy: correct as f64 / total as f64,
        std_error: fold_std_error(&accuracies),
        std_error_kind: StdErrorKind::FoldSpread,
        correct,
        n_test: total,
        mode,
        features: spec.features,
        fold_accuracies: Some(accuracies),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_examples() {
        assert!((binomial_std_error(0.5, 100) - 0.05).abs() < 1e-15);
        assert_eq!(binomial_std_error(1.0, 37), 0.0);
    }

    #[test]
    fn fold_spread() {
        assert!(fold_std_error(&[0.8, 0.8, 0.8]) < 1e-15);
        // sd of {0.6, 0.8} is sqrt(0.02); / sqrt(2) = 0.1
        assert!((fold_std_error(&[0.6, 0.8]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn table_row_format() {
        let r = EvalReport {
            accuracy: 0.7095,
            std_error: 0.0538,
            std_error_kind: StdErrorKind::FoldSpread,
            correct: 0,
            n_test: 0,
            mode: UnitKind::Speaker,
            features: FeatureSet::Lexical,
            fold_accuracies: None,
        };
        assert_eq!(r.table_row(), "70.95 ± 5.38 %");
    }
}
