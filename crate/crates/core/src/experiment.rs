//! End-to-end classification experiments driven by a serializable config.
//!
//! A report carries the fully resolved config; running that config again
//! reproduces the report exactly.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{
    cross_validate, evaluate, featurize_for, fit_units, ClassifierError, EvalReport, FeatureSet,
    FeatureSpec, TrainConfig,
};
use crate::cohorts::{
    balance, filter_min_talk, holdout_split, kfold_indices, speaker_units, turn_units, CohortError,
    Unit, UnitKind,
};
use crate::corpus::{load_corpus, Category, Corpus, CorpusError, Scheme};
use crate::tokenizer::Orders;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// Stratified k-fold cross-validation over the balanced units.
    CrossValidation { folds: usize },
    /// One stratified train/test split.
    Holdout { test_fraction: f64 },
    /// A holdout split with k-fold cross-validation run inside the training
    /// part. The headline result is the holdout; the inner CV is reported
    /// alongside it.
    HoldoutWithCv { test_fraction: f64, folds: usize },
}

impl Evaluation {
    pub fn protocol(&self) -> &'static str {
        match self {
            Evaluation::CrossValidation { .. } => "cv over all units",
            Evaluation::Holdout { .. } => "holdout",
            Evaluation::HoldoutWithCv { .. } => "cv within the training part, then holdout",
        }
    }
}

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.5;
pub const DEFAULT_MIN_TOKENS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    pub scheme: Scheme,
    pub unit: UnitKind,
    pub features: FeatureSet,
    pub seed: u64,
    /// Speakers with fewer word tokens are left out. Only applies to
    /// speaker units.
    pub min_tokens: usize,
    pub balance: bool,
    pub evaluation: Evaluation,
    /// Drop turns made only of pauses and overlap marks (turn units).
    pub drop_empty_turns: bool,
    /// Keep all turns of a speaker on the same side of every split (turn
    /// units).
    pub speaker_guard: bool,
    pub vocab_size: usize,
    pub lexical_particles: bool,
    pub stopwords: Option<Vec<String>>,
    pub orders: Orders,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    /// Defaults: CV with 10 folds for speakers, a 50/50 holdout for turns.
    pub fn new(corpus: impl Into<PathBuf>, scheme: Scheme, unit: UnitKind) -> Self {
        let spec = FeatureSpec::default();
        ExperimentConfig {
            corpus: corpus.into(),
            scheme,
            unit,
            features: spec.features,
            seed: 0,
            min_tokens: DEFAULT_MIN_TOKENS,
            balance: true,
            evaluation: match unit {
                UnitKind::Speaker => Evaluation::CrossValidation {
                    folds: DEFAULT_FOLDS,
                },
                UnitKind::Turn => Evaluation::Holdout {
                    test_fraction: DEFAULT_TEST_FRACTION,
                },
            },
            drop_empty_turns: false,
            speaker_guard: true,
            vocab_size: spec.vocab_size,
            lexical_particles: spec.lexical_particles,
            stopwords: spec.stopwords,
            orders: spec.orders,
            train: TrainConfig::default(),
        }
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        FeatureSpec {
            features: self.features,
            vocab_size: self.vocab_size,
            lexical_particles: self.lexical_particles,
            stopwords: self.stopwords.clone(),
            orders: self.orders,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{}", join(.0))]
    Corpus(Vec<CorpusError>),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

fn join(errors: &[CorpusError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: Category,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Units per category after filtering and balancing.
    pub units: Vec<CategoryCount>,
    pub protocol: String,
    pub result: EvalReport,
    /// Inner cross-validation of `HoldoutWithCv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_cv: Option<EvalReport>,
    /// `accuracy ± std_error %`.
    pub summary: String,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let corpus = load_corpus(Path::new(&config.corpus)).map_err(ExperimentError::Corpus)?;
    run_on(&corpus, config)
}

/// Units of the experiment after filtering and balancing.
pub fn experiment_units(corpus: &Corpus, config: &ExperimentConfig) -> Result<Vec<Unit>, CohortError> {
    let units = match config.unit {
        UnitKind::Speaker => filter_min_talk(speaker_units(corpus, config.scheme), config.min_tokens),
        UnitKind::Turn => turn_units(corpus, config.scheme, config.drop_empty_turns),
    };
    if config.balance {
        balance(units, config.seed)
    } else {
        Ok(units)
    }
}

/// Stratified folds over `units`. With the speaker guard on turn units, speakers are
/// dealt to folds and their turns follow them.
pub fn folds_for(units: &[Unit], k: usize, seed: u64, grouped: bool) -> Result<Vec<Vec<usize>>, CohortError> {
    if !grouped {
        return kfold_indices(&units.iter().map(|u| u.category).collect::<Vec<_>>(), k, seed);
    }
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut speaker_cats = Vec::new();
    for u in units {
        slot.entry(u.speaker.as_str()).or_insert_with(|| {
            speaker_cats.push(u.category);
            speaker_cats.len() - 1
        });
    }
    let speaker_folds = kfold_indices(&speaker_cats, k, seed)?;
    let mut fold_of = vec![0; speaker_cats.len()];
    for (f, members) in speaker_folds.iter().enumerate() {
        for &s in members {
            fold_of[s] = f;
        }
    }
    let mut folds = vec![Vec::new(); k];
    for (i, u) in units.iter().enumerate() {
        folds[fold_of[slot[u.speaker.as_str()]]].push(i);
    }
    Ok(folds)
}

pub fn run_on(corpus: &Corpus, config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let units = experiment_units(corpus, config)?;
    let spec = config.feature_spec();
    let grouped = config.unit == UnitKind::Turn && config.speaker_guard;
    let holdout = |test_fraction: f64| -> Result<(Vec<usize>, EvalReport), ExperimentError> {
        let split = holdout_split(&units, test_fraction, config.seed, grouped)?;
        let train: Vec<&Unit> = split.train.iter().map(|&i| &units[i]).collect();
        let test: Vec<&Unit> = split.test.iter().map(|&i| &units[i]).collect();
        let model = fit_units(corpus, &train, &spec, &config.train, config.seed)?;
        let report = evaluate(&model, &featurize_for(&model, corpus, &test), config.unit)?;
        Ok((split.train, report))
    };
    let (result, inner_cv) = match config.evaluation {
        Evaluation::CrossValidation { folds } => {
            let folds = folds_for(&units, folds, config.seed, grouped)?;
            let cv = cross_validate(corpus, &units, &folds, &spec, &config.train, config.seed)?;
            (cv, None)
        }
        Evaluation::Holdout { test_fraction } => (holdout(test_fraction)?.1, None),
        Evaluation::HoldoutWithCv { test_fraction, folds } => {
            let (train, report) = holdout(test_fraction)?;
            let train_units: Vec<Unit> = train.iter().map(|&i| units[i].clone()).collect();
            let folds = folds_for(&train_units, folds, config.seed, grouped)?;
            let cv = cross_validate(corpus, &train_units, &folds, &spec, &config.train, config.seed)?;
            (report, Some(cv))
        }
    };
    let counts = config
        .scheme
        .categories()
        .into_iter()
        .map(|category| CategoryCount {
            category,
            units: units.iter().filter(|u| u.category == category).count(),
        })
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        units: counts,
        protocol: config.evaluation.protocol().to_string(),
        summary: result.table_row(),
        result,
        inner_cv,
    })
}
