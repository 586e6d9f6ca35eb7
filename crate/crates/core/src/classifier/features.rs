use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::cohorts::Unit;
use crate::corpus::{Category, Corpus, Surface};
use crate::nonlex::{turn_features, FeatureCounts, FEATURE_COUNT};
use crate::tokenizer::{LexicalConfig, Orders, Stoplist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "lex")]
    Lexical,
    #[serde(rename = "lex+nonlex")]
    LexicalNonLexical,
}

impl FeatureSet {
    pub fn includes_nonlex(self) -> bool {
        self == FeatureSet::LexicalNonLexical
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Lexical => "lex",
            FeatureSet::LexicalNonLexical => "lex+nonlex",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lex" => Ok(FeatureSet::Lexical),
            "lex+nonlex" => Ok(FeatureSet::LexicalNonLexical),
            other => Err(format!("unknown feature set `{other}` (expected lex or lex+nonlex)")),
        }
    }
}

/// Serializable description of how units are featurized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub features: FeatureSet,
    pub vocab_size: usize,
    /// Particles are non-lexical by default and excluded from n-grams.
    pub lexical_particles: bool,
    /// Stopwords removed from lexical n-grams; `None` keeps every token.
    pub stopwords: Option<Vec<String>>,
    pub orders: Orders,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            features: FeatureSet::LexicalNonLexical,
            vocab_size: 5000,
            lexical_particles: false,
            stopwords: None,
            orders: Orders::BOTH,
        }
    }
}

impl FeatureSpec {
    pub fn lexical_config(&self) -> LexicalConfig {
        LexicalConfig {
            include_particles: self.lexical_particles,
            stoplist: self
                .stopwords
                .as_ref()
                .map(|w| Stoplist::from_words(w.iter().map(String::as_str))),
            orders: self.orders,
        }
    }
}

/// Ordered lexical feature inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<Surface>,
    index: HashMap<Surface, u32>,
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<Surface>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { terms, index }
    }

    pub fn terms(&self) -> &[Surface] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }
}

/// Top-`size` n-grams by total frequency over the training units, ties broken
/// lexicographically.
pub fn build_vocabulary(
    corpus: &Corpus,
    train: &[&Unit],
    size: usize,
    lexical: &LexicalConfig,
) -> Result<Vocabulary, ClassifierError> {
    if train.is_empty() || size == 0 {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let counts = train
        .par_iter()
        .fold(HashMap::<Surface, u64>::new, |mut acc, unit| {
            let mut buf = String::new();
            for &t in unit.turns() {
                lexical.visit_ngrams(corpus.turn(t), &mut buf, |g| {
                    if let Some(c) = acc.get_mut(g) {
                        *c += 1;
                    } else {
                        acc.insert(Surface::from(g), 1);
                    }
                });
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge_counts(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let mut ranked: Vec<(Surface, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(size);
    Ok(Vocabulary::from_terms(ranked.into_iter().map(|(t, _)| t).collect()))
}

fn merge_counts(mut big: HashMap<Surface, u64>, small: HashMap<Surface, u64>) -> HashMap<Surface, u64> {
    for (k, v) in small {
        *big.entry(k).or_default() += v;
    }
    big
}

/// Featurized unit. Lexical entries are sorted by vocabulary index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub lexical: Vec<(u32, f64)>,
    pub nonlexical: Option<[f64; FEATURE_COUNT]>,
    pub label: Category,
    /// Vocabulary size the lexical indices refer to.
    pub vocab_len: usize,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.vocab_len + if self.nonlexical.is_some() { FEATURE_COUNT } else { 0 }
    }

    /// Nonzero entries over the full dimension, nonlexical features last.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let base = self.vocab_len;
        self.lexical
            .iter()
            .map(|&(i, v)| (i as usize, v))
            .chain(
                self.nonlexical
                    .iter()
                    .flat_map(|n| n.iter().copied().enumerate())
                    .filter(|(_, v)| *v != 0.0)
                    .map(move |(i, v)| (base + i, v)),
            )
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, v) in self.entries() {
            out[i] = v;
        }
        out
    }
}

/// Vectorizes one unit: in-vocabulary n-gram counts divided by the unit's
/// lexical token count, plus the nine non-lexical rates when requested.
pub fn vectorize(
    corpus: &Corpus,
    unit: &Unit,
    vocab: &Vocabulary,
    lexical: &LexicalConfig,
    include_nonlex: bool,
) -> FeatureVector {
    let mut hits: Vec<u32> = Vec::new();
    let mut tokens = 0usize;
    let mut counts = FeatureCounts::default();
    let mut buf = String::new();
    for &t in unit.turns() {
        let turn = corpus.turn(t);
        tokens += lexical.token_count(turn);
        lexical.visit_ngrams(turn, &mut buf, |g| {
            if let Some(i) = vocab.get(g) {
                hits.push(i);
            }
        });
        if include_nonlex {
            counts += turn_features(turn);
        }
    }
    hits.sort_unstable();
    let mut lex = Vec::new();
    if tokens > 0 {
        let denom = tokens as f64;
        for chunk in hits.chunk_by(|a, b| a == b) {
            lex.push((chunk[0], chunk.len() as f64 / denom));
        }
    }
    FeatureVector {
        lexical: lex,
        nonlexical: include_nonlex
            .then(|| counts.rates(unit.word_tokens as u64, unit.turns().len() as u64)),
        label: unit.category,
        vocab_len: vocab.len(),
    }
}

pub fn vectorize_all(
    corpus: &Corpus,
    units: &[&Unit],
    vocab: &Vocabulary,
    lexical: &LexicalConfig,
    include_nonlex: bool,
) -> Vec<FeatureVector> {
    units
        .par_iter()
        .map(|u| vectorize(corpus, u, vocab, lexical, include_nonlex))
        .collect()
}
