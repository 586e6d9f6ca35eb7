//! Per-category n-gram counts and Scaled F-score term salience.
//!
//! The score used here is rank based: term precision and term frequency are
//! converted to average-tie rank percentiles `(rank - 0.5) / T` over all `T`
//! terms, combined by a harmonic mean per side, and the two sides are
//! differenced. Percentiles compress the long tail of precision values so
//! that rare terms with perfect precision do not dominate the ranking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Category, Corpus, Scheme, Surface};
use crate::rng;
use crate::tokenizer::{LexicalConfig, NGram, Orders, Stoplist};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SalienceError {
    #[error("no speakers in category `{0}`")]
    EmptyCategory(Category),
    #[error("category `{category}` is not part of the {scheme} scheme")]
    WrongScheme { category: Category, scheme: Scheme },
    #[error("no terms to score")]
    EmptyVocabulary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryCounts {
    pub category: Category,
    pub counts: BTreeMap<NGram, u64>,
    /// Token (unigram occurrence) total before any term pruning.
    pub total_tokens: u64,
}

#[derive(Debug, Clone)]
pub struct CountOptions {
    pub scheme: Scheme,
    /// Terms whose combined count over both categories is below this are dropped.
    pub min_count: u64,
    pub lexical: LexicalConfig,
    /// Count at most this many speakers per category in each conversation.
    pub per_conversation: Option<usize>,
    pub seed: u64,
}

impl CountOptions {
    pub fn new(scheme: Scheme) -> Self {
        CountOptions {
            scheme,
            min_count: 5,
            lexical: LexicalConfig {
                include_particles: true,
                stoplist: Some(Stoplist::english()),
                orders: Orders::BOTH,
            },
            per_conversation: None,
            seed: 0,
        }
    }
}

#[derive(Default)]
struct Tally {
    counts: HashMap<Surface, [u64; 2]>,
    totals: [u64; 2],
    turns: [u64; 2],
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (k, v) in small {
            let e = big.entry(k).or_default();
            e[0] += v[0];
            e[1] += v[1];
        }
        Tally {
            counts: big,
            totals: [self.totals[0] + other.totals[0], self.totals[1] + other.totals[1]],
            turns: [self.turns[0] + other.turns[0], self.turns[1] + other.turns[1]],
        }
    }
}

/// Counts n-grams for both categories of the scheme in one pass.
pub fn build_pair(
    corpus: &Corpus,
    opts: &CountOptions,
) -> Result<(CategoryCounts, CategoryCounts), SalienceError> {
    let cats = opts.scheme.categories();
    let tally = corpus
        .conversations
        .par_iter()
        .fold(Tally::default, |mut acc, conv| {
            let selected: Option<Vec<&Surface>> = opts.per_conversation.map(|k| {
                let mut chosen = Vec::new();
                for cat in cats {
                    let mut ids: Vec<&Surface> = conv
                        .speaker_ids
                        .iter()
                        .filter(|id| corpus.category_of_speaker(id, opts.scheme) == Some(cat))
                        .collect();
                    let mut r = rng::stream(opts.seed, &format!("salience/{}", conv.id));
                    rng::shuffle(&mut r, &mut ids);
                    ids.truncate(k);
                    chosen.extend(ids);
                }
                chosen
            });
            let mut buf = String::new();
            for turn in &conv.turns {
                if let Some(sel) = &selected {
                    if !sel.contains(&&turn.speaker) {
                        continue;
                    }
                }
                let Some(cat) = corpus.category_of_speaker(&turn.speaker, opts.scheme) else {
                    continue;
                };
                let side = usize::from(cat == cats[1]);
                acc.totals[side] += opts.lexical.token_count(turn) as u64;
                acc.turns[side] += 1;
                opts.lexical.visit_ngrams(turn, &mut buf, |g| {
                    if let Some(e) = acc.counts.get_mut(g) {
                        e[side] += 1;
                    } else {
                        let mut e = [0; 2];
                        e[side] = 1;
                        acc.counts.insert(Surface::from(g), e);
                    }
                });
            }
            acc
        })
        .reduce(Tally::default, Tally::merge);

    for (side, cat) in cats.iter().enumerate() {
        if tally.turns[side] == 0 {
            return Err(SalienceError::EmptyCategory(*cat));
        }
    }
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for (term, [na, nb]) in tally.counts {
        if na + nb < opts.min_count {
            continue;
        }
        let term = NGram(term);
        if na > 0 {
            a.insert(term.clone(), na);
        }
        if nb > 0 {
            b.insert(term, nb);
        }
    }
    Ok((
        CategoryCounts {
            category: cats[0],
            counts: a,
            total_tokens: tally.totals[0],
        },
        CategoryCounts {
            category: cats[1],
            counts: b,
            total_tokens: tally.totals[1],
        },
    ))
}

/// Counts for a single category; pruning uses the combined count over the
/// scheme's two categories.
pub fn build_counts(
    corpus: &Corpus,
    category: Category,
    opts: &CountOptions,
) -> Result<CategoryCounts, SalienceError> {
    if category.scheme() != opts.scheme {
        return Err(SalienceError::WrongScheme {
            category,
            scheme: opts.scheme,
        });
    }
    let (a, b) = build_pair(corpus, opts)?;
    Ok(if a.category == category { a } else { b })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermScore {
    pub term: String,
    pub count_a: u64,
    pub count_b: u64,
    pub precision_a: f64,
    pub freq_a: f64,
    pub pct_precision_a: f64,
    pub pct_freq_a: f64,
    pub pct_precision_b: f64,
    pub pct_freq_b: f64,
    pub sfs: f64,
}

impl TermScore {
    pub fn combined(&self) -> u64 {
        self.count_a + self.count_b
    }
}

/// Average-tie rank percentiles `(rank - 0.5) / n` with 1-based ranks.
pub fn rank_percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share the mean rank
        let rank = (start + 1 + end) as f64 / 2.0;
        let pct = (rank - 0.5) / n as f64;
        for &i in &order[start..end] {
            out[i] = pct;
        }
        start = end;
    }
    out
}

pub fn harmonic_mean(p: f64, q: f64) -> f64 {
    if p <= 0.0 || q <= 0.0 {
        0.0
    } else {
        2.0 * p * q / (p + q)
    }
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn by_sfs_desc(x: &TermScore, y: &TermScore) -> Ordering {
    y.sfs
        .total_cmp(&x.sfs)
        .then(y.combined().cmp(&x.combined()))
        .then_with(|| x.term.cmp(&y.term))
}

fn by_sfs_asc(x: &TermScore, y: &TermScore) -> Ordering {
    x.sfs
        .total_cmp(&y.sfs)
        .then(y.combined().cmp(&x.combined()))
        .then_with(|| x.term.cmp(&y.term))
}

/// Scores every term of the union vocabulary; positive scores favour `a`.
/// Swapping the arguments negates every score exactly.
pub fn scaled_f_score(
    a: &CategoryCounts,
    b: &CategoryCounts,
) -> Result<Vec<TermScore>, SalienceError> {
    let mut terms: BTreeMap<&NGram, (u64, u64)> = BTreeMap::new();
    for (t, &n) in &a.counts {
        terms.entry(t).or_default().0 += n;
    }
    for (t, &n) in &b.counts {
        terms.entry(t).or_default().1 += n;
    }
    terms.retain(|_, (na, nb)| *na + *nb > 0);
    if terms.is_empty() {
        return Err(SalienceError::EmptyVocabulary);
    }

    let counts: Vec<(u64, u64)> = terms.values().copied().collect();
    let prec_a: Vec<f64> = counts.iter().map(|&(na, nb)| ratio(na, na + nb)).collect();
    let prec_b: Vec<f64> = counts.iter().map(|&(na, nb)| ratio(nb, na + nb)).collect();
    let freq_a: Vec<f64> = counts.iter().map(|&(na, _)| ratio(na, a.total_tokens)).collect();
    let freq_b: Vec<f64> = counts.iter().map(|&(_, nb)| ratio(nb, b.total_tokens)).collect();
    let pp_a = rank_percentiles(&prec_a);
    let pf_a = rank_percentiles(&freq_a);
    let pp_b = rank_percentiles(&prec_b);
    let pf_b = rank_percentiles(&freq_b);

    let mut scores: Vec<TermScore> = terms
        .keys()
        .enumerate()
        .map(|(i, term)| {
            let hm_a = harmonic_mean(pp_a[i], pf_a[i]);
            let hm_b = harmonic_mean(pp_b[i], pf_b[i]);
            TermScore {
                term: term.to_string(),
                count_a: counts[i].0,
                count_b: counts[i].1,
                precision_a: prec_a[i],
                freq_a: freq_a[i],
                pct_precision_a: pp_a[i],
                pct_freq_a: pf_a[i],
                pct_precision_b: pp_b[i],
                pct_freq_b: pf_b[i],
                sfs: hm_a - hm_b,
            }
        })
        .collect();
    scores.sort_by(by_sfs_desc);
    Ok(scores)
}

/// The `k` most characteristic terms of each side: highest scores for `a`,
/// lowest for `b`. Ties go to the more frequent term, then lexicographic order.
pub fn top_terms(scores: &[TermScore], k: usize) -> (Vec<TermScore>, Vec<TermScore>) {
    let mut a = scores.to_vec();
    a.sort_by(by_sfs_desc);
    a.truncate(k);
    let mut b = scores.to_vec();
    b.sort_by(by_sfs_asc);
    b.truncate(k);
    (a, b)
}

pub const PLOT_HEADER: &str = "term,count_a,count_b,pct_freq_a,pct_freq_b,sfs";

/// Scatter-plot table, one row per term, sorted by descending score. Floats
/// are written in shortest round-trip form.
pub fn plot_data<W: Write>(scores: &[TermScore], out: W) -> csv::Result<()> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(by_sfs_desc);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER.split(','))?;
    for s in &sorted {
        w.write_record([
            s.term.clone(),
            s.count_a.to_string(),
            s.count_b.to_string(),
            s.pct_freq_a.to_string(),
            s.pct_freq_b.to_string(),
            s.sfs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
