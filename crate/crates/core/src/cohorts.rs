//! Classification units, balanced cohorts and seeded train/test splits.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, Write};

use serde::Serialize;

use crate::corpus::{Category, Corpus, Event, Scheme, Surface, TurnRef};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Speaker,
    Turn,
}

impl std::str::FromStr for UnitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "speaker" => Ok(UnitKind::Speaker),
            "turn" => Ok(UnitKind::Turn),
            other => Err(format!("unknown unit `{other}` (expected speaker or turn)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Every turn of one speaker, in corpus order.
    Speaker(Vec<TurnRef>),
    Turn(TurnRef),
}

/// Something to classify: all talk of one speaker, or a single turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub id: String,
    pub speaker: Surface,
    pub category: Category,
    pub payload: Payload,
    /// Word and particle tokens in the payload.
    pub word_tokens: usize,
}

impl Unit {
    pub fn kind(&self) -> UnitKind {
        match self.payload {
            Payload::Speaker(_) => UnitKind::Speaker,
            Payload::Turn(_) => UnitKind::Turn,
        }
    }

    pub fn turns(&self) -> &[TurnRef] {
        match &self.payload {
            Payload::Speaker(t) => t,
            Payload::Turn(t) => std::slice::from_ref(t),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CohortError {
    #[error("no units in category `{0}`")]
    EmptyCategory(Category),
    #[error("too few units: {0}")]
    TooFewUnits(String),
    #[error("units mix categories from different schemes")]
    MixedSchemes,
    #[error("test fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
}

/// One unit per categorized speaker that has at least one turn, ordered by
/// speaker id.
pub fn speaker_units(corpus: &Corpus, scheme: Scheme) -> Vec<Unit> {
    let mut by_speaker: HashMap<&str, (Vec<TurnRef>, usize)> = HashMap::new();
    for (ci, conv) in corpus.conversations.iter().enumerate() {
        for turn in &conv.turns {
            let e = by_speaker.entry(turn.speaker.as_str()).or_default();
            e.0.push(TurnRef {
                conversation: ci as u32,
                turn: turn.index as u32,
            });
            e.1 += turn.word_count();
        }
    }
    corpus
        .speakers
        .values()
        .filter_map(|profile| {
            let category = crate::corpus::category_of(profile, scheme)?;
            let (turns, words) = by_speaker.remove(profile.id.as_str())?;
            Some(Unit {
                id: profile.id.to_string(),
                speaker: profile.id.clone(),
                category,
                payload: Payload::Speaker(turns),
                word_tokens: words,
            })
        })
        .collect()
}

fn is_empty_content(events: &[Event]) -> bool {
    events
        .iter()
        .all(|e| matches!(e, Event::Pause(_) | Event::OverlapMark))
}

/// One unit per turn of a categorized speaker, in corpus order. Turns made of
/// nothing but pauses and overlap marks are dropped when `drop_empty` is set.
pub fn turn_units(corpus: &Corpus, scheme: Scheme, drop_empty: bool) -> Vec<Unit> {
    let mut units = Vec::new();
    for (ci, conv) in corpus.conversations.iter().enumerate() {
        for turn in &conv.turns {
            let Some(category) = corpus.category_of_speaker(&turn.speaker, scheme) else {
                continue;
            };
            if drop_empty && is_empty_content(&turn.events) {
                continue;
            }
            units.push(Unit {
                id: format!("{}#{}", conv.id, turn.index),
                speaker: turn.speaker.clone(),
                category,
                payload: Payload::Turn(TurnRef {
                    conversation: ci as u32,
                    turn: turn.index as u32,
                }),
                word_tokens: turn.word_count(),
            });
        }
    }
    units
}

/// Keeps units with at least `min_tokens` word tokens, preserving order.
pub fn filter_min_talk(units: Vec<Unit>, min_tokens: usize) -> Vec<Unit> {
    let mut units = units;
    units.retain(|u| u.word_tokens >= min_tokens);
    units
}

/// The two categories of the scheme the units belong to.
fn scheme_of(categories: &[Category]) -> Result<Scheme, CohortError> {
    let first = categories
        .first()
        .ok_or_else(|| CohortError::TooFewUnits("no units".into()))?;
    let scheme = first.scheme();
    if categories.iter().any(|c| c.scheme() != scheme) {
        return Err(CohortError::MixedSchemes);
    }
    Ok(scheme)
}

/// Downsamples the majority category uniformly at random to the size of the
/// minority. Output keeps the input order.
pub fn balance(units: Vec<Unit>, seed: u64) -> Result<Vec<Unit>, CohortError> {
    let cats: Vec<Category> = units.iter().map(|u| u.category).collect();
    let keep = balanced_selection(&cats, seed)?;
    Ok(units
        .into_iter()
        .zip(keep)
        .filter_map(|(u, k)| k.then_some(u))
        .collect())
}

fn balanced_selection(cats: &[Category], seed: u64) -> Result<Vec<bool>, CohortError> {
    let scheme = scheme_of(cats)?;
    let [a, b] = scheme.categories();
    let idx_a: Vec<usize> = (0..cats.len()).filter(|&i| cats[i] == a).collect();
    let idx_b: Vec<usize> = (0..cats.len()).filter(|&i| cats[i] == b).collect();
    for (cat, idx) in [(a, &idx_a), (b, &idx_b)] {
        if idx.is_empty() {
            return Err(CohortError::EmptyCategory(cat));
        }
    }
    let (mut major, minor) = if idx_a.len() >= idx_b.len() {
        (idx_a, idx_b)
    } else {
        (idx_b, idx_a)
    };
    let mut keep = vec![false; cats.len()];
    for &i in &minor {
        keep[i] = true;
    }
    rng::shuffle(&mut rng::stream(seed, "balance"), &mut major);
    for &i in &major[..minor.len()] {
        keep[i] = true;
    }
    Ok(keep)
}

/// Train/test partition as indices into the unit list, plus optional folds
/// over the training indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub folds: Option<Vec<Vec<usize>>>,
    pub seed: u64,
}

/// Stratified holdout. Each category sends `round(n * test_fraction)` units to
/// the test side. With `group_by_speaker`, all units of a speaker land on the
/// same side and the test share is filled greedily by whole speakers.
pub fn holdout_split(
    units: &[Unit],
    test_fraction: f64,
    seed: u64,
    group_by_speaker: bool,
) -> Result<Split, CohortError> {
    let cats: Vec<Category> = units.iter().map(|u| u.category).collect();
    let groups: Vec<&str> = if group_by_speaker {
        units.iter().map(|u| u.speaker.as_str()).collect()
    } else {
        units.iter().map(|u| u.id.as_str()).collect()
    };
    let (train, test) = holdout_indices(&cats, &groups, test_fraction, seed)?;
    Ok(Split {
        train,
        test,
        folds: None,
        seed,
    })
}

fn holdout_indices(
    cats: &[Category],
    groups: &[&str],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CohortError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CohortError::InvalidFraction(test_fraction));
    }
    let scheme = scheme_of(cats)?;
    let mut test_mask = vec![false; cats.len()];
    for cat in scheme.categories() {
        // group key -> member indices, in first-appearance order
        let mut order: Vec<&str> = Vec::new();
        let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, _) in cats.iter().enumerate().filter(|(_, c)| **c == cat) {
            members
                .entry(groups[i])
                .or_insert_with(|| {
                    order.push(groups[i]);
                    Vec::new()
                })
                .push(i);
        }
        let n: usize = members.values().map(Vec::len).sum();
        if n == 0 {
            return Err(CohortError::TooFewUnits(format!("category `{cat}` has no units")));
        }
        let target = (n as f64 * test_fraction).round() as usize;
        let mut r = rng::stream(seed, &format!("holdout/{cat}"));
        rng::shuffle(&mut r, &mut order);
        let mut taken = 0usize;
        for g in order {
            let size = members[g].len();
            if taken >= target {
                break;
            }
            // take the group unless it overshoots by more than it fills
            if taken + size <= target || taken + size - target <= target - taken {
                for &i in &members[g] {
                    test_mask[i] = true;
                }
                taken += size;
            }
        }
        if taken == 0 || taken == n {
            return Err(CohortError::TooFewUnits(format!(
                "category `{cat}` ({n} units) cannot fill both sides at test fraction {test_fraction}"
            )));
        }
    }
    let test = (0..cats.len()).filter(|&i| test_mask[i]).collect();
    let train = (0..cats.len()).filter(|&i| !test_mask[i]).collect();
    Ok((train, test))
}

/// Stratified k-fold partition of `units`, as sorted index lists. Each
/// category is shuffled and dealt round-robin, continuing the deal across
/// categories so fold sizes differ by at most one.
pub fn kfold(units: &[Unit], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, CohortError> {
    let cats: Vec<Category> = units.iter().map(|u| u.category).collect();
    kfold_indices(&cats, k, seed)
}

/// K-fold over a subset of units; the returned folds hold indices into
/// `units`, drawn from `subset`.
pub fn kfold_subset(
    units: &[Unit],
    subset: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, CohortError> {
    let cats: Vec<Category> = subset.iter().map(|&i| units[i].category).collect();
    Ok(kfold_indices(&cats, k, seed)?
        .into_iter()
        .map(|f| f.into_iter().map(|j| subset[j]).collect())
        .collect())
}

pub fn kfold_indices(
    cats: &[Category],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, CohortError> {
    if k < 2 || k > cats.len() {
        return Err(CohortError::TooFewUnits(format!(
            "{} units cannot form {k} folds (need 2 <= k <= units)",
            cats.len()
        )));
    }
    let present: BTreeSet<Category> = cats.iter().copied().collect();
    scheme_of(cats)?;
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for cat in present {
        let mut idx: Vec<usize> = (0..cats.len()).filter(|&i| cats[i] == cat).collect();
        rng::shuffle(&mut rng::stream(seed, &format!("kfold/{cat}")), &mut idx);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Writes one unit id per line.
pub fn write_ids<W: Write>(
    units: &[Unit],
    indices: impl IntoIterator<Item = usize>,
    mut out: W,
) -> io::Result<()> {
    for i in indices {
        writeln!(out, "{}", units[i].id)?;
    }
    out.flush()
}

/// Reads a unit-id manifest (one id per line, blank lines ignored).
pub fn read_ids(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(id: &str, speaker: &str, category: Category, words: usize) -> Unit {
        Unit {
            id: id.into(),
            speaker: speaker.into(),
            category,
            payload: Payload::Turn(TurnRef {
                conversation: 0,
                turn: 0,
            }),
            word_tokens: words,
        }
    }

    fn speakers(f: usize, m: usize) -> Vec<Unit> {
        let mut v = Vec::new();
        for i in 0..f {
            v.push(unit(&format!("F{i}"), &format!("F{i}"), Category::Female, 200));
        }
        for i in 0..m {
            v.push(unit(&format!("M{i}"), &format!("M{i}"), Category::Male, 200));
        }
        v
    }

    fn count(units: &[Unit], idx: &[usize], cat: Category) -> usize {
        idx.iter().filter(|&&i| units[i].category == cat).count()
    }

    #[test]
    fn min_talk_filter() {
        let units = vec![
            unit("a", "a", Category::Female, 5),
            unit("b", "b", Category::Female, 150),
        ];
        let kept = filter_min_talk(units.clone(), 100);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "b");
        assert_eq!(filter_min_talk(units.clone(), 0), units);
    }

    #[test]
    fn balance_to_minority() {
        let b = balance(speakers(365, 305), 1).unwrap();
        let f = b.iter().filter(|u| u.category == Category::Female).count();
        assert_eq!((f, b.len() - f), (305, 305));

        let even = speakers(10, 10);
        assert_eq!(balance(even.clone(), 9).unwrap(), even);

        let again = balance(speakers(365, 305), 1).unwrap();
        assert_eq!(b, again);
        let other = balance(speakers(365, 305), 2).unwrap();
        assert_ne!(b, other);

        assert_eq!(
            balance(speakers(4, 0), 1).unwrap_err(),
            CohortError::EmptyCategory(Category::Male)
        );
    }

    #[test]
    fn holdout_half() {
        let units = speakers(305, 305);
        let s = holdout_split(&units, 0.5, 3, true).unwrap();
        assert_eq!(s.train.len() + s.test.len(), 610);
        for cat in [Category::Female, Category::Male] {
            assert_eq!(count(&units, &s.test, cat), 153);
            assert_eq!(count(&units, &s.train, cat), 152);
        }
        assert_eq!(s, holdout_split(&units, 0.5, 3, true).unwrap());
    }

    #[test]
    fn holdout_errors() {
        let one_cat: Vec<Unit> = (0..100)
            .map(|i| unit(&format!("t{i}"), "S", Category::Female, 3))
            .collect();
        assert!(matches!(
            holdout_split(&one_cat, 0.1, 1, false),
            Err(CohortError::TooFewUnits(_))
        ));
        let units = speakers(3, 3);
        assert!(matches!(
            holdout_split(&units, 0.0, 1, false),
            Err(CohortError::InvalidFraction(_))
        ));
        assert!(matches!(
            holdout_split(&units, 0.01, 1, false),
            Err(CohortError::TooFewUnits(_))
        ));
    }

    #[test]
    fn turn_split_keeps_speakers_together() {
        let mut units = Vec::new();
        for s in 0..20 {
            let cat = if s % 2 == 0 { Category::Old } else { Category::Young };
            for t in 0..(5 + s % 7) {
                units.push(unit(&format!("C#{s}-{t}"), &format!("S{s}"), cat, 4));
            }
        }
        for seed in 0..20 {
            let s = holdout_split(&units, 0.1, seed, true).unwrap();
            let train: BTreeSet<&str> = s.train.iter().map(|&i| units[i].speaker.as_str()).collect();
            let test: BTreeSet<&str> = s.test.iter().map(|&i| units[i].speaker.as_str()).collect();
            assert!(train.is_disjoint(&test));
            assert!(!test.is_empty());
        }
    }

    #[test]
    fn kfold_examples() {
        let units = speakers(5, 5);
        let folds = kfold(&units, 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(kfold(&units, 1, 0).is_err());
        assert!(kfold(&units, 11, 0).is_err());
    }

    #[test]
    fn kfold_subset_stays_in_subset() {
        let units = speakers(10, 10);
        let subset: Vec<usize> = (0..20).filter(|i| i % 3 != 0).collect();
        let folds = kfold_subset(&units, &subset, 3, 4).unwrap();
        let mut all = folds.concat();
        all.sort_unstable();
        assert_eq!(all, subset);
    }

    #[test]
    fn id_manifest_round_trip() {
        let units = speakers(2, 1);
        let mut out = Vec::new();
        write_ids(&units, [2, 0], &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "M0\nF0\n");
        assert_eq!(read_ids(std::str::from_utf8(&out).unwrap()), ["M0", "F0"]);
    }

    proptest! {
        #[test]
        fn kfold_partition_and_stratification(f in 1usize..40, m in 1usize..40, k in 2usize..11, seed in any::<u64>()) {
            let units = speakers(f, m);
            prop_assume!(k <= f + m);
            let folds = kfold(&units, k, seed).unwrap();
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for cat in [Category::Female, Category::Male] {
                let per: Vec<usize> = folds.iter().map(|fo| count(&units, fo, cat)).collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
            let mut all = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..f + m).collect::<Vec<_>>());
        }
    }
}
