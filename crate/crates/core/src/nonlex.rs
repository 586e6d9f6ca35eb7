//! Minimal-particle taxonomy and non-lexical / turn-taking features.

use std::fmt;
use std::io::Write;
use std::ops::{Add, AddAssign, Index};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Category, Corpus, Event, PauseClass, Scheme, Turn};

/// Broad form-function class of a minimal particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ParticleCategory {
    PositiveResponseContinuer,
    TurnStalling,
    TurnManagement,
    RepairInitiator,
    ChangeOfState,
}

impl ParticleCategory {
    pub const ALL: [ParticleCategory; 5] = [
        ParticleCategory::PositiveResponseContinuer,
        ParticleCategory::TurnStalling,
        ParticleCategory::TurnManagement,
        ParticleCategory::RepairInitiator,
        ParticleCategory::ChangeOfState,
    ];

    pub fn feature(self) -> NonLexFeature {
        match self {
            ParticleCategory::PositiveResponseContinuer => NonLexFeature::PositiveResponse,
            ParticleCategory::TurnStalling => NonLexFeature::TurnStalling,
            ParticleCategory::TurnManagement => NonLexFeature::TurnManagement,
            ParticleCategory::RepairInitiator => NonLexFeature::RepairInitiator,
            ParticleCategory::ChangeOfState => NonLexFeature::ChangeOfState,
        }
    }

    /// Surfaces mapped to this category.
    pub fn surfaces(self) -> impl Iterator<Item = &'static str> {
        PARTICLE_INVENTORY
            .iter()
            .filter(move |(_, c)| *c == self)
            .map(|(s, _)| *s)
    }
}

/// The complete particle inventory. Rising pitch is part of the surface, so
/// `hm?` is listed while bare `hm` is not.
pub const PARTICLE_INVENTORY: [(&str, ParticleCategory); 14] = [
    ("mm", ParticleCategory::PositiveResponseContinuer),
    ("mhm", ParticleCategory::PositiveResponseContinuer),
    ("mm_hm", ParticleCategory::PositiveResponseContinuer),
    ("aha", ParticleCategory::PositiveResponseContinuer),
    ("uhu", ParticleCategory::PositiveResponseContinuer),
    ("uhuh", ParticleCategory::PositiveResponseContinuer),
    ("uh_huh", ParticleCategory::PositiveResponseContinuer),
    ("hmm", ParticleCategory::TurnStalling),
    ("hmmm", ParticleCategory::TurnStalling),
    ("um", ParticleCategory::TurnManagement),
    ("er", ParticleCategory::TurnManagement),
    ("erm", ParticleCategory::TurnManagement),
    ("hm?", ParticleCategory::RepairInitiator),
    ("oh", ParticleCategory::ChangeOfState),
];

/// Exact-match lookup of a lowercase surface in the particle inventory.
pub fn classify_particle(surface: &str) -> Option<ParticleCategory> {
    // Every inventory surface is 2 to 6 bytes long.
    if !(2..=6).contains(&surface.len()) {
        return None;
    }
    PARTICLE_INVENTORY
        .iter()
        .find(|(s, _)| *s == surface)
        .map(|(_, c)| *c)
}

/// The nine non-lexical features, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NonLexFeature {
    PositiveResponse,
    TurnStalling,
    TurnManagement,
    RepairInitiator,
    ChangeOfState,
    Laughter,
    ShortPause,
    Truncation,
    Overlap,
}

pub const FEATURE_COUNT: usize = 9;

impl NonLexFeature {
    pub const ALL: [NonLexFeature; FEATURE_COUNT] = [
        NonLexFeature::PositiveResponse,
        NonLexFeature::TurnStalling,
        NonLexFeature::TurnManagement,
        NonLexFeature::RepairInitiator,
        NonLexFeature::ChangeOfState,
        NonLexFeature::Laughter,
        NonLexFeature::ShortPause,
        NonLexFeature::Truncation,
        NonLexFeature::Overlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NonLexFeature::PositiveResponse => "positive_response",
            NonLexFeature::TurnStalling => "turn_stalling",
            NonLexFeature::TurnManagement => "turn_management",
            NonLexFeature::RepairInitiator => "repair_initiator",
            NonLexFeature::ChangeOfState => "change_of_state",
            NonLexFeature::Laughter => "laughter",
            NonLexFeature::ShortPause => "short_pause",
            NonLexFeature::Truncation => "truncation",
            NonLexFeature::Overlap => "overlap",
        }
    }

    /// Overlap is counted per turn; everything else per word token.
    pub fn per_turn(self) -> bool {
        self == NonLexFeature::Overlap
    }
}

impl fmt::Display for NonLexFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Counts of the nine features, indexed by [`NonLexFeature`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FeatureCounts(pub [u64; FEATURE_COUNT]);

impl FeatureCounts {
    pub fn get(&self, feature: NonLexFeature) -> u64 {
        self.0[feature as usize]
    }

    fn bump(&mut self, feature: NonLexFeature) {
        self.0[feature as usize] += 1;
    }

    /// Relative frequencies: counts per word token, overlap per turn. Zero
    /// when the denominator is zero.
    pub fn rates(&self, word_tokens: u64, turns: u64) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for f in NonLexFeature::ALL {
            let denom = if f.per_turn() { turns } else { word_tokens };
            if denom > 0 {
                out[f as usize] = self.get(f) as f64 / denom as f64;
            }
        }
        out
    }
}

impl Index<NonLexFeature> for FeatureCounts {
    type Output = u64;

    fn index(&self, feature: NonLexFeature) -> &u64 {
        &self.0[feature as usize]
    }
}

impl AddAssign for FeatureCounts {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Add for FeatureCounts {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl std::iter::Sum for FeatureCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Feature counts of a single turn. The overlap entry is a 0/1 flag.
pub fn turn_features(turn: &Turn) -> FeatureCounts {
    let mut counts = FeatureCounts::default();
    let mut overlapped = false;
    for event in &turn.events {
        match event {
            Event::Particle(s) => {
                if let Some(cat) = classify_particle(s) {
                    counts.bump(cat.feature());
                }
            }
            Event::Laughter => counts.bump(NonLexFeature::Laughter),
            Event::Pause(PauseClass::Short) => counts.bump(NonLexFeature::ShortPause),
            Event::Pause(PauseClass::Long) | Event::Word(_) => {}
            Event::Truncation(_) => counts.bump(NonLexFeature::Truncation),
            Event::OverlapMark => overlapped = true,
        }
    }
    if overlapped {
        counts.bump(NonLexFeature::Overlap);
    }
    counts
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NonLexError {
    #[error("no turns by speakers in category `{0}`")]
    EmptyCategory(Category),
}

#[derive(Debug, Clone, Serialize)]
pub struct CategoryProfile {
    pub category: Category,
    pub counts: FeatureCounts,
    pub word_tokens: u64,
    pub turns: u64,
}

impl CategoryProfile {
    pub fn rates(&self) -> [f64; FEATURE_COUNT] {
        self.counts.rates(self.word_tokens, self.turns)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankEntry {
    pub feature: NonLexFeature,
    pub category: Category,
    pub count: u64,
    pub rel_freq: f64,
    /// 1 marks the highest-rate category.
    pub rank: usize,
    pub pct_of_highest: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonLexProfile {
    pub scheme: Scheme,
    pub categories: Vec<CategoryProfile>,
}

impl NonLexProfile {
    /// Ranks categories per feature by relative frequency. The top category
    /// gets rank 1 and 100%; the others are expressed as a percentage of it.
    pub fn rank_table(&self) -> Vec<RankEntry> {
        let rates: Vec<_> = self.categories.iter().map(CategoryProfile::rates).collect();
        let mut table = Vec::new();
        for feature in NonLexFeature::ALL {
            let fi = feature as usize;
            let mut order: Vec<usize> = (0..self.categories.len()).collect();
            order.sort_by(|&a, &b| rates[b][fi].total_cmp(&rates[a][fi]).then(a.cmp(&b)));
            let max = rates[order[0]][fi];
            for (rank, &ci) in order.iter().enumerate() {
                let rel = rates[ci][fi];
                table.push(RankEntry {
                    feature,
                    category: self.categories[ci].category,
                    count: self.categories[ci].counts.get(feature),
                    rel_freq: rel,
                    rank: rank + 1,
                    pct_of_highest: if max > 0.0 { rel / max * 100.0 } else { 0.0 },
                });
            }
        }
        table
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "category", "count", "rel_freq", "rank", "pct_of_highest"])?;
        for e in self.rank_table() {
            w.write_record([
                e.feature.name().to_string(),
                e.category.to_string(),
                e.count.to_string(),
                e.rel_freq.to_string(),
                e.rank.to_string(),
                e.pct_of_highest.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Aggregates turn features per category of `scheme`.
pub fn profile(corpus: &Corpus, scheme: Scheme) -> Result<NonLexProfile, NonLexError> {
    let cats = scheme.categories();
    let zero = || [(FeatureCounts::default(), 0u64, 0u64); 2];
    let sums = corpus
        .conversations
        .par_iter()
        .fold(zero, |mut acc, conv| {
            for turn in &conv.turns {
                let Some(cat) = corpus.category_of_speaker(&turn.speaker, scheme) else {
                    continue;
                };
                let slot = &mut acc[usize::from(cat == cats[1])];
                slot.0 += turn_features(turn);
                slot.1 += turn.word_count() as u64;
                slot.2 += 1;
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.0 += y.0;
                x.1 += y.1;
                x.2 += y.2;
            }
            a
        });
    let mut categories = Vec::with_capacity(2);
    for (cat, (counts, word_tokens, turns)) in cats.into_iter().zip(sums) {
        if turns == 0 {
            return Err(NonLexError::EmptyCategory(cat));
        }
        categories.push(CategoryProfile {
            category: cat,
            counts,
            word_tokens,
            turns,
        });
    }
    Ok(NonLexProfile { scheme, categories })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Conversation, Gender, SpeakerProfile, Surface};
    use proptest::prelude::*;

    fn turn(events: Vec<Event>) -> Turn {
        Turn {
            speaker: "S1".into(),
            index: 0,
            events,
        }
    }

    #[test]
    fn inventory_lookup() {
        assert_eq!(classify_particle("erm"), Some(ParticleCategory::TurnManagement));
        assert_eq!(classify_particle("hm?"), Some(ParticleCategory::RepairInitiator));
        assert_eq!(classify_particle("hm"), None);
        assert_eq!(classify_particle("hello"), None);
        assert_eq!(classify_particle("uh_huh"), Some(ParticleCategory::PositiveResponseContinuer));
        assert_eq!(classify_particle("hmmm"), Some(ParticleCategory::TurnStalling));
        assert_eq!(classify_particle("oh"), Some(ParticleCategory::ChangeOfState));
        assert_eq!(classify_particle("OH"), None);
    }

    #[test]
    fn inventory_is_injective() {
        let mut surfaces: Vec<_> = PARTICLE_INVENTORY.iter().map(|(s, _)| *s).collect();
        surfaces.sort_unstable();
        surfaces.dedup();
        assert_eq!(surfaces.len(), PARTICLE_INVENTORY.len());
        let total: usize = ParticleCategory::ALL.iter().map(|c| c.surfaces().count()).sum();
        assert_eq!(total, 14);
    }

    #[test]
    fn turn_management_example() {
        let t = turn(vec![
            Event::Particle("erm".into()),
            Event::Word("what".into()),
            Event::Particle("er".into()),
            Event::Particle("erm".into()),
            Event::Truncation("i".into()),
        ]);
        let f = turn_features(&t);
        assert_eq!(f[NonLexFeature::TurnManagement], 3);
        assert_eq!(f[NonLexFeature::Truncation], 1);
        assert_eq!(f.0.iter().sum::<u64>(), 4);
    }

    #[test]
    fn long_pauses_excluded() {
        let t = turn(vec![
            Event::Laughter,
            Event::Laughter,
            Event::Pause(PauseClass::Short),
            Event::Pause(PauseClass::Long),
        ]);
        let f = turn_features(&t);
        assert_eq!(f[NonLexFeature::Laughter], 2);
        assert_eq!(f[NonLexFeature::ShortPause], 1);
    }

    #[test]
    fn overlap_counted_once_per_turn() {
        let f = turn_features(&turn(vec![Event::OverlapMark, Event::Word("no".into())]));
        assert_eq!(f[NonLexFeature::Overlap], 1);
        let f = turn_features(&turn(vec![Event::OverlapMark, Event::OverlapMark]));
        assert_eq!(f[NonLexFeature::Overlap], 1);
    }

    fn two_speaker_corpus(young: Vec<Event>, old: Vec<Event>) -> Corpus {
        let mut c = Corpus::default();
        for (id, age) in [("Y", 12), ("O", 80)] {
            c.speakers.insert(
                Surface::from(id),
                SpeakerProfile {
                    id: id.into(),
                    gender: Gender::Unspecified,
                    age: Some(age),
                },
            );
        }
        let t = |s: &str, events| Turn {
            speaker: s.into(),
            index: 0,
            events,
        };
        c.conversations
            .push(Conversation::new("C1", vec![t("Y", young), t("O", old)]));
        c
    }

    #[test]
    fn young_laugh_twice_as_often() {
        let w = || Event::Word("so".into());
        let corpus = two_speaker_corpus(
            vec![w(), w(), Event::Laughter, Event::Laughter],
            vec![w(), w(), Event::Laughter],
        );
        let p = profile(&corpus, Scheme::Age).unwrap();
        let table = p.rank_table();
        let laugh: Vec<_> = table
            .iter()
            .filter(|e| e.feature == NonLexFeature::Laughter)
            .collect();
        assert_eq!(laugh[0].category, Category::Young);
        assert_eq!(laugh[0].rank, 1);
        assert_eq!(laugh[0].pct_of_highest, 100.0);
        assert_eq!(laugh[1].category, Category::Old);
        assert!((laugh[1].pct_of_highest - 50.0).abs() < 1e-9);
    }

    #[test]
    fn empty_category_reported() {
        let corpus = two_speaker_corpus(vec![Event::Laughter], vec![Event::Laughter]);
        assert_eq!(
            profile(&corpus, Scheme::Gender).unwrap_err(),
            NonLexError::EmptyCategory(Category::Female)
        );
    }

    proptest! {
        #[test]
        fn non_inventory_strings_are_none(s in "[a-z?_]{0,8}") {
            let listed = PARTICLE_INVENTORY.iter().any(|(p, _)| *p == s);
            prop_assert_eq!(classify_particle(&s).is_some(), listed);
        }

        #[test]
        fn features_are_additive(a in 0usize..6, b in 0usize..6, ov in any::<bool>()) {
            let mut e1 = vec![Event::Laughter; a];
            if ov { e1.push(Event::OverlapMark); }
            let e2 = vec![Event::Particle("oh".into()); b];
            let joined: Vec<_> = e1.iter().chain(&e2).cloned().collect();
            let sum = turn_features(&turn(e1)) + turn_features(&turn(e2));
            prop_assert_eq!(sum, turn_features(&turn(joined)));
        }
    }
}
