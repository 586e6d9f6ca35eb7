//! Synthetic corpora with planted category differences.
//!
//! Each category has its own word distribution and per-slot event rates.
//! Before every word the generator may emit particles, laughter, pauses and
//! a truncation, each an independent Bernoulli draw; overlap is drawn once
//! per turn. Conversations are generated from independent random streams so
//! output does not depend on thread count.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    serialize_conversation, speakers_to_manifest, Category, Conversation, Corpus, Event, Gender,
    PauseClass, Scheme, SpeakerProfile, Surface, Turn, SPEAKER_MANIFEST,
};
use crate::nonlex::{classify_particle, ParticleCategory};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Event probabilities. All but `overlap` apply per word slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub positive_response: f64,
    pub turn_stalling: f64,
    pub turn_management: f64,
    pub repair_initiator: f64,
    pub change_of_state: f64,
    pub laughter: f64,
    pub short_pause: f64,
    pub long_pause: f64,
    pub truncation: f64,
    /// Per turn.
    pub overlap: f64,
}

impl Rates {
    fn particle(&self, c: ParticleCategory) -> f64 {
        match c {
            ParticleCategory::PositiveResponseContinuer => self.positive_response,
            ParticleCategory::TurnStalling => self.turn_stalling,
            ParticleCategory::TurnManagement => self.turn_management,
            ParticleCategory::RepairInitiator => self.repair_initiator,
            ParticleCategory::ChangeOfState => self.change_of_state,
        }
    }

    fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("positive_response", self.positive_response),
            ("turn_stalling", self.turn_stalling),
            ("turn_management", self.turn_management),
            ("repair_initiator", self.repair_initiator),
            ("change_of_state", self.change_of_state),
            ("laughter", self.laughter),
            ("short_pause", self.short_pause),
            ("long_pause", self.long_pause),
            ("truncation", self.truncation),
            ("overlap", self.overlap),
        ]
    }
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            positive_response: 0.03,
            turn_stalling: 0.005,
            turn_management: 0.02,
            repair_initiator: 0.002,
            change_of_state: 0.015,
            laughter: 0.015,
            short_pause: 0.03,
            long_pause: 0.008,
            truncation: 0.01,
            overlap: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySpec {
    /// Word probabilities; must sum to 1.
    pub words: BTreeMap<String, f64>,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub scheme: Scheme,
    pub seed: u64,
    pub speakers_per_category: usize,
    pub turns_per_speaker: usize,
    /// Turn lengths are uniform on `1..=2m-1`.
    pub mean_words_per_turn: u32,
    pub speakers_per_conversation: usize,
    /// One entry per category of the scheme, in the scheme's order.
    pub categories: Vec<CategorySpec>,
}

/// Which difference a preset plants between the two categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    /// Identical categories.
    None,
    /// Each category has 20 characteristic words carrying 10% of its mass.
    Lexical,
    /// Identical words; laughter, particle and pause rates differ.
    Nonlex,
}

impl std::str::FromStr for Signal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Signal::None),
            "lexical" => Ok(Signal::Lexical),
            "nonlex" => Ok(Signal::Nonlex),
            other => Err(format!("unknown signal `{other}` (expected none, lexical or nonlex)")),
        }
    }
}

pub const BASE_VOCABULARY: usize = 1000;
pub const CHARACTERISTIC_TERMS: usize = 20;
const CHARACTERISTIC_MASS: f64 = 0.1;

fn base_words() -> Vec<(String, f64)> {
    let z: f64 = (1..=BASE_VOCABULARY).map(|r| 1.0 / r as f64).sum();
    (0..BASE_VOCABULARY)
        .map(|r| (format!("w{r:04}"), 1.0 / ((r + 1) as f64 * z)))
        .collect()
}

fn characteristic(cat: Category) -> impl Iterator<Item = String> {
    (0..CHARACTERISTIC_TERMS).map(move |i| format!("{}{i:02}", cat.as_str()))
}

fn mixture(parts: &[(&[(String, f64)], f64)]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (words, mass) in parts {
        for (w, p) in *words {
            *out.entry(w.clone()).or_insert(0.0) += p * mass;
        }
    }
    out
}

impl SynthSpec {
    pub fn preset(
        signal: Signal,
        scheme: Scheme,
        speakers_per_category: usize,
        turns_per_speaker: usize,
        seed: u64,
    ) -> Self {
        let base = base_words();
        let [a, b] = scheme.categories();
        let uniform = |c: Category| -> Vec<(String, f64)> {
            characteristic(c)
                .map(|w| (w, 1.0 / CHARACTERISTIC_TERMS as f64))
                .collect()
        };
        let (ua, ub) = (uniform(a), uniform(b));
        let shared = mixture(&[
            (&base, 1.0 - CHARACTERISTIC_MASS),
            (&ua, CHARACTERISTIC_MASS / 2.0),
            (&ub, CHARACTERISTIC_MASS / 2.0),
        ]);
        let (words_a, words_b) = match signal {
            Signal::Lexical => (
                mixture(&[(&base, 1.0 - CHARACTERISTIC_MASS), (&ua, CHARACTERISTIC_MASS)]),
                mixture(&[(&base, 1.0 - CHARACTERISTIC_MASS), (&ub, CHARACTERISTIC_MASS)]),
            ),
            Signal::None | Signal::Nonlex => (shared.clone(), shared),
        };
        let rates_b = match signal {
            Signal::Nonlex => Rates {
                positive_response: 0.06,
                turn_management: 0.045,
                laughter: 0.045,
                short_pause: 0.04,
                ..Rates::default()
            },
            _ => Rates::default(),
        };
        SynthSpec {
            scheme,
            seed,
            speakers_per_category,
            turns_per_speaker,
            mean_words_per_turn: 10,
            speakers_per_conversation: 2,
            categories: vec![
                CategorySpec {
                    words: words_a,
                    rates: Rates::default(),
                },
                CategorySpec {
                    words: words_b,
                    rates: rates_b,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.categories.len() != 2 {
            return bad(format!("expected 2 categories, got {}", self.categories.len()));
        }
        if self.speakers_per_category == 0 || self.turns_per_speaker == 0 {
            return bad("speaker and turn counts must be positive".into());
        }
        if self.mean_words_per_turn == 0 {
            return bad("mean_words_per_turn must be positive".into());
        }
        if self.speakers_per_conversation == 0 {
            return bad("speakers_per_conversation must be positive".into());
        }
        for (cat, spec) in self.scheme.categories().iter().zip(&self.categories) {
            for (name, r) in spec.rates.named() {
                if !(0.0..=1.0).contains(&r) {
                    return bad(format!("{cat}: rate {name} = {r} is outside [0, 1]"));
                }
            }
            if spec.words.is_empty() {
                return bad(format!("{cat}: empty word distribution"));
            }
            let mut total = 0.0;
            for (w, &p) in &spec.words {
                if !(p.is_finite() && p >= 0.0) {
                    return bad(format!("{cat}: word `{w}` has probability {p}"));
                }
                if w.is_empty() || w.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
                    return bad(format!("{cat}: `{w}` is not a lowercase token"));
                }
                if classify_particle(w).is_some() {
                    return bad(format!("{cat}: `{w}` is a particle surface"));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-6 {
                return bad(format!("{cat}: word probabilities sum to {total}"));
            }
        }
        Ok(())
    }
}

/// Cumulative sampler over one category's words.
struct Sampler {
    words: Vec<Surface>,
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(words: &BTreeMap<String, f64>) -> Self {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(words.len());
        for p in words.values() {
            acc += p;
            cumulative.push(acc);
        }
        Sampler {
            words: words.keys().map(|w| Surface::from(w.as_str())).collect(),
            cumulative,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> &Surface {
        let u = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.words[i.min(self.words.len() - 1)]
    }
}

struct Plan<'s> {
    spec: &'s SynthSpec,
    speakers: Vec<SpeakerProfile>,
    /// Index into `spec.categories` per speaker.
    speaker_category: Vec<usize>,
    /// Speaker indices of each conversation.
    groups: Vec<Vec<usize>>,
    samplers: Vec<Sampler>,
    particles: Vec<Vec<&'static str>>,
}

fn speaker_profile<R: Rng>(id: Surface, cat: Category, i: usize, rng: &mut R) -> SpeakerProfile {
    let (gender, age) = match cat {
        Category::Female => (Gender::Female, rng.random_range(19..=69)),
        Category::Male => (Gender::Male, rng.random_range(19..=69)),
        Category::Old | Category::Young => {
            let gender = if i.is_multiple_of(2) { Gender::Female } else { Gender::Male };
            let age = if cat == Category::Old {
                rng.random_range(70..=95)
            } else {
                rng.random_range(8..=18)
            };
            (gender, age)
        }
    };
    SpeakerProfile {
        id,
        gender,
        age: Some(age),
    }
}

impl<'s> Plan<'s> {
    fn new(spec: &'s SynthSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let mut profile_rng = rng::stream(spec.seed, "synth/profiles");
        let mut speakers = Vec::new();
        let mut speaker_category = Vec::new();
        for (ci, cat) in spec.scheme.categories().into_iter().enumerate() {
            for i in 0..spec.speakers_per_category {
                let n = speakers.len();
                let id = Surface::from(format!("S{n:05}"));
                speakers.push(speaker_profile(id, cat, i, &mut profile_rng));
                speaker_category.push(ci);
            }
        }
        let mut order: Vec<usize> = (0..speakers.len()).collect();
        rng::shuffle(&mut rng::stream(spec.seed, "synth/grouping"), &mut order);
        let groups = order
            .chunks(spec.speakers_per_conversation)
            .map(<[usize]>::to_vec)
            .collect();
        Ok(Plan {
            spec,
            speakers,
            speaker_category,
            groups,
            samplers: spec.categories.iter().map(|c| Sampler::new(&c.words)).collect(),
            particles: ParticleCategory::ALL
                .iter()
                .map(|c| c.surfaces().collect())
                .collect(),
        })
    }

    fn conversation_id(i: usize) -> String {
        format!("C{i:05}")
    }

    fn conversation(&self, i: usize) -> Conversation {
        let spec = self.spec;
        let mut rng = rng::stream(spec.seed, &format!("synth/conversation/{i}"));
        let group = &self.groups[i];
        let mut turns = Vec::with_capacity(group.len() * spec.turns_per_speaker);
        for _ in 0..spec.turns_per_speaker {
            for &s in group {
                let ci = self.speaker_category[s];
                turns.push(Turn {
                    speaker: self.speakers[s].id.clone(),
                    index: 0,
                    events: self.turn_events(ci, &mut rng),
                });
            }
        }
        Conversation::new(Self::conversation_id(i), turns)
    }

    fn turn_events<R: Rng>(&self, ci: usize, rng: &mut R) -> Vec<Event> {
        let rates = &self.spec.categories[ci].rates;
        let sampler = &self.samplers[ci];
        let m = self.spec.mean_words_per_turn as u64;
        let words = 1 + rng.random_range(0..2 * m - 1);
        let mut events = Vec::with_capacity(words as usize + 4);
        if rng.random::<f64>() < rates.overlap {
            events.push(Event::OverlapMark);
        }
        for _ in 0..words {
            for (pc, surfaces) in ParticleCategory::ALL.iter().zip(&self.particles) {
                if rng.random::<f64>() < rates.particle(*pc) {
                    let s = surfaces[rng::index(rng, surfaces.len())];
                    events.push(Event::Particle(s.into()));
                }
            }
            if rng.random::<f64>() < rates.laughter {
                events.push(Event::Laughter);
            }
            if rng.random::<f64>() < rates.short_pause {
                events.push(Event::Pause(PauseClass::Short));
            }
            if rng.random::<f64>() < rates.long_pause {
                events.push(Event::Pause(PauseClass::Long));
            }
            let word = sampler.draw(rng);
            if rng.random::<f64>() < rates.truncation {
                let cut: String = word.chars().take(2).collect();
                events.push(Event::Truncation(cut.into()));
            }
            events.push(Event::Word(word.clone()));
        }
        events
    }

    fn speaker_map(&self) -> BTreeMap<Surface, SpeakerProfile> {
        self.speakers
            .iter()
            .map(|p| (p.id.clone(), p.clone()))
            .collect()
    }
}

/// Generates the corpus in memory.
pub fn generate(spec: &SynthSpec) -> Result<Corpus, SynthError> {
    let plan = Plan::new(spec)?;
    let conversations = (0..plan.groups.len())
        .into_par_iter()
        .map(|i| plan.conversation(i))
        .collect();
    Ok(Corpus {
        conversations,
        speakers: plan.speaker_map(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthSummary {
    pub conversations: usize,
    pub speakers: usize,
    pub turns: usize,
}

/// Writes the corpus to `dir` (created if needed), one file per
/// conversation plus the speaker manifest. Conversations are serialized and
/// written one at a time, so memory use does not grow with corpus size.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<SynthSummary, SynthError> {
    let plan = Plan::new(spec)?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = serde_json::to_string_pretty(&speakers_to_manifest(&plan.speaker_map()))
        .expect("manifest serialization is infallible");
    let manifest_path = dir.join(SPEAKER_MANIFEST);
    fs::write(&manifest_path, manifest + "\n").map_err(io_err(&manifest_path))?;
    let turns = (0..plan.groups.len())
        .into_par_iter()
        .map(|i| {
            let conversation = plan.conversation(i);
            let path = dir.join(format!("{}.json", conversation.id));
            let mut text = serialize_conversation(&conversation);
            text.push('\n');
            fs::write(&path, text).map_err(io_err(&path))?;
            Ok(conversation.turns.len())
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(SynthSummary {
        conversations: plan.groups.len(),
        speakers: plan.speakers.len(),
        turns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{category_of, load_corpus, parse_conversation};

    fn small(signal: Signal) -> SynthSpec {
        SynthSpec::preset(signal, Scheme::Gender, 6, 4, 11)
    }

    #[test]
    fn presets_are_valid() {
        for signal in [Signal::None, Signal::Lexical, Signal::Nonlex] {
            for scheme in [Scheme::Gender, Scheme::Age] {
                SynthSpec::preset(signal, scheme, 3, 3, 0).validate().unwrap();
            }
        }
    }

    #[test]
    fn counts_and_categories() {
        let spec = SynthSpec::preset(Signal::Lexical, Scheme::Age, 5, 7, 3);
        let c = generate(&spec).unwrap();
        assert_eq!(c.speakers.len(), 10);
        assert_eq!(c.turn_count(), 70);
        for cat in Scheme::Age.categories() {
            let n = c
                .speakers
                .values()
                .filter(|p| category_of(p, Scheme::Age) == Some(cat))
                .count();
            assert_eq!(n, 5);
        }
    }

    #[test]
    fn identical_seed_gives_identical_files() {
        let spec = small(Signal::Nonlex);
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_corpus(&spec, d1.path()).unwrap();
        write_corpus(&spec, d2.path()).unwrap();
        let mut names: Vec<_> = fs::read_dir(d1.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 7);
        for n in names {
            assert_eq!(
                fs::read(d1.path().join(&n)).unwrap(),
                fs::read(d2.path().join(&n)).unwrap()
            );
        }
    }

    #[test]
    fn written_corpus_round_trips() {
        let spec = small(Signal::Lexical);
        let dir = tempfile::tempdir().unwrap();
        let summary = write_corpus(&spec, dir.path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        let memory = generate(&spec).unwrap();
        assert_eq!(summary.turns, memory.turn_count());
        assert_eq!(loaded.speakers, memory.speakers);
        assert_eq!(loaded.conversations, memory.conversations);
        let raw = fs::read(dir.path().join("C00000.json")).unwrap();
        assert_eq!(parse_conversation(&raw).unwrap(), memory.conversations[0]);
    }

    #[test]
    fn other_seed_differs() {
        let a = generate(&small(Signal::None)).unwrap();
        let mut spec = small(Signal::None);
        spec.seed += 1;
        let b = generate(&spec).unwrap();
        assert_ne!(a.conversations, b.conversations);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small(Signal::None);
        s.categories[0].rates.laughter = 1.5;
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        let mut s = small(Signal::None);
        *s.categories[1].words.values_mut().next().unwrap() += 0.1;
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        let mut s = small(Signal::None);
        s.categories[0].words = BTreeMap::from([("um".to_string(), 1.0)]);
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        let mut s = small(Signal::None);
        s.categories.pop();
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn planted_rates_are_visible() {
        let spec = SynthSpec::preset(Signal::Nonlex, Scheme::Gender, 20, 50, 5);
        let c = generate(&spec).unwrap();
        let p = crate::nonlex::profile(&c, Scheme::Gender).unwrap();
        let laughter = crate::nonlex::NonLexFeature::Laughter as usize;
        let (ra, rb) = (p.categories[0].rates()[laughter], p.categories[1].rates()[laughter]);
        assert!(ra < rb, "{ra} {rb}");
    }
}
