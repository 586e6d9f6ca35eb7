use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use compact_str::CompactString;
use serde::{Deserialize, Serialize};

/// Lowercase-normalized surface form of a transcribed token.
pub type Surface = CompactString;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauseClass {
    /// 1 to 5 seconds.
    Short,
    Long,
}

impl PauseClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PauseClass::Short => "short",
            PauseClass::Long => "long",
        }
    }
}

/// One annotated element of a turn.
///
/// Surface-carrying variants hold non-empty lowercase text; the parser
/// enforces this for everything it produces.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Event {
    Word(Surface),
    Particle(Surface),
    Laughter,
    Pause(PauseClass),
    Truncation(Surface),
    OverlapMark,
}

impl Event {
    pub fn surface(&self) -> Option<&str> {
        match self {
            Event::Word(s) | Event::Particle(s) | Event::Truncation(s) => Some(s.as_str()),
            _ => None,
        }
    }

    /// Word and particle events count towards turn length.
    pub fn is_word_token(&self) -> bool {
        matches!(self, Event::Word(_) | Event::Particle(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: Surface,
    pub index: usize,
    pub events: Vec<Event>,
}

impl Turn {
    /// Number of word and particle events. Truncations, laughter, pauses and
    /// overlap marks are not counted.
    pub fn word_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_word_token()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
    pub speaker_ids: BTreeSet<Surface>,
}

impl Conversation {
    /// Builds a conversation, renumbering turn indices and collecting the
    /// speaker set from the turns.
    pub fn new(id: impl Into<String>, mut turns: Vec<Turn>) -> Self {
        let mut speaker_ids = BTreeSet::new();
        for (i, turn) in turns.iter_mut().enumerate() {
            turn.index = i;
            speaker_ids.insert(turn.speaker.clone());
        }
        Conversation {
            id: id.into(),
            turns,
            speaker_ids,
        }
    }

    pub fn word_count(&self) -> usize {
        self.turns.iter().map(Turn::word_count).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerProfile {
    pub id: Surface,
    pub gender: Gender,
    pub age: Option<u32>,
}

pub const MAX_AGE: u32 = 130;

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub conversations: Vec<Conversation>,
    pub speakers: BTreeMap<Surface, SpeakerProfile>,
}

impl Corpus {
    pub fn turn_count(&self) -> usize {
        self.conversations.iter().map(|c| c.turns.len()).sum()
    }

    pub fn word_count(&self) -> usize {
        self.conversations.iter().map(Conversation::word_count).sum()
    }

    /// Iterates over every turn together with its conversation index.
    pub fn turns(&self) -> impl Iterator<Item = (usize, &Turn)> + '_ {
        self.conversations
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.turns.iter().map(move |t| (ci, t)))
    }

    pub fn turn(&self, at: TurnRef) -> &Turn {
        &self.conversations[at.conversation as usize].turns[at.turn as usize]
    }

    /// Category of the speaker of a turn under `scheme`, if any.
    pub fn category_of_speaker(&self, speaker: &str, scheme: Scheme) -> Option<Category> {
        self.speakers.get(speaker).and_then(|p| category_of(p, scheme))
    }
}

/// Position of a turn inside a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TurnRef {
    pub conversation: u32,
    pub turn: u32,
}

/// A binary labelling scheme over speakers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Gender,
    Age,
}

impl Scheme {
    /// The two categories of the scheme. The second one is the positive
    /// class for classification.
    pub fn categories(self) -> [Category; 2] {
        match self {
            Scheme::Gender => [Category::Female, Category::Male],
            Scheme::Age => [Category::Old, Category::Young],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Gender => "gender",
            Scheme::Age => "age",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gender" => Ok(Scheme::Gender),
            "age" => Ok(Scheme::Age),
            other => Err(format!("unknown scheme `{other}` (expected gender or age)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Female,
    Male,
    Old,
    Young,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Female => "female",
            Category::Male => "male",
            Category::Old => "old",
            Category::Young => "young",
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            Category::Female | Category::Male => Scheme::Gender,
            Category::Old | Category::Young => Scheme::Age,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const OLD_MIN_AGE: u32 = 70;
pub const YOUNG_MAX_AGE: u32 = 18;

/// Maps a speaker to its category under `scheme`. Ages 19 to 69 have no age
/// category; unknown ages and unspecified genders map to `None`.
pub fn category_of(speaker: &SpeakerProfile, scheme: Scheme) -> Option<Category> {
    match scheme {
        Scheme::Gender => match speaker.gender {
            Gender::Female => Some(Category::Female),
            Gender::Male => Some(Category::Male),
            Gender::Unspecified => None,
        },
        Scheme::Age => match speaker.age? {
            a if a >= OLD_MIN_AGE => Some(Category::Old),
            a if a <= YOUNG_MAX_AGE => Some(Category::Young),
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speaker(gender: Gender, age: Option<u32>) -> SpeakerProfile {
        SpeakerProfile {
            id: "S1".into(),
            gender,
            age,
        }
    }

    #[test]
    fn age_boundaries() {
        let cat = |a| category_of(&speaker(Gender::Female, Some(a)), Scheme::Age);
        assert_eq!(cat(75), Some(Category::Old));
        assert_eq!(cat(70), Some(Category::Old));
        assert_eq!(cat(69), None);
        assert_eq!(cat(45), None);
        assert_eq!(cat(19), None);
        assert_eq!(cat(18), Some(Category::Young));
        assert_eq!(cat(0), Some(Category::Young));
        assert_eq!(category_of(&speaker(Gender::Male, None), Scheme::Age), None);
    }

    #[test]
    fn gender_mapping() {
        assert_eq!(
            category_of(&speaker(Gender::Male, None), Scheme::Gender),
            Some(Category::Male)
        );
        assert_eq!(
            category_of(&speaker(Gender::Unspecified, Some(30)), Scheme::Gender),
            None
        );
    }

    #[test]
    fn word_count_includes_particles_only() {
        let turn = Turn {
            speaker: "S1".into(),
            index: 0,
            events: vec![
                Event::Word("so".into()),
                Event::Particle("erm".into()),
                Event::Truncation("pur".into()),
                Event::Laughter,
                Event::Pause(PauseClass::Short),
                Event::OverlapMark,
            ],
        };
        assert_eq!(turn.word_count(), 2);
    }

    #[test]
    fn conversation_new_renumbers() {
        let t = |s: &str| Turn {
            speaker: s.into(),
            index: 99,
            events: vec![Event::Laughter],
        };
        let c = Conversation::new("C1", vec![t("B"), t("A"), t("B")]);
        assert_eq!(c.turns.iter().map(|t| t.index).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(c.speaker_ids.len(), 2);
    }
}
