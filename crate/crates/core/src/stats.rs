//! Per-category corpus statistics: speakers, word tokens, turns, average
//! turn length and type-token ratio.

use std::collections::HashSet;
use std::io::Write;

use serde::Serialize;

use crate::corpus::{category_of, Category, Corpus, Scheme, SpeakerProfile, Surface};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("no turns by speakers in category `{0}`")]
    EmptyCategory(Category),
}

/// Totals over a set of speakers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub speakers: usize,
    pub words: usize,
    pub turns: usize,
    pub types: usize,
}

impl Totals {
    pub fn avg_turn_length(&self) -> f64 {
        if self.turns == 0 {
            0.0
        } else {
            self.words as f64 / self.turns as f64
        }
    }

    /// Distinct word/particle types over word tokens.
    pub fn ttr(&self) -> f64 {
        if self.words == 0 {
            0.0
        } else {
            self.types as f64 / self.words as f64
        }
    }
}

/// Totals for the speakers accepted by `select`. Speakers are counted from
/// the manifest; words and types from word and particle events.
pub fn totals_where(corpus: &Corpus, select: impl Fn(&SpeakerProfile) -> bool) -> Totals {
    let speakers = corpus.speakers.values().filter(|p| select(p)).count();
    let mut words = 0;
    let mut turns = 0;
    let mut types: HashSet<&Surface> = HashSet::new();
    for (_, turn) in corpus.turns() {
        let Some(profile) = corpus.speakers.get(&turn.speaker) else {
            continue;
        };
        if !select(profile) {
            continue;
        }
        turns += 1;
        for e in &turn.events {
            if let crate::corpus::Event::Word(s) | crate::corpus::Event::Particle(s) = e {
                words += 1;
                types.insert(s);
            }
        }
    }
    Totals {
        speakers,
        words,
        turns,
        types: types.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryStats {
    pub category: Category,
    #[serde(flatten)]
    pub totals: Totals,
    pub avg_turn_length: f64,
    pub ttr: f64,
}

pub fn stats(corpus: &Corpus, scheme: Scheme) -> Result<Vec<CategoryStats>, StatsError> {
    scheme
        .categories()
        .into_iter()
        .map(|cat| {
            let totals = totals_where(corpus, |p| category_of(p, scheme) == Some(cat));
            if totals.turns == 0 {
                return Err(StatsError::EmptyCategory(cat));
            }
            Ok(CategoryStats {
                category: cat,
                avg_turn_length: totals.avg_turn_length(),
                ttr: totals.ttr(),
                totals,
            })
        })
        .collect()
}

pub const STATS_HEADER: &str = "category,speakers,words,turns,avg_turn_length,ttr";

pub fn write_csv<W: Write>(rows: &[CategoryStats], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATS_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.category.to_string(),
            r.totals.speakers.to_string(),
            r.totals.words.to_string(),
            r.totals.turns.to_string(),
            r.avg_turn_length.to_string(),
            r.ttr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Conversation, Event, Gender, Turn};

    fn corpus() -> Corpus {
        let mut c = Corpus::default();
        for (id, g) in [("F", Gender::Female), ("M", Gender::Male), ("U", Gender::Unspecified)] {
            c.speakers.insert(
                id.into(),
                SpeakerProfile {
                    id: id.into(),
                    gender: g,
                    age: None,
                },
            );
        }
        let w = |s: &str| Event::Word(s.into());
        let t = |sp: &str, ev| Turn {
            speaker: sp.into(),
            index: 0,
            events: ev,
        };
        c.conversations.push(Conversation::new(
            "C1",
            vec![
                t("F", vec![w("a"), w("a")]),
                t("M", vec![w("x"), Event::Laughter]),
                t("F", vec![w("b"), Event::Particle("c".into()), Event::Truncation("d".into())]),
                t("U", vec![w("q")]),
            ],
        ));
        c
    }

    #[test]
    fn ttr_and_turn_length() {
        let s = stats(&corpus(), Scheme::Gender).unwrap();
        assert_eq!(s[0].category, Category::Female);
        assert_eq!(s[0].totals.words, 4);
        assert_eq!(s[0].totals.turns, 2);
        assert_eq!(s[0].ttr, 0.75);
        assert_eq!(s[0].avg_turn_length, 2.0);
        assert_eq!(s[1].totals.words, 1);
    }

    #[test]
    fn union_is_additive() {
        let c = corpus();
        let s = stats(&c, Scheme::Gender).unwrap();
        let both = totals_where(&c, |p| p.gender != Gender::Unspecified);
        assert_eq!(both.words, s[0].totals.words + s[1].totals.words);
        assert_eq!(both.turns, s[0].totals.turns + s[1].totals.turns);
    }

    #[test]
    fn empty_category() {
        assert_eq!(
            stats(&corpus(), Scheme::Age).unwrap_err(),
            StatsError::EmptyCategory(Category::Old)
        );
    }

    #[test]
    fn csv_header() {
        let s = stats(&corpus(), Scheme::Gender).unwrap();
        let mut out = Vec::new();
        write_csv(&s, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), STATS_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "female,1,4,2,2,0.75");
    }
}
