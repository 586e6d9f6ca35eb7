//! Token extraction, stopword filtering and n-gram enumeration.
//!
//! Only word and particle events produce tokens. Bigrams never span a turn
//! boundary or a pause.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Event, Surface, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenSource {
    Word,
    Particle,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: Surface,
    pub source: TokenSource,
}

impl Token {
    pub fn word(s: &str) -> Self {
        Token {
            surface: s.into(),
            source: TokenSource::Word,
        }
    }
}

fn event_token(event: &Event, include_particles: bool) -> Option<Token> {
    match event {
        Event::Word(s) => Some(Token {
            surface: s.clone(),
            source: TokenSource::Word,
        }),
        Event::Particle(s) if include_particles => Some(Token {
            surface: s.clone(),
            source: TokenSource::Particle,
        }),
        _ => None,
    }
}

/// Lexical tokens of a turn in order.
pub fn tokens_of(turn: &Turn, include_particles: bool) -> Vec<Token> {
    turn.events
        .iter()
        .filter_map(|e| event_token(e, include_particles))
        .collect()
}

/// Tokens of a turn split at pauses; bigrams are formed within a segment only.
pub fn token_segments(turn: &Turn, include_particles: bool) -> Vec<Vec<Token>> {
    let mut segments = vec![Vec::new()];
    for event in &turn.events {
        if let Event::Pause(_) = event {
            if !segments.last().is_some_and(Vec::is_empty) {
                segments.push(Vec::new());
            }
        } else if let Some(tok) = event_token(event, include_particles) {
            segments.last_mut().expect("non-empty").push(tok);
        }
    }
    if segments.len() > 1 && segments.last().is_some_and(Vec::is_empty) {
        segments.pop();
    }
    segments
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<Surface>,
}

const DEFAULT_STOPLIST: &str = include_str!("../data/stopwords_en.txt");

impl Stoplist {
    /// The bundled 179-word English function-word list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPLIST)
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| Surface::from(l.to_lowercase()))
            .collect();
        Stoplist { words }
    }

    pub fn from_file(path: &Path) -> io::Result<Self> {
        fs::read_to_string(path).map(|t| Self::parse(&t))
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Stoplist {
            words: words.into_iter().map(Surface::from).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(Surface::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn filter_stopwords(tokens: Vec<Token>, stoplist: &Stoplist) -> Vec<Token> {
    let mut tokens = tokens;
    tokens.retain(|t| !stoplist.contains(&t.surface));
    tokens
}

/// Requested n-gram orders, a subset of {1, 2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Orders {
    pub unigrams: bool,
    pub bigrams: bool,
}

impl Orders {
    pub const UNIGRAMS: Orders = Orders {
        unigrams: true,
        bigrams: false,
    };
    pub const BIGRAMS: Orders = Orders {
        unigrams: false,
        bigrams: true,
    };
    pub const BOTH: Orders = Orders {
        unigrams: true,
        bigrams: true,
    };
}

impl Default for Orders {
    fn default() -> Self {
        Orders::BOTH
    }
}

/// A unigram or bigram; bigram parts are joined with a single space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NGram(pub Surface);

impl NGram {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.split(' ').count()
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NGram {
    fn from(s: &str) -> Self {
        NGram(s.into())
    }
}

impl std::borrow::Borrow<str> for NGram {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// All contiguous n-grams of the requested orders, unigrams first.
pub fn ngrams(tokens: &[Token], orders: Orders) -> Vec<NGram> {
    let mut out = Vec::new();
    let mut buf = String::new();
    visit_ngrams_in(tokens.iter().map(|t| t.surface.as_str()), orders, &mut buf, |g| {
        out.push(NGram::from(g))
    });
    out
}

fn visit_ngrams_in<'a>(
    surfaces: impl Iterator<Item = &'a str> + Clone,
    orders: Orders,
    buf: &mut String,
    mut f: impl FnMut(&str),
) {
    if orders.unigrams {
        for s in surfaces.clone() {
            f(s);
        }
    }
    if orders.bigrams {
        let mut prev: Option<&str> = None;
        for s in surfaces {
            if let Some(p) = prev {
                buf.clear();
                buf.push_str(p);
                buf.push(' ');
                buf.push_str(s);
                f(buf);
            }
            prev = Some(s);
        }
    }
}

/// How turns are turned into lexical n-grams.
#[derive(Debug, Clone, Default)]
pub struct LexicalConfig {
    pub include_particles: bool,
    pub stoplist: Option<Stoplist>,
    pub orders: Orders,
}

impl LexicalConfig {
    fn keeps<'a>(&self, event: &'a Event) -> Option<&'a str> {
        let s = match event {
            Event::Word(s) => s,
            Event::Particle(s) if self.include_particles => s,
            _ => return None,
        };
        match &self.stoplist {
            Some(stop) if stop.contains(s) => None,
            _ => Some(s.as_str()),
        }
    }

    /// Number of tokens (unigram occurrences) the turn contributes.
    pub fn token_count(&self, turn: &Turn) -> usize {
        turn.events.iter().filter(|e| self.keeps(e).is_some()).count()
    }

    /// Calls `f` on every n-gram of the turn without allocating per n-gram.
    /// `buf` is scratch space reused across calls.
    pub fn visit_ngrams(&self, turn: &Turn, buf: &mut String, mut f: impl FnMut(&str)) {
        if self.orders.unigrams {
            for e in &turn.events {
                if let Some(s) = self.keeps(e) {
                    f(s);
                }
            }
        }
        if self.orders.bigrams {
            let mut prev: Option<&str> = None;
            for e in &turn.events {
                if let Event::Pause(_) = e {
                    prev = None;
                    continue;
                }
                let Some(s) = self.keeps(e) else { continue };
                if let Some(p) = prev {
                    buf.clear();
                    buf.push_str(p);
                    buf.push(' ');
                    buf.push_str(s);
                    f(buf);
                }
                prev = Some(s);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PauseClass;
    use proptest::prelude::*;

    fn turn(events: Vec<Event>) -> Turn {
        Turn {
            speaker: "S1".into(),
            index: 0,
            events,
        }
    }

    fn surfaces(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::word(w)).collect()
    }

    #[test]
    fn particles_optional() {
        let t = turn(vec![
            Event::Word("you're".into()),
            Event::Particle("erm".into()),
            Event::Laughter,
        ]);
        assert_eq!(surfaces(&tokens_of(&t, true)), ["you're", "erm"]);
        assert_eq!(surfaces(&tokens_of(&t, false)), ["you're"]);
    }

    #[test]
    fn truncations_are_not_tokens() {
        let t = turn(vec![Event::Truncation("pur".into()), Event::Word("yeah".into())]);
        assert_eq!(surfaces(&tokens_of(&t, true)), ["yeah"]);
    }

    #[test]
    fn stopwords_removed() {
        let stop = Stoplist::from_words(["the"]);
        assert_eq!(surfaces(&filter_stopwords(toks(&["the", "cat"]), &stop)), ["cat"]);
        assert!(filter_stopwords(Vec::new(), &stop).is_empty());
    }

    #[test]
    fn stoplist_file_format() {
        let s = Stoplist::parse("# header\nThe\n\n  of \n#x\n");
        assert_eq!(s.len(), 2);
        assert!(s.contains("the") && s.contains("of") && !s.contains("#x"));
        assert_eq!(Stoplist::english().len(), 179);
    }

    #[test]
    fn ngram_examples() {
        let abc = toks(&["a", "b", "c"]);
        let bi: Vec<_> = ngrams(&abc, Orders::BIGRAMS).into_iter().map(|g| g.0).collect();
        assert_eq!(bi, ["a b", "b c"]);
        assert!(ngrams(&toks(&["a"]), Orders::BIGRAMS).is_empty());
        assert_eq!(ngrams(&abc, Orders::BOTH).len(), 5);
        assert_eq!(NGram::from("a b").order(), 2);
    }

    #[test]
    fn bigrams_stop_at_pauses() {
        let t = turn(vec![
            Event::Word("i".into()),
            Event::Word("do".into()),
            Event::Pause(PauseClass::Short),
            Event::Particle("hmm".into()),
            Event::Laughter,
            Event::Word("you".into()),
        ]);
        let cfg = LexicalConfig {
            include_particles: true,
            stoplist: None,
            orders: Orders::BIGRAMS,
        };
        let mut got = Vec::new();
        cfg.visit_ngrams(&t, &mut String::new(), |g| got.push(g.to_string()));
        assert_eq!(got, ["i do", "hmm you"]);
        let segs = token_segments(&t, true);
        assert_eq!(segs.len(), 2);
        assert_eq!(surfaces(&segs[1]), ["hmm", "you"]);
    }

    #[test]
    fn visit_matches_segment_ngrams() {
        let t = turn(vec![
            Event::Word("the".into()),
            Event::Word("cat".into()),
            Event::Particle("erm".into()),
            Event::Word("sat".into()),
            Event::Pause(PauseClass::Long),
            Event::Word("down".into()),
        ]);
        let stop = Stoplist::from_words(["the"]);
        let cfg = LexicalConfig {
            include_particles: false,
            stoplist: Some(stop.clone()),
            orders: Orders::BOTH,
        };
        let mut visited = Vec::new();
        cfg.visit_ngrams(&t, &mut String::new(), |g| visited.push(g.to_string()));
        let mut expected: Vec<String> = Vec::new();
        let segs: Vec<_> = token_segments(&t, false)
            .into_iter()
            .map(|s| filter_stopwords(s, &stop))
            .collect();
        for s in &segs {
            expected.extend(ngrams(s, Orders::UNIGRAMS).into_iter().map(|g| g.0.to_string()));
        }
        for s in &segs {
            expected.extend(ngrams(s, Orders::BIGRAMS).into_iter().map(|g| g.0.to_string()));
        }
        assert_eq!(visited, expected);
        assert_eq!(cfg.token_count(&t), 3);
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_subsequence(
            words in prop::collection::vec("[a-e]{1,2}", 0..30),
            stop in prop::collection::hash_set("[a-e]{1,2}", 0..6),
        ) {
            let stop = Stoplist::from_words(stop.iter().map(String::as_str));
            let tokens = toks(&words.iter().map(String::as_str).collect::<Vec<_>>());
            let once = filter_stopwords(tokens.clone(), &stop);
            let twice = filter_stopwords(once.clone(), &stop);
            prop_assert_eq!(&once, &twice);
            // subsequence of the input
            let mut it = tokens.iter();
            for t in &once {
                prop_assert!(it.any(|x| x == t));
            }
        }

        #[test]
        fn ngram_counts(words in prop::collection::vec("[a-z]{1,3}", 0..40)) {
            let tokens = toks(&words.iter().map(String::as_str).collect::<Vec<_>>());
            prop_assert_eq!(ngrams(&tokens, Orders::UNIGRAMS).len(), tokens.len());
            prop_assert_eq!(ngrams(&tokens, Orders::BIGRAMS).len(), tokens.len().saturating_sub(1));
        }
    }
}
