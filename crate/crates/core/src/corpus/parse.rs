//! JSON transcript format.
//!
//! One document per conversation:
//!
//! ```text
//! {"conversation_id": "C001", "turns": [{"speaker": "S1", "events": [{"t":"w","v":"hello"},{"t":"laugh"}]}]}
//! ```
//!
//! Event tags are `w` (word), `p` (particle), `laugh`, `pause` (with
//! `"c": "short" | "long"`), `trunc` and `ov` (overlap marker).

use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use super::model::{Conversation, Event, PauseClass, Surface, Turn};
use crate::nonlex::classify_particle;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

impl From<serde_json::Error> for ParseError {
    fn from(err: serde_json::Error) -> Self {
        let (line, column) = (err.line(), err.column());
        let full = err.to_string();
        let suffix = format!(" at line {line} column {column}");
        let reason = full.strip_suffix(&suffix).unwrap_or(&full).to_string();
        ParseError {
            line,
            column,
            reason,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Tag {
    #[serde(rename = "w")]
    Word,
    #[serde(rename = "p")]
    Particle,
    #[serde(rename = "laugh")]
    Laugh,
    #[serde(rename = "pause")]
    Pause,
    #[serde(rename = "trunc")]
    Trunc,
    #[serde(rename = "ov")]
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PauseTag {
    Short,
    Long,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    t: Tag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<Surface>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<PauseTag>,
}

#[derive(Deserialize)]
struct RawTurn {
    speaker: Surface,
    #[serde(deserialize_with = "non_empty_events")]
    events: Vec<Event>,
}

#[derive(Deserialize)]
struct RawConversation {
    conversation_id: String,
    turns: Vec<RawTurn>,
}

#[derive(Serialize)]
struct OutTurn<'a> {
    speaker: &'a str,
    events: Vec<RawEvent>,
}

#[derive(Serialize)]
struct OutConversation<'a> {
    conversation_id: &'a str,
    turns: Vec<OutTurn<'a>>,
}

fn normalize(s: Surface) -> Surface {
    if s.chars().any(char::is_uppercase) {
        Surface::from(s.to_lowercase())
    } else {
        s
    }
}

fn invalid<E: de::Error>(reason: impl fmt::Display) -> E {
    E::custom(reason)
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawEvent::deserialize(deserializer)?;
        let surface = |tag: &str, v: Option<Surface>| -> Result<Surface, D::Error> {
            match v {
                Some(s) if !s.is_empty() => Ok(normalize(s)),
                Some(_) => Err(invalid(format!("empty surface in `{tag}` event"))),
                None => Err(invalid(format!("`{tag}` event requires a `v` field"))),
            }
        };
        let no_fields = |tag: &str, raw: &RawEvent| -> Result<(), D::Error> {
            if raw.v.is_some() {
                return Err(invalid(format!("`{tag}` event takes no `v` field")));
            }
            if raw.c.is_some() && raw.t != Tag::Pause {
                return Err(invalid(format!("`{tag}` event takes no `c` field")));
            }
            Ok(())
        };
        if raw.c.is_some() && raw.t != Tag::Pause {
            return Err(invalid("only `pause` events take a `c` field"));
        }
        let event = match raw.t {
            Tag::Word => {
                let s = surface("w", raw.v)?;
                // Inventory particles transcribed as plain words are
                // normalized to particles.
                if classify_particle(&s).is_some() {
                    Event::Particle(s)
                } else {
                    Event::Word(s)
                }
            }
            Tag::Particle => Event::Particle(surface("p", raw.v)?),
            Tag::Trunc => Event::Truncation(surface("trunc", raw.v)?),
            Tag::Laugh => {
                no_fields("laugh", &raw)?;
                Event::Laughter
            }
            Tag::Overlap => {
                no_fields("ov", &raw)?;
                Event::OverlapMark
            }
            Tag::Pause => {
                no_fields("pause", &raw)?;
                match raw.c {
                    Some(PauseTag::Short) => Event::Pause(PauseClass::Short),
                    Some(PauseTag::Long) => Event::Pause(PauseClass::Long),
                    None => return Err(invalid("`pause` event requires a `c` field")),
                }
            }
        };
        Ok(event)
    }
}

fn non_empty_events<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<Event>, D::Error> {
    let events = Vec::<Event>::deserialize(deserializer)?;
    if events.is_empty() {
        return Err(invalid("empty turn"));
    }
    Ok(events)
}

fn to_raw(event: &Event) -> RawEvent {
    let (t, v, c) = match event {
        Event::Word(s) => (Tag::Word, Some(s.clone()), None),
        Event::Particle(s) => (Tag::Particle, Some(s.clone()), None),
        Event::Truncation(s) => (Tag::Trunc, Some(s.clone()), None),
        Event::Laughter => (Tag::Laugh, None, None),
        Event::OverlapMark => (Tag::Overlap, None, None),
        Event::Pause(PauseClass::Short) => (Tag::Pause, None, Some(PauseTag::Short)),
        Event::Pause(PauseClass::Long) => (Tag::Pause, None, Some(PauseTag::Long)),
    };
    RawEvent { t, v, c }
}

/// Parses one conversation document.
pub fn parse_conversation(raw: &[u8]) -> Result<Conversation, ParseError> {
    let doc: RawConversation = serde_json::from_slice(raw)?;
    let turns = doc
        .turns
        .into_iter()
        .map(|t| Turn {
            speaker: t.speaker,
            index: 0,
            events: t.events,
        })
        .collect();
    Ok(Conversation::new(doc.conversation_id, turns))
}

/// Writes a conversation in the transcript format (compact, single line).
pub fn serialize_conversation(conversation: &Conversation) -> String {
    let out = OutConversation {
        conversation_id: &conversation.id,
        turns: conversation
            .turns
            .iter()
            .map(|t| OutTurn {
                speaker: &t.speaker,
                events: t.events.iter().map(to_raw).collect(),
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("conversation serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let doc = br#"{"conversation_id":"C1","turns":[{"speaker":"S1","events":[{"t":"w","v":"hello"},{"t":"laugh"}]}]}"#;
        let c = parse_conversation(doc).unwrap();
        assert_eq!(c.turns.len(), 1);
        assert_eq!(
            c.turns[0].events,
            vec![Event::Word("hello".into()), Event::Laughter]
        );
        assert!(c.speaker_ids.contains("S1"));
    }

    #[test]
    fn full_event_inventory() {
        let doc = br#"{"conversation_id": "C001", "turns": [{"speaker": "S1", "events": [{"t":"w","v":"Hello"},{"t":"p","v":"erm"},{"t":"laugh"},{"t":"pause","c":"short"},{"t":"trunc","v":"pur"},{"t":"ov"}]}]}"#;
        let c = parse_conversation(doc).unwrap();
        assert_eq!(
            c.turns[0].events,
            vec![
                Event::Word("hello".into()),
                Event::Particle("erm".into()),
                Event::Laughter,
                Event::Pause(PauseClass::Short),
                Event::Truncation("pur".into()),
                Event::OverlapMark,
            ]
        );
    }

    #[test]
    fn empty_turn_rejected() {
        let doc = b"{\"conversation_id\":\"C1\",\n\"turns\":[{\"speaker\":\"S1\",\"events\":[]}]}";
        let err = parse_conversation(doc).unwrap_err();
        assert_eq!(err.reason, "empty turn");
        assert_eq!(err.line, 2);
    }

    #[test]
    fn unknown_kind_rejected() {
        let doc = br#"{"conversation_id":"C1","turns":[{"speaker":"S1","events":[{"t":"cough"}]}]}"#;
        let err = parse_conversation(doc).unwrap_err();
        assert!(err.reason.contains("unknown variant `cough`"), "{err}");
        assert_eq!(err.line, 1);
        assert!(err.column > 50);
    }

    #[test]
    fn missing_speaker_rejected() {
        let doc = br#"{"conversation_id":"C1","turns":[{"events":[{"t":"laugh"}]}]}"#;
        let err = parse_conversation(doc).unwrap_err();
        assert!(err.reason.contains("missing field `speaker`"), "{err}");
    }

    #[test]
    fn malformed_syntax_rejected() {
        let err = parse_conversation(b"{\"conversation_id\": ").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.reason.contains("EOF"), "{err}");
    }

    #[test]
    fn field_shape_checked() {
        for bad in [
            r#"{"t":"pause"}"#,
            r#"{"t":"pause","c":"medium"}"#,
            r#"{"t":"w"}"#,
            r#"{"t":"w","v":""}"#,
            r#"{"t":"laugh","v":"ha"}"#,
            r#"{"t":"w","v":"x","c":"short"}"#,
            r#"{"t":"ov","x":1}"#,
        ] {
            let doc = format!(
                r#"{{"conversation_id":"C1","turns":[{{"speaker":"S1","events":[{bad}]}}]}}"#
            );
            assert!(parse_conversation(doc.as_bytes()).is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn inventory_words_become_particles() {
        let doc = br#"{"conversation_id":"C1","turns":[{"speaker":"S1","events":[{"t":"w","v":"Oh"},{"t":"w","v":"hm?"},{"t":"w","v":"hm"}]}]}"#;
        let c = parse_conversation(doc).unwrap();
        assert_eq!(
            c.turns[0].events,
            vec![
                Event::Particle("oh".into()),
                Event::Particle("hm?".into()),
                Event::Word("hm".into()),
            ]
        );
    }

    #[test]
    fn pause_round_trip() {
        let doc = br#"{"conversation_id":"C1","turns":[{"speaker":"S1","events":[{"t":"pause","c":"short"}]}]}"#;
        let c = parse_conversation(doc).unwrap();
        let text = serialize_conversation(&c);
        assert_eq!(text.as_bytes(), doc);
        assert_eq!(parse_conversation(text.as_bytes()).unwrap(), c);
    }
}
