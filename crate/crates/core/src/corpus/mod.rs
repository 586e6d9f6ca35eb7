//! Transcript data model, parsing and corpus loading.

mod load;
mod model;
mod parse;

pub use load::{
    conversation_files, load_corpus, parse_speakers, speakers_to_manifest, CorpusError,
    ManifestEntry, SPEAKER_MANIFEST,
};
pub use model::{
    category_of, Category, Conversation, Corpus, Event, Gender, PauseClass, Scheme,
    SpeakerProfile, Surface, Turn, TurnRef, MAX_AGE, OLD_MIN_AGE, YOUNG_MAX_AGE,
};
pub use parse::{parse_conversation, serialize_conversation, ParseError};
