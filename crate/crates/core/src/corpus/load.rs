use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Corpus, Gender, SpeakerProfile, Surface, MAX_AGE};
use super::parse::{parse_conversation, ParseError};

pub const SPEAKER_MANIFEST: &str = "speakers.json";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("speaker manifest: {0}")]
    Manifest(String),
    #[error("no conversation files in {}", .0.display())]
    NoConversations(PathBuf),
    #[error("speaker `{0}` is not in the speaker manifest")]
    MissingSpeaker(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub gender: Option<String>,
    pub age: Option<u32>,
}

/// Parses a `speakers.json` manifest: a list of `{"id", "gender", "age"}`
/// records with gender `"F"`, `"M"` or null.
pub fn parse_speakers(raw: &[u8]) -> Result<BTreeMap<Surface, SpeakerProfile>, CorpusError> {
    let entries: Vec<ManifestEntry> =
        serde_json::from_slice(raw).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    let mut speakers = BTreeMap::new();
    for entry in entries {
        let gender = match entry.gender.as_deref() {
            Some("F") => Gender::Female,
            Some("M") => Gender::Male,
            None => Gender::Unspecified,
            Some(other) => {
                return Err(CorpusError::Manifest(format!(
                    "speaker `{}` has unknown gender `{other}`",
                    entry.id
                )))
            }
        };
        if let Some(age) = entry.age {
            if age > MAX_AGE {
                return Err(CorpusError::Manifest(format!(
                    "speaker `{}` has implausible age {age}",
                    entry.id
                )));
            }
        }
        if entry.id.is_empty() {
            return Err(CorpusError::Manifest("empty speaker id".into()));
        }
        let id = Surface::from(entry.id.as_str());
        let profile = SpeakerProfile {
            id: id.clone(),
            gender,
            age: entry.age,
        };
        if speakers.insert(id, profile).is_some() {
            return Err(CorpusError::Manifest(format!(
                "duplicate speaker id `{}`",
                entry.id
            )));
        }
    }
    Ok(speakers)
}

pub fn speakers_to_manifest(speakers: &BTreeMap<Surface, SpeakerProfile>) -> Vec<ManifestEntry> {
    speakers
        .values()
        .map(|p| ManifestEntry {
            id: p.id.to_string(),
            gender: match p.gender {
                Gender::Female => Some("F".into()),
                Gender::Male => Some("M".into()),
                Gender::Unspecified => None,
            },
            age: p.age,
        })
        .collect()
}

/// Conversation files of a corpus directory in lexicographic order.
pub fn conversation_files(root: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let is_json = path.extension().is_some_and(|e| e == "json");
        let is_manifest = path.file_name().is_some_and(|n| n == SPEAKER_MANIFEST);
        if path.is_file() && is_json && !is_manifest {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads and cross-validates a corpus directory.
///
/// Conversation files are parsed in parallel; all errors are collected rather
/// than stopping at the first one.
pub fn load_corpus(root: &Path) -> Result<Corpus, Vec<CorpusError>> {
    let manifest_path = root.join(SPEAKER_MANIFEST);
    let speakers = fs::read(&manifest_path)
        .map_err(|source| CorpusError::Io {
            path: manifest_path.clone(),
            source,
        })
        .and_then(|raw| parse_speakers(&raw));
    let files = conversation_files(root).map_err(|e| vec![e])?;

    let mut errors = Vec::new();
    let speakers = match speakers {
        Ok(s) => s,
        Err(e) => {
            errors.push(e);
            BTreeMap::new()
        }
    };
    if files.is_empty() {
        errors.push(CorpusError::NoConversations(root.to_path_buf()));
        return Err(errors);
    }

    let parsed: Vec<_> = files
        .par_iter()
        .map(|path| {
            let raw = fs::read(path).map_err(|source| CorpusError::Io {
                path: path.clone(),
                source,
            })?;
            parse_conversation(&raw).map_err(|source| CorpusError::Parse {
                path: path.clone(),
                source,
            })
        })
        .collect();

    let mut conversations = Vec::with_capacity(parsed.len());
    for result in parsed {
        match result {
            Ok(c) => conversations.push(c),
            Err(e) => errors.push(e),
        }
    }

    if !speakers.is_empty() || errors.is_empty() {
        let mut missing: Vec<&str> = conversations
            .iter()
            .flat_map(|c| c.speaker_ids.iter())
            .filter(|id| !speakers.contains_key(*id))
            .map(|id| id.as_str())
            .collect();
        missing.sort_unstable();
        missing.dedup();
        errors.extend(
            missing
                .into_iter()
                .map(|id| CorpusError::MissingSpeaker(id.to_string())),
        );
    }

    if errors.is_empty() {
        Ok(Corpus {
            conversations,
            speakers,
        })
    } else {
        Err(errors)
    }
}
