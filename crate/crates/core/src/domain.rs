//! Shared domain types and their invariants.
//!
//! Every type here is an immutable value with a canonical JSON form. Words
//! compare case-insensitively through [`canonical_word_key`]; everything that
//! needs word equality (maps, dedup, matching) goes through that key.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("invalid word {0:?}: {1}")]
    InvalidWord(String, &'static str),
    #[error("invalid theme: {0}")]
    InvalidTheme(&'static str),
    #[error("word list is empty")]
    EmptyWordList,
    #[error("duplicate word {0:?}")]
    DuplicateWord(String),
    #[error("{0} must not be empty")]
    EmptyText(&'static str),
    #[error("invalid identifier {0:?}")]
    InvalidId(String),
    #[error("illegal job transition {from:?} -> {to:?}")]
    IllegalTransition { from: JobState, to: JobState },
    #[error("invalid exploration chain: {0}")]
    InvalidChain(String),
}

/// A vocabulary lemma. Case is preserved for display; equality, ordering
/// and hashing use the lowercase key.
#[derive(Clone)]
pub struct Word(String);

impl Word {
    pub fn new(lemma: impl Into<String>) -> Result<Self, DomainError> {
        let lemma = lemma.into();
        if lemma.is_empty() {
            return Err(DomainError::InvalidWord(lemma, "empty"));
        }
        if lemma.trim() != lemma {
            return Err(DomainError::InvalidWord(lemma, "leading or trailing whitespace"));
        }
        if lemma.contains(['\n', '\r']) {
            return Err(DomainError::InvalidWord(lemma, "contains a line break"));
        }
        Ok(Self(lemma))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn key(&self) -> String {
        canonical_word_key(self)
    }
}

/// Lowercased lemma; the only notion of word identity in the system.
pub fn canonical_word_key(word: &Word) -> String {
    word.0.to_lowercase()
}

impl PartialEq for Word {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Word {}

impl Hash for Word {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({:?})", self.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Word::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Checks that a word list is non-empty and free of case-insensitive duplicates.
pub fn check_distinct_words(words: &[Word]) -> Result<(), DomainError> {
    if words.is_empty() {
        return Err(DomainError::EmptyWordList);
    }
    let mut seen = HashSet::new();
    for word in words {
        if !seen.insert(word.key()) {
            return Err(DomainError::DuplicateWord(word.to_string()));
        }
    }
    Ok(())
}

/// Free-text contextual cue. Empty means "no theme".
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Theme(String);

impl Theme {
    /// Trims surrounding whitespace; rejects embedded line breaks.
    pub fn new(text: impl AsRef<str>) -> Result<Self, DomainError> {
        let text = text.as_ref().trim();
        if text.contains(['\n', '\r']) {
            return Err(DomainError::InvalidTheme("contains a line break"));
        }
        Ok(Self(text.to_owned()))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Theme {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Theme {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Theme::new(raw).map_err(serde::de::Error::custom)
    }
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(raw: impl Into<String>) -> Result<Self, DomainError> {
                let raw = raw.into();
                if raw.is_empty() || raw.trim() != raw || raw.contains(['/', '\n', '\r']) {
                    return Err(DomainError::InvalidId(raw));
                }
                Ok(Self(raw))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id_type!(
    /// Unit ids are either supplied by the import document or generated.
    UnitId
);
id_type!(MaterialSetId);
id_type!(StickerId);
id_type!(JobId);
id_type!(ExplorationId);

/// Lowercase hex SHA-256 of a blob's bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlobKey(String);

impl BlobKey {
    pub fn new(raw: impl Into<String>) -> Result<Self, DomainError> {
        let raw = raw.into();
        let valid = raw.len() == 64
            && raw
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !valid {
            return Err(DomainError::InvalidId(raw));
        }
        Ok(Self(raw))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BlobKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// UTC instant at second precision, serialized as RFC 3339 (`...Z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn from_datetime(at: DateTime<Utc>) -> Self {
        Self(at.trunc_subsecs(0))
    }

    pub fn from_unix(secs: i64) -> Self {
        Self(DateTime::from_timestamp(secs, 0).unwrap_or_default())
    }

    pub fn as_datetime(&self) -> DateTime<Utc> {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Secs, true))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        let parsed = DateTime::parse_from_rfc3339(&raw).map_err(serde::de::Error::custom)?;
        Ok(Self::from_datetime(parsed.with_timezone(&Utc)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyUnit {
    pub id: UnitId,
    pub title: String,
    pub grade_label: String,
    pub words: Vec<Word>,
}

impl VocabularyUnit {
    pub fn new(
        id: UnitId,
        title: impl Into<String>,
        grade_label: impl Into<String>,
        words: Vec<Word>,
    ) -> Result<Self, DomainError> {
        check_distinct_words(&words)?;
        Ok(Self {
            id,
            title: title.into(),
            grade_label: grade_label.into(),
            words,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub word: Word,
    pub sentence: String,
    pub sticker_prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryScript {
    pub theme: Theme,
    pub lines: Vec<ScriptLine>,
}

impl StoryScript {
    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.lines.iter().map(|line| &line.word)
    }

    pub fn line_for(&self, word: &Word) -> Option<&ScriptLine> {
        self.lines.iter().find(|line| &line.word == word)
    }

    /// The sentences joined one per line, in script order.
    pub fn article(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line.sentence);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StickerAsset {
    pub id: StickerId,
    pub word: Word,
    pub prompt: String,
    pub seed: u64,
    pub image_ref: BlobKey,
    pub provider_name: String,
    pub created_at: Timestamp,
    pub supersedes: Option<StickerId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaterialSetState {
    Generating,
    Ready,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialSet {
    pub id: MaterialSetId,
    pub unit_id: UnitId,
    pub theme: Theme,
    /// Absent until the text provider produced a valid script.
    pub script: Option<StoryScript>,
    pub stickers: BTreeMap<Word, StickerId>,
    pub state: MaterialSetState,
    pub seed: u64,
    pub error: Option<String>,
    pub created_at: Timestamp,
}

impl MaterialSet {
    /// Ready sets carry exactly one sticker per script line.
    pub fn is_consistent(&self) -> bool {
        match (&self.state, &self.script) {
            (MaterialSetState::Ready, Some(script)) => {
                self.stickers.len() == script.lines.len()
                    && script.words().all(|w| self.stickers.contains_key(w))
            }
            (MaterialSetState::Ready, None) => false,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialSetSummary {
    pub id: MaterialSetId,
    pub theme: Theme,
    pub state: MaterialSetState,
    pub created_at: Timestamp,
}

impl From<&MaterialSet> for MaterialSetSummary {
    fn from(set: &MaterialSet) -> Self {
        Self {
            id: set.id.clone(),
            theme: set.theme.clone(),
            state: set.state,
            created_at: set.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationChain {
    pub id: ExplorationId,
    pub material_set_id: MaterialSetId,
    pub word_a: Word,
    pub word_b: Word,
    pub theme: Theme,
    pub chain: Vec<Word>,
    /// Sticker prompts for the interior words only.
    pub added_prompts: BTreeMap<Word, String>,
    pub stickers: BTreeMap<Word, StickerId>,
    pub created_at: Timestamp,
}

impl ExplorationChain {
    pub fn interior(&self) -> &[Word] {
        if self.chain.len() < 2 {
            return &[];
        }
        &self.chain[1..self.chain.len() - 1]
    }

    pub fn check_invariants(&self) -> Result<(), DomainError> {
        let bad = |msg: &str| Err(DomainError::InvalidChain(msg.to_owned()));
        if self.chain.len() < 2 {
            return bad("chain shorter than two words");
        }
        if self.chain.first() != Some(&self.word_a) || self.chain.last() != Some(&self.word_b) {
            return bad("chain endpoints differ from the input words");
        }
        let distinct: HashSet<_> = self.chain.iter().collect();
        if distinct.len() != self.chain.len() {
            return bad("chain words are not pairwise distinct");
        }
        let interior: HashSet<_> = self.interior().iter().collect();
        let prompted: HashSet<_> = self.added_prompts.keys().collect();
        if interior != prompted {
            return bad("added prompts do not match the interior words");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobKind {
    Script,
    Sticker,
    Exploration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobState {
    Pending,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }

    /// Pending -> Running -> {Succeeded, Failed}.
    pub fn can_transition_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Pending, JobState::Running)
                | (JobState::Running, JobState::Succeeded)
                | (JobState::Running, JobState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub id: JobId,
    pub kind: JobKind,
    pub state: JobState,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_ref: Option<String>,
}

impl GenerationJob {
    pub fn pending(id: JobId, kind: JobKind) -> Self {
        Self {
            id,
            kind,
            state: JobState::Pending,
            attempts: 0,
            error: None,
            result_ref: None,
        }
    }

    pub fn transition(&mut self, next: JobState) -> Result<(), DomainError> {
        if !self.state.can_transition_to(next) {
            return Err(DomainError::IllegalTransition {
                from: self.state,
                to: next,
            });
        }
        self.state = next;
        Ok(())
    }
}

/// Byte range of one highlighted surface form inside a script sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub line_index: usize,
    pub start: usize,
    pub end: usize,
}
