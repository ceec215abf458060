//! Prompt templates and rendering.
//!
//! Templates are plain UTF-8 resources with `{{name}}` placeholders. Each
//! prompt kind has a body and a theme clause; the clause is rendered into the
//! body's `{{theme_clause}}` slot only when the theme is non-empty.
//!
//! Substitution is single-pass: inserted values are never rescanned, so a
//! word that happens to contain `{{theme}}` is emitted literally.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::{check_distinct_words, DomainError, Theme, Word};

const BUILTIN_VERSION: &str = "v1";
const BUILTIN_SCRIPT: &str = include_str!("../templates/v1/script.txt");
const BUILTIN_SCRIPT_CLAUSE: &str = include_str!("../templates/v1/script.theme_clause.txt");
const BUILTIN_EXPLORATION: &str = include_str!("../templates/v1/exploration.txt");
const BUILTIN_EXPLORATION_CLAUSE: &str =
    include_str!("../templates/v1/exploration.theme_clause.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    Script,
    Exploration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
    pub kind: PromptKind,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("{file}: unknown placeholder {{{{{name}}}}}")]
    UnknownPlaceholder { file: String, name: String },
    #[error("{file}: unterminated placeholder at byte {offset}")]
    Unterminated { file: String, offset: usize },
    #[error("{file}: required placeholder {{{{{name}}}}} is missing")]
    MissingPlaceholder { file: String, name: &'static str },
    #[error("{file}: template is empty")]
    Empty { file: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("word list is empty")]
    EmptyWordList,
    #[error("duplicate word {0:?}")]
    DuplicateWord(String),
    #[error("the two words are identical")]
    IdenticalWords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placeholder {
    ThemeClause,
    Theme,
    Words,
    WordA,
    WordB,
}

impl Placeholder {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "theme_clause" => Placeholder::ThemeClause,
            "theme" => Placeholder::Theme,
            "words" => Placeholder::Words,
            "word_a" => Placeholder::WordA,
            "word_b" => Placeholder::WordB,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Template {
    segments: Vec<Segment>,
}

impl Template {
    fn parse(file: &str, source: &str) -> Result<Self, TemplateError> {
        // Resource files conventionally end with a newline; it is not part of the prompt.
        let source = source.strip_suffix('\n').unwrap_or(source);
        let source = source.strip_suffix('\r').unwrap_or(source);
        let mut segments = Vec::new();
        let mut rest = source;
        let mut offset = 0;
        while let Some(open) = rest.find("{{") {
            if open > 0 {
                segments.push(Segment::Literal(rest[..open].to_owned()));
            }
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or_else(|| TemplateError::Unterminated {
                file: file.to_owned(),
                offset: offset + open,
            })?;
            let name = after[..close].trim();
            let slot = Placeholder::parse(name).ok_or_else(|| TemplateError::UnknownPlaceholder {
                file: file.to_owned(),
                name: name.to_owned(),
            })?;
            segments.push(Segment::Slot(slot));
            let consumed = open + 2 + close + 2;
            offset += consumed;
            rest = &rest[consumed..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_owned()));
        }
        Ok(Self { segments })
    }

    fn has(&self, slot: Placeholder) -> bool {
        self.segments.contains(&Segment::Slot(slot))
    }

    fn render(&self, value: impl Fn(Placeholder) -> String) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(slot) => out.push_str(&value(*slot)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PromptTemplate {
    body: Template,
    theme_clause: Template,
}

impl PromptTemplate {
    fn parse(
        name: &str,
        body: &str,
        clause: &str,
        required: &[(Placeholder, &'static str)],
    ) -> Result<Self, TemplateError> {
        let body_file = format!("{name}.txt");
        if body.trim().is_empty() {
            return Err(TemplateError::Empty { file: body_file });
        }
        let body = Template::parse(&body_file, body)?;
        for (slot, slot_name) in required {
            if !body.has(*slot) {
                return Err(TemplateError::MissingPlaceholder {
                    file: body_file,
                    name: slot_name,
                });
            }
        }
        let clause_file = format!("{name}.theme_clause.txt");
        let theme_clause = Template::parse(&clause_file, clause)?;
        if theme_clause.has(Placeholder::ThemeClause) {
            return Err(TemplateError::UnknownPlaceholder {
                file: clause_file,
                name: "theme_clause".into(),
            });
        }
        Ok(Self { body, theme_clause })
    }

    fn render(&self, theme: &Theme, value: impl Fn(Placeholder) -> String) -> String {
        let theme_value = |slot| match slot {
            Placeholder::Theme => theme.as_str().to_owned(),
            other => value(other),
        };
        let clause = if theme.is_empty() {
            String::new()
        } else {
            self.theme_clause.render(theme_value)
        };
        self.body.render(|slot| match slot {
            Placeholder::ThemeClause => clause.clone(),
            other => theme_value(other),
        })
    }
}

/// A versioned pair of prompt templates (story script and exploration).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    version: String,
    script: PromptTemplate,
    exploration: PromptTemplate,
}

impl TemplateSet {
    /// The shipped default templates.
    pub fn builtin() -> Self {
        Self::from_sources(
            BUILTIN_VERSION,
            BUILTIN_SCRIPT,
            BUILTIN_SCRIPT_CLAUSE,
            BUILTIN_EXPLORATION,
            BUILTIN_EXPLORATION_CLAUSE,
        )
        .expect("builtin templates are valid")
    }

    /// Loads `script.txt`, `script.theme_clause.txt`, `exploration.txt` and
    /// `exploration.theme_clause.txt` from `dir`. The directory name is the
    /// template version.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| TemplateError::Io { path, source })
        };
        let version = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_owned());
        Self::from_sources(
            &version,
            &read("script.txt")?,
            &read("script.theme_clause.txt")?,
            &read("exploration.txt")?,
            &read("exploration.theme_clause.txt")?,
        )
    }

    pub fn from_sources(
        version: &str,
        script: &str,
        script_clause: &str,
        exploration: &str,
        exploration_clause: &str,
    ) -> Result<Self, TemplateError> {
        Ok(Self {
            version: version.to_owned(),
            script: PromptTemplate::parse(
                "script",
                script,
                script_clause,
                &[(Placeholder::Words, "words")],
            )?,
            exploration: PromptTemplate::parse(
                "exploration",
                exploration,
                exploration_clause,
                &[(Placeholder::WordA, "word_a"), (Placeholder::WordB, "word_b")],
            )?,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn render_script_prompt(&self, words: &[Word], theme: &Theme) -> Result<PromptText, PromptError> {
        check_distinct_words(words).map_err(|err| match err {
            DomainError::DuplicateWord(w) => PromptError::DuplicateWord(w),
            _ => PromptError::EmptyWordList,
        })?;
        let joined = join_words(words);
        let text = self.script.render(theme, |slot| match slot {
            Placeholder::Words => joined.clone(),
            _ => String::new(),
        });
        Ok(PromptText {
            text,
            kind: PromptKind::Script,
        })
    }

    pub fn render_exploration_prompt(
        &self,
        word_a: &Word,
        word_b: &Word,
        theme: &Theme,
    ) -> Result<PromptText, PromptError> {
        if word_a == word_b {
            return Err(PromptError::IdenticalWords);
        }
        let text = self.exploration.render(theme, |slot| match slot {
            Placeholder::WordA => word_a.to_string(),
            Placeholder::WordB => word_b.to_string(),
            Placeholder::Words => join_words(&[word_a.clone(), word_b.clone()]),
            _ => String::new(),
        });
        Ok(PromptText {
            text,
            kind: PromptKind::Exploration,
        })
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

fn join_words(words: &[Word]) -> String {
    words
        .iter()
        .map(Word::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}
