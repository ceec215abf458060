//! Parsing of text-provider output.
//!
//! Both generation prompts ask the model for a flat list of labelled records:
//!
//! ```text
//! Word: "spring"
//! Sentence: "In spring, the flowers bloom and we go on a school trip
//! to the park."
//! Sticker Prompt: "Children on a school trip in a park full of blooming flowers."
//! ...
//! ```
//!
//! Labels are matched case-insensitively, values may be bare or quoted, and a
//! quoted value may be hard-wrapped across lines (pieces are rejoined with a
//! single space). Blank lines and `...` separator lines are skipped. Anything
//! else outside a record is rejected.

mod highlight;
mod validate;

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use thiserror::Error;

use crate::domain::{ScriptLine, Word};

pub use highlight::{highlight_script, match_word_occurrences, surface_forms};
pub use validate::{validate_script, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed record at bytes {}..{}: {reason}", span.start, span.end)]
    MalformedRecord { span: Range<usize>, reason: String },
    #[error("no record for requested word {0:?}")]
    MissingWord(String),
    #[error("record for unrequested word {0:?}")]
    UnrequestedWord(String),
    #[error("more than one record for word {0:?}")]
    DuplicateWord(String),
    #[error("sentence for {0:?} does not contain the word")]
    SentenceWordMismatch(String),
    #[error("interior word {0:?} equals an input word")]
    EndpointCollision(String),
    #[error("requested word list is empty")]
    EmptyRequest,
    #[error("the two input words are identical")]
    IdenticalWords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grammar {
    /// `Word` / `Sentence` / `Sticker Prompt`, all three required.
    Script,
    /// `Word` / `Sticker Prompt`; a `Sentence` field is tolerated and kept.
    Exploration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRecord {
    pub word: String,
    pub sentence: Option<String>,
    pub sticker_prompt: String,
    /// Byte range of the record in the raw text.
    pub source_span: Range<usize>,
}

/// Interior of an exploration chain as parsed from provider output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedChain {
    pub chain: Vec<Word>,
    pub added_prompts: BTreeMap<Word, String>,
}

impl ParsedChain {
    pub fn interior(&self) -> &[Word] {
        &self.chain[1..self.chain.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Word,
    Sentence,
    StickerPrompt,
}

impl Field {
    fn label(self) -> &'static str {
        match self {
            Field::Word => "Word",
            Field::Sentence => "Sentence",
            Field::StickerPrompt => "Sticker Prompt",
        }
    }
}

/// Recognizes `Word:`, `Sentence:` and `Sticker Prompt:` (any case, any
/// whitespace around the colon and between "Sticker" and "Prompt").
fn split_label(line: &str) -> Option<(Field, &str)> {
    let colon = line.find(':')?;
    let label = line[..colon]
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    let field = match label.as_str() {
        "word" => Field::Word,
        "sentence" => Field::Sentence,
        "sticker prompt" => Field::StickerPrompt,
        _ => return None,
    };
    Some((field, line[colon + 1..].trim()))
}

fn is_separator(line: &str) -> bool {
    !line.is_empty() && (line.chars().all(|c| c == '.') || line.chars().all(|c| c == '…'))
}

fn closing_quote(open: char) -> Option<char> {
    match open {
        '"' => Some('"'),
        '\u{201C}' => Some('\u{201D}'),
        _ => None,
    }
}

#[derive(Debug)]
enum ValueState {
    /// Label seen, value expected on a following line.
    Awaiting,
    Bare,
    OpenQuote(char),
    Closed,
}

#[derive(Debug)]
struct OpenValue {
    field: Field,
    text: String,
    state: ValueState,
}

#[derive(Debug, Default)]
struct RecordBuilder {
    start: usize,
    end: usize,
    word: Option<String>,
    sentence: Option<String>,
    sticker_prompt: Option<String>,
}

impl RecordBuilder {
    fn slot(&mut self, field: Field) -> &mut Option<String> {
        match field {
            Field::Word => &mut self.word,
            Field::Sentence => &mut self.sentence,
            Field::StickerPrompt => &mut self.sticker_prompt,
        }
    }
}

struct Scanner {
    grammar: Grammar,
    records: Vec<ParsedRecord>,
    current: Option<RecordBuilder>,
    value: Option<OpenValue>,
}

fn malformed(span: Range<usize>, reason: impl Into<String>) -> ParseError {
    ParseError::MalformedRecord {
        span,
        reason: reason.into(),
    }
}

impl Scanner {
    fn new(grammar: Grammar) -> Self {
        Self {
            grammar,
            records: Vec::new(),
            current: None,
            value: None,
        }
    }

    /// Begins a value from the text following a label (or from the first
    /// line after a bare label).
    fn start_value(&mut self, field: Field, text: &str) {
        let mut chars = text.chars();
        let state = match chars.next().and_then(|c| closing_quote(c).map(|close| (c, close))) {
            None if text.is_empty() => ValueState::Awaiting,
            None => ValueState::Bare,
            Some((open, close)) => {
                let inner = &text[open.len_utf8()..];
                if !inner.is_empty() && inner.ends_with(close) {
                    let inner = &inner[..inner.len() - close.len_utf8()];
                    self.value = Some(OpenValue {
                        field,
                        text: inner.trim().to_owned(),
                        state: ValueState::Closed,
                    });
                    return;
                }
                self.value = Some(OpenValue {
                    field,
                    text: inner.trim().to_owned(),
                    state: ValueState::OpenQuote(close),
                });
                return;
            }
        };
        self.value = Some(OpenValue {
            field,
            text: text.to_owned(),
            state,
        });
    }

    fn finish_value(&mut self, at: usize) -> Result<(), ParseError> {
        let Some(value) = self.value.take() else {
            return Ok(());
        };
        let record = self.current.as_mut().expect("values only exist inside records");
        match value.state {
            ValueState::Awaiting => {
                return Err(malformed(
                    record.start..at,
                    format!("{} has no value", value.field.label()),
                ))
            }
            ValueState::OpenQuote(_) => {
                return Err(malformed(
                    record.start..at,
                    format!("unterminated quote in {}", value.field.label()),
                ))
            }
            ValueState::Bare | ValueState::Closed => {}
        }
        let text = value.text.trim().to_owned();
        if text.is_empty() {
            return Err(malformed(
                record.start..at,
                format!("{} is empty", value.field.label()),
            ));
        }
        *record.slot(value.field) = Some(text);
        Ok(())
    }

    fn finish_record(&mut self) -> Result<(), ParseError> {
        let Some(record) = self.current.take() else {
            return Ok(());
        };
        let span = record.start..record.end;
        let word = record
            .word
            .ok_or_else(|| malformed(span.clone(), "missing Word"))?;
        if self.grammar == Grammar::Script && record.sentence.is_none() {
            return Err(malformed(span, "missing Sentence"));
        }
        let sticker_prompt = record
            .sticker_prompt
            .ok_or_else(|| malformed(span.clone(), "missing Sticker Prompt"))?;
        self.records.push(ParsedRecord {
            word,
            sentence: record.sentence,
            sticker_prompt,
            source_span: span,
        });
        Ok(())
    }

    fn line(&mut self, start: usize, end: usize, line: &str) -> Result<(), ParseError> {
        let trimmed = line.trim();

        if let Some(value) = self.value.as_mut() {
            if let ValueState::OpenQuote(close) = value.state {
                if !trimmed.is_empty() {
                    let piece = match trimmed.strip_suffix(close) {
                        Some(piece) => {
                            value.state = ValueState::Closed;
                            piece.trim_end()
                        }
                        None => trimmed,
                    };
                    if !value.text.is_empty() && !piece.is_empty() {
                        value.text.push(' ');
                    }
                    value.text.push_str(piece);
                }
                if let Some(record) = self.current.as_mut() {
                    record.end = end;
                }
                return Ok(());
            }
        }

        if trimmed.is_empty() || is_separator(trimmed) {
            if !matches!(self.value, Some(OpenValue { state: ValueState::Awaiting, .. })) {
                self.finish_value(start)?;
            }
            return Ok(());
        }

        if let Some((field, rest)) = split_label(trimmed) {
            self.finish_value(start)?;
            if field == Field::Word {
                self.finish_record()?;
                self.current = Some(RecordBuilder {
                    start,
                    end,
                    ..RecordBuilder::default()
                });
            }
            let Some(record) = self.current.as_mut() else {
                return Err(malformed(
                    start..end,
                    format!("{} before any Word label", field.label()),
                ));
            };
            if record.slot(field).is_some() {
                return Err(malformed(
                    record.start..end,
                    format!("repeated {} label", field.label()),
                ));
            }
            record.end = end;
            self.start_value(field, rest);
            return Ok(());
        }

        match self.value.as_mut() {
            Some(value) => match value.state {
                ValueState::Awaiting => {
                    let field = value.field;
                    self.start_value(field, trimmed);
                }
                ValueState::Bare => {
                    value.text.push(' ');
                    value.text.push_str(trimmed);
                }
                _ => {
                    return Err(malformed(start..end, "unexpected text after a quoted value"));
                }
            },
            None => return Err(malformed(start..end, "text outside of any record")),
        }
        if let Some(record) = self.current.as_mut() {
            record.end = end;
        }
        Ok(())
    }

    fn finish(mut self, len: usize) -> Result<Vec<ParsedRecord>, ParseError> {
        self.finish_value(len)?;
        self.finish_record()?;
        Ok(self.records)
    }
}

/// Splits raw provider text into labelled records.
pub fn parse_records(raw: &str, grammar: Grammar) -> Result<Vec<ParsedRecord>, ParseError> {
    let mut scanner = Scanner::new(grammar);
    let mut offset = 0;
    for piece in raw.split_inclusive('\n') {
        let start = offset;
        offset += piece.len();
        let line = piece.trim_end_matches(['\n', '\r']);
        scanner.line(start, start + line.len(), line)?;
    }
    scanner.finish(raw.len())
}

fn record_word(record: &ParsedRecord) -> Result<Word, ParseError> {
    Word::new(record.word.as_str())
        .map_err(|err| malformed(record.source_span.clone(), err.to_string()))
}

/// Parses story-script output into one line per requested word, in request
/// order. The returned lines always pass [`validate_script`].
pub fn parse_script_output(raw: &str, requested: &[Word]) -> Result<Vec<ScriptLine>, ParseError> {
    if requested.is_empty() {
        return Err(ParseError::EmptyRequest);
    }
    let records = parse_records(raw, Grammar::Script)?;

    let wanted: HashSet<&Word> = requested.iter().collect();
    let mut by_word: BTreeMap<Word, ParsedRecord> = BTreeMap::new();
    for record in records {
        let word = record_word(&record)?;
        if !wanted.contains(&word) {
            return Err(ParseError::UnrequestedWord(word.to_string()));
        }
        if by_word.contains_key(&word) {
            return Err(ParseError::DuplicateWord(word.to_string()));
        }
        by_word.insert(word, record);
    }

    let mut lines = Vec::with_capacity(requested.len());
    for word in requested {
        let record = by_word
            .remove(word)
            .ok_or_else(|| ParseError::MissingWord(word.to_string()))?;
        let sentence = record.sentence.unwrap_or_default();
        if match_word_occurrences(word, &sentence).is_empty() {
            return Err(ParseError::SentenceWordMismatch(word.to_string()));
        }
        lines.push(ScriptLine {
            word: word.clone(),
            sentence,
            sticker_prompt: record.sticker_prompt,
        });
    }
    Ok(lines)
}

/// Parses exploration output into a chain `[word_a, interior.., word_b]`.
///
/// If the model echoes the full chain (first record is `word_a` and last is
/// `word_b`), those two endpoint records are dropped and their prompts
/// ignored. Any other appearance of an input word is an
/// [`ParseError::EndpointCollision`].
pub fn parse_exploration_output(
    raw: &str,
    word_a: &Word,
    word_b: &Word,
) -> Result<ParsedChain, ParseError> {
    if word_a == word_b {
        return Err(ParseError::IdenticalWords);
    }
    let records = parse_records(raw, Grammar::Exploration)?;
    let mut words = records
        .iter()
        .map(record_word)
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = records;

    let echoed = words.len() >= 2
        && words.first() == Some(word_a)
        && words.last() == Some(word_b);
    if echoed {
        words = words[1..words.len() - 1].to_vec();
        records = records[1..records.len() - 1].to_vec();
    }

    let mut chain = vec![word_a.clone()];
    let mut added_prompts = BTreeMap::new();
    for (word, record) in words.into_iter().zip(records) {
        if &word == word_a || &word == word_b {
            return Err(ParseError::EndpointCollision(word.to_string()));
        }
        if added_prompts.contains_key(&word) {
            return Err(ParseError::DuplicateWord(word.to_string()));
        }
        added_prompts.insert(word.clone(), record.sticker_prompt);
        chain.push(word);
    }
    chain.push(word_b.clone());
    Ok(ParsedChain {
        chain,
        added_prompts,
    })
}

fn push_field(out: &mut String, label: &str, value: &str) {
    out.push_str(label);
    out.push_str(": \"");
    out.push_str(value);
    out.push_str("\"\n");
}

/// Renders script lines in the record grammar (quoted values).
pub fn print_script(lines: &[ScriptLine]) -> String {
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        push_field(&mut out, "Word", line.word.as_str());
        push_field(&mut out, "Sentence", &line.sentence);
        push_field(&mut out, "Sticker Prompt", &line.sticker_prompt);
    }
    out
}

/// Renders `(word, sticker prompt)` pairs in the exploration grammar.
pub fn print_exploration<'a>(records: impl IntoIterator<Item = (&'a Word, &'a str)>) -> String {
    let mut out = String::new();
    for (i, (word, prompt)) in records.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        push_field(&mut out, "Word", word.as_str());
        push_field(&mut out, "Sticker Prompt", prompt);
    }
    out
}
