use std::collections::{HashMap, HashSet};

use crate::domain::{StoryScript, Word};

use super::match_word_occurrences;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LineCountMismatch { expected: usize, actual: usize },
    MissingWord(Word),
    UnrequestedWord(Word),
    DuplicateWord(Word),
    OrderMismatch { index: usize, expected: Word, found: Word },
    EmptySentence(Word),
    EmptyStickerPrompt(Word),
    SentenceWordMismatch(Word),
}

/// Checks a script against the words it was requested for. Every violation
/// is reported, not just the first.
pub fn validate_script(script: &StoryScript, requested: &[Word]) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();

    if script.lines.len() != requested.len() {
        violations.push(Violation::LineCountMismatch {
            expected: requested.len(),
            actual: script.lines.len(),
        });
    }

    let wanted: HashSet<&Word> = requested.iter().collect();
    let mut counts: HashMap<&Word, usize> = HashMap::new();
    for line in &script.lines {
        *counts.entry(&line.word).or_default() += 1;
    }
    let mut reported = HashSet::new();
    for line in &script.lines {
        if !wanted.contains(&line.word) {
            if reported.insert(&line.word) {
                violations.push(Violation::UnrequestedWord(line.word.clone()));
            }
        } else if counts[&line.word] > 1 && reported.insert(&line.word) {
            violations.push(Violation::DuplicateWord(line.word.clone()));
        }
    }
    for word in requested {
        if !counts.contains_key(word) {
            violations.push(Violation::MissingWord(word.clone()));
        }
    }

    // Order only means something once the line words are a permutation of the request.
    if violations.is_empty() {
        for (index, (line, expected)) in script.lines.iter().zip(requested).enumerate() {
            if &line.word != expected {
                violations.push(Violation::OrderMismatch {
                    index,
                    expected: expected.clone(),
                    found: line.word.clone(),
                });
            }
        }
    }

    for line in &script.lines {
        if line.sentence.trim().is_empty() {
            violations.push(Violation::EmptySentence(line.word.clone()));
        } else if match_word_occurrences(&line.word, &line.sentence).is_empty() {
            violations.push(Violation::SentenceWordMismatch(line.word.clone()));
        }
        if line.sticker_prompt.trim().is_empty() {
            violations.push(Violation::EmptyStickerPrompt(line.word.clone()));
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
