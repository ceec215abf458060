//! Whole-word matching of a target word and its regular inflections.

use std::ops::Range;

use crate::domain::{HighlightSpan, StoryScript, Word};

/// The closed set of surface forms recognized for `word`, lowercased and
/// ordered longest first: the lemma, `+s`, `+es`, `+ed`, `+d`, `+ing`, and
/// `+ing` / `+ed` on the lemma with one trailing `e` removed (when
/// something remains).
pub fn surface_forms(word: &Word) -> Vec<String> {
    let lemma = word.key();
    let mut forms = vec![
        lemma.clone(),
        format!("{lemma}s"),
        format!("{lemma}es"),
        format!("{lemma}ed"),
        format!("{lemma}d"),
        format!("{lemma}ing"),
    ];
    if let Some(stem) = lemma.strip_suffix('e').filter(|stem| !stem.is_empty()) {
        forms.push(format!("{stem}ing"));
        forms.push(format!("{stem}ed"));
    }
    forms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    forms.dedup();
    forms
}

/// Case-insensitive match of a lowercase `form` at byte `start` of `text`.
/// Returns the end offset if every character of `text` from `start` lowercases
/// onto exactly the characters of `form`.
fn match_at(text: &str, start: usize, form: &str) -> Option<usize> {
    let mut expected = form.chars();
    for (offset, ch) in text[start..].char_indices() {
        for lower in ch.to_lowercase() {
            if expected.next()? != lower {
                return None;
            }
        }
        if expected.as_str().is_empty() {
            return Some(start + offset + ch.len_utf8());
        }
    }
    None
}

fn is_letter_before(text: &str, at: usize) -> bool {
    text[..at].chars().next_back().is_some_and(char::is_alphabetic)
}

fn is_letter_after(text: &str, at: usize) -> bool {
    text[at..].chars().next().is_some_and(char::is_alphabetic)
}

/// Byte ranges of whole-word surface forms of `word` in `sentence`,
/// left to right and non-overlapping; the longest form wins at each position.
pub fn match_word_occurrences(word: &Word, sentence: &str) -> Vec<Range<usize>> {
    let forms = surface_forms(word);
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < sentence.len() {
        if !is_letter_before(sentence, pos) {
            let hit = forms.iter().find_map(|form| {
                match_at(sentence, pos, form).filter(|&end| !is_letter_after(sentence, end))
            });
            if let Some(end) = hit {
                spans.push(pos..end);
                pos = end;
                continue;
            }
        }
        pos += sentence[pos..].chars().next().map_or(1, char::len_utf8);
    }
    spans
}

/// Highlight spans for every line of a script, indexed by line.
pub fn highlight_script(script: &StoryScript) -> Vec<Vec<HighlightSpan>> {
    script
        .lines
        .iter()
        .enumerate()
        .map(|(line_index, line)| {
            match_word_occurrences(&line.word, &line.sentence)
                .into_iter()
                .map(|span| HighlightSpan {
                    line_index,
                    start: span.start,
                    end: span.end,
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::new(s).unwrap()
    }

    #[test]
    fn lemma_in_sentence() {
        let spans = match_word_occurrences(
            &w("spring"),
            "In spring, the flowers bloom and we go on a school trip to the park.",
        );
        assert_eq!(spans, vec![3..9]);
    }

    #[test]
    fn contraction_does_not_hide_the_word() {
        let sentence = "It's cool in the forest, and we love exploring it.";
        assert_eq!(match_word_occurrences(&w("cool"), sentence), vec![5..9]);
    }

    #[test]
    fn drop_e_before_ing() {
        let sentence = "we love exploring it";
        let spans = match_word_occurrences(&w("explore"), sentence);
        assert_eq!(spans, vec![8..17]);
        assert_eq!(&sentence[spans[0].clone()], "exploring");
    }

    #[test]
    fn inflections_and_case() {
        let sentence = "Cats chased the CAT; the dog barked and barks, boxes box.";
        assert_eq!(match_word_occurrences(&w("cat"), sentence), vec![0..4, 16..19]);
        assert_eq!(match_word_occurrences(&w("bark"), sentence), vec![29..35, 40..45]);
        assert_eq!(match_word_occurrences(&w("box"), sentence), vec![47..52, 53..56]);
        assert_eq!(match_word_occurrences(&w("chase"), sentence), vec![5..11]);
    }

    #[test]
    fn substrings_inside_words_do_not_match() {
        assert!(match_word_occurrences(&w("cat"), "concatenate the category").is_empty());
        assert!(match_word_occurrences(&w("cool"), "coolest").is_empty());
    }

    #[test]
    fn multi_word_lemmas_and_unicode() {
        let sentence = "Two ice creams for Zoë and zoë's café.";
        assert_eq!(match_word_occurrences(&w("ice cream"), sentence), vec![4..14]);
        assert_eq!(match_word_occurrences(&w("ZOË"), sentence), vec![19..23, 28..32]);
        assert_eq!(match_word_occurrences(&w("café"), sentence), vec![35..40]);
    }

    #[test]
    fn forms_are_longest_first() {
        let forms = surface_forms(&w("Bake"));
        assert_eq!(forms[0].len(), 7);
        assert!(forms.contains(&"baking".to_owned()));
        assert!(forms.contains(&"baked".to_owned()));
        assert!(forms.contains(&"bakes".to_owned()));
        assert!(forms.contains(&"bake".to_owned()));
    }
}
