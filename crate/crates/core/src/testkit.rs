//! Fixtures, oracles and scripted providers shared by test suites.
//! Compiled only with the `testkit` feature.

use std::ops::Range;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{Timestamp, UnitId, Word};
use crate::ids::{FixedClock, IdSource};
use crate::orchestrator::{
    GeneratedImage, ImageProvider, MockImageProvider, MockTextProvider, Orchestrator,
    OrchestratorBuilder, ProviderError, TextProvider,
};
use crate::prompt::PromptText;
use crate::store::Store;

/// Script output block from the reference case study: records for "spring"
/// and "cool" separated by an elision line.
pub const GOLDEN_SCRIPT_OUTPUT: &str = include_str!("../fixtures/golden_script_output.txt");

/// Exploration output block from the reference case study, for inputs
/// (lake, hill) under the theme "Switzerland".
pub const GOLDEN_EXPLORATION_OUTPUT: &str =
    include_str!("../fixtures/golden_exploration_output.txt");

/// The words of a ten-word unit used by end-to-end tests.
pub const TEN_WORDS: [&str; 10] = [
    "spring", "summer", "autumn", "winter", "warm", "hot", "cool", "cold", "bus", "picnic",
];

pub fn words(raw: &[&str]) -> Vec<Word> {
    raw.iter().map(|w| Word::new(*w).expect("fixture words are valid")).collect()
}

/// Unit-collection document holding one unit with the given words.
pub fn unit_document(id: &str, title: &str, words: &[&str]) -> String {
    serde_json::json!({
        "units": [{"id": id, "title": title, "grade_label": "Grade 2", "words": words}]
    })
    .to_string()
}

/// Brute-force reference for the highlight matcher: enumerate every
/// inflected form, try it at every character boundary, keep whole-word hits,
/// then resolve overlaps leftmost-longest.
pub fn oracle_occurrences(word: &Word, sentence: &str) -> Vec<Range<usize>> {
    let lemma = word.as_str().to_lowercase();
    let mut forms = vec![
        lemma.clone(),
        lemma.clone() + "s",
        lemma.clone() + "es",
        lemma.clone() + "ed",
        lemma.clone() + "d",
        lemma.clone() + "ing",
    ];
    if let Some(stem) = lemma.strip_suffix('e') {
        if !stem.is_empty() {
            forms.push(stem.to_owned() + "ing");
            forms.push(stem.to_owned() + "ed");
        }
    }

    let boundaries: Vec<usize> = sentence
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(sentence.len()))
        .collect();
    let letter = |c: Option<char>| c.is_some_and(char::is_alphabetic);

    let mut hits = Vec::new();
    for (a, &start) in boundaries.iter().enumerate() {
        for &end in &boundaries[a + 1..] {
            let piece: String = sentence[start..end].chars().flat_map(char::to_lowercase).collect();
            if !forms.contains(&piece) {
                continue;
            }
            let before = sentence[..start].chars().next_back();
            let after = sentence[end..].chars().next();
            if !letter(before) && !letter(after) {
                hits.push(start..end);
            }
        }
    }
    hits.sort_by(|x, y| x.start.cmp(&y.start).then(y.end.cmp(&x.end)));
    let mut chosen: Vec<Range<usize>> = Vec::new();
    for hit in hits {
        if chosen.last().map_or(true, |last| hit.start >= last.end) {
            chosen.push(hit);
        }
    }
    chosen
}

const CASE_WORDS: [&str; 12] = [
    "cool", "bake", "go", "box", "see", "tie", "e", "ski", "rose", "Jet", "café", "bus",
];
const FILLER: [&str; 10] = ["the", "we", "in", "park", "a", "Über", "naïve", "fun", "it", "trip"];
const GLUE: [&str; 12] = [" ", " ", " ", ", ", ". ", "-", "'", "\"", "3", "_", "!", "\u{00a0}"];
const SUFFIXES: [&str; 9] = ["", "s", "es", "ed", "d", "ing", "er", "ly", "x"];

fn random_case(rng: &mut impl Rng, text: &str) -> String {
    text.chars()
        .map(|c| {
            if rng.gen_bool(0.3) {
                c.to_uppercase().collect::<String>()
            } else {
                c.to_string()
            }
        })
        .collect()
}

/// A random (word, sentence) case mixing inflected and near-miss forms of
/// the word with filler, punctuation and non-ASCII letters.
pub fn random_highlight_case(rng: &mut impl Rng) -> (Word, String) {
    let word = *CASE_WORDS.choose(rng).expect("nonempty");
    let mut sentence = String::new();
    for _ in 0..rng.gen_range(1..12) {
        let token = match rng.gen_range(0..4) {
            0 | 1 => {
                let stem = if word.ends_with('e') && rng.gen_bool(0.3) {
                    &word[..word.len() - 1]
                } else {
                    word
                };
                let prefix = if rng.gen_bool(0.1) { "un" } else { "" };
                format!("{prefix}{stem}{}", SUFFIXES.choose(rng).expect("nonempty"))
            }
            2 => FILLER.choose(rng).expect("nonempty").to_string(),
            _ => CASE_WORDS.choose(rng).expect("nonempty").to_string(),
        };
        sentence.push_str(&random_case(rng, &token));
        sentence.push_str(GLUE.choose(rng).expect("nonempty"));
    }
    (Word::new(word).expect("valid"), sentence)
}

/// Text provider that answers from a script: `false` entries return garbage,
/// `true` entries delegate to the mock. Past the end, the last entry repeats.
pub struct ScriptedTextProvider {
    plan: Vec<bool>,
    calls: AtomicU32,
    seeds: Mutex<Vec<u64>>,
}

impl ScriptedTextProvider {
    pub fn new(plan: Vec<bool>) -> Self {
        assert!(!plan.is_empty());
        Self {
            plan,
            calls: AtomicU32::new(0),
            seeds: Mutex::new(Vec::new()),
        }
    }

    pub fn always_invalid() -> Self {
        Self::new(vec![false])
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.lock().expect("seed log").clone()
    }
}

#[async_trait]
impl TextProvider for ScriptedTextProvider {
    fn name(&self) -> &str {
        "scripted-text"
    }

    async fn generate(&self, prompt: &PromptText, seed: u64) -> Result<String, ProviderError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
        self.seeds.lock().expect("seed log").push(seed);
        if self.plan[call.min(self.plan.len() - 1)] {
            MockTextProvider::respond(prompt, seed)
        } else {
            Ok("I'm sorry, I can't help with that.".to_owned())
        }
    }
}

/// Image provider whose calls never complete; simulates a process dying
/// while stickers are being generated.
#[derive(Debug, Default, Clone, Copy)]
pub struct StallingImageProvider;

#[async_trait]
impl ImageProvider for StallingImageProvider {
    fn name(&self) -> &str {
        "stalling-image"
    }

    async fn generate(&self, _prompt: &str, _seed: u64) -> Result<GeneratedImage, ProviderError> {
        std::future::pending().await
    }
}

/// Image provider that always fails with a transport error.
#[derive(Debug, Default)]
pub struct FailingImageProvider {
    calls: AtomicU32,
}

impl FailingImageProvider {
    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ImageProvider for FailingImageProvider {
    fn name(&self) -> &str {
        "failing-image"
    }

    async fn generate(&self, _prompt: &str, _seed: u64) -> Result<GeneratedImage, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(ProviderError::Transport("connection refused".to_owned()))
    }
}

/// A store in a temporary directory plus an orchestrator over it, with
/// seeded ids and a pinned clock.
pub struct Harness {
    pub dir: tempfile::TempDir,
    pub store: Arc<Store>,
    pub orchestrator: Orchestrator,
}

pub const PINNED_TIME: i64 = 1_700_000_000;

impl Harness {
    /// Must be called inside a Tokio runtime.
    pub fn mock() -> Self {
        Self::with_providers(Arc::new(MockTextProvider), Arc::new(MockImageProvider))
    }

    pub fn with_providers(text: Arc<dyn TextProvider>, image: Arc<dyn ImageProvider>) -> Self {
        Self::configured(text, image, |builder| builder)
    }

    pub fn configured(
        text: Arc<dyn TextProvider>,
        image: Arc<dyn ImageProvider>,
        tweak: impl FnOnce(OrchestratorBuilder) -> OrchestratorBuilder,
    ) -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let store = Arc::new(Store::open(dir.path()).expect("open store"));
        let builder = Orchestrator::builder(Arc::clone(&store), text, image)
            .ids(IdSource::seeded(7))
            .clock(Arc::new(FixedClock(Timestamp::from_unix(PINNED_TIME))));
        Self {
            dir,
            store,
            orchestrator: tweak(builder).build(),
        }
    }

    pub fn import(&self, id: &str, words: &[&str]) -> UnitId {
        let doc = unit_document(id, &format!("Unit {id}"), words);
        self.store
            .import_units(&doc, &IdSource::Random)
            .expect("import fixture unit")
            .remove(0)
    }
}
