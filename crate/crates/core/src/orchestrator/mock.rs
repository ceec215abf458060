//! Deterministic offline providers.

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use super::providers::{GeneratedImage, ImageFormat, ImageProvider, ProviderError, TextProvider};
use crate::domain::Word;
use crate::parser::{print_exploration, print_script};
use crate::prompt::{PromptKind, PromptText};
use crate::domain::ScriptLine;

const THEME_MARKER: &str = "with the theme of ";
const SCRIPT_THEME_END: &str = ", make sure";
const EXPLORATION_THEME_END: &str = ". Add related";
const SCRIPT_WORDS_MARKER: &str = "Here are the words: ";
const EXPLORATION_WORDS_MARKER: &str = "Here are the two input words: ";

/// Answers rendered prompts with grammar-valid records built from fixed
/// sentence templates. Output depends only on the prompt and seed.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockTextProvider;

fn extract_theme(text: &str, end_marker: &str) -> Option<String> {
    let start = text.find(THEME_MARKER)? + THEME_MARKER.len();
    let len = text[start..].find(end_marker)?;
    let theme = text[start..start + len].trim();
    (!theme.is_empty()).then(|| theme.to_owned())
}

fn trailing_list<'a>(text: &'a str, marker: &str) -> Result<Vec<&'a str>, ProviderError> {
    let start = text
        .rfind(marker)
        .ok_or_else(|| ProviderError::UnrecognizedPromptShape(format!("no {marker:?} clause")))?
        + marker.len();
    let list = text[start..].trim_end();
    let list = list.strip_suffix('.').unwrap_or(list);
    Ok(list.split(", ").collect())
}

fn parse_words(items: Vec<&str>) -> Result<Vec<Word>, ProviderError> {
    items
        .into_iter()
        .map(|item| {
            Word::new(item).map_err(|err| ProviderError::UnrecognizedPromptShape(err.to_string()))
        })
        .collect()
}

impl MockTextProvider {
    pub fn respond(prompt: &PromptText, seed: u64) -> Result<String, ProviderError> {
        match prompt.kind {
            PromptKind::Script => {
                let words = parse_words(trailing_list(&prompt.text, SCRIPT_WORDS_MARKER)?)?;
                let setting = extract_theme(&prompt.text, SCRIPT_THEME_END)
                    .unwrap_or_else(|| "story".to_owned());
                let lines: Vec<ScriptLine> = words
                    .into_iter()
                    .map(|word| ScriptLine {
                        sentence: format!("In the {setting}, we see the {word}."),
                        sticker_prompt: format!("A {word} in the {setting}."),
                        word,
                    })
                    .collect();
                Ok(print_script(&lines))
            }
            PromptKind::Exploration => {
                let pair = parse_words(trailing_list(&prompt.text, EXPLORATION_WORDS_MARKER)?)?;
                let [a, b] = pair.as_slice() else {
                    return Err(ProviderError::UnrecognizedPromptShape(format!(
                        "expected two input words, found {}",
                        pair.len()
                    )));
                };
                let setting = extract_theme(&prompt.text, EXPLORATION_THEME_END)
                    .unwrap_or_else(|| "story".to_owned());
                let interior: Vec<(Word, String)> = (1..=seed % 3)
                    .map(|i| {
                        let word = Word::new(format!("{a}-{b}-link{i}"))
                            .expect("joined words stay single-line");
                        let prompt = format!("A {word} in the {setting}.");
                        (word, prompt)
                    })
                    .collect();
                Ok(print_exploration(
                    interior.iter().map(|(word, prompt)| (word, prompt.as_str())),
                ))
            }
        }
    }
}

#[async_trait]
impl TextProvider for MockTextProvider {
    fn name(&self) -> &str {
        "mock-text"
    }

    async fn generate(&self, prompt: &PromptText, seed: u64) -> Result<String, ProviderError> {
        Self::respond(prompt, seed)
    }
}

pub const MOCK_IMAGE_SIZE: u32 = 64;
const CELLS: u32 = 16;

/// 64x64 RGB PNG: a fill color from the digest of `(prompt, seed)` with a
/// 16x16 grid of cells shaded by the digest's 256 bits.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockImageProvider;

impl MockImageProvider {
    pub fn render(prompt: &str, seed: u64) -> Vec<u8> {
        let mut hasher = Sha256::new();
        hasher.update(prompt.as_bytes());
        hasher.update([0u8]);
        hasher.update(seed.to_le_bytes());
        let digest = hasher.finalize();

        let fill = [digest[0], digest[1], digest[2]];
        let shade = fill.map(|c| (u16::from(c) * 3 / 5) as u8);
        let cell = MOCK_IMAGE_SIZE / CELLS;
        let mut pixels = Vec::with_capacity((MOCK_IMAGE_SIZE * MOCK_IMAGE_SIZE * 3) as usize);
        for y in 0..MOCK_IMAGE_SIZE {
            for x in 0..MOCK_IMAGE_SIZE {
                let bit = (y / cell) * CELLS + x / cell;
                let on = digest[(bit / 8) as usize] >> (bit % 8) & 1 == 1;
                pixels.extend_from_slice(if on { &shade } else { &fill });
            }
        }

        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, MOCK_IMAGE_SIZE, MOCK_IMAGE_SIZE);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header().expect("in-memory png header");
            writer
                .write_image_data(&pixels)
                .expect("in-memory png data");
        }
        out
    }
}

#[async_trait]
impl ImageProvider for MockImageProvider {
    fn name(&self) -> &str {
        "mock-image"
    }

    async fn generate(&self, prompt: &str, seed: u64) -> Result<GeneratedImage, ProviderError> {
        Ok(GeneratedImage {
            bytes: Self::render(prompt, seed),
            format: ImageFormat::Png,
        })
    }
}
