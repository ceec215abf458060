//! Provider interfaces for text and image generation.

use async_trait::async_trait;
use thiserror::Error;

use crate::prompt::PromptText;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("unrecognized prompt shape: {0}")]
    UnrecognizedPromptShape(String),
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("provider returned an invalid response: {0}")]
    BadResponse(String),
    #[error("provider timed out")]
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
}

impl ImageFormat {
    pub fn tag(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        tag.eq_ignore_ascii_case("png").then_some(ImageFormat::Png)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedImage {
    pub bytes: Vec<u8>,
    pub format: ImageFormat,
}

#[async_trait]
pub trait TextProvider: Send + Sync {
    fn name(&self) -> &str;

    async fn generate(&self, prompt: &PromptText, seed: u64) -> Result<String, ProviderError>;
}

#[async_trait]
pub trait ImageProvider: Send + Sync {
    fn name(&self) -> &str;

    async fn generate(&self, prompt: &str, seed: u64) -> Result<GeneratedImage, ProviderError>;
}
