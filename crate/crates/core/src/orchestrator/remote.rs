//! HTTP-backed providers.
//!
//! Text:  `POST {endpoint}/generate {"prompt", "seed"}` -> `{"text"}`
//! Image: `POST {endpoint}/generate {"prompt", "seed"}` -> `{"image_base64", "format": "png"}`

use std::time::Duration;

use async_trait::async_trait;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::providers::{GeneratedImage, ImageFormat, ImageProvider, ProviderError, TextProvider};
use crate::prompt::PromptText;

pub const DEFAULT_TEXT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_IMAGE_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    seed: u64,
}

#[derive(Debug, Deserialize)]
struct TextResponse {
    text: String,
}

#[derive(Debug, Deserialize)]
struct ImageResponse {
    image_base64: String,
    format: String,
}

#[derive(Debug, Clone)]
struct Endpoint {
    client: reqwest::Client,
    url: String,
    bearer: Option<String>,
}

impl Endpoint {
    fn new(base: &str, timeout: Duration, bearer: Option<String>) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|err| ProviderError::Transport(err.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/generate", base.trim_end_matches('/')),
            bearer,
        })
    }

    async fn post<T: for<'de> Deserialize<'de>>(
        &self,
        prompt: &str,
        seed: u64,
    ) -> Result<T, ProviderError> {
        let mut request = self
            .client
            .post(&self.url)
            .json(&GenerateRequest { prompt, seed });
        if let Some(token) = &self.bearer {
            request = request.bearer_auth(token);
        }
        let response = request.send().await.map_err(classify)?;
        let status = response.status();
        if !status.is_success() {
            return Err(ProviderError::Transport(format!("{} returned {status}", self.url)));
        }
        response
            .json::<T>()
            .await
            .map_err(|err| ProviderError::BadResponse(err.to_string()))
    }
}

fn classify(err: reqwest::Error) -> ProviderError {
    if err.is_timeout() {
        ProviderError::Timeout
    } else {
        ProviderError::Transport(err.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RemoteTextProvider {
    endpoint: Endpoint,
}

impl RemoteTextProvider {
    pub fn new(base: &str, timeout: Duration, bearer: Option<String>) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: Endpoint::new(base, timeout, bearer)?,
        })
    }
}

#[async_trait]
impl TextProvider for RemoteTextProvider {
    fn name(&self) -> &str {
        "remote-text"
    }

    async fn generate(&self, prompt: &PromptText, seed: u64) -> Result<String, ProviderError> {
        let response: TextResponse = self.endpoint.post(&prompt.text, seed).await?;
        Ok(response.text)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteImageProvider {
    endpoint: Endpoint,
}

impl RemoteImageProvider {
    pub fn new(base: &str, timeout: Duration, bearer: Option<String>) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: Endpoint::new(base, timeout, bearer)?,
        })
    }
}

#[async_trait]
impl ImageProvider for RemoteImageProvider {
    fn name(&self) -> &str {
        "remote-image"
    }

    async fn generate(&self, prompt: &str, seed: u64) -> Result<GeneratedImage, ProviderError> {
        let response: ImageResponse = self.endpoint.post(prompt, seed).await?;
        let format = ImageFormat::from_tag(&response.format).ok_or_else(|| {
            ProviderError::BadResponse(format!("unsupported image format {:?}", response.format))
        })?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(response.image_base64.as_bytes())
            .map_err(|err| ProviderError::BadResponse(format!("image_base64: {err}")))?;
        if !bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            return Err(ProviderError::BadResponse("image is not a PNG".into()));
        }
        Ok(GeneratedImage { bytes, format })
    }
}
