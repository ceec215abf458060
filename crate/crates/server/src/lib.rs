//! HTTP service and operational commands over `storyvocab-core`.

pub mod api;
pub mod config;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use storyvocab_core::orchestrator::{
    ImageProvider, MockImageProvider, MockTextProvider, Orchestrator, RemoteImageProvider,
    RemoteTextProvider, RetryPolicy, TextProvider, DEFAULT_IMAGE_TIMEOUT, DEFAULT_TEXT_TIMEOUT,
};
use storyvocab_core::prompt::{TemplateError, TemplateSet};
use storyvocab_core::store::{Store, StoreError};
use thiserror::Error;
use tokio::net::TcpListener;
use tracing::info;

use crate::api::AppState;
use crate::config::{ApiConfig, ConfigError, ProviderMode};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address {0} is already in use")]
    AddressInUse(String),
    #[error(transparent)]
    BadConfig(#[from] ConfigError),
    #[error("cannot listen on {address}: {source}")]
    Listen {
        address: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("templates: {0}")]
    Templates(#[from] TemplateError),
}

fn bad_config(detail: impl std::fmt::Display) -> ServeError {
    ServeError::BadConfig(ConfigError::BadConfig(detail.to_string()))
}

/// Opens the data directory and wires providers according to `config`.
/// Must be called inside a Tokio runtime.
pub fn build_orchestrator(config: &ApiConfig) -> Result<Orchestrator, ServeError> {
    config.validate()?;
    let store = Arc::new(Store::open(&config.data_dir)?);
    let (text, image): (Arc<dyn TextProvider>, Arc<dyn ImageProvider>) = match config.provider_mode {
        ProviderMode::Mock => (Arc::new(MockTextProvider), Arc::new(MockImageProvider)),
        ProviderMode::Remote => {
            let bearer = config.bearer_token()?;
            let text_url = config.text_endpoint.as_deref().unwrap_or_default();
            let image_url = config.image_endpoint.as_deref().unwrap_or_default();
            (
                Arc::new(
                    RemoteTextProvider::new(text_url, DEFAULT_TEXT_TIMEOUT, bearer.clone())
                        .map_err(bad_config)?,
                ),
                Arc::new(
                    RemoteImageProvider::new(image_url, DEFAULT_IMAGE_TIMEOUT, bearer)
                        .map_err(bad_config)?,
                ),
            )
        }
    };
    let templates = match &config.templates_dir {
        Some(dir) => TemplateSet::load_dir(dir)?,
        None => TemplateSet::builtin(),
    };
    Ok(Orchestrator::builder(store, text, image)
        .templates(templates)
        .retry(RetryPolicy {
            max_attempts: config.max_attempts,
            ..RetryPolicy::default()
        })
        .sticker_parallelism(config.sticker_parallelism)
        .seed_override(config.seed_override)
        .build())
}

/// A bound, not yet running HTTP service.
pub struct Service {
    listener: TcpListener,
    state: AppState,
}

impl Service {
    /// Binds the listen address first, so a second instance on the same
    /// address fails with `AddressInUse` before touching the data directory.
    pub async fn bind(config: &ApiConfig) -> Result<Self, ServeError> {
        config.validate()?;
        let listener = TcpListener::bind(&config.listen_address)
            .await
            .map_err(|source| match source.kind() {
                std::io::ErrorKind::AddrInUse => {
                    ServeError::AddressInUse(config.listen_address.clone())
                }
                _ => ServeError::Listen {
                    address: config.listen_address.clone(),
                    source,
                },
            })?;
        let orchestrator = build_orchestrator(config)?;
        Ok(Self {
            listener,
            state: AppState::new(orchestrator),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.state.orchestrator
    }

    /// Serves until `shutdown` resolves, then lets in-flight jobs finish
    /// writing their state.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        let orchestrator = self.state.orchestrator.clone();
        info!(address = %self.local_addr(), "serving");
        axum::serve(self.listener, api::router(self.state))
            .with_graceful_shutdown(shutdown)
            .await?;
        info!("draining in-flight jobs");
        orchestrator.shutdown().await;
        Ok(())
    }
}
