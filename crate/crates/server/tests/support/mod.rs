#![allow(dead_code)]

pub mod contract;

use std::time::Duration;

use reqwest::StatusCode;
use serde_json::{json, Value};
use storyvocab_server::config::{ApiConfig, ProviderMode};
use storyvocab_server::Service;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

const WIRE_SCHEMA: &str = include_str!("../../schemas/wire.schema.json");

/// Validates a value against one named definition of the wire schema.
pub fn check_schema(definition: &str, value: &Value) -> Result<(), String> {
    let wire: Value = serde_json::from_str(WIRE_SCHEMA).expect("wire schema is JSON");
    let schema = json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$defs": wire["$defs"],
        "$ref": format!("#/$defs/{definition}"),
    });
    let validator = jsonschema::validator_for(&schema).map_err(|err| err.to_string())?;
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|err| format!("{} at {}", err, err.instance_path))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(format!("{definition}: {} in {value}", errors.join("; ")))
    }
}

pub struct TestServer {
    pub base: String,
    pub client: reqwest::Client,
    pub dir: tempfile::TempDir,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|err| panic!("{err}: {}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub fn mock_config(dir: &std::path::Path) -> ApiConfig {
    ApiConfig {
        listen_address: "127.0.0.1:0".to_owned(),
        data_dir: dir.to_path_buf(),
        provider_mode: ProviderMode::Mock,
        seed_override: Some(1),
        ..ApiConfig::default()
    }
}

impl TestServer {
    pub async fn start() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let service = Service::bind(&mock_config(dir.path())).await.unwrap();
        let base = format!("http://{}", service.local_addr());
        let (stop, stopped) = oneshot::channel::<()>();
        let handle = tokio::spawn(service.run(async {
            let _ = stopped.await;
        }));
        Self {
            base,
            client: reqwest::Client::new(),
            dir,
            stop: Some(stop),
            handle: Some(handle),
        }
    }

    /// Graceful stop: returns once in-flight jobs have been drained, handing
    /// back the data directory.
    pub async fn stop(mut self) -> tempfile::TempDir {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(handle) = self.handle.take() {
            handle.await.unwrap().unwrap();
        }
        self.dir
    }

    async fn reply(response: reqwest::Response) -> Reply {
        let status = response.status();
        let content_type = response
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_owned())
            .unwrap_or_default();
        Reply {
            status,
            content_type,
            bytes: response.bytes().await.unwrap().to_vec(),
        }
    }

    pub async fn get(&self, path: &str) -> Reply {
        Self::reply(self.client.get(format!("{}{path}", self.base)).send().await.unwrap()).await
    }

    pub async fn post(&self, path: &str, body: &Value) -> Reply {
        Self::reply(
            self.client
                .post(format!("{}{path}", self.base))
                .json(body)
                .send()
                .await
                .unwrap(),
        )
        .await
    }

    pub async fn post_raw(&self, path: &str, body: &str) -> Reply {
        Self::reply(
            self.client
                .post(format!("{}{path}", self.base))
                .header("content-type", "application/json")
                .body(body.to_owned())
                .send()
                .await
                .unwrap(),
        )
        .await
    }

    /// Polls a job until it is terminal and returns its final JSON.
    pub async fn wait_job(&self, job_id: &str) -> Value {
        for _ in 0..2000 {
            let job = self.get(&format!("/jobs/{job_id}")).await.json();
            if job["state"] == "Succeeded" || job["state"] == "Failed" {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("job {job_id} did not finish");
    }

    pub async fn import(&self, id: &str, words: &[&str]) {
        let doc = json!({"units": [{"id": id, "title": format!("Unit {id}"), "grade_label": "Grade 2", "words": words}]});
        let reply = self.post("/units/import", &doc).await;
        assert_eq!(reply.status, StatusCode::OK, "{}", String::from_utf8_lossy(&reply.bytes));
    }

    /// Creates a material set and waits for it; returns (set id, final job).
    pub async fn ready_set(&self, unit: &str, theme: &str) -> (String, Value) {
        let reply = self
            .post("/material-sets", &json!({"unit_id": unit, "theme": theme}))
            .await;
        assert_eq!(reply.status, StatusCode::ACCEPTED);
        let body = reply.json();
        let job = self.wait_job(body["job_id"].as_str().unwrap()).await;
        (body["material_set_id"].as_str().unwrap().to_owned(), job)
    }
}
