use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::EmbeddingBackend;
use crate::error::{Error, Result};

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// OpenAI-compatible `/v1/embeddings` client.
///
/// Transport failures, 429 and 5xx responses are retried with exponential
/// backoff; any other non-success status fails immediately.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: Client,
    url: String,
    model_id: String,
    api_key: Option<String>,
    max_retries: u32,
    initial_backoff: Duration,
}

impl HttpBackend {
    pub fn new(
        endpoint: &str,
        model_id: impl Into<String>,
        api_key: Option<String>,
        max_retries: u32,
        initial_backoff: Duration,
    ) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Backend(format!("building HTTP client: {e}")))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/v1/embeddings", endpoint.trim_end_matches('/')),
            model_id: model_id.into(),
            api_key,
            max_retries,
            initial_backoff,
        })
    }

    fn attempt(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, Attempt> {
        let mut req = self.client.post(&self.url).json(&EmbeddingRequest {
            model: &self.model_id,
            input: texts,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {body}")));
        }
        let parsed: EmbeddingResponse = resp
            .json()
            .map_err(|e| Attempt::Fatal(format!("malformed response: {e}")))?;
        if parsed.data.len() != texts.len() {
            return Err(Attempt::Fatal(format!(
                "response has {} embeddings for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl EmbeddingBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut backoff = self.initial_backoff;
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                log::warn!("embedding request failed ({last}); retry {attempt} in {backoff:?}");
                thread::sleep(backoff);
                backoff *= 2;
            }
            match self.attempt(texts) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(msg)) => return Err(Error::Backend(msg)),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(Error::Backend(format!(
            "{} unreachable after {} retries: {last}",
            self.url, self.max_retries
        )))
    }
}
