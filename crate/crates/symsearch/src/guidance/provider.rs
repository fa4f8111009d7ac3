//! Suggestion providers: a deterministic mock and a chat-completion client.

use std::time::Duration;

use thiserror::Error;

use crate::expr::CONST_POOL;
use crate::features::FeatureSchema;
use crate::fitness::FeatureSet;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("http request failed: {0}")]
    Http(String),

    #[error("malformed provider response: {0}")]
    Response(String),
}

/// Something that turns a prompt into a raw reply.
pub trait SuggestionProvider {
    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError>;
}

/// Offline provider: replies with the top-k single comparisons ranked by
/// balanced accuracy on a fixed split. Ignores the prompt, so guided runs
/// stay end-to-end deterministic.
#[derive(Debug, Clone)]
pub struct MockProvider {
    reply: String,
}

impl MockProvider {
    pub fn from_split(split: &FeatureSet, schema: &FeatureSchema, k: usize) -> Self {
        let names: Vec<&str> = schema.names().collect();
        let n_rows = split.rows.len();
        let mut scored: Vec<(f64, String)> = Vec::new();

        let balanced_accuracy = |preds: &dyn Fn(usize) -> bool| -> f64 {
            let (mut tp, mut tn, mut np, mut nn) = (0usize, 0usize, 0usize, 0usize);
            for row in 0..n_rows {
                let label = split.labels[row];
                let pred = preds(row);
                if label == 1 {
                    np += 1;
                    if pred {
                        tp += 1;
                    }
                } else {
                    nn += 1;
                    if !pred {
                        tn += 1;
                    }
                }
            }
            (tp as f64 / np as f64 + tn as f64 / nn as f64) / 2.0
        };

        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                if i == j {
                    continue;
                }
                let acc = balanced_accuracy(&|row| {
                    split.rows[row].values[i] > split.rows[row].values[j]
                });
                scored.push((acc, format!("{a} > {b}")));
            }
            for c in CONST_POOL {
                let acc = balanced_accuracy(&|row| split.rows[row].values[i] > c);
                scored.push((acc, format!("{a} > {c}")));
            }
        }
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));

        let mut reply = String::from("```\n");
        for (_, line) in scored.iter().take(k) {
            reply.push_str(line);
            reply.push('\n');
        }
        reply.push_str("```\n");
        MockProvider { reply }
    }

    /// A provider with a canned reply, for tests.
    pub fn with_reply(reply: &str) -> Self {
        MockProvider {
            reply: reply.to_string(),
        }
    }
}

impl SuggestionProvider for MockProvider {
    fn complete(&mut self, _prompt: &str) -> Result<String, ProviderError> {
        Ok(self.reply.clone())
    }
}

/// Thin client for a chat-completion-style endpoint. One retry, wall-clock
/// timeout per attempt.
pub struct HttpProvider {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("client builds");
        HttpProvider {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
            client,
        }
    }

    fn attempt(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| ProviderError::Http(e.to_string()))?;
        if !response.status().is_success() {
            return Err(ProviderError::Http(format!(
                "status {}",
                response.status()
            )));
        }
        let value: serde_json::Value = response
            .json()
            .map_err(|e| ProviderError::Response(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::Response("missing choices[0].message.content".to_string())
            })
    }
}

impl SuggestionProvider for HttpProvider {
    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError> {
        match self.attempt(prompt) {
            Ok(reply) => Ok(reply),
            // One retry.
            Err(_) => self.attempt(prompt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canned_mock_echoes_reply() {
        let mut p = MockProvider::with_reply("```\ncount.a > 1\n```");
        assert_eq!(p.complete("x").unwrap(), "```\ncount.a > 1\n```");
    }

    #[test]
    fn http_provider_errors_on_unreachable_endpoint() {
        let mut p = HttpProvider::new(
            "http://127.0.0.1:9/v1/chat/completions",
            "m",
            None,
            Duration::from_millis(100),
        );
        assert!(p.complete("hello").is_err());
    }
}
