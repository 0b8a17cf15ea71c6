//! OpenAI-compatible HTTP client for chat completions and embeddings.

use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, Embedder, ProviderConfig, ProviderError, TextProvider};

fn agent(timeout_secs: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(timeout_secs.max(1))))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post_json(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
) -> Result<String, ProviderError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req
        .send(body.to_string())
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    if !(200..300).contains(&status) {
        return Err(ProviderError::Http { status, body: text });
    }
    Ok(text)
}

fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

/// Chat-completion request body: system and user messages, temperature, model
/// and the optional sampling seed.
pub fn chat_request_body(model: &str, request: &CompletionRequest) -> Value {
    let mut messages = Vec::new();
    if !request.system.is_empty() {
        messages.push(json!({ "role": "system", "content": request.system }));
    }
    messages.push(json!({ "role": "user", "content": request.user }));
    let mut body = json!({
        "model": model,
        "messages": messages,
        "temperature": request.temperature,
    });
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    body
}

/// Content of the first choice of a chat-completion response.
pub fn parse_chat_response(body: &str) -> Result<String, ProviderError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::InvalidResponse("missing choices[0].message.content".into()))
}

fn parse_embedding_response(body: &str, expected: usize) -> Result<Vec<Vec<f64>>, ProviderError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
    let data = v
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::InvalidResponse("missing data array".into()))?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
    for (pos, item) in data.iter().enumerate() {
        let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
        let vector = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::InvalidResponse("missing embedding".into()))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| ProviderError::InvalidResponse("non-numeric embedding".into()))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((index, vector));
    }
    rows.sort_by_key(|(i, _)| *i);
    if rows.len() != expected {
        return Err(ProviderError::InvalidResponse(format!(
            "expected {expected} embeddings, got {}",
            rows.len()
        )));
    }
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

pub struct HttpProvider {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpProvider {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(Self {
            agent: agent(config.timeout_secs),
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            api_key: config.api_key()?,
        })
    }
}

impl TextProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let body = chat_request_body(&self.model, request);
        let text = post_json(
            &self.agent,
            &join_url(&self.endpoint, "chat/completions"),
            self.api_key.as_deref(),
            &body,
        )?;
        parse_chat_response(&text)
    }
}

pub struct HttpEmbedder {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpEmbedder {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(Self {
            agent: agent(config.timeout_secs),
            endpoint: config.endpoint.clone(),
            model: config.embedding_model.clone(),
            api_key: config.api_key()?,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let body = json!({ "model": self.model, "input": texts });
        let text = post_json(
            &self.agent,
            &join_url(&self.endpoint, "embeddings"),
            self.api_key.as_deref(),
            &body,
        )?;
        parse_embedding_response(&text, texts.len())
    }

    fn descriptor(&self) -> String {
        format!("http/{}", self.model)
    }
}
