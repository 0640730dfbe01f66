//! JSON-over-HTTP adapters: an OpenAI-compatible chat endpoint and a
//! generic `{prediction, reference} -> {score}` scorer.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use ureq::Agent;

use super::{CompletionRequest, ExternalScorer, Provider, ProviderError, ProviderOutput, TokenUsage};

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn classify(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        ureq::Error::Io(e) => ProviderError::Transient(e.to_string()),
        ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            ProviderError::Transient(err.to_string())
        }
        ureq::Error::Json(e) => ProviderError::Malformed(e.to_string()),
        other => ProviderError::Transient(other.to_string()),
    }
}

/// POSTs `body` and returns the parsed JSON response. Status 401/403 map to
/// auth errors, 408/429/5xx to transient ones, other 4xx to rejections.
pub fn post_json(
    agent: &Agent,
    url: &str,
    bearer: Option<&str>,
    body: &Value,
) -> Result<Value, ProviderError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(token) = bearer {
        req = req.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = req.send_json(body).map_err(classify)?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(classify)?;
    match status {
        200..=299 => serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string())),
        401 | 403 => Err(ProviderError::Auth(format!("HTTP {status}"))),
        408 | 429 | 500..=599 => Err(ProviderError::Transient(format!("HTTP {status}: {text}"))),
        _ => Err(ProviderError::Rejected { status, body: text }),
    }
}

/// Chat-completion provider speaking the OpenAI-compatible wire shape.
pub struct OpenAiChatProvider {
    url: String,
    auth_env: Option<String>,
    agent: Agent,
}

impl OpenAiChatProvider {
    pub fn new(url: impl Into<String>, auth_env: Option<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            auth_env,
            agent: agent(timeout),
        }
    }

    fn token(&self) -> Result<Option<String>, ProviderError> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ProviderError::Auth(format!("environment variable {var} is not set"))),
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl Provider for OpenAiChatProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderOutput, ProviderError> {
        let body = json!({
            "model": request.params.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        });
        let token = self.token()?;
        let value = post_json(&self.agent, &self.url, token.as_deref(), &body)?;
        let parsed: ChatResponse =
            serde_json::from_value(value).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("response has no message content".into()))?;
        Ok(ProviderOutput {
            text,
            usage: parsed.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
        })
    }
}

/// External metric over HTTP: request `{"prediction", "reference"}`,
/// response `{"score": <number in [0,1]>}`.
pub struct HttpScorer {
    url: String,
    agent: Agent,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            agent: agent(timeout),
        }
    }
}

impl ExternalScorer for HttpScorer {
    fn score(&self, prediction: &str, target: &str) -> Result<f64, ProviderError> {
        let body = json!({"prediction": prediction, "reference": target});
        let value = post_json(&self.agent, &self.url, None, &body)?;
        value
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| ProviderError::Malformed("response has no numeric `score`".into()))
    }
}

pub(crate) fn http_agent(timeout: Duration) -> Agent {
    agent(timeout)
}
