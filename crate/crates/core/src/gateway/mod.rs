//! Uniform completion interface over LLM providers.
//!
//! The gateway routes each [`Role`] to a provider with its own model,
//! temperature and output budget, retries transient failures with
//! exponential backoff, and fans requests out with bounded parallelism.
//! Completion text is returned untouched; tag parsing happens downstream.

mod config;
pub(crate) mod http;
mod replay;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ProviderConfig, RoleEndpoint};
pub use http::{post_json, HttpScorer, OpenAiChatProvider};
pub use replay::{prompt_sha256, RecordingProvider, ReplayEntry, ReplayProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Task,
    Critique,
    Optimizer,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Task, Role::Critique, Role::Optimizer];

    pub const fn as_str(self) -> &'static str {
        match self {
            Role::Task => "task",
            Role::Critique => "critique",
            Role::Optimizer => "optimizer",
        }
    }

    pub const fn default_temperature(self) -> f64 {
        match self {
            Role::Task => 0.0,
            Role::Critique | Role::Optimizer => 1.0,
        }
    }

    pub const fn default_max_output_tokens(self) -> u32 {
        match self {
            Role::Task | Role::Critique => 1024,
            Role::Optimizer => 2048,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-role model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub role: Role,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Inputs are cut to this many words before rendering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_budget: Option<usize>,
}

impl RoleConfig {
    pub fn new(role: Role, model: impl Into<String>) -> Self {
        Self {
            role,
            model: model.into(),
            temperature: role.default_temperature(),
            max_output_tokens: role.default_max_output_tokens(),
            word_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role: Role,
    pub prompt: String,
    pub params: DecodeParams,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    /// Whitespace word counts, used when a provider reports no usage.
    pub fn estimate(prompt: &str, completion: &str) -> Self {
        Self {
            prompt_tokens: prompt.split_whitespace().count() as u64,
            completion_tokens: completion.split_whitespace().count() as u64,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

/// What a provider hands back for one call.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderOutput {
    pub text: String,
    pub usage: Option<TokenUsage>,
}

impl ProviderOutput {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider rejected the request ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("unscripted request: role={role} prompt_sha256={hash}")]
    Unscripted { role: Role, hash: String },
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transient(_) | ProviderError::Timeout)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("no provider configured for role `{0}`")]
    RoleNotConfigured(Role),
    #[error("{role} call failed after {attempts} attempt(s): {source}")]
    Provider {
        role: Role,
        attempts: u32,
        #[source]
        source: ProviderError,
    },
    #[error("external scorer `{endpoint}` failed after {attempts} attempt(s): {source}")]
    Scorer {
        endpoint: String,
        attempts: u32,
        #[source]
        source: ProviderError,
    },
}

/// A text-completion backend.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderOutput, ProviderError>;
}

/// Adapter over a closure, for scripted providers.
pub struct FnProvider<F>(pub F);

impl<F> Provider for FnProvider<F>
where
    F: Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<ProviderOutput, ProviderError> {
        (self.0)(request).map(ProviderOutput::text)
    }
}

/// A scorer returning one value in `[0, 1]` per (prediction, target) pair.
pub trait ExternalScorer: Send + Sync {
    fn score(&self, prediction: &str, target: &str) -> Result<f64, ProviderError>;
}

impl<F> ExternalScorer for F
where
    F: Fn(&str, &str) -> Result<f64, ProviderError> + Send + Sync,
{
    fn score(&self, prediction: &str, target: &str) -> Result<f64, ProviderError> {
        self(prediction, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay after the `attempt`-th failure (1-based).
    pub fn delay_after(&self, attempt: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(attempt.saturating_sub(1))
    }

    fn run<T>(
        &self,
        sleeper: &Sleeper,
        mut call: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<(T, u32), (ProviderError, u32)> {
        let mut attempt = 1;
        loop {
            match call() {
                Ok(v) => return Ok((v, attempt)),
                Err(e) if e.is_retryable() && attempt < self.max_attempts => {
                    log::warn!("attempt {attempt} failed ({e}); retrying");
                    sleeper(self.delay_after(attempt));
                    attempt += 1;
                }
                Err(e) => return Err((e, attempt)),
            }
        }
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

struct Route {
    config: RoleConfig,
    provider: Arc<dyn Provider>,
}

/// Routes requests per role. Shareable across worker threads.
pub struct LlmGateway {
    routes: HashMap<Role, Route>,
    scorers: Mutex<HashMap<String, Arc<dyn ExternalScorer>>>,
    retry: RetryPolicy,
    sleeper: Sleeper,
    parallelism: usize,
    http_timeout: Duration,
}

impl fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmGateway")
            .field("roles", &self.routes.keys().collect::<Vec<_>>())
            .field("retry", &self.retry)
            .field("parallelism", &self.parallelism)
            .finish()
    }
}

pub struct GatewayBuilder {
    routes: HashMap<Role, Route>,
    scorers: HashMap<String, Arc<dyn ExternalScorer>>,
    retry: RetryPolicy,
    sleeper: Sleeper,
    parallelism: usize,
    http_timeout: Duration,
}

impl GatewayBuilder {
    pub fn route(mut self, config: RoleConfig, provider: Arc<dyn Provider>) -> Self {
        self.routes.insert(config.role, Route { config, provider });
        self
    }

    /// Same provider for every role, default per-role parameters.
    pub fn all_roles(mut self, model: &str, provider: Arc<dyn Provider>) -> Self {
        for role in Role::ALL {
            self = self.route(RoleConfig::new(role, model), provider.clone());
        }
        self
    }

    pub fn scorer(mut self, endpoint: impl Into<String>, scorer: Arc<dyn ExternalScorer>) -> Self {
        self.scorers.insert(endpoint.into(), scorer);
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    pub fn http_timeout(mut self, timeout: Duration) -> Self {
        self.http_timeout = timeout;
        self
    }

    pub fn build(self) -> LlmGateway {
        LlmGateway {
            routes: self.routes,
            scorers: Mutex::new(self.scorers),
            retry: self.retry,
            sleeper: self.sleeper,
            parallelism: self.parallelism,
            http_timeout: self.http_timeout,
        }
    }
}

impl LlmGateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder {
            routes: HashMap::new(),
            scorers: HashMap::new(),
            retry: RetryPolicy::default(),
            sleeper: Arc::new(std::thread::sleep),
            parallelism: 8,
            http_timeout: Duration::from_secs(120),
        }
    }

    pub fn role_config(&self, role: Role) -> Option<&RoleConfig> {
        self.routes.get(&role).map(|r| &r.config)
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    /// Builds a request carrying the role's decode parameters.
    pub fn request(&self, role: Role, prompt: impl Into<String>) -> Result<CompletionRequest, GatewayError> {
        let route = self.routes.get(&role).ok_or(GatewayError::RoleNotConfigured(role))?;
        Ok(CompletionRequest {
            role,
            prompt: prompt.into(),
            params: DecodeParams {
                model: route.config.model.clone(),
                temperature: route.config.temperature,
                max_tokens: route.config.max_output_tokens,
            },
        })
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<Completion, GatewayError> {
        let route = self
            .routes
            .get(&req.role)
            .ok_or(GatewayError::RoleNotConfigured(req.role))?;
        let started = Instant::now();
        match self.retry.run(&self.sleeper, || route.provider.complete(req)) {
            Ok((out, attempts)) => {
                let usage = out
                    .usage
                    .unwrap_or_else(|| TokenUsage::estimate(&req.prompt, &out.text));
                Ok(Completion {
                    text: out.text,
                    usage,
                    latency_ms: started.elapsed().as_millis() as u64,
                    attempts,
                })
            }
            Err((source, attempts)) => Err(GatewayError::Provider {
                role: req.role,
                attempts,
                source,
            }),
        }
    }

    /// Runs `reqs` with at most `parallelism` in flight; results come back
    /// in input order and failures stay in their slot.
    pub fn complete_many(
        &self,
        reqs: &[CompletionRequest],
        parallelism: usize,
    ) -> Vec<Result<Completion, GatewayError>> {
        let workers = parallelism.max(1).min(reqs.len());
        if workers <= 1 {
            return reqs.iter().map(|r| self.complete(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Completion, GatewayError>>>> =
            reqs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= reqs.len() {
                        break;
                    }
                    let result = self.complete(&reqs[i]);
                    *slots[i].lock().expect("slot lock") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("every slot filled"))
            .collect()
    }

    fn scorer_for(&self, endpoint: &str) -> Result<Arc<dyn ExternalScorer>, ProviderError> {
        let mut scorers = self.scorers.lock().expect("scorer lock");
        if let Some(s) = scorers.get(endpoint) {
            return Ok(s.clone());
        }
        if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            let s: Arc<dyn ExternalScorer> = Arc::new(HttpScorer::new(endpoint, self.http_timeout));
            scorers.insert(endpoint.to_owned(), s.clone());
            return Ok(s);
        }
        Err(ProviderError::Config(format!("no scorer registered for `{endpoint}`")))
    }

    /// One external-metric score with the gateway retry policy.
    pub fn score_external(&self, endpoint: &str, prediction: &str, target: &str) -> Result<f64, GatewayError> {
        let wrap = |source, attempts| GatewayError::Scorer {
            endpoint: endpoint.to_owned(),
            attempts,
            source,
        };
        let scorer = self.scorer_for(endpoint).map_err(|e| wrap(e, 0))?;
        let (score, _) = self
            .retry
            .run(&self.sleeper, || {
                let s = scorer.score(prediction, target)?;
                if (0.0..=1.0).contains(&s) {
                    Ok(s)
                } else {
                    Err(ProviderError::Malformed(format!("score {s} outside [0, 1]")))
                }
            })
            .map_err(|(e, attempts)| wrap(e, attempts))?;
        Ok(score)
    }
}

/// Keeps the first `budget` whitespace-separated words of `text`.
pub fn truncate_words(text: &str, budget: usize) -> &str {
    let mut words = 0;
    let mut in_word = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if in_word && words == budget {
                return &text[..i];
            }
            in_word = false;
        } else if !in_word {
            in_word = true;
            words += 1;
            if words > budget {
                return text[..i].trim_end();
            }
        }
    }
    text
}
