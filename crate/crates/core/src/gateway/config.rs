//! Provider configuration file.
//!
//! ```json
//! {
//!   "roles": {
//!     "task":      {"url": "...", "model": "...", "temperature": 0.0, "max_tokens": 1024, "auth_env": "API_KEY"},
//!     "critique":  {"url": "...", "model": "..."},
//!     "optimizer": {"url": "...", "model": "...", "max_tokens": 2048}
//!   },
//!   "parallelism": 8,
//!   "timeout_secs": 120
//! }
//! ```
//!
//! Roles left out inherit the task endpoint with their own default
//! temperature and output budget.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GatewayBuilder, LlmGateway, OpenAiChatProvider, Provider, ProviderError, Role, RoleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleEndpoint {
    pub url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_budget: Option<usize>,
}

fn default_parallelism() -> usize {
    8
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub roles: BTreeMap<Role, RoleEndpoint>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl ProviderConfig {
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ProviderError> {
        if !self.roles.contains_key(&Role::Task) {
            return Err(ProviderError::Config("the `task` role must be configured".into()));
        }
        if self.parallelism == 0 {
            return Err(ProviderError::Config("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    /// Endpoint for `role`, falling back to the task endpoint.
    pub fn endpoint(&self, role: Role) -> &RoleEndpoint {
        self.roles.get(&role).unwrap_or_else(|| &self.roles[&Role::Task])
    }

    pub fn role_config(&self, role: Role) -> RoleConfig {
        let ep = self.endpoint(role);
        let explicit = self.roles.get(&role);
        RoleConfig {
            role,
            model: ep.model.clone(),
            temperature: explicit
                .and_then(|e| e.temperature)
                .unwrap_or(role.default_temperature()),
            max_output_tokens: explicit
                .and_then(|e| e.max_tokens)
                .unwrap_or(role.default_max_output_tokens()),
            word_budget: explicit.and_then(|e| e.word_budget),
        }
    }

    /// Live HTTP providers for every role, each optionally wrapped.
    pub fn gateway_builder(
        &self,
        wrap: impl Fn(Arc<dyn Provider>) -> Arc<dyn Provider>,
    ) -> GatewayBuilder {
        let timeout = Duration::from_secs(self.timeout_secs);
        let mut b = LlmGateway::builder()
            .parallelism(self.parallelism)
            .http_timeout(timeout);
        for role in Role::ALL {
            let ep = self.endpoint(role);
            let live: Arc<dyn Provider> =
                Arc::new(OpenAiChatProvider::new(ep.url.clone(), ep.auth_env.clone(), timeout));
            b = b.route(self.role_config(role), wrap(live));
        }
        b
    }
}
