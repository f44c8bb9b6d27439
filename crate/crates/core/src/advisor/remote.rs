//! Chat-completion HTTP client for a hosted language model.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    build_prompt, parse_suggestions, Advisor, AdvisorContext, AdvisorError, AdvisorSuggestion,
};

pub const ENV_ADVISOR_URL: &str = "LLAPIPE_ADVISOR_URL";
pub const ENV_ADVISOR_KEY: &str = "LLAPIPE_ADVISOR_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub const DEFAULT_TEMPERATURE: f64 = 0.1;
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

    /// Endpoint and key from the environment; `None` when no URL is set.
    pub fn from_env(model: impl Into<String>) -> Option<Self> {
        let url = std::env::var(ENV_ADVISOR_URL)
            .ok()
            .filter(|u| !u.trim().is_empty())?;
        Some(RemoteConfig {
            url,
            api_key: std::env::var(ENV_ADVISOR_KEY)
                .ok()
                .filter(|k| !k.is_empty()),
            model: model.into(),
            temperature: Self::DEFAULT_TEMPERATURE,
            timeout: Self::DEFAULT_TIMEOUT,
        })
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: String,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

/// Blocking client; one request in flight at a time.
#[derive(Debug)]
pub struct RemoteAdvisor {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteAdvisor {
    pub fn new(cfg: RemoteConfig) -> Result<Self, AdvisorError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| AdvisorError::Unavailable(e.to_string()))?;
        Ok(RemoteAdvisor { cfg, client })
    }

    /// Sends one prompt and returns the raw reply text.
    pub fn complete(&self, prompt: &str) -> Result<String, AdvisorError> {
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: vec![Message {
                role: "user",
                content: prompt,
            }],
            temperature: self.cfg.temperature,
        };
        let mut req = self.client.post(&self.cfg.url).json(&body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let unavailable = |e: reqwest::Error| AdvisorError::Unavailable(e.to_string());
        let resp = req
            .send()
            .map_err(unavailable)?
            .error_for_status()
            .map_err(unavailable)?;
        let parsed: ChatResponse = resp.json().map_err(unavailable)?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| AdvisorError::Unavailable("reply has no choices".into()))
    }
}

impl Advisor for RemoteAdvisor {
    fn suggest(&mut self, ctx: &AdvisorContext) -> Result<Vec<AdvisorSuggestion>, AdvisorError> {
        let reply = self.complete(&build_prompt(ctx))?;
        parse_suggestions(&reply, ctx.max_pipeline_len)
    }
}
