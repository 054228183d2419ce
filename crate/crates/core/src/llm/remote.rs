//! OpenAI-compatible chat-completions client with retry and full-jitter backoff.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentRng, LlmError, ProposalRequest, Proposer, ProposerConfig, ProposerKind};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "SWARM_OPT_API_KEY";

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Pulls `choices[0].message.content` out of a response body.
pub(crate) fn extract_content(body: &str) -> Result<String, String> {
    let parsed: ChatResponse = serde_json::from_str(body).map_err(|e| format!("malformed response body: {e}"))?;
    parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| "response has no choices".to_string())?
        .message
        .content
        .ok_or_else(|| "first choice has no content".to_string())
}

fn completions_url(endpoint: &str) -> String {
    format!("{}/chat/completions", endpoint.trim_end_matches('/'))
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(LlmError),
}

/// Sends `prompt` as a single user message, reading the credential from
/// [`API_KEY_ENV`].
pub fn chat_complete(config: &ProposerConfig, prompt: &str) -> Result<String, LlmError> {
    let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::Auth {
        attempts: 0,
        message: format!("{API_KEY_ENV} is not set"),
    })?;
    chat_complete_with_key(config, &key, prompt)
}

/// As [`chat_complete`], with an explicit credential.
///
/// Transport failures, 429 and 5xx responses are retried up to
/// `max_retries` times; the wait before retry `k` (1-based) is uniform in
/// `[0, base * 2^(k-1)]`. 401/403 fail immediately as auth errors, other
/// statuses and unreadable bodies as protocol errors.
pub fn chat_complete_with_key(config: &ProposerConfig, api_key: &str, prompt: &str) -> Result<String, LlmError> {
    if api_key.trim().is_empty() {
        return Err(LlmError::Auth {
            attempts: 0,
            message: "empty API key".into(),
        });
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(config.request_timeout()))
        .http_status_as_error(false)
        .build()
        .into();
    let url = completions_url(&config.endpoint_url);
    let body = ChatRequest {
        model: &config.model_name,
        messages: [ChatMessage { role: "user", content: prompt }],
        temperature: config.temperature,
    };
    let auth = format!("Bearer {api_key}");

    let mut attempts = 0;
    loop {
        attempts += 1;
        let outcome = match agent.post(&url).header("Authorization", &auth).send_json(&body) {
            Err(e) => Attempt::Retry(e.to_string()),
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let text = resp.body_mut().read_to_string();
                match (status, text) {
                    (200..=299, Ok(text)) => match extract_content(&text) {
                        Ok(content) => Attempt::Done(content),
                        Err(message) => Attempt::Fatal(LlmError::Protocol { attempts, message }),
                    },
                    (200..=299, Err(e)) => Attempt::Retry(format!("reading body: {e}")),
                    (401 | 403, _) => Attempt::Fatal(LlmError::Auth {
                        attempts,
                        message: format!("HTTP {status}"),
                    }),
                    (429 | 500..=599, _) => Attempt::Retry(format!("HTTP {status}")),
                    (_, body) => Attempt::Fatal(LlmError::Protocol {
                        attempts,
                        message: format!("HTTP {status}: {}", body.unwrap_or_default()),
                    }),
                }
            }
        };
        match outcome {
            Attempt::Done(content) => return Ok(content),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(message) => {
                if attempts > config.max_retries {
                    return Err(LlmError::Transport { attempts, message });
                }
                let window = config.backoff_base_secs * 2f64.powi(attempts as i32 - 1);
                let wait = rand::rng().random::<f64>() * window;
                std::thread::sleep(Duration::from_secs_f64(wait));
            }
        }
    }
}

/// Proposer backed by a remote chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct RemoteProposer {
    config: ProposerConfig,
    api_key: String,
}

impl RemoteProposer {
    pub fn new(config: ProposerConfig, api_key: impl Into<String>) -> Self {
        Self {
            config,
            api_key: api_key.into(),
        }
    }

    pub fn from_env(config: ProposerConfig) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::Auth {
            attempts: 0,
            message: format!("{API_KEY_ENV} is not set"),
        })?;
        Ok(Self::new(config, key))
    }
}

impl Proposer for RemoteProposer {
    fn propose(&self, request: &ProposalRequest<'_>, _rng: &mut AgentRng) -> Result<String, LlmError> {
        chat_complete_with_key(&self.config, &self.api_key, request.prompt)
    }

    fn kind(&self) -> ProposerKind {
        ProposerKind::Remote
    }
}
