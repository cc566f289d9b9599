use std::io::Write;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::{ChatMessage, ChatPrompt};
use crate::error::ChatError;
use crate::rng::SimRng;

/// Source of candidate expressions for a prompt.
pub trait ChatModel: Send + Sync {
    /// Exactly `n` candidate strings; empty strings stand in for missing ones.
    fn complete(
        &self,
        prompt: &ChatPrompt,
        n: usize,
        temperature: f64,
        rng: &mut SimRng,
    ) -> Result<Vec<String>, ChatError>;
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    n: usize,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Pull candidate expressions out of free-form reply lines: list markers,
/// quotes and code fences are stripped.
pub fn split_candidates(content: &str) -> Vec<String> {
    content
        .lines()
        .map(|l| {
            let mut s = l.trim();
            if let Some(rest) = s.strip_prefix(['-', '*']) {
                s = rest.trim_start();
            }
            let digits = s.chars().take_while(char::is_ascii_digit).count();
            if digits > 0 {
                if let Some(rest) = s[digits..].strip_prefix(['.', ')', ':']) {
                    s = rest.trim_start();
                }
            }
            s.trim_end_matches(',')
                .trim_matches(|c| c == '"' || c == '\'' || c == '`')
                .trim()
                .to_string()
        })
        .filter(|s| !s.is_empty() && !s.starts_with("```"))
        .collect()
}

/// Client for a chat-completions endpoint.
///
/// Reads `OPENAI_BASE_URL` (default `https://api.openai.com/v1`),
/// `OPENAI_API_KEY` and `OPENAI_MODEL` (default `gpt-4`). One completion
/// is requested per call and its reply lines are the candidates, since the
/// system prompt already asks for a list.
pub struct RemoteChatModel {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
    transcript: Option<Mutex<Box<dyn Write + Send>>>,
}

impl RemoteChatModel {
    pub fn new(base_url: &str, api_key: Option<String>, model: &str) -> Result<Self, ChatError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            model: model.to_string(),
            transcript: None,
        })
    }

    pub fn from_env() -> Result<Self, ChatError> {
        let base = std::env::var("OPENAI_BASE_URL")
            .unwrap_or_else(|_| "https://api.openai.com/v1".to_string());
        let key = std::env::var("OPENAI_API_KEY").map_err(|_| ChatError::MissingEnv("OPENAI_API_KEY"))?;
        let model = std::env::var("OPENAI_MODEL").unwrap_or_else(|_| "gpt-4".to_string());
        Self::new(&base, Some(key), &model)
    }

    /// Append every exchange to `w` as a JSON line.
    pub fn with_transcript(mut self, w: Box<dyn Write + Send>) -> Self {
        self.transcript = Some(Mutex::new(w));
        self
    }

    fn record(&self, request: &serde_json::Value, outcome: serde_json::Value) {
        if let Some(t) = &self.transcript {
            let line = json!({ "request": request, "response": outcome });
            let mut w = t.lock().expect("transcript lock");
            // transcripts are diagnostics; a failed write must not stop the run
            let _ = writeln!(w, "{line}");
        }
    }
}

impl ChatModel for RemoteChatModel {
    fn complete(
        &self,
        prompt: &ChatPrompt,
        n: usize,
        temperature: f64,
        _rng: &mut SimRng,
    ) -> Result<Vec<String>, ChatError> {
        let req = ChatRequest {
            model: &self.model,
            messages: prompt.to_messages(),
            n: 1,
            temperature,
        };
        let req_json = serde_json::to_value(&req).expect("request serializes");
        log::debug!("chat request: {req_json}");
        let mut builder = self.client.post(&self.endpoint).json(&req);
        if let Some(k) = &self.api_key {
            builder = builder.bearer_auth(k);
        }
        let result = builder
            .send()
            .map_err(|e| ChatError::Transport(e.to_string()))
            .and_then(|resp| {
                let status = resp.status();
                let body = resp.text().map_err(|e| ChatError::Transport(e.to_string()))?;
                if !status.is_success() {
                    return Err(ChatError::Status {
                        status: status.as_u16(),
                        body,
                    });
                }
                Ok(body)
            });
        let body = match result {
            Ok(b) => b,
            Err(e) => {
                log::warn!("chat request failed: {e}");
                self.record(&req_json, json!({ "error": e.to_string() }));
                return Err(e);
            }
        };
        log::debug!("chat response: {body}");
        self.record(
            &req_json,
            serde_json::from_str(&body).unwrap_or(serde_json::Value::String(body.clone())),
        );
        let parsed: ChatResponse =
            serde_json::from_str(&body).map_err(|e| ChatError::Malformed(e.to_string()))?;
        let mut out: Vec<String> = parsed
            .choices
            .iter()
            .filter_map(|c| c.message.content.as_deref())
            .flat_map(split_candidates)
            .collect();
        out.resize(n, String::new());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_numbered_and_quoted_lines() {
        let reply = "1. Symbol_0 & ~Symbol_2\n2) \"Symbol_3\",\n- `Symbol_1 | Symbol_4`\n\n```\n* Symbol_5";
        assert_eq!(
            split_candidates(reply),
            vec!["Symbol_0 & ~Symbol_2", "Symbol_3", "Symbol_1 | Symbol_4", "Symbol_5"]
        );
    }

    #[test]
    fn request_shape() {
        let req = ChatRequest {
            model: "m",
            messages: vec![ChatMessage {
                role: "user".into(),
                content: "hi".into(),
            }],
            n: 1,
            temperature: 0.0,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"model":"m","messages":[{"role":"user","content":"hi"}],"n":1,"temperature":0.0}"#
        );
    }
}
