//! Chat-completion provider over HTTPS.
//!
//! Request body:
//!
//! ```json
//! {
//!   "model": "<model_id>",
//!   "temperature": 0.0,
//!   "max_tokens": 2048,
//!   "messages": [
//!     {"role": "system", "content": "<role_header>"},
//!     {"role": "user", "content": [
//!       {"type": "text", "text": "<user_text>"},
//!       {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}
//!     ]}
//!   ]
//! }
//! ```
//!
//! One `image_url` part per frame, in temporal order. The key is sent as
//! `Authorization: Bearer <key>`, read from the variable named by
//! `api_key_env`. The reply text is `choices[0].message.content`, either a
//! string or a list of `{"type": "text", "text": ...}` parts.

use std::io::Cursor;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::ImageFormat;
use serde_json::{json, Value};

use super::prompts::AgentRequest;
use super::provider::{Provider, ProviderConfig, ProviderError};

#[derive(Debug, Default, Clone, Copy)]
pub struct HttpProvider;

impl HttpProvider {
    pub fn new() -> Self {
        Self
    }
}

pub fn build_chat_body(request: &AgentRequest<'_>, config: &ProviderConfig) -> Result<Value, ProviderError> {
    let mut parts = vec![json!({"type": "text", "text": request.user_text})];
    if let Some(frames) = request.attached_frames {
        for frame in frames.frames() {
            let mut png = Vec::new();
            frame
                .write_to(&mut Cursor::new(&mut png), ImageFormat::Png)
                .map_err(|e| ProviderError::Rejected(format!("frame encoding failed: {e}")))?;
            parts.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{}", STANDARD.encode(&png))},
            }));
        }
    }
    Ok(json!({
        "model": config.model_id,
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
        "messages": [
            {"role": "system", "content": request.role_header},
            {"role": "user", "content": parts},
        ],
    }))
}

pub fn parse_chat_response(body: &str) -> Result<String, ProviderError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ProviderError::Malformed(format!("invalid json: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .ok_or_else(|| ProviderError::Malformed("no choices[0].message.content".into()))?;
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        _ => return Err(ProviderError::Malformed("content is neither text nor parts".into())),
    };
    if text.trim().is_empty() {
        return Err(ProviderError::Malformed("empty content".into()));
    }
    Ok(text)
}

pub fn classify_status(status: u16, body: &str) -> ProviderError {
    let snippet: String = body.chars().take(200).collect();
    let msg = format!("HTTP {status}: {snippet}");
    match status {
        401 | 403 => ProviderError::Auth(msg),
        408 | 429 | 500..=599 => ProviderError::Transient(msg),
        _ => ProviderError::Rejected(msg),
    }
}

impl Provider for HttpProvider {
    fn complete(&self, request: &AgentRequest<'_>, config: &ProviderConfig) -> Result<String, ProviderError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ProviderError::Auth(format!("environment variable {} is not set", config.api_key_env)))?;
        let body = build_chat_body(request, config)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.request_timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let mut response = agent
            .post(&config.endpoint_url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| ProviderError::Transient(format!("transport: {e}")))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transient(format!("reading body: {e}")))?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, &text));
        }
        parse_chat_response(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::prompts::{build_scene_prompt, Stage};
    use crate::ingest::{sample_frames, SyntheticDecoder, VideoClip};

    #[test]
    fn body_has_one_image_per_frame() {
        let clip = VideoClip {
            clip_id: "a".into(),
            source_path: "x".into(),
            duration_s: 1.0,
            region_tag: "t".into(),
            captured_at: None,
        };
        let frames = sample_frames(&clip, 0.5, &SyntheticDecoder::new(32, 32, 0)).unwrap();
        let req = build_scene_prompt(&frames);
        let body = build_chat_body(&req, &ProviderConfig::mock("gpt")).unwrap();
        assert_eq!(body["model"], "gpt");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["role"], "system");
        let parts = body["messages"][1]["content"].as_array().unwrap();
        assert_eq!(parts.len(), 1 + 3);
        assert_eq!(parts[0]["type"], "text");
        let url = parts[1]["image_url"]["url"].as_str().unwrap();
        let png = STANDARD.decode(url.strip_prefix("data:image/png;base64,").unwrap()).unwrap();
        let img = image::load_from_memory(&png).unwrap().to_rgb8();
        assert_eq!(&img, &frames.frames()[0]);
    }

    #[test]
    fn response_shapes() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#;
        assert_eq!(parse_chat_response(ok).unwrap(), "hello");
        let parts = r#"{"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]}"#;
        assert_eq!(parse_chat_response(parts).unwrap(), "ab");
        assert!(matches!(parse_chat_response(r#"{"choices":[]}"#), Err(ProviderError::Malformed(_))));
        assert!(matches!(parse_chat_response("<html>"), Err(ProviderError::Malformed(_))));
    }

    #[test]
    fn status_classes() {
        assert!(matches!(classify_status(401, ""), ProviderError::Auth(_)));
        assert!(matches!(classify_status(429, ""), ProviderError::Transient(_)));
        assert!(matches!(classify_status(503, ""), ProviderError::Transient(_)));
        assert!(matches!(classify_status(400, ""), ProviderError::Rejected(_)));
    }

    #[test]
    fn missing_key_is_auth_error() {
        let cfg = ProviderConfig {
            name: "openai".into(),
            endpoint_url: "http://127.0.0.1:9/v1/chat/completions".into(),
            api_key_env: "ROADSCENE_TEST_KEY_THAT_IS_NOT_SET".into(),
            ..ProviderConfig::mock("m")
        };
        let req = AgentRequest { role_header: "s".into(), user_text: "u".into(), attached_frames: None, stage: Stage::Scene };
        assert!(matches!(HttpProvider.complete(&req, &cfg), Err(ProviderError::Auth(_))));
    }
}
