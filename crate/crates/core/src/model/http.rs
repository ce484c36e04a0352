use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::client::ModelBackend;
use super::request::{ModelRequest, PromptPart};
use super::ModelError;

/// Settings for an OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    "MODEL_API_KEY".to_string()
}

fn default_timeout() -> u64 {
    120
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let api_key = std::env::var(&config.api_key_env).ok();
        Self {
            config,
            agent,
            api_key,
        }
    }

    /// The JSON body sent for a request. Frames with an image on disk are
    /// inlined as data URLs; others are described by timestamp only.
    pub fn request_body(&self, req: &ModelRequest) -> Result<Value, ModelError> {
        let mut content = Vec::new();
        for part in &req.parts {
            match part {
                PromptPart::Text(t) => content.push(json!({"type": "text", "text": t})),
                PromptPart::Frames(frames) => {
                    for f in frames {
                        content.push(json!({"type": "text", "text": format!("Frame at {}:", f.t)}));
                        if let Some(path) = &f.image {
                            let bytes = std::fs::read(path).map_err(|e| {
                                ModelError::Config(format!("cannot read frame {}: {e}", path.display()))
                            })?;
                            let mime = match path.extension().and_then(|e| e.to_str()) {
                                Some("png") => "image/png",
                                Some("webp") => "image/webp",
                                _ => "image/jpeg",
                            };
                            let data = base64::engine::general_purpose::STANDARD.encode(bytes);
                            content.push(json!({
                                "type": "image_url",
                                "image_url": {"url": format!("data:{mime};base64,{data}")}
                            }));
                        }
                    }
                }
            }
        }
        Ok(json!({
            "model": self.config.model,
            "temperature": req.temperature,
            "max_tokens": req.max_output,
            "messages": [{"role": "user", "content": content}],
        }))
    }
}

impl ModelBackend for HttpBackend {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let body = self.request_body(req)?;
        let url = format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'));
        let mut call = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(&body).map_err(classify)?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ModelError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ModelError::Transport(format!("HTTP {status}: {text}")));
        }
        let parsed: Value = resp.body_mut().read_json().map_err(classify)?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ModelError::Transport(format!("unexpected response shape: {parsed}")))
    }
}

fn classify(e: ureq::Error) -> ModelError {
    match e {
        ureq::Error::Io(_)
        | ureq::Error::Timeout(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::BodyStalled => ModelError::Transient(e.to_string()),
        other => ModelError::Transport(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Timestamp;
    use crate::fixtures::FrameRef;

    #[test]
    fn body_inlines_images_and_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("000000.png");
        std::fs::write(&img, [1u8, 2, 3]).unwrap();
        let backend = HttpBackend::new(HttpConfig {
            endpoint: "http://localhost:1".into(),
            model: "m".into(),
            api_key_env: "VIDCRITIC_TEST_UNSET_KEY".into(),
            timeout_secs: 1,
        });
        let req = ModelRequest::new(
            "t",
            vec![
                PromptPart::Text("hi".into()),
                PromptPart::Frames(vec![FrameRef {
                    video: "v".into(),
                    index: 0,
                    t: Timestamp::from_secs(65),
                    image: Some(img),
                }]),
            ],
        );
        let body = backend.request_body(&req).unwrap();
        let content = body["messages"][0]["content"].as_array().unwrap();
        assert_eq!(content[1]["text"], "Frame at 01:05:");
        assert_eq!(content[2]["image_url"]["url"], "data:image/png;base64,AQID");
        assert_eq!(body["temperature"], 0.0);
    }

    #[test]
    fn unreachable_endpoint_is_transient() {
        let backend = HttpBackend::new(HttpConfig {
            endpoint: "http://127.0.0.1:9".into(),
            model: "m".into(),
            api_key_env: default_key_env(),
            timeout_secs: 2,
        });
        let err = backend.complete(&ModelRequest::text("t", "x")).unwrap_err();
        assert!(matches!(err, ModelError::Transient(_) | ModelError::Transport(_)), "{err}");
    }
}
