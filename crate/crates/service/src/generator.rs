//! HTTP client for an OpenAI-compatible chat-completions endpoint used as
//! the warning generator.

use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use phishscan_core::config::ExplainerConfig;
use phishscan_core::explainer::prompt::{GeneratorError, WarningGenerator, WarningPrompt};
use serde_json::json;

pub struct HttpGenerator {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
    max_concurrent: usize,
    template: Option<String>,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration, max_concurrent: usize) -> Self {
        HttpGenerator {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            timeout,
            max_concurrent: max_concurrent.max(1),
            template: None,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    /// Send prompts rendered from `template` instead of the built-in one.
    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = Some(template.into());
        self
    }

    /// The configured generator, or `None` for template mode.
    pub fn from_config(c: &ExplainerConfig) -> std::io::Result<Option<Self>> {
        let Some(endpoint) = c.generator_url.clone() else { return Ok(None) };
        let mut g = HttpGenerator::new(
            endpoint,
            c.generator_model.clone().unwrap_or_else(|| "default".into()),
            std::env::var(&c.api_key_env).ok().filter(|k| !k.is_empty()),
            Duration::from_secs(c.timeout_secs),
            c.max_concurrent,
        );
        if let Some(path) = &c.prompt_path {
            g = g.with_template(std::fs::read_to_string(path)?);
        }
        Ok(Some(g))
    }

    fn call(&self, prompt: &WarningPrompt) -> Result<String, GeneratorError> {
        // built per call: the blocking client must not live inside an async runtime
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| GeneratorError::Unavailable(e.to_string()))?;
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt.text}],
        });
        let mut req = client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GeneratorError::Timeout(self.timeout.as_millis() as u64)
            } else {
                GeneratorError::Unavailable(e.to_string())
            }
        })?;
        if !resp.status().is_success() {
            return Err(GeneratorError::Unavailable(format!("http status {}", resp.status())));
        }
        let v: serde_json::Value = resp.json().map_err(|e| GeneratorError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| GeneratorError::Malformed("no choices[0].message.content".into()))
    }
}

impl WarningGenerator for HttpGenerator {
    fn generate(&self, prompt: &WarningPrompt) -> Result<String, GeneratorError> {
        {
            let mut n = self.in_flight.lock();
            while *n >= self.max_concurrent {
                self.freed.wait(&mut n);
            }
            *n += 1;
        }
        let out = self.call(prompt);
        *self.in_flight.lock() -= 1;
        self.freed.notify_one();
        out
    }

    fn template(&self) -> Option<&str> {
        self.template.as_deref()
    }
}
