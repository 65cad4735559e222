//! Bounded HTTP fetching and placeholder form submission.

use std::sync::Arc;
use std::time::Duration;

use phishscan_core::config::ServiceConfig;
use phishscan_core::parser::FormInfo;
use reqwest::redirect::Policy;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::ratelimit::TokenBucket;

pub const USER_AGENT: &str = concat!("Mozilla/5.0 (compatible; phishscan/", env!("CARGO_PKG_VERSION"), ")");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("invalid url: {0}")]
    InvalidUrl(String),
    #[error("timed out")]
    Timeout,
    #[error("body exceeds {0} bytes")]
    TooLarge(usize),
    #[error("too many redirects")]
    TooManyRedirects,
    #[error("http status {0}")]
    Status(u16),
    #[error("network error: {0}")]
    Network(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedPage {
    /// Url after redirects.
    pub url: String,
    pub status: u16,
    pub ip: Option<String>,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FetchLimits {
    pub timeout: Duration,
    pub max_body_bytes: usize,
    pub max_redirects: usize,
    pub rate_per_sec: f64,
}

impl From<&ServiceConfig> for FetchLimits {
    fn from(c: &ServiceConfig) -> Self {
        FetchLimits {
            timeout: Duration::from_secs(c.fetch_timeout_secs),
            max_body_bytes: c.max_body_bytes,
            max_redirects: c.max_redirects,
            rate_per_sec: c.fetch_rate_per_sec,
        }
    }
}

/// A form filled with placeholder data, ready to submit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormSubmission {
    pub url: String,
    pub method: String,
    pub fields: Vec<(String, String)>,
}

/// Dummy value for a form field; never real data.
pub fn placeholder_value(input_type: &str, name: &str, current: &str) -> String {
    let name = name.to_ascii_lowercase();
    let v = match input_type {
        "hidden" | "submit" | "button" => return current.to_string(),
        "checkbox" | "radio" => "on",
        "email" => "jane.doe@example.com",
        "password" => "Placeholder#2024",
        "tel" => "5550100123",
        "number" => "12345",
        "url" => "https://example.com/",
        "date" => "1990-01-01",
        _ if name.contains("mail") || name.contains("user") || name.contains("login") => "jane.doe@example.com",
        _ if name.contains("pass") || name.contains("pwd") || name.contains("pin") => "Placeholder#2024",
        _ if name.contains("phone") || name.contains("mobile") => "5550100123",
        _ if name.contains("card") || name.contains("cc") => "4111111111111111",
        _ if name.contains("cvv") || name.contains("cvc") => "123",
        _ if name.contains("zip") || name.contains("postal") => "12345",
        _ if name.contains("name") => "Jane Doe",
        _ => "placeholder",
    };
    v.to_string()
}

/// Placeholder submission for `form` on the page at `page_url`. Forms whose
/// target is not an http(s) url (fragments, `javascript:`) yield `None`.
pub fn placeholder_submission(form: &FormInfo, page_url: &str) -> Option<FormSubmission> {
    let base = Url::parse(page_url).ok()?;
    let action = form.action.as_deref().map(str::trim).unwrap_or("");
    let lower = action.to_ascii_lowercase();
    if action.starts_with('#') || lower.starts_with("javascript:") {
        return None;
    }
    let mut target = if action.is_empty() { base.clone() } else { base.join(action).ok()? };
    if !matches!(target.scheme(), "http" | "https") {
        return None;
    }
    target.set_fragment(None);
    let fields = form
        .fields
        .iter()
        .filter(|f| !matches!(f.input_type.as_str(), "submit" | "button" | "reset" | "file" | "image"))
        .map(|f| (f.name.clone(), placeholder_value(&f.input_type, &f.name, &f.value)))
        .collect();
    let method = if form.method == "post" { "post" } else { "get" };
    Some(FormSubmission { url: target.to_string(), method: method.to_string(), fields })
}

#[derive(Clone)]
pub struct HttpFetcher {
    client: reqwest::Client,
    limits: FetchLimits,
    bucket: Arc<TokenBucket>,
}

impl HttpFetcher {
    pub fn new(limits: FetchLimits) -> Result<Self, FetchError> {
        let client = reqwest::Client::builder()
            .user_agent(USER_AGENT)
            .timeout(limits.timeout)
            .redirect(Policy::limited(limits.max_redirects))
            .build()
            .map_err(|e| FetchError::Network(e.to_string()))?;
        Ok(HttpFetcher { client, limits, bucket: Arc::new(TokenBucket::new(limits.rate_per_sec)) })
    }

    pub fn limits(&self) -> FetchLimits {
        self.limits
    }

    pub async fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError> {
        let u = Url::parse(url).map_err(|e| FetchError::InvalidUrl(e.to_string()))?;
        self.send(self.client.get(u)).await
    }

    pub async fn submit(&self, s: &FormSubmission) -> Result<FetchedPage, FetchError> {
        let mut u = Url::parse(&s.url).map_err(|e| FetchError::InvalidUrl(e.to_string()))?;
        let request = if s.method == "post" {
            self.client.post(u).form(&s.fields)
        } else {
            u.query_pairs_mut().extend_pairs(&s.fields);
            self.client.get(u)
        };
        self.send(request).await
    }

    async fn send(&self, request: reqwest::RequestBuilder) -> Result<FetchedPage, FetchError> {
        self.bucket.acquire().await;
        let cap = self.limits.max_body_bytes;
        let mut resp = request.send().await.map_err(classify)?;
        let status = resp.status().as_u16();
        if !resp.status().is_success() {
            return Err(FetchError::Status(status));
        }
        if resp.content_length().is_some_and(|n| n as usize > cap) {
            return Err(FetchError::TooLarge(cap));
        }
        let url = resp.url().to_string();
        let ip = resp.remote_addr().map(|a| a.ip().to_string());
        let mut body = Vec::new();
        while let Some(chunk) = resp.chunk().await.map_err(classify)? {
            if body.len() + chunk.len() > cap {
                return Err(FetchError::TooLarge(cap));
            }
            body.extend_from_slice(&chunk);
        }
        Ok(FetchedPage { url, status, ip, body })
    }
}

fn classify(e: reqwest::Error) -> FetchError {
    if e.is_timeout() {
        FetchError::Timeout
    } else if e.is_redirect() {
        FetchError::TooManyRedirects
    } else {
        FetchError::Network(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phishscan_core::parser::FormField;

    fn form(action: Option<&str>, method: &str) -> FormInfo {
        FormInfo {
            action: action.map(str::to_string),
            method: method.into(),
            fields: vec![
                FormField { input_type: "email".into(), name: "e".into(), value: String::new() },
                FormField { input_type: "password".into(), name: "p".into(), value: String::new() },
                FormField { input_type: "hidden".into(), name: "tok".into(), value: "abc".into() },
                FormField { input_type: "submit".into(), name: "go".into(), value: "Go".into() },
            ],
        }
    }

    #[test]
    fn submissions_resolve_and_fill() {
        let s = placeholder_submission(&form(Some("/login"), "post"), "http://x.test/a/b").unwrap();
        assert_eq!(s.url, "http://x.test/login");
        assert_eq!(s.method, "post");
        assert_eq!(
            s.fields,
            vec![
                ("e".into(), "jane.doe@example.com".into()),
                ("p".into(), "Placeholder#2024".into()),
                ("tok".into(), "abc".into())
            ]
        );
        assert_eq!(placeholder_submission(&form(None, "get"), "http://x.test/a").unwrap().url, "http://x.test/a");
        assert!(placeholder_submission(&form(Some("#"), "post"), "http://x.test/").is_none());
        assert!(placeholder_submission(&form(Some("javascript:void(0)"), "post"), "http://x.test/").is_none());
        assert!(placeholder_submission(&form(Some("mailto:a@b"), "post"), "http://x.test/").is_none());
    }
}
