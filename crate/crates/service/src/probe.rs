//! Network liveness probe for form targets.

use std::time::Duration;

use phishscan_core::parser::{ActionProbe, ProbeOutcome};
use url::Url;

pub struct NetworkProbe {
    timeout: Duration,
}

impl NetworkProbe {
    pub fn new(timeout: Duration) -> Self {
        NetworkProbe { timeout }
    }
}

impl ActionProbe for NetworkProbe {
    /// HEAD request without following redirects; any HTTP answer counts as
    /// reachable. Must be called outside an async runtime.
    fn probe(&self, url: &Url) -> ProbeOutcome {
        let client = match reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .redirect(reqwest::redirect::Policy::none())
            .build()
        {
            Ok(c) => c,
            Err(_) => return ProbeOutcome::Unreachable,
        };
        match client.head(url.as_str()).send() {
            Ok(_) => ProbeOutcome::Reachable,
            Err(e) if e.is_timeout() => ProbeOutcome::TimedOut,
            Err(_) => ProbeOutcome::Unreachable,
        }
    }
}
