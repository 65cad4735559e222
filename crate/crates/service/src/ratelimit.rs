//! Async token bucket.

use std::time::Duration;

use tokio::sync::Mutex;
use tokio::time::Instant;

pub struct TokenBucket {
    rate: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    /// `rate` tokens per second with a burst of `rate` tokens (at least one).
    /// A non-positive or non-finite rate disables limiting.
    pub fn new(rate: f64) -> Self {
        let burst = rate.max(1.0);
        TokenBucket { rate, burst, state: Mutex::new((burst, Instant::now())) }
    }

    pub fn unlimited(&self) -> bool {
        !(self.rate.is_finite() && self.rate > 0.0)
    }

    /// Take one token, waiting for it if the bucket is empty. Waiters reserve
    /// in arrival order, so the long-run rate never exceeds `rate`.
    pub async fn acquire(&self) {
        if self.unlimited() {
            return;
        }
        let wait = {
            let mut state = self.state.lock().await;
            let now = Instant::now();
            let (tokens, last) = *state;
            let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.rate).min(self.burst) - 1.0;
            *state = (tokens, now);
            if tokens >= 0.0 {
                return;
            }
            Duration::from_secs_f64(-tokens / self.rate)
        };
        tokio::time::sleep(wait).await;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test(start_paused = true)]
    async fn rate_is_enforced_after_burst() {
        let bucket = TokenBucket::new(10.0);
        let start = Instant::now();
        for _ in 0..30 {
            bucket.acquire().await;
        }
        // 10 from the burst, 20 more at 10/s
        let elapsed = start.elapsed().as_secs_f64();
        assert!((1.9..2.2).contains(&elapsed), "{elapsed}");
    }

    #[tokio::test]
    async fn zero_rate_is_unlimited() {
        let bucket = TokenBucket::new(0.0);
        for _ in 0..1000 {
            bucket.acquire().await;
        }
    }
}
