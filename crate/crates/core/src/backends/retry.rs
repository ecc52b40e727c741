use std::sync::Arc;
use std::time::Duration;

use super::BackendError;
use crate::model::RetryConfig;

/// Sleep hook so tests can run retry loops without waiting.
pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub fn thread_sleeper() -> Sleeper {
    Arc::new(std::thread::sleep)
}

/// Exponential backoff: `initial * multiplier^(attempt-1)` between attempts.
#[derive(Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial: Duration,
    pub multiplier: f64,
    sleeper: Sleeper,
}

impl std::fmt::Debug for RetryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RetryPolicy")
            .field("max_attempts", &self.max_attempts)
            .field("initial", &self.initial)
            .field("multiplier", &self.multiplier)
            .finish()
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy::from_config(&RetryConfig::default())
    }
}

impl RetryPolicy {
    pub fn from_config(cfg: &RetryConfig) -> Self {
        RetryPolicy {
            max_attempts: cfg.max_attempts.max(1),
            initial: Duration::from_millis(cfg.initial_backoff_ms),
            multiplier: cfg.multiplier,
            sleeper: thread_sleeper(),
        }
    }

    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = self.multiplier.powi(retry.saturating_sub(1) as i32);
        self.initial.mul_f64(factor)
    }

    /// Total time spent sleeping if every attempt fails.
    pub fn worst_case_wait(&self) -> Duration {
        (1..self.max_attempts).map(|r| self.delay(r)).sum()
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or the budget is spent.
    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T, BackendError>) -> Result<T, BackendError> {
        let mut attempt = 1;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.max_attempts => {
                    let wait = self.delay(attempt);
                    log::warn!("attempt {attempt}/{} failed ({e}); retrying in {wait:?}", self.max_attempts);
                    (self.sleeper)(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    fn recording() -> (RetryPolicy, Arc<Mutex<Vec<Duration>>>) {
        let waits = Arc::new(Mutex::new(Vec::new()));
        let w = waits.clone();
        let policy = RetryPolicy::default().with_sleeper(Arc::new(move |d| w.lock().unwrap().push(d)));
        (policy, waits)
    }

    #[test]
    fn default_schedule_is_one_two_four_eight_seconds() {
        let p = RetryPolicy::default();
        assert_eq!(p.max_attempts, 5);
        assert_eq!(p.delay(1), Duration::from_secs(1));
        assert_eq!(p.delay(4), Duration::from_secs(8));
        assert_eq!(p.worst_case_wait(), Duration::from_secs(15));
    }

    #[test]
    fn retries_until_success() {
        let (p, waits) = recording();
        let out = p.run(|attempt| if attempt < 3 { Err(BackendError::rate_limited("slow down")) } else { Ok(attempt) });
        assert_eq!(out.unwrap(), 3);
        assert_eq!(*waits.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
    }

    #[test]
    fn gives_up_after_budget() {
        let (p, waits) = recording();
        let mut calls = 0;
        let out: Result<(), _> = p.run(|_| {
            calls += 1;
            Err(BackendError::transport("down"))
        });
        assert!(out.is_err());
        assert_eq!(calls, 5);
        assert_eq!(waits.lock().unwrap().len(), 4);
    }

    #[test]
    fn non_retryable_fails_fast() {
        let (p, _) = recording();
        let mut calls = 0;
        let out: Result<(), _> = p.run(|_| {
            calls += 1;
            Err(BackendError::protocol("bad json"))
        });
        assert!(out.is_err());
        assert_eq!(calls, 1);
    }
}
