//! Blocking HTTP client shared by the remote encoder and generator adapters.
//!
//! Credentials are read from an environment variable named in the config,
//! never passed on the command line. Failed requests are retried with
//! exponential backoff and then surfaced to the caller.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_API_KEY_ENV: &str = "VERACITY_API_KEY";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. A missing
    /// variable means no `Authorization` header.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}
fn default_timeout() -> u64 {
    120
}

impl AdapterConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        AdapterConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            max_attempts: default_attempts(),
            initial_backoff_ms: default_backoff(),
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.permits.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.cv.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

pub struct AdapterClient {
    config: AdapterConfig,
    http: reqwest::blocking::Client,
    in_flight: InFlight,
}

impl AdapterClient {
    pub fn new(config: AdapterConfig) -> Result<Self> {
        if config.max_attempts == 0 || config.max_in_flight == 0 {
            return Err(Error::InvalidConfig("adapter attempts and in-flight limit must be positive".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("http client: {e}")))?;
        let permits = config.max_in_flight;
        Ok(AdapterClient {
            config,
            http,
            in_flight: InFlight {
                permits: Mutex::new(permits),
                cv: Condvar::new(),
            },
        })
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    fn url(&self, route: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), route)
    }

    /// POST a JSON body and decode the JSON response, retrying transport
    /// errors and non-success statuses.
    pub fn post_json<B: Serialize, R: DeserializeOwned>(&self, route: &str, body: &B) -> Result<R> {
        let _permit = self.in_flight.acquire();
        let url = self.url(route);
        let key = std::env::var(&self.config.api_key_env).ok();
        let mut last_err = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                let delay = self.config.initial_backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(delay));
            }
            let mut req = self.http.post(&url).json(body);
            if let Some(k) = &key {
                req = req.bearer_auth(k);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp
                        .json::<R>()
                        .map_err(|e| Error::GeneratorUnavailable(format!("malformed response from {url}: {e}")));
                }
                Ok(resp) => last_err = format!("HTTP {} from {url}", resp.status()),
                Err(e) => last_err = format!("{url}: {e}"),
            }
            log::warn!("adapter attempt {} of {} failed: {last_err}", attempt + 1, self.config.max_attempts);
        }
        Err(Error::GeneratorUnavailable(format!(
            "{} attempts failed; last error: {last_err}",
            self.config.max_attempts
        )))
    }
}
