//! Etherscan-style code fetcher: eth_getCode through the proxy module,
//! with shared rate limiting and exponential backoff on server errors.
//! Tests run against a local mock; nothing here ever hits the network
//! in the test suite.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::disasm::Bytecode;

#[derive(Debug)]
pub struct FetchConfig {
    pub endpoint: String,
    pub api_key: String,
    /// Maximum request admission rate, requests per second.
    pub rate_limit: f64,
    pub max_retries: u32,
    /// First retry waits this long; each further retry doubles it.
    pub backoff_base: Duration,
    /// Admission time of the most recent request, shared across callers.
    last_request: Mutex<Option<Instant>>,
}

impl FetchConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        FetchConfig {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            rate_limit: 5.0,
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
            last_request: Mutex::new(None),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FetchError {
    #[error("endpoint rejected the api key")]
    AuthError,
    #[error("no code deployed at the address")]
    EmptyCode,
    #[error("network failure: {0}")]
    NetworkError(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid address: {0}")]
    InvalidAddress(String),
    #[error("rate limit must be positive")]
    InvalidRateLimit,
}

pub fn fetch_code(address: &str, config: &FetchConfig) -> Result<Bytecode, FetchError> {
    if !is_valid_address(address) {
        return Err(FetchError::InvalidAddress(address.to_string()));
    }
    if !(config.rate_limit > 0.0) {
        return Err(FetchError::InvalidRateLimit);
    }
    let url = format!(
        "{}?module=proxy&action=eth_getCode&address={}&tag=latest&apikey={}",
        config.endpoint, address, config.api_key
    );

    let mut attempt = 0;
    loop {
        admit(config);
        match ureq::get(&url).timeout(Duration::from_secs(10)).call() {
            Ok(response) => {
                let body = response
                    .into_string()
                    .map_err(|e| FetchError::NetworkError(e.to_string()))?;
                return parse_body(&body);
            }
            Err(ureq::Error::Status(code, _)) if code == 401 || code == 403 => {
                return Err(FetchError::AuthError);
            }
            Err(ureq::Error::Status(code, _)) if (500..600).contains(&code) => {
                if attempt >= config.max_retries {
                    return Err(FetchError::NetworkError(format!(
                        "status {code} after {attempt} retries"
                    )));
                }
                std::thread::sleep(config.backoff_base * 2u32.pow(attempt));
                attempt += 1;
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(FetchError::NetworkError(format!("status {code}")));
            }
            Err(ureq::Error::Transport(t)) => {
                if attempt >= config.max_retries {
                    return Err(FetchError::NetworkError(t.to_string()));
                }
                std::thread::sleep(config.backoff_base * 2u32.pow(attempt));
                attempt += 1;
            }
        }
    }
}

/// Blocks until the shared limiter grants a slot. The lock is held across
/// the wait so concurrent callers are admitted strictly one at a time.
fn admit(config: &FetchConfig) {
    let min_gap = Duration::from_secs_f64(1.0 / config.rate_limit);
    let mut last = config.last_request.lock().expect("limiter poisoned");
    if let Some(t) = *last {
        let elapsed = t.elapsed();
        if elapsed < min_gap {
            std::thread::sleep(min_gap - elapsed);
        }
    }
    *last = Some(Instant::now());
}

fn is_valid_address(address: &str) -> bool {
    address.len() == 42
        && address.starts_with("0x")
        && address[2..].bytes().all(|b| b.is_ascii_hexdigit())
}

fn parse_body(body: &str) -> Result<Bytecode, FetchError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| FetchError::MalformedResponse(e.to_string()))?;
    let result = value.get("result").and_then(|v| v.as_str());
    match result {
        Some("0x") => Err(FetchError::EmptyCode),
        Some(hex) if hex.starts_with("0x") => Bytecode::parse_hex(hex)
            .map_err(|e| FetchError::MalformedResponse(format!("result not hex: {e}"))),
        _ => {
            // Etherscan reports key problems as a 200 with an error payload.
            let text = body.to_ascii_lowercase();
            if text.contains("api key") || text.contains("apikey") {
                return Err(FetchError::AuthError);
            }
            Err(FetchError::MalformedResponse(
                "no result field".to_string(),
            ))
        }
    }
}
