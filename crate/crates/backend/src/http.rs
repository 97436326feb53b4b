use std::time::Duration;

use ureq::Agent;

use crate::error::{BackendError, Result};
use crate::gateway::Backend;
use crate::protocol::{Capability, ErrorBody, Request, Response};

/// Largest response body accepted; whole downloaded videos travel as one body.
const MAX_BODY: u64 = 1 << 30;

/// Client for an adapter service speaking the HTTP wire protocol.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    agent: Agent,
}

impl HttpBackend {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }
}

fn transport(capability: Capability, err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_) => BackendError::Timeout { capability },
        other => BackendError::Transport {
            capability,
            message: other.to_string(),
        },
    }
}

impl Backend for HttpBackend {
    fn call(&self, request: Request) -> Result<Response> {
        let capability = request.capability();
        let body = request.to_json().map_err(|e| BackendError::bad_request(capability, e.to_string()))?;
        let url = format!("{}{}", self.base_url, capability.route());
        let mut resp = self
            .agent
            .post(&url)
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(|e| transport(capability, e))?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY)
            .read_to_vec()
            .map_err(|e| transport(capability, e))?;
        if !(200..300).contains(&status) {
            let (message, retriable) = match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(b) => (b.error, b.retriable),
                Err(_) => (String::from_utf8_lossy(&bytes).into_owned(), status >= 500 || status == 429),
            };
            return Err(BackendError::Remote {
                capability,
                status,
                message,
                retriable,
            });
        }
        Response::from_json(capability, &bytes).map_err(|e| BackendError::Protocol {
            capability,
            message: e.to_string(),
        })
    }
}
