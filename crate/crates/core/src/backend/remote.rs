//! HTTP client for the wire protocol in [`super::protocol`].

use std::sync::OnceLock;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::protocol::{
    DetokenizeRequest, DetokenizeResponse, ErrorResponse, LogitsRequest, LogitsResponse, ModelInfoResponse,
    TokenizeRequest, TokenizeResponse, DETOKENIZE_PATH, LOGITS_PATH, MODEL_INFO_PATH, TOKENIZE_PATH,
};
use super::{LogitBackend, TokenSequence, Vocabulary};
use crate::error::{invalid, Error, Result};
use crate::numerics::LogitVector;

pub const REMOTE_URL_ENV: &str = "ACD_REMOTE_URL";

pub struct RemoteBackend {
    base_url: String,
    agent: ureq::Agent,
    vocab: OnceLock<Vocabulary>,
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(300))
    }

    pub fn with_timeout(base_url: impl Into<String>, timeout: Duration) -> Self {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { base_url, agent, vocab: OnceLock::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn decode<T: DeserializeOwned>(&self, result: std::result::Result<ureq::Response, ureq::Error>) -> Result<T> {
        match result {
            Ok(resp) => {
                resp.into_json().map_err(|e| Error::Backend(format!("malformed response from {}: {e}", self.base_url)))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                let message = serde_json::from_str::<ErrorResponse>(&body).map(|e| e.error).unwrap_or(body);
                Err(Error::Backend(format!("HTTP {code}: {message}")))
            }
            Err(ureq::Error::Transport(t)) => Err(Error::Connection(format!("{}: {t}", self.base_url))),
        }
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.decode(self.agent.get(&format!("{}{path}", self.base_url)).call())
    }

    fn post<Q: Serialize, T: DeserializeOwned>(&self, path: &str, request: &Q) -> Result<T> {
        self.decode(self.agent.post(&format!("{}{path}", self.base_url)).send_json(request))
    }

    fn vocab(&self) -> Result<&Vocabulary> {
        if let Some(v) = self.vocab.get() {
            return Ok(v);
        }
        let info: ModelInfoResponse = self.get(MODEL_INFO_PATH)?;
        let vocab = Vocabulary {
            size: info.vocab_size,
            eos_id: info.eos_id,
            newline_id: info.newline_id,
            model_name: info.model_name,
            token_texts: Vec::new(),
        };
        vocab.validate().map_err(|e| Error::Backend(format!("server reported an invalid vocabulary: {e}")))?;
        Ok(self.vocab.get_or_init(|| vocab))
    }
}

impl LogitBackend for RemoteBackend {
    fn model_info(&self) -> Result<Vocabulary> {
        self.vocab().cloned()
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        let resp: TokenizeResponse = self.post(TOKENIZE_PATH, &TokenizeRequest { text: text.to_string() })?;
        Ok(TokenSequence::new(resp.ids))
    }

    fn detokenize(&self, ids: &TokenSequence) -> Result<String> {
        let resp: DetokenizeResponse = self.post(DETOKENIZE_PATH, &DetokenizeRequest { ids: ids.ids().to_vec() })?;
        Ok(resp.text)
    }

    fn next_logits(&self, prefixes: &[TokenSequence]) -> Result<Vec<LogitVector>> {
        let size = self.vocab()?.size;
        for p in prefixes {
            if p.is_empty() {
                return Err(invalid("prefix is empty"));
            }
            p.check(size)?;
        }
        let request = LogitsRequest { prefixes: prefixes.iter().map(|p| p.ids().to_vec()).collect() };
        let resp: LogitsResponse = self.post(LOGITS_PATH, &request)?;
        if resp.logits.len() != prefixes.len() {
            return Err(Error::Backend(format!(
                "asked for {} logit vectors, got {}",
                prefixes.len(),
                resp.logits.len()
            )));
        }
        resp.logits
            .into_iter()
            .map(|row| {
                if row.len() != size {
                    return Err(Error::Backend(format!(
                        "logit vector of length {} for vocabulary of {size}",
                        row.len()
                    )));
                }
                LogitVector::new(row).map_err(|e| Error::Backend(e.to_string()))
            })
            .collect()
    }
}
