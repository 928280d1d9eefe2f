//! JSON-over-HTTP wire protocol for remote logit providers.
//!
//! | route                | request                     | response                              |
//! |----------------------|-----------------------------|---------------------------------------|
//! | `GET /v1/model_info` |                             | `{vocab_size, eos_id, newline_id, model_name}` |
//! | `POST /v1/tokenize`  | `{"text": str}`             | `{"ids": [int]}`                      |
//! | `POST /v1/detokenize`| `{"ids": [int]}`            | `{"text": str}`                       |
//! | `POST /v1/logits`    | `{"prefixes": [[int], ...]}`| `{"logits": [[float], ...]}`          |
//!
//! Failures carry `{"error": str}`. [`handle`] is a transport-free server
//! side of the protocol over any [`LogitBackend`].

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{LogitBackend, TokenId, TokenSequence};
use crate::error::Error;

pub const MODEL_INFO_PATH: &str = "/v1/model_info";
pub const TOKENIZE_PATH: &str = "/v1/tokenize";
pub const DETOKENIZE_PATH: &str = "/v1/detokenize";
pub const LOGITS_PATH: &str = "/v1/logits";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfoResponse {
    pub vocab_size: usize,
    pub eos_id: TokenId,
    pub newline_id: Option<TokenId>,
    pub model_name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenizeRequest {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub ids: Vec<TokenId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeRequest {
    pub ids: Vec<TokenId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeResponse {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitsRequest {
    pub prefixes: Vec<Vec<TokenId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitsResponse {
    pub logits: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

impl Response {
    fn json<T: Serialize>(value: &T) -> Self {
        match serde_json::to_string(value) {
            Ok(body) => Self { status: 200, body },
            Err(e) => Self::error(500, e.to_string()),
        }
    }

    fn error(status: u16, message: impl Into<String>) -> Self {
        let body = serde_json::to_string(&ErrorResponse { error: message.into() })
            .unwrap_or_else(|_| "{\"error\":\"unserializable error\"}".to_string());
        Self { status, body }
    }
}

fn status_for(err: &Error) -> u16 {
    match err {
        Error::InvalidInput(_) | Error::Tokenization(_) | Error::Validation(_) => 422,
        Error::Connection(_) => 502,
        _ => 500,
    }
}

fn parse<T: DeserializeOwned>(body: &str) -> std::result::Result<T, Response> {
    serde_json::from_str(body).map_err(|e| Response::error(400, format!("malformed request body: {e}")))
}

/// Serves one request against `backend`.
pub fn handle(backend: &dyn LogitBackend, method: &str, path: &str, body: &str) -> Response {
    let result = match (method, path) {
        ("GET", MODEL_INFO_PATH) => backend.model_info().map(|v| {
            Response::json(&ModelInfoResponse {
                vocab_size: v.size,
                eos_id: v.eos_id,
                newline_id: v.newline_id,
                model_name: v.model_name,
            })
        }),
        ("POST", TOKENIZE_PATH) => match parse::<TokenizeRequest>(body) {
            Ok(req) => {
                backend.tokenize(&req.text).map(|ids| Response::json(&TokenizeResponse { ids: ids.into_inner() }))
            }
            Err(resp) => return resp,
        },
        ("POST", DETOKENIZE_PATH) => match parse::<DetokenizeRequest>(body) {
            Ok(req) => backend
                .detokenize(&TokenSequence::new(req.ids))
                .map(|text| Response::json(&DetokenizeResponse { text })),
            Err(resp) => return resp,
        },
        ("POST", LOGITS_PATH) => match parse::<LogitsRequest>(body) {
            Ok(req) => {
                let prefixes: Vec<TokenSequence> = req.prefixes.into_iter().map(TokenSequence::new).collect();
                backend.next_logits(&prefixes).map(|out| {
                    Response::json(&LogitsResponse { logits: out.into_iter().map(|l| l.into_inner()).collect() })
                })
            }
            Err(resp) => return resp,
        },
        (_, MODEL_INFO_PATH | TOKENIZE_PATH | DETOKENIZE_PATH | LOGITS_PATH) => {
            return Response::error(405, format!("method {method} not allowed on {path}"))
        }
        _ => return Response::error(404, format!("no route for {path}")),
    };
    result.unwrap_or_else(|e| Response::error(status_for(&e), e.to_string()))
}
