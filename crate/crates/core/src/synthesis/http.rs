use std::io::ErrorKind;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, TranslationBackend};
use crate::corpus_io::LanguageTag;

#[derive(Serialize)]
struct TranslateRequest<'a> {
    src_lang: LanguageTag,
    tgt_lang: LanguageTag,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct TranslateResponse {
    translations: Vec<String>,
}

/// Client for an external translation server.
///
/// Each batch is one `POST <endpoint>/translate` with body
/// `{"src_lang", "tgt_lang", "texts": [...]}`; the server answers
/// `{"translations": [...]}` of the same length.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    src: LanguageTag,
    tgt: LanguageTag,
    auth_token: Option<String>,
}

pub fn http_backend(
    endpoint_url: &str,
    src_lang: LanguageTag,
    tgt_lang: LanguageTag,
    timeout: Duration,
    auth_token: Option<String>,
) -> HttpBackend {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    HttpBackend {
        agent,
        url: format!("{}/translate", endpoint_url.trim_end_matches('/')),
        src: src_lang,
        tgt: tgt_lang,
        auth_token,
    }
}

fn classify(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::HostNotFound | ureq::Error::ConnectionFailed => {
            BackendError::Unreachable(e.to_string())
        }
        ureq::Error::Io(io) => match io.kind() {
            ErrorKind::ConnectionRefused | ErrorKind::NotFound | ErrorKind::AddrNotAvailable => {
                BackendError::Unreachable(io.to_string())
            }
            ErrorKind::TimedOut | ErrorKind::WouldBlock => BackendError::Timeout,
            _ => BackendError::Other(io.to_string()),
        },
        ureq::Error::StatusCode(status) => BackendError::Status { status },
        ureq::Error::Json(j) => BackendError::Malformed(j.to_string()),
        other => BackendError::Other(other.to_string()),
    }
}

impl HttpBackend {
    pub fn url(&self) -> &str {
        &self.url
    }
}

impl TranslationBackend for HttpBackend {
    fn src_lang(&self) -> LanguageTag {
        self.src
    }

    fn tgt_lang(&self) -> LanguageTag {
        self.tgt
    }

    fn translate_batch(&self, texts: &[String]) -> Result<Vec<String>, BackendError> {
        let mut req = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.auth_token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(TranslateRequest {
                src_lang: self.src,
                tgt_lang: self.tgt,
                texts,
            })
            .map_err(classify)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status });
        }
        let body: TranslateResponse = resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Json(j) => BackendError::Malformed(j.to_string()),
            other => classify(other),
        })?;
        if body.translations.len() != texts.len() {
            return Err(BackendError::Contract {
                expected: texts.len(),
                got: body.translations.len(),
            });
        }
        Ok(body.translations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_body_shape() {
        let texts = vec!["xin chào".to_string()];
        let body = serde_json::to_value(TranslateRequest {
            src_lang: LanguageTag::Vi,
            tgt_lang: LanguageTag::Zh,
            texts: &texts,
        })
        .unwrap();
        assert_eq!(
            body,
            serde_json::json!({"src_lang": "vi", "tgt_lang": "zh", "texts": ["xin chào"]})
        );
    }

    #[test]
    fn endpoint_path() {
        let b = http_backend("http://h:1/", LanguageTag::Vi, LanguageTag::Zh, Duration::from_secs(1), None);
        assert_eq!(b.url(), "http://h:1/translate");
    }

    #[test]
    fn connection_refused_is_unreachable() {
        // Bind then drop to get a port with nothing listening.
        let port = std::net::TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let b = http_backend(
            &format!("http://127.0.0.1:{port}"),
            LanguageTag::Zh,
            LanguageTag::Vi,
            Duration::from_secs(2),
            None,
        );
        let err = b.translate_batch(&["a".into()]).unwrap_err();
        assert!(err.is_fatal(), "{err:?}");
    }
}
