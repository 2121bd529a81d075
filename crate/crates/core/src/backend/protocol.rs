//! Newline-delimited JSON protocol spoken with external backends over the
//! child's stdin/stdout. Every line is one object tagged by `type`:
//!
//! ```text
//! -> {"type":"hello","protocol":1,"params":{...}}
//! <- {"type":"ready","name":"..."}
//! -> {"type":"fit","slice_index":1,"slice_label":"2020-01","top_n":10,"cumulative":true,"docs":[{"id":"...","text":"..."}]}
//! <- {"type":"topics","slice_index":1,"fit_time_ms":123,"topics":[{"id":0,"words":[["corona",0.21]]}],"doc_topics":[["docid",0,0.93]]}
//! -> {"type":"shutdown"}
//! ```
//!
//! A backend may answer any request with `{"type":"error","message":"..."}`.
//! The first `fit` of a run additionally carries `"first_slice":true`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize, Serializer};

use super::{fit_slice, Backend, BackendError, DocTopic, FitRequest, FitResponse, RequestDoc};
use crate::topics::{Topic, TopicSet};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Hello {
        protocol: u32,
        params: BTreeMap<String, String>,
    },
    Fit {
        slice_index: usize,
        slice_label: String,
        top_n: usize,
        cumulative: bool,
        docs: Vec<RequestDoc>,
        #[serde(default, skip_serializing_if = "is_false")]
        first_slice: bool,
    },
    Shutdown,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireTopic {
    pub id: u32,
    pub words: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ready {
        name: String,
    },
    Topics {
        slice_index: usize,
        #[serde(serialize_with = "integral_as_int")]
        fit_time_ms: f64,
        topics: Vec<WireTopic>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        doc_topics: Option<Vec<(String, u32, f64)>>,
    },
    Error {
        message: String,
    },
}

/// Writes whole-number milliseconds as integers (`123`, not `123.0`).
fn integral_as_int<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && *v >= 0.0 && *v < 9.0e15 {
        s.serialize_u64(*v as u64)
    } else {
        s.serialize_f64(*v)
    }
}

impl Request {
    pub fn hello(params: &BTreeMap<String, String>) -> Self {
        Request::Hello {
            protocol: PROTOCOL_VERSION,
            params: params.clone(),
        }
    }

    pub fn fit(req: &FitRequest) -> Self {
        Request::Fit {
            slice_index: req.slice_index,
            slice_label: req.slice_label.clone(),
            top_n: req.top_n,
            cumulative: req.cumulative,
            docs: req.documents.clone(),
            first_slice: req.first_slice,
        }
    }
}

/// Serializes a message as one line without the trailing newline.
pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages always serialize")
}

pub fn decode_request(line: &str) -> Result<Request, BackendError> {
    serde_json::from_str(line.trim_end()).map_err(|e| BackendError::Malformed(format!("{e}: {line}")))
}

pub fn decode_reply(line: &str) -> Result<Reply, BackendError> {
    serde_json::from_str(line.trim_end()).map_err(|e| BackendError::Malformed(format!("{e}: {line}")))
}

/// Converts a `topics` reply into a [`FitResponse`] for `request`.
pub fn reply_to_response(reply: Reply, request: &FitRequest, backend: &str) -> Result<FitResponse, BackendError> {
    match reply {
        Reply::Topics {
            slice_index,
            fit_time_ms,
            topics,
            doc_topics,
        } => {
            if fit_time_ms.is_nan() || fit_time_ms < 0.0 {
                return Err(BackendError::Malformed(format!("negative fit_time_ms {fit_time_ms}")));
            }
            let topics = topics.into_iter().map(|t| Topic::new(t.id, t.words)).collect();
            Ok(FitResponse {
                topics: TopicSet::new(backend, slice_index, request.top_n, topics),
                doc_topics: doc_topics.map(|v| {
                    v.into_iter()
                        .map(|(doc_id, topic_id, score)| DocTopic { doc_id, topic_id, score })
                        .collect()
                }),
                fit_time_ms: 0.0,
                reported_fit_time_ms: Some(fit_time_ms),
            })
        }
        Reply::Error { message } => Err(BackendError::Remote(message)),
        Reply::Ready { .. } => Err(BackendError::Malformed("unexpected `ready` in reply to fit".into())),
    }
}

/// Builds the `topics` reply describing `response`; used by test doubles and
/// in-process servers.
pub fn response_to_reply(response: &FitResponse) -> Reply {
    Reply::Topics {
        slice_index: response.topics.slice_index,
        fit_time_ms: response.reported_fit_time_ms.unwrap_or(response.fit_time_ms),
        topics: response
            .topics
            .topics
            .iter()
            .map(|t| WireTopic {
                id: t.id,
                words: t.words.clone(),
            })
            .collect(),
        doc_topics: response.doc_topics.as_ref().map(|v| {
            v.iter()
                .map(|d| (d.doc_id.clone(), d.topic_id, d.score))
                .collect()
        }),
    }
}

fn send<W: Write>(writer: &mut W, reply: &Reply) -> Result<(), BackendError> {
    writeln!(writer, "{}", encode(reply))?;
    writer.flush()?;
    Ok(())
}

/// Backend side of the protocol: answers requests read from `reader` until
/// `shutdown` or end of input. The backend is built by `make` from the
/// `hello` parameters; a refusal is sent back as an error and ends the
/// session. Malformed lines and failed fits are answered with an error and
/// the session continues.
pub fn serve<R, W, F>(reader: R, mut writer: W, make: F) -> Result<(), BackendError>
where
    R: BufRead,
    W: Write,
    F: FnOnce(&BTreeMap<String, String>) -> Result<Box<dyn Backend>, String>,
{
    let mut make = Some(make);
    let mut backend: Option<Box<dyn Backend>> = None;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request = match decode_request(&line) {
            Ok(r) => r,
            Err(e) => {
                send(&mut writer, &Reply::Error { message: e.to_string() })?;
                continue;
            }
        };
        match request {
            Request::Hello { protocol, params } => {
                if protocol != PROTOCOL_VERSION {
                    let message = format!("unsupported protocol version {protocol}");
                    send(&mut writer, &Reply::Error { message })?;
                    return Ok(());
                }
                let Some(make) = make.take() else {
                    send(&mut writer, &Reply::Error { message: "duplicate hello".into() })?;
                    continue;
                };
                match make(&params) {
                    Ok(b) => {
                        send(&mut writer, &Reply::Ready { name: b.name().to_string() })?;
                        backend = Some(b);
                    }
                    Err(message) => {
                        send(&mut writer, &Reply::Error { message })?;
                        return Ok(());
                    }
                }
            }
            Request::Fit {
                slice_index,
                slice_label,
                top_n,
                cumulative,
                docs,
                first_slice,
            } => {
                let Some(b) = backend.as_mut() else {
                    send(&mut writer, &Reply::Error { message: "fit before hello".into() })?;
                    continue;
                };
                let req = FitRequest {
                    slice_index,
                    slice_label,
                    documents: docs,
                    top_n,
                    cumulative,
                    first_slice,
                };
                let reply = match fit_slice(b.as_mut(), &req) {
                    Ok(resp) => response_to_reply(&resp),
                    Err(e) => Reply::Error { message: e.to_string() },
                };
                send(&mut writer, &reply)?;
            }
            Request::Shutdown => {
                if let Some(b) = backend.as_mut() {
                    b.shutdown()?;
                }
                return Ok(());
            }
        }
    }
    Ok(())
}
