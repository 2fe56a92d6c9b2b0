//! Line-delimited JSON messages for the public discussion.
//!
//! One message per line: a flat JSON object terminated by `\n`. Integers and
//! 0/1 arrays only, never floats, so a transcript is bit-exact. Decoding is
//! strict: unknown types or fields, non-binary bits and unordered slot lists
//! are all rejected with their own error kind.

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    BasisAnnounce {
        session_id: u64,
        first_slot: u64,
        bases: Vec<bool>,
    },
    SiftResult {
        session_id: u64,
        kept_slots: Vec<u64>,
    },
    SampleRequest {
        session_id: u64,
        slots: Vec<u64>,
    },
    SampleReveal {
        session_id: u64,
        bits: Vec<bool>,
    },
    Abort {
        session_id: u64,
        reason: String,
    },
}

impl Message {
    pub fn session_id(&self) -> u64 {
        match self {
            Message::BasisAnnounce { session_id, .. }
            | Message::SiftResult { session_id, .. }
            | Message::SampleRequest { session_id, .. }
            | Message::SampleReveal { session_id, .. }
            | Message::Abort { session_id, .. } => *session_id,
        }
    }

    /// The `type` tag used on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            Message::BasisAnnounce { .. } => "basis_announce",
            Message::SiftResult { .. } => "sift_result",
            Message::SampleRequest { .. } => "sample_request",
            Message::SampleReveal { .. } => "sample_reveal",
            Message::Abort { .. } => "abort",
        }
    }

    /// Checks the invariants a receiver would enforce.
    pub fn validate(&self) -> Result<(), WireError> {
        match self {
            Message::BasisAnnounce {
                first_slot, bases, ..
            } => {
                let len = u64::try_from(bases.len()).unwrap_or(u64::MAX);
                if first_slot.checked_add(len).is_none() {
                    return Err(WireError::LengthMismatch {
                        field: "bases",
                        detail: format!("{len} bases from slot {first_slot} overflow the slot range"),
                    });
                }
                Ok(())
            }
            Message::SiftResult { kept_slots, .. } => strictly_increasing("kept_slots", kept_slots),
            Message::SampleRequest { slots, .. } => strictly_increasing("slots", slots),
            Message::SampleReveal { .. } | Message::Abort { .. } => Ok(()),
        }
    }
}

fn strictly_increasing(field: &'static str, slots: &[u64]) -> Result<(), WireError> {
    if slots.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(WireError::NonMonotoneSlots { field })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated message: {0}")]
    Truncated(&'static str),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("message is not a JSON object")]
    NotAnObject,
    #[error("missing field \"{0}\"")]
    MissingField(&'static str),
    #[error("unknown message type \"{0}\"")]
    UnknownType(String),
    #[error("unknown field \"{0}\"")]
    UnknownField(String),
    #[error("invalid field \"{field}\": {reason}")]
    InvalidField { field: &'static str, reason: &'static str },
    #[error("non-monotone slot list in \"{field}\"")]
    NonMonotoneSlots { field: &'static str },
    #[error("length mismatch in \"{field}\": {detail}")]
    LengthMismatch { field: &'static str, detail: String },
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Repr<'a> {
    BasisAnnounce {
        session_id: u64,
        first_slot: u64,
        bases: Vec<u8>,
    },
    SiftResult {
        session_id: u64,
        kept_slots: &'a [u64],
    },
    SampleRequest {
        session_id: u64,
        slots: &'a [u64],
    },
    SampleReveal {
        session_id: u64,
        bits: Vec<u8>,
    },
    Abort {
        session_id: u64,
        reason: &'a str,
    },
}

fn to_bits(xs: &[bool]) -> Vec<u8> {
    xs.iter().map(|&b| u8::from(b)).collect()
}

/// Serializes a message as one LF-terminated JSON line.
pub fn encode_message(m: &Message) -> Vec<u8> {
    let repr = match m {
        Message::BasisAnnounce {
            session_id,
            first_slot,
            bases,
        } => Repr::BasisAnnounce {
            session_id: *session_id,
            first_slot: *first_slot,
            bases: to_bits(bases),
        },
        Message::SiftResult {
            session_id,
            kept_slots,
        } => Repr::SiftResult {
            session_id: *session_id,
            kept_slots,
        },
        Message::SampleRequest { session_id, slots } => Repr::SampleRequest {
            session_id: *session_id,
            slots,
        },
        Message::SampleReveal { session_id, bits } => Repr::SampleReveal {
            session_id: *session_id,
            bits: to_bits(bits),
        },
        Message::Abort { session_id, reason } => Repr::Abort {
            session_id: *session_id,
            reason,
        },
    };
    let mut out = serde_json::to_vec(&repr).expect("message serialization is infallible");
    out.push(b'\n');
    out
}

/// Parses exactly one LF-terminated line into a message.
pub fn decode_message(bytes: &[u8]) -> Result<Message, WireError> {
    let body = match bytes.split_last() {
        None => return Err(WireError::Truncated("empty input")),
        Some((b'\n', body)) => body,
        Some(_) => return Err(WireError::Truncated("missing line terminator")),
    };
    if body.contains(&b'\n') {
        return Err(WireError::Framing("more than one line".into()));
    }
    let text = std::str::from_utf8(body).map_err(|_| WireError::Framing("invalid UTF-8".into()))?;
    let value: Value = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            WireError::Truncated("incomplete JSON object")
        } else {
            WireError::Syntax(e.to_string())
        }
    })?;
    let Value::Object(mut obj) = value else {
        return Err(WireError::NotAnObject);
    };

    let kind = match obj.remove("type") {
        Some(Value::String(s)) => s,
        Some(_) => {
            return Err(WireError::InvalidField {
                field: "type",
                reason: "expected a string",
            })
        }
        None => return Err(WireError::MissingField("type")),
    };
    let allowed: &[&str] = match kind.as_str() {
        "basis_announce" => &["session_id", "first_slot", "bases"],
        "sift_result" => &["session_id", "kept_slots"],
        "sample_request" => &["session_id", "slots"],
        "sample_reveal" => &["session_id", "bits"],
        "abort" => &["session_id", "reason"],
        _ => return Err(WireError::UnknownType(kind)),
    };
    if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(WireError::UnknownField(extra.clone()));
    }

    let session_id = take_u64(&mut obj, "session_id")?;
    let msg = match kind.as_str() {
        "basis_announce" => Message::BasisAnnounce {
            session_id,
            first_slot: take_u64(&mut obj, "first_slot")?,
            bases: take_bits(&mut obj, "bases")?,
        },
        "sift_result" => Message::SiftResult {
            session_id,
            kept_slots: take_slots(&mut obj, "kept_slots")?,
        },
        "sample_request" => Message::SampleRequest {
            session_id,
            slots: take_slots(&mut obj, "slots")?,
        },
        "sample_reveal" => Message::SampleReveal {
            session_id,
            bits: take_bits(&mut obj, "bits")?,
        },
        _ => Message::Abort {
            session_id,
            reason: match obj.remove("reason") {
                Some(Value::String(s)) => s,
                Some(_) => {
                    return Err(WireError::InvalidField {
                        field: "reason",
                        reason: "expected a string",
                    })
                }
                None => return Err(WireError::MissingField("reason")),
            },
        },
    };
    msg.validate()?;
    Ok(msg)
}

fn take(obj: &mut Map<String, Value>, field: &'static str) -> Result<Value, WireError> {
    obj.remove(field).ok_or(WireError::MissingField(field))
}

fn take_u64(obj: &mut Map<String, Value>, field: &'static str) -> Result<u64, WireError> {
    take(obj, field)?.as_u64().ok_or(WireError::InvalidField {
        field,
        reason: "expected an unsigned integer",
    })
}

fn take_array(obj: &mut Map<String, Value>, field: &'static str) -> Result<Vec<Value>, WireError> {
    match take(obj, field)? {
        Value::Array(items) => Ok(items),
        _ => Err(WireError::InvalidField {
            field,
            reason: "expected an array",
        }),
    }
}

fn take_bits(obj: &mut Map<String, Value>, field: &'static str) -> Result<Vec<bool>, WireError> {
    take_array(obj, field)?
        .iter()
        .map(|v| match v.as_u64() {
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            _ => Err(WireError::InvalidField {
                field,
                reason: "entries must be 0 or 1",
            }),
        })
        .collect()
}

fn take_slots(obj: &mut Map<String, Value>, field: &'static str) -> Result<Vec<u64>, WireError> {
    take_array(obj, field)?
        .iter()
        .map(|v| {
            v.as_u64().ok_or(WireError::InvalidField {
                field,
                reason: "entries must be unsigned integers",
            })
        })
        .collect()
}
