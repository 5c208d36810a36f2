//! JSON messages exchanged on `WS /session`. See `docs/wire-protocol.md`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::session::{Background, DisplayMode, RenderingMode, SessionError};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    Hello,
    SessionInfo,
    TrialBegin,
    TimerExpiredAck,
    RatingSubmit,
    TrialAck,
    SessionComplete,
    Error,
    Telemetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub protocol_version: u32,
    #[serde(rename = "type")]
    pub kind: MessageType,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    MalformedMessage,
    UnknownType,
    VersionMismatch,
    UnexpectedMessage,
    SessionOccupied,
    OutOfOrderTrial,
    ScoreOutOfRange,
    DuplicateJudgment,
    StimulusMismatch,
    JournalWriteFailure,
    SessionHalted,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    #[serde(default)]
    pub client: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub participant_name: String,
    pub trial_count: u32,
    pub completed: u32,
    pub rating_categories: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDescriptor {
    pub trial_index: u32,
    pub reference_asset_url: String,
    pub impaired_asset_url: String,
    pub display_mode: DisplayMode,
    pub rendering_mode: RenderingMode,
    pub background: Background,
    pub viewing_time_s: f64,
    pub rating_categories: u32,
    pub model_scale: f64,
    pub point_size_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimerExpired {
    pub trial_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSubmit {
    pub trial_index: u32,
    pub score: u32,
    /// Viewing time measured by the client. The server's own measurement is
    /// used when absent.
    #[serde(default)]
    pub view_time_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialAck {
    pub trial_index: u32,
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionComplete {
    pub trial_count: u32,
}

impl WireMessage {
    pub fn new<T: Serialize>(kind: MessageType, payload: &T) -> Self {
        WireMessage {
            protocol_version: PROTOCOL_VERSION,
            kind,
            payload: serde_json::to_value(payload).expect("wire payloads serialize"),
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Self::new(
            MessageType::Error,
            &ErrorPayload {
                code,
                message: message.into(),
            },
        )
    }

    /// Canonical JSON text: keys sorted, no whitespace.
    pub fn to_text(&self) -> String {
        crate::session::canonical_json(self)
    }

    /// Parses a text frame. Every failure is turned into the error message
    /// that should be sent back.
    pub fn parse(text: &str) -> Result<WireMessage, WireMessage> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| WireMessage::error(ErrorCode::MalformedMessage, format!("invalid JSON: {e}")))?;
        let Some(obj) = value.as_object() else {
            return Err(WireMessage::error(ErrorCode::MalformedMessage, "message must be a JSON object"));
        };
        match obj.get("protocol_version").and_then(Value::as_u64) {
            Some(v) if v == PROTOCOL_VERSION as u64 => {}
            Some(v) => {
                return Err(WireMessage::error(
                    ErrorCode::VersionMismatch,
                    format!("protocol_version {v} not supported, expected {PROTOCOL_VERSION}"),
                ))
            }
            None => return Err(WireMessage::error(ErrorCode::VersionMismatch, "missing protocol_version")),
        }
        let kind = obj.get("type").cloned().unwrap_or(Value::Null);
        if serde_json::from_value::<MessageType>(kind.clone()).is_err() {
            return Err(WireMessage::error(ErrorCode::UnknownType, format!("unknown message type {kind}")));
        }
        serde_json::from_value(value).map_err(|e| WireMessage::error(ErrorCode::MalformedMessage, e.to_string()))
    }

    pub fn payload_as<T: serde::de::DeserializeOwned>(&self) -> Result<T, WireMessage> {
        serde_json::from_value(self.payload.clone()).map_err(|e| {
            WireMessage::error(ErrorCode::MalformedMessage, format!("bad {:?} payload: {e}", self.kind))
        })
    }
}

impl From<&SessionError> for ErrorCode {
    fn from(e: &SessionError) -> Self {
        match e {
            SessionError::OutOfOrderTrial { .. } => ErrorCode::OutOfOrderTrial,
            SessionError::ScoreOutOfRange { .. } => ErrorCode::ScoreOutOfRange,
            SessionError::DuplicateJudgment { .. } => ErrorCode::DuplicateJudgment,
            SessionError::StimulusMismatch { .. } => ErrorCode::StimulusMismatch,
            SessionError::JournalWriteFailure(_) => ErrorCode::JournalWriteFailure,
            SessionError::SessionHalted => ErrorCode::SessionHalted,
            _ => ErrorCode::Internal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(text: &str) -> ErrorCode {
        WireMessage::parse(text).unwrap_err().payload_as::<ErrorPayload>().unwrap().code
    }

    #[test]
    fn round_trip() {
        let m = WireMessage::new(
            MessageType::RatingSubmit,
            &RatingSubmit {
                trial_index: 3,
                score: 4,
                view_time_ms: Some(1200),
            },
        );
        let text = m.to_text();
        assert_eq!(
            text,
            r#"{"payload":{"score":4,"trial_index":3,"view_time_ms":1200},"protocol_version":1,"type":"rating_submit"}"#
        );
        assert_eq!(WireMessage::parse(&text).unwrap(), m);
    }

    #[test]
    fn rejects_bad_frames() {
        assert_eq!(code("nope"), ErrorCode::MalformedMessage);
        assert_eq!(code("[1]"), ErrorCode::MalformedMessage);
        assert_eq!(code(r#"{"protocol_version":2,"type":"hello"}"#), ErrorCode::VersionMismatch);
        assert_eq!(code(r#"{"type":"hello"}"#), ErrorCode::VersionMismatch);
        assert_eq!(code(r#"{"protocol_version":1,"type":"dance"}"#), ErrorCode::UnknownType);
        assert!(WireMessage::parse(r#"{"protocol_version":1,"type":"hello"}"#).is_ok());
    }
}
