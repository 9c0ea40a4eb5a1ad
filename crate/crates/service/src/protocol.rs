//! Wire messages. Every message is a JSON text frame tagged by `type`.

use narrowspace::env::RewardComponents;
use serde::{Deserialize, Serialize};

/// Messages accepted from clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Action { v: f64, w: f64 },
    Reset,
    Record { on: bool },
    RecordStart,
    RecordStop,
}

/// One environment step as seen by clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub episode: u64,
    pub step: usize,
    pub pose: [f64; 3],
    pub action: [f64; 2],
    /// Readings of the selected rays (same order as the safety-region table).
    pub scans: Vec<f64>,
    /// Observation part of the policy input (selected readings plus extras).
    pub v_obs: Vec<f64>,
    /// Whole lidar sweep, for drawing.
    pub raw_scan: Vec<f64>,
    pub reward: f64,
    pub reward_components: RewardComponents,
    pub done: bool,
    /// `running`, `collision`, `open_space`, `timeout`, or `reset` for the
    /// frame emitted right after a reset.
    pub done_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateFrame),
    /// Acknowledges a recording toggle.
    Record {
        on: bool,
        records: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        exported: Option<String>,
    },
    Error { message: String },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, String> {
    let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    if let ClientMessage::Action { v, w } = msg {
        if !v.is_finite() || !w.is_finite() {
            return Err("action values must be finite".into());
        }
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_messages() {
        assert_eq!(
            parse_client_message(r#"{"type":"action","v":0.6,"w":-0.1}"#).unwrap(),
            ClientMessage::Action { v: 0.6, w: -0.1 }
        );
        assert_eq!(parse_client_message(r#"{"type":"reset"}"#).unwrap(), ClientMessage::Reset);
        assert_eq!(
            parse_client_message(r#"{"type":"record","on":true}"#).unwrap(),
            ClientMessage::Record { on: true }
        );
        assert_eq!(parse_client_message(r#"{"type":"record_stop"}"#).unwrap(), ClientMessage::RecordStop);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_client_message("not json").is_err());
        assert!(parse_client_message(r#"{"type":"fly"}"#).is_err());
        assert!(parse_client_message(r#"{"type":"action","v":0.6}"#).is_err());
    }

    #[test]
    fn error_frame_shape() {
        let v: serde_json::Value = serde_json::from_str(&ServerMessage::error("bad").to_json()).unwrap();
        assert_eq!(v["type"], "error");
        assert_eq!(v["message"], "bad");
    }
}
