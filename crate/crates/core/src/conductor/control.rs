//! Operator commands and their two wire forms.
//!
//! # Control protocol v1
//!
//! Line-delimited JSON over TCP, one object per line, UTF-8. On connect the
//! server sends a banner:
//!
//! ```text
//! {"protocol":"improv-control","version":1}
//! ```
//!
//! Requests carry an optional client `id` echoed in the reply:
//!
//! | request                                                      | reply                                |
//! |--------------------------------------------------------------|--------------------------------------|
//! | `{"id":1,"op":"ping"}`                                       | `{"id":1,"ok":true,"op":"pong"}`     |
//! | `{"op":"state"}`                                             | `{"ok":true,"op":"state","state":{..}}` (a meter snapshot) |
//! | `{"op":"subscribe"}`                                         | ack; meter events follow at the meter rate |
//! | `{"op":"set_weights","agent":"muse","weights":[1,0,0,0]}`    | ack with the applied `value`         |
//! | `{"op":"set_enable","agent":"muse","enabled":false}`         | ack                                  |
//! | `{"op":"set_density","agent":"gen","value":12}`              | ack                                  |
//! | `{"op":"set_continuity","agent":"nav","value":0.5}`          | ack                                  |
//! | `{"op":"trigger_scene","index":2}`                           | ack                                  |
//!
//! An ack is `{"id":..,"ok":true,"op":..,"agent":..,"value":..,"clamped":bool,"t":secs}`;
//! `clamped` flags a value forced into range. Failures are
//! `{"id":..,"ok":false,"error":{"code":..,"message":..}}` with codes
//! `bad_request`, `unknown_agent`, `unknown_scene`, `invalid_value`,
//! `not_applicable`. Pushed meter events are
//! `{"event":"meters","snapshot":{..}}`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::netio::{OscArg, OscMessage, ADDRESS_PREFIX};

pub const PROTOCOL_NAME: &str = "improv-control";
pub const PROTOCOL_VERSION: u32 = 1;

pub fn banner() -> String {
    json!({"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION}).to_string()
}

/// A state change requested by the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    SetWeights { agent: String, weights: [f64; 4] },
    SetEnable { agent: String, enabled: bool },
    TriggerScene { index: i64 },
    SetDensity { agent: String, value: f64 },
    SetContinuity { agent: String, value: f64 },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SetWeights { .. } => "set_weights",
            Command::SetEnable { .. } => "set_enable",
            Command::TriggerScene { .. } => "trigger_scene",
            Command::SetDensity { .. } => "set_density",
            Command::SetContinuity { .. } => "set_continuity",
        }
    }

    pub fn agent(&self) -> Option<&str> {
        match self {
            Command::SetWeights { agent, .. }
            | Command::SetEnable { agent, .. }
            | Command::SetDensity { agent, .. }
            | Command::SetContinuity { agent, .. } => Some(agent),
            Command::TriggerScene { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("unknown scene {index} (session has {count})")]
    UnknownScene { index: i64, count: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("{command} does not apply to {kind} agent {agent:?}")]
    NotApplicable {
        command: &'static str,
        agent: String,
        kind: &'static str,
    },
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl ControlError {
    pub fn code(&self) -> &'static str {
        match self {
            ControlError::UnknownAgent(_) => "unknown_agent",
            ControlError::UnknownScene { .. } => "unknown_scene",
            ControlError::InvalidValue(_) => "invalid_value",
            ControlError::NotApplicable { .. } => "not_applicable",
            ControlError::BadRequest(_) => "bad_request",
        }
    }
}

/// The applied result of a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    /// The value now in effect (a number, bool, 4-array or scene index).
    pub value: Value,
    pub clamped: bool,
    /// Session time the command took effect.
    pub t: f64,
}

/// A parsed protocol line.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Ping,
    State,
    Subscribe,
    Command(Command),
}

/// Parses one request line into its client id and request.
pub fn parse_request(line: &str) -> (Option<Value>, Result<Request, ControlError>) {
    let v: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return (None, Err(ControlError::BadRequest(e.to_string()))),
    };
    let id = v.get("id").cloned();
    let req = match v.get("op").and_then(Value::as_str) {
        None => Err(ControlError::BadRequest("missing \"op\"".into())),
        Some("ping") => Ok(Request::Ping),
        Some("state") => Ok(Request::State),
        Some("subscribe") => Ok(Request::Subscribe),
        Some(_) => {
            let mut body = v.clone();
            if let Some(o) = body.as_object_mut() {
                o.remove("id");
            }
            serde_json::from_value::<Command>(body)
                .map(Request::Command)
                .map_err(|e| ControlError::BadRequest(e.to_string()))
        }
    };
    (id, req)
}

fn with_id(mut v: Value, id: &Option<Value>) -> String {
    if let (Some(id), Some(o)) = (id, v.as_object_mut()) {
        o.insert("id".into(), id.clone());
    }
    v.to_string()
}

pub fn ack_line(id: &Option<Value>, ack: &Ack) -> String {
    let mut v = serde_json::to_value(ack).expect("ack serializes");
    v.as_object_mut().unwrap().insert("ok".into(), Value::Bool(true));
    with_id(v, id)
}

pub fn error_line(id: &Option<Value>, e: &ControlError) -> String {
    with_id(json!({"ok": false, "error": {"code": e.code(), "message": e.to_string()}}), id)
}

pub fn pong_line(id: &Option<Value>) -> String {
    with_id(json!({"ok": true, "op": "pong"}), id)
}

pub fn state_line(id: &Option<Value>, state: &impl Serialize) -> String {
    with_id(json!({"ok": true, "op": "state", "state": state}), id)
}

pub fn subscribed_line(id: &Option<Value>) -> String {
    with_id(json!({"ok": true, "op": "subscribe"}), id)
}

pub fn meters_event_line(snapshot: &impl Serialize) -> String {
    json!({"event": "meters", "snapshot": snapshot}).to_string()
}

/// Maps an OSC control message to a command. Returns `None` for addresses
/// outside the control namespace.
pub fn command_from_osc(msg: &OscMessage) -> Option<Result<Command, ControlError>> {
    let rest = msg.address.strip_prefix(ADDRESS_PREFIX)?;
    let bad = |m: &str| Some(Err(ControlError::BadRequest(format!("{}: {m}", msg.address))));
    let num = |a: &OscArg| a.as_f32().map(f64::from).or_else(|| a.as_i32().map(f64::from));
    if rest == "/scene" {
        return match msg.args.as_slice() {
            [a] => match a.as_i32().or_else(|| a.as_f32().map(|f| f as i32)) {
                Some(i) => Some(Ok(Command::TriggerScene { index: i64::from(i) })),
                None => bad("expected one int"),
            },
            _ => bad("expected one int"),
        };
    }
    let tail = rest.strip_prefix("/agent/")?;
    let (agent, what) = tail.split_once('/')?;
    let agent = agent.to_string();
    let one = || match msg.args.as_slice() {
        [a] => num(a),
        _ => None,
    };
    Some(match what {
        "weights" => {
            let w: Option<Vec<f64>> = msg.args.iter().map(num).collect();
            match w.as_deref() {
                Some(&[a, b, c, d]) => Ok(Command::SetWeights { agent, weights: [a, b, c, d] }),
                _ => return bad("expected four floats"),
            }
        }
        "enable" => match one() {
            Some(v) => Ok(Command::SetEnable { agent, enabled: v != 0.0 }),
            None => return bad("expected one int"),
        },
        "density" => match one() {
            Some(value) => Ok(Command::SetDensity { agent, value }),
            None => return bad("expected one float"),
        },
        "continuity" => match one() {
            Some(value) => Ok(Command::SetContinuity { agent, value }),
            None => return bad("expected one float"),
        },
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banner_and_ping() {
        let b: Value = serde_json::from_str(&banner()).unwrap();
        assert_eq!(b["version"], 1);
        let (id, r) = parse_request(r#"{"id":7,"op":"ping"}"#);
        assert_eq!(r.unwrap(), Request::Ping);
        assert_eq!(pong_line(&id), r#"{"id":7,"ok":true,"op":"pong"}"#);
    }

    #[test]
    fn commands_parse() {
        let (_, r) = parse_request(r#"{"op":"set_weights","agent":"m","weights":[1,0,0,0]}"#);
        assert_eq!(r.unwrap(), Request::Command(Command::SetWeights { agent: "m".into(), weights: [1.0, 0.0, 0.0, 0.0] }));
        let (_, r) = parse_request(r#"{"id":"x","op":"trigger_scene","index":99}"#);
        assert_eq!(r.unwrap(), Request::Command(Command::TriggerScene { index: 99 }));
        for bad in ["nope", r#"{"op":"fly"}"#, r#"{"op":"set_density","agent":"g"}"#, "{}"] {
            let (_, r) = parse_request(bad);
            assert_eq!(r.unwrap_err().code(), "bad_request", "{bad}");
        }
    }

    #[test]
    fn error_and_ack_lines() {
        let e = ControlError::UnknownScene { index: 99, count: 3 };
        let v: Value = serde_json::from_str(&error_line(&Some(json!(2)), &e)).unwrap();
        assert_eq!(v["error"]["code"], "unknown_scene");
        assert_eq!(v["id"], 2);
        let ack = Ack { op: "set_density".into(), agent: Some("g".into()), value: json!(0.0), clamped: true, t: 1.5 };
        let v: Value = serde_json::from_str(&ack_line(&None, &ack)).unwrap();
        assert_eq!((v["ok"].clone(), v["clamped"].clone(), v["value"].clone()), (json!(true), json!(true), json!(0.0)));
    }

    #[test]
    fn osc_addresses_map_to_commands() {
        let m = |a: &str, args: Vec<OscArg>| command_from_osc(&OscMessage::new(a, args));
        let f = OscArg::Float;
        assert_eq!(
            m("/revival/agent/muse/weights", vec![f(1.0), f(0.0), f(0.0), f(0.0)]).unwrap().unwrap(),
            Command::SetWeights { agent: "muse".into(), weights: [1.0, 0.0, 0.0, 0.0] }
        );
        assert_eq!(
            m("/revival/agent/g/enable", vec![OscArg::Int(0)]).unwrap().unwrap(),
            Command::SetEnable { agent: "g".into(), enabled: false }
        );
        assert_eq!(m("/revival/agent/g/density", vec![f(-5.0)]).unwrap().unwrap(), Command::SetDensity { agent: "g".into(), value: -5.0 });
        assert_eq!(m("/revival/agent/n/continuity", vec![f(0.25)]).unwrap().unwrap(), Command::SetContinuity { agent: "n".into(), value: 0.25 });
        assert_eq!(m("/revival/scene", vec![OscArg::Int(2)]).unwrap().unwrap(), Command::TriggerScene { index: 2 });
        assert!(m("/revival/agent/g/weights", vec![f(1.0)]).unwrap().is_err());
        assert!(m("/revival/features/x", vec![]).is_none());
        assert!(m("/other", vec![]).is_none());
    }
}
