//! Line-delimited JSON messages exchanged between devices and the
//! controller.
//!
//! Every message is one JSON object with a `type` discriminator, followed
//! by a single `\n`. Levels and weights are written with at most six
//! fractional digits. Unknown fields are ignored on decode; missing
//! required fields or violated invariants are parse errors.
//!
//! ```text
//! {"type":"hello","device_id":"rssi-1","device_kind":"rssi_sensor","weight":1.0,"format_version":1}
//! {"type":"channel_report","device_id":"rssi-1","seq":1,"slot":0,"channels":[{"channel":6,"level_dbm":-80.5}]}
//! {"type":"wifi_card_report","device_id":"card-1","seq":1,"slot":0,"entries":[{"channel":6,"level_dbm":-55.0}]}
//! {"type":"assign_channel","ap_id":"ap-1","channel":1,"round":0}
//! {"type":"ack","ref_seq":7}
//! {"type":"error","code":"parse","detail":"..."}
//! ```

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::estimation::{SensorWeight, WifiScanEntry};
use crate::sensors::SensorReport;
use crate::spectrum::{ChannelId, LevelDbm};

pub const FORMAT_VERSION: u32 = 1;

/// Longest accepted line, newline included.
pub const MAX_LINE_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    RssiSensor,
    BinarySensor,
    WifiCard,
    AccessPoint,
}

impl DeviceKind {
    pub fn is_sensor(self) -> bool {
        !matches!(self, DeviceKind::AccessPoint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Parse,
    Stale,
    UnknownDevice,
    Version,
    Invalid,
}

fn six_digits<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*x))
}

/// Rounds to six fractional digits, the precision carried on the wire.
pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelLevel {
    pub channel: ChannelId,
    #[serde(serialize_with = "six_digits")]
    pub level_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        device_id: String,
        device_kind: DeviceKind,
        #[serde(serialize_with = "six_digits")]
        weight: f64,
        format_version: u32,
    },
    ChannelReport {
        device_id: String,
        seq: u64,
        slot: u64,
        channels: Vec<ChannelLevel>,
    },
    WifiCardReport {
        device_id: String,
        seq: u64,
        slot: u64,
        entries: Vec<ChannelLevel>,
    },
    AssignChannel {
        ap_id: String,
        channel: ChannelId,
        round: u64,
    },
    Ack {
        ref_seq: u64,
    },
    Error {
        code: ErrorCode,
        detail: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid message: {0}")]
    Invalid(String),
}

impl ProtocolError {
    /// The `error` message sent back to a peer for this failure.
    pub fn to_message(&self) -> Message {
        let (ProtocolError::Parse(detail) | ProtocolError::Invalid(detail)) = self;
        Message::Error {
            code: ErrorCode::Parse,
            detail: detail.clone(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::Invalid(msg.into())
}

fn check_levels(levels: &[ChannelLevel]) -> Result<(), ProtocolError> {
    if let Some(bad) = levels.iter().find(|c| !c.level_dbm.is_finite()) {
        return Err(invalid(format!(
            "non-finite level on channel {}",
            bad.channel
        )));
    }
    Ok(())
}

impl Message {
    pub fn hello(device_id: impl Into<String>, device_kind: DeviceKind, weight: f64) -> Self {
        Message::Hello {
            device_id: device_id.into(),
            device_kind,
            weight,
            format_version: FORMAT_VERSION,
        }
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Message::Error {
            code,
            detail: detail.into(),
        }
    }

    /// Checks the schema invariants that the type system does not.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            Message::Hello {
                device_id, weight, ..
            } => {
                if device_id.is_empty() {
                    return Err(invalid("empty device_id"));
                }
                if !(weight.is_finite() && *weight >= 0.0) {
                    return Err(invalid("weight must be finite and non-negative"));
                }
            }
            Message::ChannelReport {
                device_id,
                channels,
                ..
            } => {
                if device_id.is_empty() {
                    return Err(invalid("empty device_id"));
                }
                if channels.windows(2).any(|w| w[0].channel >= w[1].channel) {
                    return Err(invalid(
                        "channels must be strictly ascending without duplicates",
                    ));
                }
                check_levels(channels)?;
            }
            Message::WifiCardReport {
                device_id, entries, ..
            } => {
                if device_id.is_empty() {
                    return Err(invalid("empty device_id"));
                }
                check_levels(entries)?;
            }
            Message::AssignChannel { ap_id, .. } => {
                if ap_id.is_empty() {
                    return Err(invalid("empty ap_id"));
                }
            }
            Message::Ack { .. } | Message::Error { .. } => {}
        }
        Ok(())
    }

    /// Device id and sequence number of a report.
    pub fn report_key(&self) -> Option<(&str, u64)> {
        match self {
            Message::ChannelReport { device_id, seq, .. }
            | Message::WifiCardReport { device_id, seq, .. } => Some((device_id, *seq)),
            _ => None,
        }
    }
}

/// One framed line, newline included.
pub fn encode(msg: &Message) -> Result<Vec<u8>, ProtocolError> {
    msg.validate()?;
    let mut out = serde_json::to_vec(msg).map_err(|e| invalid(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Parses one line. A single trailing `\n` (or `\r\n`) is accepted.
pub fn decode(line: &[u8]) -> Result<Message, ProtocolError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    if line.contains(&b'\n') {
        return Err(ProtocolError::Parse("embedded newline".into()));
    }
    let msg: Message =
        serde_json::from_slice(line).map_err(|e| ProtocolError::Parse(e.to_string()))?;
    msg.validate()
        .map_err(|e| ProtocolError::Parse(e.to_string()))?;
    Ok(msg)
}

/// Writes one framed message and flushes.
pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    let bytes = encode(msg).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    w.write_all(&bytes)?;
    w.flush()
}

/// Reads the next line. `Ok(None)` at end of stream; the inner result
/// carries decode failures so a caller can answer and keep reading.
pub fn read_message<R: BufRead>(r: &mut R) -> io::Result<Option<Result<Message, ProtocolError>>> {
    let mut buf = Vec::new();
    let n = (&mut *r)
        .take(MAX_LINE_BYTES as u64)
        .read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') && n == MAX_LINE_BYTES {
        // drain the rest of the oversized line
        let mut rest = Vec::new();
        r.read_until(b'\n', &mut rest)?;
        return Ok(Some(Err(ProtocolError::Parse("line too long".into()))));
    }
    Ok(Some(decode(&buf)))
}

impl From<&SensorReport> for Message {
    fn from(report: &SensorReport) -> Message {
        match report {
            SensorReport::Channels(r) => Message::ChannelReport {
                device_id: r.device_id.clone(),
                seq: r.seq,
                slot: r.slot,
                channels: r
                    .levels
                    .iter()
                    .map(|&(channel, l)| ChannelLevel {
                        channel,
                        level_dbm: l.dbm(),
                    })
                    .collect(),
            },
            SensorReport::Card(r) => Message::WifiCardReport {
                device_id: r.device_id.clone(),
                seq: r.seq,
                slot: r.slot,
                entries: r
                    .entries
                    .iter()
                    .map(|e| ChannelLevel {
                        channel: e.network_channel,
                        level_dbm: e.level.dbm(),
                    })
                    .collect(),
            },
        }
    }
}

/// Card entries carried by a `wifi_card_report`.
pub fn scan_entries(entries: &[ChannelLevel]) -> Vec<WifiScanEntry> {
    entries
        .iter()
        .filter_map(|c| {
            LevelDbm::new(c.level_dbm).ok().map(|level| WifiScanEntry {
                network_channel: c.channel,
                level,
            })
        })
        .collect()
}

/// Registration message for a device with the given weight.
pub fn hello_for(device_id: &str, kind: DeviceKind, weight: SensorWeight) -> Message {
    Message::hello(device_id, kind, weight.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(i: u8) -> ChannelId {
        ChannelId::new(i).unwrap()
    }

    fn text(m: &Message) -> String {
        String::from_utf8(encode(m).unwrap()).unwrap()
    }

    #[test]
    fn ack_line() {
        assert_eq!(
            text(&Message::Ack { ref_seq: 7 }),
            "{\"type\":\"ack\",\"ref_seq\":7}\n"
        );
    }

    #[test]
    fn report_line() {
        let m = Message::ChannelReport {
            device_id: "s1".into(),
            seq: 3,
            slot: 10,
            channels: vec![ChannelLevel {
                channel: ch(6),
                level_dbm: -80.5,
            }],
        };
        let t = text(&m);
        assert!(
            t.contains("\"channels\":[{\"channel\":6,\"level_dbm\":-80.5}]"),
            "{t}"
        );
        assert!(t.ends_with("}\n") && t.matches('\n').count() == 1);
        assert_eq!(decode(t.as_bytes()).unwrap(), m);
    }

    #[test]
    fn six_fraction_digits() {
        let m = Message::ChannelReport {
            device_id: "s1".into(),
            seq: 1,
            slot: 0,
            channels: vec![ChannelLevel {
                channel: ch(8),
                level_dbm: -63.010_299_956_639_81,
            }],
        };
        assert!(text(&m).contains("-63.0103,") || text(&m).contains("-63.0103}"));
    }

    #[test]
    fn decode_rejections() {
        assert!(matches!(
            decode(b"\x00\xffgarbage"),
            Err(ProtocolError::Parse(_))
        ));
        assert!(decode(b"{\"type\":\"ack\"}").is_err());
        assert!(decode(b"{\"type\":\"bogus\",\"ref_seq\":1}").is_err());
        let dup = br#"{"type":"channel_report","device_id":"a","seq":1,"slot":0,"channels":[{"channel":6,"level_dbm":-80},{"channel":6,"level_dbm":-81}]}"#;
        assert!(matches!(decode(dup), Err(ProtocolError::Parse(_))));
        let unsorted = br#"{"type":"channel_report","device_id":"a","seq":1,"slot":0,"channels":[{"channel":7,"level_dbm":-80},{"channel":6,"level_dbm":-81}]}"#;
        assert!(decode(unsorted).is_err());
        let out_of_range = br#"{"type":"assign_channel","ap_id":"a","channel":14,"round":0}"#;
        assert!(decode(out_of_range).is_err());
        assert!(
            decode(b"{\"type\":\"ack\",\"ref_seq\":1}\n{\"type\":\"ack\",\"ref_seq\":2}").is_err()
        );
    }

    #[test]
    fn hello_with_unknown_fields() {
        let line = br#"{"type":"hello","device_id":"b1","device_kind":"binary_sensor","weight":2,"format_version":1,"firmware":"x"}"#;
        assert_eq!(
            decode(line).unwrap(),
            Message::hello("b1", DeviceKind::BinarySensor, 2.0)
        );
    }

    #[test]
    fn error_message_for_parse_failures() {
        let err = decode(b"nope").unwrap_err();
        assert!(matches!(
            err.to_message(),
            Message::Error {
                code: ErrorCode::Parse,
                ..
            }
        ));
    }

    #[test]
    fn stream_framing() {
        let mut bytes = encode(&Message::Ack { ref_seq: 1 }).unwrap();
        bytes.extend_from_slice(b"junk\n");
        bytes.extend(encode(&Message::Ack { ref_seq: 2 }).unwrap());
        let mut r = io::Cursor::new(bytes);
        assert_eq!(
            read_message(&mut r).unwrap().unwrap().unwrap(),
            Message::Ack { ref_seq: 1 }
        );
        assert!(read_message(&mut r).unwrap().unwrap().is_err());
        assert_eq!(
            read_message(&mut r).unwrap().unwrap().unwrap(),
            Message::Ack { ref_seq: 2 }
        );
        assert!(read_message(&mut r).unwrap().is_none());
    }

    #[test]
    fn oversized_line_is_rejected_and_skipped() {
        let mut bytes = vec![b'x'; MAX_LINE_BYTES + 10];
        bytes.push(b'\n');
        bytes.extend(encode(&Message::Ack { ref_seq: 9 }).unwrap());
        let mut r = io::Cursor::new(bytes);
        assert!(read_message(&mut r).unwrap().unwrap().is_err());
        assert_eq!(
            read_message(&mut r).unwrap().unwrap().unwrap(),
            Message::Ack { ref_seq: 9 }
        );
    }
}
