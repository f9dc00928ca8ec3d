#![allow(dead_code)]

use std::collections::BTreeSet;

use chanalloc::protocol::{ChannelLevel, DeviceKind, ErrorCode, Message, FORMAT_VERSION};
use chanalloc::spectrum::ChannelId;
use proptest::prelude::*;
use rand::Rng;

pub fn ch(n: u8) -> ChannelId {
    ChannelId::new(n).unwrap()
}

/// Levels with at most six fractional digits, the precision carried on the wire.
pub fn wire_level() -> impl Strategy<Value = f64> {
    (-150_000_000i64..=0).prop_map(|micro| micro as f64 / 1e6)
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,11}"
}

fn channel_levels() -> impl Strategy<Value = Vec<ChannelLevel>> {
    prop::collection::btree_set(1u8..=13, 0..=13).prop_flat_map(|set: BTreeSet<u8>| {
        let chans: Vec<u8> = set.into_iter().collect();
        let n = chans.len();
        prop::collection::vec(wire_level(), n).prop_map(move |levels| {
            chans
                .iter()
                .zip(levels)
                .map(|(&c, level_dbm)| ChannelLevel {
                    channel: ch(c),
                    level_dbm,
                })
                .collect()
        })
    })
}

pub fn any_message() -> impl Strategy<Value = Message> {
    let kind = prop_oneof![
        Just(DeviceKind::RssiSensor),
        Just(DeviceKind::BinarySensor),
        Just(DeviceKind::WifiCard),
        Just(DeviceKind::AccessPoint),
    ];
    let code = prop_oneof![
        Just(ErrorCode::Parse),
        Just(ErrorCode::Stale),
        Just(ErrorCode::UnknownDevice),
        Just(ErrorCode::Version),
        Just(ErrorCode::Invalid),
    ];
    prop_oneof![
        (ident(), kind, 0u32..=10_000_000).prop_map(|(device_id, device_kind, w)| Message::Hello {
            device_id,
            device_kind,
            weight: f64::from(w) / 1e6,
            format_version: FORMAT_VERSION,
        }),
        (ident(), any::<u64>(), any::<u64>(), channel_levels()).prop_map(
            |(device_id, seq, slot, channels)| {
                Message::ChannelReport {
                    device_id,
                    seq,
                    slot,
                    channels,
                }
            }
        ),
        (ident(), any::<u64>(), any::<u64>(), channel_levels()).prop_map(
            |(device_id, seq, slot, entries)| {
                Message::WifiCardReport {
                    device_id,
                    seq,
                    slot,
                    entries,
                }
            }
        ),
        (ident(), 1u8..=13, any::<u64>()).prop_map(|(ap_id, c, round)| Message::AssignChannel {
            ap_id,
            channel: ch(c),
            round,
        }),
        any::<u64>().prop_map(|ref_seq| Message::Ack { ref_seq }),
        (code, "[ -~]{0,40}").prop_map(|(code, detail)| Message::Error { code, detail }),
    ]
}

/// Corrupts an encoded line (without its newline) so that it can no longer
/// be a valid message.
pub fn mutate<R: Rng>(line: &[u8], rng: &mut R) -> Vec<u8> {
    let mut out = line.to_vec();
    match rng.random_range(0..5) {
        0 => {
            // any strict prefix of a JSON object is unterminated
            let cut = rng.random_range(0..out.len());
            out.truncate(cut);
        }
        1 => {
            let at = rng.random_range(0..=out.len());
            out.insert(at, 0xff);
        }
        2 => {
            out.pop();
        }
        3 => {
            let at = rng.random_range(1..out.len());
            out.insert(at, b'\n');
        }
        _ => {
            let text = String::from_utf8(out).unwrap();
            let start = text.find("\"type\":\"").unwrap() + 8;
            let mut s = text.clone();
            s.insert_str(start, "x_");
            out = s.into_bytes();
        }
    }
    out
}
