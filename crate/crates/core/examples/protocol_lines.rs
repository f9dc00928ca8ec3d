//! Encodes, decodes and rejects wire messages.

use chanalloc::protocol::{decode, encode, ChannelLevel, DeviceKind, Message};
use chanalloc::spectrum::ChannelId;

fn main() {
    let messages = [
        Message::hello("rssi-1", DeviceKind::RssiSensor, 1.0),
        Message::ChannelReport {
            device_id: "rssi-1".into(),
            seq: 1,
            slot: 0,
            channels: vec![
                ChannelLevel {
                    channel: ChannelId::new(1).unwrap(),
                    level_dbm: -91.123456789,
                },
                ChannelLevel {
                    channel: ChannelId::new(6).unwrap(),
                    level_dbm: -48.5,
                },
            ],
        },
        Message::AssignChannel {
            ap_id: "ap-1".into(),
            channel: ChannelId::new(11).unwrap(),
            round: 0,
        },
        Message::Ack { ref_seq: 1 },
    ];
    for m in &messages {
        let line = encode(m).unwrap();
        print!("{}", String::from_utf8_lossy(&line));
        assert!(decode(&line).is_ok());
    }

    let bad: [&[u8]; 3] = [
        b"{\"type\":\"ack\"",
        b"{\"type\":\"assign_channel\",\"ap_id\":\"ap-1\",\"channel\":14,\"round\":0}",
        b"{\"type\":\"channel_report\",\"device_id\":\"x\",\"seq\":1,\"slot\":0,\"channels\":[{\"channel\":6,\"level_dbm\":-50},{\"channel\":6,\"level_dbm\":-51}]}",
    ];
    for line in bad {
        let err = decode(line).unwrap_err();
        println!("rejected: {err}");
        print!(
            "  reply: {}",
            String::from_utf8_lossy(&encode(&err.to_message()).unwrap())
        );
    }
}
