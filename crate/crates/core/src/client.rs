//! Device side of the protocol: a simulated sensor that reports to a
//! controller in lock-step with its rounds, and a log replayer.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use thiserror::Error;

use crate::protocol::{decode, read_message, write_message, Message, ProtocolError};
use crate::scenario::Scenario;
use crate::sim::SensorDriver;
use crate::spectrum::ChannelId;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("sensor `{0}` is not part of the scenario")]
    UnknownSensor(String),
    #[error("controller closed the connection")]
    Closed,
    #[error("log line {line}: {source}")]
    Log { line: usize, source: ProtocolError },
}

/// Connects, retrying with exponential backoff.
pub fn connect_with_retry(addr: SocketAddr, attempts: u32) -> io::Result<TcpStream> {
    let mut delay = Duration::from_millis(20);
    let mut last = None;
    for _ in 0..attempts.max(1) {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) => {
                debug!("connect {addr}: {e}; retrying in {delay:?}");
                last = Some(e);
                thread::sleep(delay);
                delay = (delay * 2).min(Duration::from_secs(2));
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitterSummary {
    pub reports_sent: u64,
    pub assignments_seen: Vec<(u64, String, ChannelId)>,
    pub errors: Vec<Message>,
}

/// Runs one simulated sensor against a controller for `rounds` rounds.
/// Each report waits for its acknowledgement before the next scan, and
/// channel assignments broadcast by the controller are applied to the
/// sensor's view of the access points.
pub fn run_sensor_emitter(
    addr: SocketAddr,
    scenario: &Scenario,
    sensor_id: &str,
    rounds: u64,
    ack_timeout: Duration,
) -> Result<EmitterSummary, ClientError> {
    let sensor = scenario
        .sensor(sensor_id)
        .ok_or_else(|| ClientError::UnknownSensor(sensor_id.to_string()))?
        .clone();
    let mut driver = SensorDriver::new(sensor);
    let stream = connect_with_retry(addr, 20)?;
    stream.set_read_timeout(Some(ack_timeout))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut channels: BTreeMap<String, ChannelId> = scenario.initial_channels();
    let mut summary = EmitterSummary {
        reports_sent: 0,
        assignments_seen: Vec::new(),
        errors: Vec::new(),
    };

    write_message(&mut writer, &driver.hello())?;
    for round in 0..rounds {
        let report = driver.scan(scenario, &channels, round);
        let (_, seq) = report.report_key().expect("driver emits reports");
        write_message(&mut writer, &report)?;
        summary.reports_sent += 1;
        loop {
            match read_message(&mut reader)? {
                None => return Err(ClientError::Closed),
                Some(Ok(Message::Ack { ref_seq })) if ref_seq == seq => break,
                Some(Ok(Message::AssignChannel {
                    ap_id,
                    channel,
                    round,
                })) => {
                    summary
                        .assignments_seen
                        .push((round, ap_id.clone(), channel));
                    channels.insert(ap_id, channel);
                }
                Some(Ok(err @ Message::Error { .. })) => {
                    warn!("{sensor_id}: controller error {err:?}");
                    summary.errors.push(err);
                    break;
                }
                Some(Ok(other)) => debug!("{sensor_id}: ignoring {other:?}"),
                Some(Err(e)) => warn!("{sensor_id}: undecodable reply: {e}"),
            }
        }
    }
    Ok(summary)
}

/// Sends every line of a message log verbatim, then collects the
/// controller's replies for `linger`.
pub fn replay_lines(
    addr: SocketAddr,
    lines: &[String],
    linger: Duration,
) -> Result<Vec<Message>, ClientError> {
    let stream = connect_with_retry(addr, 20)?;
    let mut writer = stream.try_clone()?;
    for line in lines {
        writer.write_all(line.trim_end_matches('\n').as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    let deadline = Instant::now() + linger;
    let mut replies = Vec::new();
    let mut reader = BufReader::new(stream);
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            break;
        }
        reader.get_ref().set_read_timeout(Some(left))?;
        match read_message(&mut reader) {
            Ok(Some(Ok(m))) => replies.push(m),
            Ok(Some(Err(e))) => warn!("undecodable reply: {e}"),
            Ok(None) => break,
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                break
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(replies)
}

/// Reads a message log, checking every non-empty line decodes.
pub fn load_log(path: &Path) -> Result<Vec<String>, ClientError> {
    let file = std::fs::File::open(path)?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        decode(line.as_bytes()).map_err(|source| ClientError::Log {
            line: i + 1,
            source,
        })?;
        lines.push(line);
    }
    Ok(lines)
}
