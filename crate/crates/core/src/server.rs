//! Networked controller.
//!
//! Devices connect over TCP and speak the line protocol. Each connection
//! gets a reader thread that forwards decoded messages into one mailbox, so
//! per-device ordering is preserved and the allocation state has a single
//! writer. A collection window closes once every sensor listed in the
//! scenario has reported for it, or when the window timeout runs out. After
//! the round, `assign_channel` messages are broadcast to every connection
//! and the reports consumed by the round are acknowledged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::allocator::{AllocationState, Ingested};
use crate::protocol::{read_message, write_message, Message, ProtocolError};
use crate::scenario::Scenario;
use crate::sim::{AssignmentRecord, RunReport, SimError};
use crate::spectrum::ChannelId;

const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub scenario: Scenario,
    /// Stop after this many rounds; run until shut down otherwise.
    pub max_rounds: Option<u64>,
    /// Longest a collection window stays open waiting for sensors.
    pub window_timeout: Duration,
}

impl ServeOptions {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            max_rounds: None,
            window_timeout: Duration::from_secs(2),
        }
    }
}

/// Read-only view of the controller, refreshed after every event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerStatus {
    pub round: u64,
    pub ap_channels: BTreeMap<String, ChannelId>,
    /// Latest fused occupancy per AP and channel.
    pub occupancy: BTreeMap<String, BTreeMap<ChannelId, f64>>,
    pub assignments: Vec<AssignmentRecord>,
    pub reports_ingested: u64,
    pub devices: Vec<String>,
    pub connections: usize,
}

enum Event {
    Connected(u64, TcpStream),
    Message(u64, Message),
    Malformed(u64, ProtocolError),
    Closed(u64),
}

pub struct Controller {
    listener: TcpListener,
    opts: ServeOptions,
}

impl Controller {
    pub fn bind(addr: impl ToSocketAddrs, opts: ServeOptions) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        Ok(Self { listener, opts })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Starts the controller on background threads.
    pub fn spawn(self) -> Result<ControllerHandle, SimError> {
        let addr = self
            .listener
            .local_addr()
            .map_err(|e| SimError::Output(e.to_string()))?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let status = Arc::new(RwLock::new(ControllerStatus::default()));
        let (tx, rx) = mpsc::channel();

        let mut state = AllocationState::new(self.opts.scenario.allocator_config())?;
        for ap in &self.opts.scenario.access_points {
            state.register_ap(ap.id.clone(), ap.channel);
        }

        self.listener
            .set_nonblocking(true)
            .map_err(|e| SimError::Output(e.to_string()))?;
        let acceptor = {
            let shutdown = shutdown.clone();
            let listener = self.listener;
            thread::spawn(move || accept_loop(listener, tx, shutdown))
        };
        let core = {
            let shutdown = shutdown.clone();
            let status = status.clone();
            let opts = self.opts;
            thread::spawn(move || {
                let report = ControlLoop::new(state, opts, status).run(rx, &shutdown);
                shutdown.store(true, Ordering::SeqCst);
                report
            })
        };
        Ok(ControllerHandle {
            addr,
            shutdown,
            status,
            core: Some(core),
            acceptor: Some(acceptor),
        })
    }
}

pub struct ControllerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    status: Arc<RwLock<ControllerStatus>>,
    core: Option<JoinHandle<RunReport>>,
    acceptor: Option<JoinHandle<()>>,
}

impl ControllerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn status(&self) -> ControllerStatus {
        self.status.read().expect("status lock").clone()
    }

    /// Shared status cell, for serving status queries elsewhere.
    pub fn status_cell(&self) -> Arc<RwLock<ControllerStatus>> {
        self.status.clone()
    }

    pub fn shutdown_flag(&self) -> Arc<AtomicBool> {
        self.shutdown.clone()
    }

    pub fn is_finished(&self) -> bool {
        self.core.as_ref().is_none_or(|c| c.is_finished())
    }

    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
    }

    /// Waits for the control loop to end and returns its report.
    pub fn join(mut self) -> RunReport {
        let report = self
            .core
            .take()
            .expect("joined once")
            .join()
            .expect("control loop panicked");
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        report
    }
}

impl Drop for ControllerHandle {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>, shutdown: Arc<AtomicBool>) {
    let mut next_id = 0u64;
    let mut backoff = POLL;
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                backoff = POLL;
                if let Err(e) = stream.set_nonblocking(false) {
                    warn!("dropping {peer}: {e}");
                    continue;
                }
                let id = next_id;
                next_id += 1;
                debug!("connection {id} from {peer}");
                let writer = match stream.try_clone() {
                    Ok(w) => w,
                    Err(e) => {
                        warn!("dropping {peer}: {e}");
                        continue;
                    }
                };
                if tx.send(Event::Connected(id, writer)).is_err() {
                    return;
                }
                let tx = tx.clone();
                thread::spawn(move || read_loop(id, stream, tx));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}; retrying in {backoff:?}");
                thread::sleep(backoff);
                backoff = (backoff * 2).min(Duration::from_secs(1));
            }
        }
    }
}

fn read_loop(id: u64, stream: TcpStream, tx: Sender<Event>) {
    let mut reader = BufReader::new(stream);
    loop {
        let event = match read_message(&mut reader) {
            Ok(Some(Ok(msg))) => Event::Message(id, msg),
            Ok(Some(Err(e))) => Event::Malformed(id, e),
            Ok(None) | Err(_) => {
                let _ = tx.send(Event::Closed(id));
                return;
            }
        };
        if tx.send(event).is_err() {
            return;
        }
    }
}

struct ControlLoop {
    state: AllocationState,
    opts: ServeOptions,
    status: Arc<RwLock<ControllerStatus>>,
    peers: HashMap<u64, TcpStream>,
    report: RunReport,
    expected: BTreeSet<String>,
    reported: BTreeSet<String>,
    pending_acks: Vec<(u64, u64)>,
    window_opened: Instant,
    reports_ingested: u64,
    last_occupancy: BTreeMap<String, BTreeMap<ChannelId, f64>>,
}

impl ControlLoop {
    fn new(
        state: AllocationState,
        opts: ServeOptions,
        status: Arc<RwLock<ControllerStatus>>,
    ) -> Self {
        let report = RunReport::new(&opts.scenario, opts.scenario.initial_channels());
        let expected = opts.scenario.sensors.iter().map(|s| s.id.clone()).collect();
        let this = Self {
            state,
            opts,
            status,
            peers: HashMap::new(),
            report,
            expected,
            reported: BTreeSet::new(),
            pending_acks: Vec::new(),
            window_opened: Instant::now(),
            reports_ingested: 0,
            last_occupancy: BTreeMap::new(),
        };
        this.publish();
        this
    }

    fn run(mut self, rx: Receiver<Event>, shutdown: &AtomicBool) -> RunReport {
        info!("controller running, round {}", self.state.round());
        while !shutdown.load(Ordering::SeqCst) {
            match rx.recv_timeout(POLL) {
                Ok(event) => self.handle(event),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
            if self.window_complete() {
                self.close_window();
                if self
                    .opts
                    .max_rounds
                    .is_some_and(|m| self.state.round() >= m)
                {
                    break;
                }
            }
        }
        for (_, peer) in self.peers.drain() {
            let _ = peer.shutdown(Shutdown::Both);
        }
        self.publish();
        info!("controller stopped after {} rounds", self.report.rounds);
        self.report
    }

    fn send(&mut self, conn: u64, msg: &Message) {
        if let Some(peer) = self.peers.get_mut(&conn) {
            if let Err(e) = write_message(peer, msg) {
                debug!("dropping connection {conn}: {e}");
                let _ = peer.shutdown(Shutdown::Both);
                self.peers.remove(&conn);
            }
        }
    }

    fn handle(&mut self, event: Event) {
        match event {
            Event::Connected(id, stream) => {
                self.peers.insert(id, stream);
            }
            Event::Closed(id) => {
                self.peers.remove(&id);
            }
            Event::Malformed(id, e) => {
                debug!("connection {id}: {e}");
                self.send(id, &e.to_message());
            }
            Event::Message(id, msg) => match self.state.ingest(&msg) {
                Ok(Ingested::Report {
                    device_id,
                    seq,
                    slot,
                }) => {
                    self.reports_ingested += 1;
                    self.pending_acks.push((id, seq));
                    if slot >= self.state.window_start() {
                        self.reported.insert(device_id);
                    }
                }
                Ok(_) => {}
                Err(e) => {
                    debug!("connection {id}: rejected: {e}");
                    self.send(id, &e.to_message());
                }
            },
        }
        self.publish();
    }

    fn window_complete(&self) -> bool {
        let all_in = !self.expected.is_empty() && self.expected.is_subset(&self.reported);
        all_in || self.window_opened.elapsed() >= self.opts.window_timeout
    }

    fn close_window(&mut self) {
        let outcome = self.state.allocate_round();
        self.report.record(&outcome);
        self.last_occupancy = outcome
            .occupancy
            .iter()
            .map(|(ap, row)| (ap.clone(), row.iter().map(|(c, l)| (*c, l.dbm())).collect()))
            .collect();
        let ids: Vec<u64> = self.peers.keys().copied().collect();
        for msg in outcome.messages() {
            info!("round {}: {:?}", outcome.round, msg);
            for &id in &ids {
                self.send(id, &msg);
            }
        }
        for (conn, seq) in std::mem::take(&mut self.pending_acks) {
            self.send(conn, &Message::Ack { ref_seq: seq });
        }
        self.reported.clear();
        self.window_opened = Instant::now();
        self.publish();
    }

    fn publish(&self) {
        let mut s = self.status.write().expect("status lock");
        s.round = self.state.round();
        s.ap_channels = self.state.ap_channels().clone();
        s.occupancy = self.last_occupancy.clone();
        s.assignments = self.report.assignments.clone();
        s.reports_ingested = self.reports_ingested;
        s.devices = self.state.devices().keys().cloned().collect();
        s.connections = self.peers.len();
    }
}

/// Answers every connection on `listener` with one JSON line holding the
/// current status, then closes it.
pub fn serve_status(
    listener: TcpListener,
    status: Arc<RwLock<ControllerStatus>>,
    shutdown: Arc<AtomicBool>,
) -> io::Result<JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    Ok(thread::spawn(move || {
        while !shutdown.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((mut stream, _)) => {
                    let snapshot = status.read().expect("status lock").clone();
                    let mut line = serde_json::to_vec(&snapshot).expect("status serializes");
                    line.push(b'\n');
                    let _ = stream.set_nonblocking(false);
                    let _ = stream.write_all(&line);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => {
                    warn!("status accept failed: {e}");
                    thread::sleep(Duration::from_millis(100));
                }
            }
        }
    }))
}

/// Fetches one status line from a status endpoint.
pub fn query_status(addr: impl ToSocketAddrs) -> io::Result<ControllerStatus> {
    let stream = TcpStream::connect(addr)?;
    let mut line = String::new();
    io::BufRead::read_line(&mut BufReader::new(stream), &mut line)?;
    serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
