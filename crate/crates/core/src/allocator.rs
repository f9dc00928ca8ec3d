//! Controller state machine: collect reports, unify them into per-channel
//! occupancy for every access point, and hand each AP its emptiest channel.
//!
//! One round runs after every collection window:
//!
//! 1. APs are ordered by the number of sensors bound to them (most first,
//!    ties by id).
//! 2. For each AP, every allowed channel is scored by its fused occupancy
//!    plus, in milliwatts, a virtual emitter at `virtual_ap_level_dbm` for
//!    every AP already handled this round, scaled by the crossing
//!    coefficient between the two channels.
//! 3. The AP moves to the lowest-scoring channel (lowest index on ties) only
//!    if that beats its current channel by more than `hysteresis_db`.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    card_channel_estimate, fuse_external, normalize_weights, CardMode, EstimationError,
    SensorWeight, WifiScanEntry,
};
use crate::protocol::{scan_entries, DeviceKind, ErrorCode, Message, FORMAT_VERSION};
use crate::spectrum::{crossing_coefficient, dbm_to_mw, mw_to_dbm, ChannelId, LevelDbm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("invalid allocator config: {0}")]
    Config(String),
    #[error("unknown access point {0}")]
    UnknownAp(String),
    #[error("no fresh reports bound to access point {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// A rejected inbound message, answered with an `error` line.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{code:?}: {detail}")]
pub struct IngestError {
    pub code: ErrorCode,
    pub detail: String,
}

impl IngestError {
    fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }

    pub fn to_message(&self) -> Message {
        Message::error(self.code, self.detail.clone())
    }
}

fn default_channels() -> BTreeSet<ChannelId> {
    ChannelId::all().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocatorConfig {
    pub hysteresis_db: f64,
    pub collection_window_slots: u64,
    /// Reports older than this many windows are ignored.
    pub ttl_windows: u64,
    pub allowed_channels: BTreeSet<ChannelId>,
    /// AP id to bound sensor ids. A sensor missing from every set serves
    /// all APs.
    pub sensor_binding: BTreeMap<String, BTreeSet<String>>,
    pub w_ext: f64,
    pub w_int: f64,
    pub virtual_ap_level_dbm: f64,
    /// Floor for card estimates whose crossing sum is zero.
    pub noise_floor_dbm: f64,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        Self {
            hysteresis_db: 3.0,
            collection_window_slots: 10,
            ttl_windows: 3,
            allowed_channels: default_channels(),
            sensor_binding: BTreeMap::new(),
            w_ext: 0.5,
            w_int: 0.5,
            virtual_ap_level_dbm: -50.0,
            noise_floor_dbm: -100.0,
        }
    }
}

impl AllocatorConfig {
    pub fn validate(&self) -> Result<(), AllocError> {
        let bad = |m: &str| Err(AllocError::Config(m.to_string()));
        if !(self.hysteresis_db >= 0.0 && self.hysteresis_db.is_finite()) {
            return bad("hysteresis_db must be non-negative");
        }
        if self.allowed_channels.is_empty() {
            return bad("allowed_channels must not be empty");
        }
        if self.collection_window_slots == 0 {
            return bad("collection_window_slots must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.w_ext) || !(0.0..=1.0).contains(&self.w_int) {
            return bad("w_ext and w_int must lie in [0, 1]");
        }
        if (self.w_ext + self.w_int - 1.0).abs() > 1e-9 {
            return bad("w_ext + w_int must equal 1");
        }
        if !self.virtual_ap_level_dbm.is_finite() || !self.noise_floor_dbm.is_finite() {
            return bad("levels must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceEntry {
    pub kind: DeviceKind,
    pub weight: SensorWeight,
    pub last_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
enum StoredReport {
    Channels {
        slot: u64,
        levels: BTreeMap<ChannelId, LevelDbm>,
    },
    Card {
        slot: u64,
        entries: Vec<WifiScanEntry>,
    },
}

impl StoredReport {
    fn slot(&self) -> u64 {
        match self {
            StoredReport::Channels { slot, .. } | StoredReport::Card { slot, .. } => *slot,
        }
    }
}

/// What an accepted message did.
#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    Registered {
        device_id: String,
        kind: DeviceKind,
    },
    Report {
        device_id: String,
        seq: u64,
        slot: u64,
    },
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub ap_id: String,
    pub from: ChannelId,
    pub to: ChannelId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    pub assignments: Vec<Assignment>,
    /// Fused occupancy per AP and allowed channel, for APs that had data.
    pub occupancy: BTreeMap<String, BTreeMap<ChannelId, LevelDbm>>,
    pub skipped: Vec<String>,
    /// Power sum over APs of the occupancy on their post-round channel.
    pub interference_dbm: Option<f64>,
}

impl RoundOutcome {
    pub fn messages(&self) -> Vec<Message> {
        self.assignments
            .iter()
            .map(|a| Message::AssignChannel {
                ap_id: a.ap_id.clone(),
                channel: a.to,
                round: self.round,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    devices: BTreeMap<String, DeviceEntry>,
    reports: BTreeMap<String, StoredReport>,
    ap_channels: BTreeMap<String, ChannelId>,
    round: u64,
    config: AllocatorConfig,
}

impl AllocationState {
    pub fn new(config: AllocatorConfig) -> Result<Self, AllocError> {
        config.validate()?;
        Ok(Self {
            devices: BTreeMap::new(),
            reports: BTreeMap::new(),
            ap_channels: BTreeMap::new(),
            round: 0,
            config,
        })
    }

    pub fn config(&self) -> &AllocatorConfig {
        &self.config
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn ap_channels(&self) -> &BTreeMap<String, ChannelId> {
        &self.ap_channels
    }

    pub fn devices(&self) -> &BTreeMap<String, DeviceEntry> {
        &self.devices
    }

    /// First slot of the current collection window.
    pub fn window_start(&self) -> u64 {
        self.round * self.config.collection_window_slots
    }

    pub fn register_ap(&mut self, ap_id: impl Into<String>, channel: ChannelId) {
        self.ap_channels.insert(ap_id.into(), channel);
    }

    pub fn register_device(
        &mut self,
        device_id: impl Into<String>,
        kind: DeviceKind,
        weight: SensorWeight,
    ) {
        let device_id = device_id.into();
        let last_seq = self.devices.get(&device_id).and_then(|d| d.last_seq);
        self.devices.insert(
            device_id,
            DeviceEntry {
                kind,
                weight,
                last_seq,
            },
        );
    }

    /// Applies one inbound message.
    pub fn ingest(&mut self, msg: &Message) -> Result<Ingested, IngestError> {
        match msg {
            Message::Hello {
                device_id,
                device_kind,
                weight,
                format_version,
            } => {
                if *format_version != FORMAT_VERSION {
                    return Err(IngestError::new(
                        ErrorCode::Version,
                        format!("format_version {format_version} unsupported, expected {FORMAT_VERSION}"),
                    ));
                }
                let weight = SensorWeight::new(*weight)
                    .map_err(|e| IngestError::new(ErrorCode::Invalid, e.to_string()))?;
                self.register_device(device_id.clone(), *device_kind, weight);
                debug!("registered {device_id} as {device_kind:?}");
                Ok(Ingested::Registered {
                    device_id: device_id.clone(),
                    kind: *device_kind,
                })
            }
            Message::ChannelReport {
                device_id,
                seq,
                slot,
                channels,
            } => {
                self.accept_seq(
                    device_id,
                    *seq,
                    &[DeviceKind::RssiSensor, DeviceKind::BinarySensor],
                )?;
                let levels = channels
                    .iter()
                    .filter_map(|c| LevelDbm::new(c.level_dbm).ok().map(|l| (c.channel, l)))
                    .collect();
                self.reports.insert(
                    device_id.clone(),
                    StoredReport::Channels {
                        slot: *slot,
                        levels,
                    },
                );
                Ok(Ingested::Report {
                    device_id: device_id.clone(),
                    seq: *seq,
                    slot: *slot,
                })
            }
            Message::WifiCardReport {
                device_id,
                seq,
                slot,
                entries,
            } => {
                self.accept_seq(device_id, *seq, &[DeviceKind::WifiCard])?;
                self.reports.insert(
                    device_id.clone(),
                    StoredReport::Card {
                        slot: *slot,
                        entries: scan_entries(entries),
                    },
                );
                Ok(Ingested::Report {
                    device_id: device_id.clone(),
                    seq: *seq,
                    slot: *slot,
                })
            }
            Message::Ack { .. } | Message::Error { .. } => Ok(Ingested::Ignored),
            Message::AssignChannel { .. } => Err(IngestError::new(
                ErrorCode::Invalid,
                "assign_channel is controller-to-device only",
            )),
        }
    }

    fn accept_seq(
        &mut self,
        device_id: &str,
        seq: u64,
        kinds: &[DeviceKind],
    ) -> Result<(), IngestError> {
        let entry = self.devices.get_mut(device_id).ok_or_else(|| {
            IngestError::new(
                ErrorCode::UnknownDevice,
                format!("{device_id} has not sent hello"),
            )
        })?;
        if !kinds.contains(&entry.kind) {
            return Err(IngestError::new(
                ErrorCode::Invalid,
                format!(
                    "{device_id} is a {:?} and cannot send this report",
                    entry.kind
                ),
            ));
        }
        if entry.last_seq.is_some_and(|last| seq <= last) {
            return Err(IngestError::new(
                ErrorCode::Stale,
                format!("seq {seq} not after {}", entry.last_seq.unwrap_or_default()),
            ));
        }
        entry.last_seq = Some(seq);
        Ok(())
    }

    fn is_bound(&self, ap_id: &str, device_id: &str) -> bool {
        let binding = &self.config.sensor_binding;
        match binding.get(ap_id) {
            Some(set) if set.contains(device_id) => true,
            _ => !binding.values().any(|set| set.contains(device_id)),
        }
    }

    /// Registered sensor devices bound to `ap_id`, in id order.
    pub fn bound_devices(&self, ap_id: &str) -> Vec<&str> {
        self.devices
            .iter()
            .filter(|(id, d)| d.kind.is_sensor() && self.is_bound(ap_id, id))
            .map(|(id, _)| id.as_str())
            .collect()
    }

    fn is_fresh(&self, report: &StoredReport) -> bool {
        let ttl = self.config.ttl_windows * self.config.collection_window_slots;
        self.window_start().saturating_sub(report.slot()) < ttl
    }

    /// Fused interference level `ap_id` would see on `ch`.
    pub fn occupancy(&self, ap_id: &str, ch: ChannelId) -> Result<LevelDbm, AllocError> {
        if !self.ap_channels.contains_key(ap_id) {
            return Err(AllocError::UnknownAp(ap_id.to_string()));
        }
        let mut ext: Vec<(SensorWeight, LevelDbm)> = Vec::new();
        let mut cards: Vec<(SensorWeight, Vec<WifiScanEntry>)> = Vec::new();
        for id in self.bound_devices(ap_id) {
            let Some(report) = self.reports.get(id).filter(|r| self.is_fresh(r)) else {
                continue;
            };
            let weight = self.devices[id].weight;
            match report {
                StoredReport::Channels { levels, .. } => {
                    if let Some(&l) = levels.get(&ch) {
                        ext.push((weight, l));
                    }
                }
                StoredReport::Card { entries, .. } => cards.push((weight, entries.clone())),
            }
        }
        let ext = if ext.is_empty() {
            None
        } else {
            let weights: Vec<_> = ext.iter().map(|(w, _)| *w).collect();
            let normed: Vec<_> = normalize_weights(&weights)
                .into_iter()
                .zip(ext.iter().map(|(_, l)| *l))
                .collect();
            Some(fuse_external(&normed, ch)?)
        };
        let int = if cards.is_empty() {
            None
        } else {
            let weights: Vec<_> = cards.iter().map(|(w, _)| *w).collect();
            let normed: Vec<_> = normalize_weights(&weights)
                .into_iter()
                .zip(cards.into_iter().map(|(_, e)| e))
                .collect();
            let floor = LevelDbm::new(self.config.noise_floor_dbm).expect("validated");
            Some(card_channel_estimate(
                &normed,
                ch,
                CardMode::LinearPower,
                floor,
            )?)
        };
        match (ext, int) {
            (Some(e), Some(i)) => {
                let mixed = self.config.w_ext * e.dbm() + self.config.w_int * i.dbm();
                Ok(LevelDbm::new(mixed).expect("finite"))
            }
            (Some(l), None) | (None, Some(l)) => Ok(l),
            (None, None) => Err(AllocError::InsufficientData(ap_id.to_string())),
        }
    }

    /// Occupancy on every allowed channel.
    pub fn occupancy_row(&self, ap_id: &str) -> Result<BTreeMap<ChannelId, LevelDbm>, AllocError> {
        self.config
            .allowed_channels
            .iter()
            .map(|&ch| self.occupancy(ap_id, ch).map(|l| (ch, l)))
            .collect()
    }

    /// Processing order for a round.
    pub fn ap_order(&self) -> Vec<String> {
        let mut aps: Vec<(usize, &String)> = self
            .ap_channels
            .keys()
            .map(|id| (self.bound_devices(id).len(), id))
            .collect();
        aps.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        aps.into_iter().map(|(_, id)| id.clone()).collect()
    }

    /// Runs one allocation round and advances the round counter.
    pub fn allocate_round(&mut self) -> RoundOutcome {
        let round = self.round;
        let virtual_mw = dbm_to_mw(self.config.virtual_ap_level_dbm);
        let mut placed: Vec<ChannelId> = Vec::new();
        let mut outcome = RoundOutcome {
            round,
            assignments: Vec::new(),
            occupancy: BTreeMap::new(),
            skipped: Vec::new(),
            interference_dbm: None,
        };
        let mut interference_mw = 0.0;

        for ap_id in self.ap_order() {
            let row = match self.occupancy_row(&ap_id) {
                Ok(row) => row,
                Err(e) => {
                    info!("round {round}: skipping {ap_id}: {e}");
                    outcome.skipped.push(ap_id);
                    continue;
                }
            };
            let score = |ch: ChannelId, occ: LevelDbm| {
                let penalty: f64 = placed
                    .iter()
                    .map(|&p| crossing_coefficient(ch, p).as_f64() * virtual_mw)
                    .sum();
                mw_to_dbm(occ.to_mw() + penalty)
            };
            let (best, best_score) = row
                .iter()
                .map(|(&ch, &occ)| (ch, score(ch, occ)))
                .fold(None, |acc: Option<(ChannelId, f64)>, (ch, s)| match acc {
                    Some((_, bs)) if bs <= s => acc,
                    _ => Some((ch, s)),
                })
                .expect("allowed_channels is non-empty");
            let current = self.ap_channels[&ap_id];
            let current_score = if self.config.allowed_channels.contains(&current) {
                score(
                    current,
                    self.occupancy(&ap_id, current).expect("row succeeded"),
                )
            } else {
                f64::INFINITY
            };
            let chosen = if best != current
                && current_score - best_score > self.config.hysteresis_db
            {
                debug!("round {round}: {ap_id} {current} -> {best} ({current_score:.2} -> {best_score:.2} dBm)");
                outcome.assignments.push(Assignment {
                    ap_id: ap_id.clone(),
                    from: current,
                    to: best,
                });
                self.ap_channels.insert(ap_id.clone(), best);
                best
            } else {
                current
            };
            if let Some(occ) = row.get(&chosen) {
                interference_mw += occ.to_mw();
            }
            placed.push(chosen);
            outcome.occupancy.insert(ap_id, row);
        }

        if !outcome.occupancy.is_empty() {
            outcome.interference_dbm = Some(mw_to_dbm(interference_mw));
        }
        // expired reports are no longer needed
        let stale: Vec<String> = self
            .reports
            .iter()
            .filter(|(_, r)| !self.is_fresh(r))
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            self.reports.remove(&id);
        }
        self.round += 1;
        outcome
    }

    /// Number of stored reports that are still fresh.
    pub fn fresh_reports(&self) -> usize {
        self.reports.values().filter(|r| self.is_fresh(r)).count()
    }
}
