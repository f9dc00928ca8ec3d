//! Simulated measurement devices.
//!
//! Three device families observe the [`RfScenario`](crate::rfsim::RfScenario):
//! continuous RSSI receivers that report clipped, quantized per-point
//! levels; threshold receivers that only expose a one-bit "power above
//! level" flag, counted over repeated samples; and built-in Wi-Fi cards that
//! list the 802.11 networks they can hear and nothing else.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::estimation::{
    binary_estimate, channel_average, BinaryEstimatorConfig, PointMeasurementSet, SensorWeight,
    WifiScanEntry, DEFAULT_BINARY_SAMPLES, DEFAULT_SAMPLES_PER_POINT,
};
use crate::rfsim::{EmitterKind, Point, RfScenario, SlotTime, MAX_LEVEL_DBM, MIN_LEVEL_DBM};
use crate::seed;
use crate::spectrum::{standard_grid, ChannelId, LevelDbm};

/// RSSI readings are reported in steps of this size.
pub const RSSI_STEP_DB: f64 = 0.5;

/// Level range and resolution of a receiver chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChipProfile {
    pub min_dbm: f64,
    pub max_dbm: f64,
    pub resolution_khz: f64,
}

impl ChipProfile {
    pub const NRF24L01: ChipProfile = ChipProfile {
        min_dbm: -85.0,
        max_dbm: -42.0,
        resolution_khz: 977.0,
    };
    pub const CYRF6934: ChipProfile = ChipProfile {
        min_dbm: -90.0,
        max_dbm: -40.0,
        resolution_khz: 1000.0,
    };
    pub const CYRF6935: ChipProfile = ChipProfile {
        min_dbm: -95.0,
        max_dbm: -40.0,
        resolution_khz: 1000.0,
    };
    pub const CYRF6936: ChipProfile = ChipProfile {
        min_dbm: -97.0,
        max_dbm: -47.0,
        resolution_khz: 1000.0,
    };
    pub const CC2500: ChipProfile = ChipProfile {
        min_dbm: -104.0,
        max_dbm: -13.0,
        resolution_khz: 58.0,
    };
    pub const CC2511_F32: ChipProfile = ChipProfile {
        min_dbm: -110.0,
        max_dbm: -6.5,
        resolution_khz: 58.0,
    };

    pub fn named(name: &str) -> Option<ChipProfile> {
        Some(match name.to_ascii_lowercase().as_str() {
            "nrf24l01" => Self::NRF24L01,
            "cyrf6934" => Self::CYRF6934,
            "cyrf6935" => Self::CYRF6935,
            "cyrf6936" => Self::CYRF6936,
            "cc2500" => Self::CC2500,
            "cc2511-f32" | "cc2511_f32" => Self::CC2511_F32,
            _ => return None,
        })
    }

    /// Clips to the chip range, then rounds to the 0.5 dB step with ties
    /// going toward the lower level.
    pub fn reading(&self, truth: f64) -> f64 {
        let clipped = truth.clamp(self.min_dbm, self.max_dbm);
        (clipped / RSSI_STEP_DB - 0.5).ceil() * RSSI_STEP_DB
    }
}

impl Default for ChipProfile {
    fn default() -> Self {
        Self::CC2500
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RssiParams {
    pub chip: ChipProfile,
    pub samples_per_point: usize,
}

impl Default for RssiParams {
    fn default() -> Self {
        Self {
            chip: ChipProfile::CC2500,
            samples_per_point: DEFAULT_SAMPLES_PER_POINT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinaryParams {
    pub threshold_dbm: f64,
    pub l_min_dbm: f64,
    pub n_samples: u32,
    pub jitter_sigma_db: f64,
}

impl Default for BinaryParams {
    fn default() -> Self {
        Self {
            threshold_dbm: -64.0,
            l_min_dbm: -85.0,
            n_samples: DEFAULT_BINARY_SAMPLES,
            jitter_sigma_db: 2.0,
        }
    }
}

impl BinaryParams {
    pub fn estimator(&self) -> BinaryEstimatorConfig {
        BinaryEstimatorConfig {
            l_min: LevelDbm::new(self.l_min_dbm).expect("validated"),
            l_av: LevelDbm::new(self.threshold_dbm).expect("validated"),
            n_samples: self.n_samples,
        }
    }

    /// Probability that one sample raises the flag when the true level is
    /// `truth`. A zero jitter gives a hard comparator.
    pub fn hit_probability(&self, truth: f64) -> f64 {
        if self.jitter_sigma_db == 0.0 {
            return if truth >= self.threshold_dbm {
                1.0
            } else {
                0.0
            };
        }
        let z = (truth - self.threshold_dbm) / self.jitter_sigma_db;
        0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CardParams {
    pub detection_floor_dbm: f64,
}

impl Default for CardParams {
    fn default() -> Self {
        Self {
            detection_floor_dbm: -90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensorKind {
    Rssi(RssiParams),
    Binary(BinaryParams),
    WifiCard(CardParams),
}

/// A position change taking effect at `from_slot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub from_slot: u64,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: String,
    pub position: Point,
    #[serde(default = "unit_weight")]
    pub weight: SensorWeight,
    #[serde(flatten)]
    pub kind: SensorKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Waypoint>,
    /// Access points this sensor reports for. Empty means every AP.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bind: Vec<String>,
}

fn unit_weight() -> SensorWeight {
    SensorWeight::UNIT
}

impl Sensor {
    pub fn new(id: impl Into<String>, position: Point, kind: SensorKind) -> Self {
        Self {
            id: id.into(),
            position,
            weight: SensorWeight::UNIT,
            kind,
            waypoints: Vec::new(),
            bind: Vec::new(),
        }
    }

    /// Position in effect at `slot`: the latest waypoint already reached.
    pub fn position_at(&self, slot: u64) -> Point {
        self.waypoints
            .iter()
            .filter(|w| w.from_slot <= slot)
            .max_by_key(|w| w.from_slot)
            .map_or(self.position, |w| w.position)
    }

    pub fn scan(&self, scenario: &RfScenario, slot: u64) -> SensorOutput {
        let position = self.position_at(slot);
        match &self.kind {
            SensorKind::Rssi(p) => SensorOutput::Points(rssi_scan(position, p, scenario, slot)),
            SensorKind::Binary(p) => SensorOutput::Hits {
                hits: binary_scan(&self.id, position, p, scenario, slot),
                cfg: p.estimator(),
            },
            SensorKind::WifiCard(p) => {
                SensorOutput::Networks(wifi_scan(position, p, scenario, slot))
            }
        }
    }
}

/// Raw output of one scan, before harmonization.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorOutput {
    Points(PointMeasurementSet),
    Hits {
        hits: Vec<u32>,
        cfg: BinaryEstimatorConfig,
    },
    Networks(Vec<WifiScanEntry>),
}

/// Polls every grid point `samples_per_point` times over consecutive
/// sub-slots of `slot`.
pub fn rssi_scan(
    position: Point,
    params: &RssiParams,
    scenario: &RfScenario,
    slot: u64,
) -> PointMeasurementSet {
    let grid = standard_grid();
    let view = scenario.view_at(position);
    let n = params.samples_per_point.max(1);
    let read = |l: LevelDbm| LevelDbm::new(params.chip.reading(l.dbm())).expect("finite");
    let sub_snapshots: Vec<Vec<LevelDbm>> = if scenario.is_time_varying() {
        (0..n)
            .map(|k| {
                view.snapshot(
                    &grid,
                    SlotTime {
                        slot,
                        sub: k as u32,
                    },
                )
            })
            .collect()
    } else {
        vec![view.snapshot(&grid, SlotTime::at(slot))]
    };
    let mut set = PointMeasurementSet::new(n);
    for (i, bin) in grid.iter().enumerate() {
        let samples = if sub_snapshots.len() == 1 {
            vec![read(sub_snapshots[0][i]); n]
        } else {
            sub_snapshots.iter().map(|s| read(s[i])).collect()
        };
        set.push(*bin, samples);
    }
    set
}

/// Counts flag hits per grid point.
pub fn binary_scan(
    sensor_id: &str,
    position: Point,
    params: &BinaryParams,
    scenario: &RfScenario,
    slot: u64,
) -> Vec<u32> {
    let grid = standard_grid();
    let view = scenario.view_at(position);
    let mut rng = seed::rng(scenario.rng_seed, &format!("binary/{sensor_id}"), &[slot]);
    let n = params.n_samples;
    if scenario.is_time_varying() {
        let subs: Vec<Vec<LevelDbm>> = (0..n)
            .map(|k| view.snapshot(&grid, SlotTime { slot, sub: k }))
            .collect();
        (0..grid.len())
            .map(|i| {
                subs.iter()
                    .filter(|s| rng.random_bool(params.hit_probability(s[i].dbm())))
                    .count() as u32
            })
            .collect()
    } else {
        view.snapshot(&grid, SlotTime::at(slot))
            .into_iter()
            .map(|truth| {
                let p = params.hit_probability(truth.dbm());
                Binomial::new(u64::from(n), p)
                    .expect("p in [0,1]")
                    .sample(&mut rng) as u32
            })
            .collect()
    }
}

/// Lists the Wi-Fi emitters audible at `position`. Other emitter kinds are
/// invisible to a card.
pub fn wifi_scan(
    position: Point,
    params: &CardParams,
    scenario: &RfScenario,
    slot: u64,
) -> Vec<WifiScanEntry> {
    scenario
        .emitters
        .iter()
        .filter(|e| e.is_active(slot))
        .filter_map(|e| match e.kind {
            EmitterKind::Wifi20 { channel } => {
                let level = scenario
                    .received_from(e, position)
                    .clamp(MIN_LEVEL_DBM, MAX_LEVEL_DBM);
                (level >= params.detection_floor_dbm).then(|| WifiScanEntry {
                    network_channel: channel,
                    level: LevelDbm::new(level).expect("finite"),
                })
            }
            _ => None,
        })
        .collect()
}

/// Unified per-channel report from an RSSI or binary analyzer.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub device_id: String,
    pub weight: SensorWeight,
    pub seq: u64,
    pub slot: u64,
    pub levels: Vec<(ChannelId, LevelDbm)>,
}

impl ChannelReport {
    pub fn level(&self, ch: ChannelId) -> Option<LevelDbm> {
        self.levels.iter().find(|(c, _)| *c == ch).map(|(_, l)| *l)
    }

    /// Channel with the lowest level, lowest index on ties.
    pub fn emptiest(&self) -> Option<ChannelId> {
        self.levels
            .iter()
            .fold(
                None,
                |best: Option<(ChannelId, LevelDbm)>, &(c, l)| match best {
                    Some((_, bl)) if bl.dbm() <= l.dbm() => best,
                    _ => Some((c, l)),
                },
            )
            .map(|(c, _)| c)
    }
}

/// Network list from a Wi-Fi card, forwarded unprocessed.
#[derive(Debug, Clone, PartialEq)]
pub struct CardReport {
    pub device_id: String,
    pub weight: SensorWeight,
    pub seq: u64,
    pub slot: u64,
    pub entries: Vec<WifiScanEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensorReport {
    Channels(ChannelReport),
    Card(CardReport),
}

/// Stamp applied to every report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub device_id: String,
    pub weight: SensorWeight,
    pub seq: u64,
    pub slot: u64,
}

/// Turns raw scan output into what the controller consumes. Channels the
/// grid cannot resolve are left out.
pub fn make_channel_report(
    output: &SensorOutput,
    meta: ReportMeta,
    channels: &[ChannelId],
) -> SensorReport {
    let per_channel = |points: &PointMeasurementSet| {
        channels
            .iter()
            .filter_map(|&c| channel_average(points, c).ok().map(|l| (c, l)))
            .collect::<Vec<_>>()
    };
    let ReportMeta {
        device_id,
        weight,
        seq,
        slot,
    } = meta;
    match output {
        SensorOutput::Points(points) => SensorReport::Channels(ChannelReport {
            device_id,
            weight,
            seq,
            slot,
            levels: per_channel(points),
        }),
        SensorOutput::Hits { hits, cfg } => {
            let levels = binary_estimate(hits, cfg).expect("scan produces hits within n_samples");
            let points = PointMeasurementSet::from_levels(standard_grid().into_iter().zip(levels));
            SensorReport::Channels(ChannelReport {
                device_id,
                weight,
                seq,
                slot,
                levels: per_channel(&points),
            })
        }
        SensorOutput::Networks(entries) => SensorReport::Card(CardReport {
            device_id,
            weight,
            seq,
            slot,
            entries: entries.clone(),
        }),
    }
}
