//! Harmonization of heterogeneous sensor output into per-channel levels.
//!
//! Four estimators live here:
//!
//! * [`channel_average`]: mean of the point levels that fall inside a
//!   channel, each point first averaged over its repeated polls.
//! * [`fuse_external`]: `(1/M) * sum(mu_j * L_j)` over external analyzers.
//! * [`card_channel_estimate`]: channel level seen through a Wi-Fi card's
//!   network list, weighting every network by its crossing coefficient.
//! * [`binary_estimate`]: level recovered from a threshold flag's hit count,
//!   `L_min + 2 (L_av - L_min) / N * hits`.
//!
//! Averages are taken over dBm values directly. Only the card estimator
//! offers a power-domain mode, see [`CardMode`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectrum::{crossing_coefficient, ChannelId, FrequencyBin, LevelDbm};

/// Polls per measuring point in one cycle.
pub const DEFAULT_SAMPLES_PER_POINT: usize = 100;
/// Flag samples per point for the binary receiver.
pub const DEFAULT_BINARY_SAMPLES: u32 = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("no data for channel {0}")]
    InsufficientData(u8),
    #[error("hit count {hits} at bin {bin} exceeds {n} samples")]
    MalformedHits { bin: usize, hits: u32, n: u32 },
    #[error("invalid estimator config: {0}")]
    InvalidConfig(&'static str),
    #[error("weight {0} must be finite and non-negative")]
    InvalidWeight(f64),
}

/// Repeated level polls for each measuring point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointMeasurementSet {
    points: Vec<(FrequencyBin, Vec<LevelDbm>)>,
    pub samples_per_point: usize,
}

impl PointMeasurementSet {
    pub fn new(samples_per_point: usize) -> Self {
        Self {
            points: Vec::new(),
            samples_per_point,
        }
    }

    /// Adds the polls for one point. Points without samples are dropped.
    pub fn push(&mut self, bin: FrequencyBin, samples: Vec<LevelDbm>) {
        if !samples.is_empty() {
            self.points.push((bin, samples));
        }
    }

    pub fn points(&self) -> &[(FrequencyBin, Vec<LevelDbm>)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A set with one sample per point.
    pub fn from_levels(levels: impl IntoIterator<Item = (FrequencyBin, LevelDbm)>) -> Self {
        let mut set = Self::new(1);
        for (bin, level) in levels {
            set.push(bin, vec![level]);
        }
        set
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Average level of the points belonging to `ch`.
pub fn channel_average(
    points: &PointMeasurementSet,
    ch: ChannelId,
) -> Result<LevelDbm, EstimationError> {
    let per_point = points
        .points
        .iter()
        .filter(|(bin, _)| ch.covers(bin))
        .filter_map(|(_, samples)| mean(samples.iter().map(|s| s.dbm())));
    mean(per_point)
        .and_then(|v| LevelDbm::new(v).ok())
        .ok_or(EstimationError::InsufficientData(ch.index()))
}

/// Importance weight of a sensor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SensorWeight(f64);

impl SensorWeight {
    pub const UNIT: SensorWeight = SensorWeight(1.0);

    pub fn new(mu: f64) -> Result<Self, EstimationError> {
        if mu.is_finite() && mu >= 0.0 {
            Ok(Self(mu))
        } else {
            Err(EstimationError::InvalidWeight(mu))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SensorWeight {
    type Error = EstimationError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        SensorWeight::new(v)
    }
}

impl From<SensorWeight> for f64 {
    fn from(w: SensorWeight) -> f64 {
        w.0
    }
}

/// Rescales weights to mean 1. An all-zero set becomes uniform.
pub fn normalize_weights(weights: &[SensorWeight]) -> Vec<SensorWeight> {
    let Some(avg) = mean(weights.iter().map(|w| w.0)) else {
        return Vec::new();
    };
    if avg <= 0.0 {
        return vec![SensorWeight::UNIT; weights.len()];
    }
    weights.iter().map(|w| SensorWeight(w.0 / avg)).collect()
}

/// Weighted combination over external analyzers, dividing by the analyzer
/// count rather than the weight sum. Callers normalize weights first when
/// they want a weighted mean.
pub fn fuse_external(
    reports: &[(SensorWeight, LevelDbm)],
    ch: ChannelId,
) -> Result<LevelDbm, EstimationError> {
    if reports.is_empty() {
        return Err(EstimationError::InsufficientData(ch.index()));
    }
    let m = reports.len() as f64;
    let total: f64 = reports.iter().map(|(w, l)| w.0 * l.dbm()).sum();
    LevelDbm::new(total / m).map_err(|_| EstimationError::InsufficientData(ch.index()))
}

/// One network seen by a Wi-Fi card scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WifiScanEntry {
    pub network_channel: ChannelId,
    pub level: LevelDbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CardMode {
    /// Coefficients weight linear power; the per-card sum is floored.
    #[default]
    LinearPower,
    /// Coefficients multiply the dBm values directly.
    LogDomain,
}

/// Level on `ch` estimated from the network lists of built-in cards.
pub fn card_channel_estimate(
    cards: &[(SensorWeight, Vec<WifiScanEntry>)],
    ch: ChannelId,
    mode: CardMode,
    noise_floor: LevelDbm,
) -> Result<LevelDbm, EstimationError> {
    if cards.is_empty() {
        return Err(EstimationError::InsufficientData(ch.index()));
    }
    let h = cards.len() as f64;
    let total: f64 = cards
        .iter()
        .map(|(w, entries)| {
            let per_card = match mode {
                CardMode::LinearPower => {
                    let mw: f64 = entries
                        .iter()
                        .map(|e| {
                            crossing_coefficient(ch, e.network_channel).as_f64() * e.level.to_mw()
                        })
                        .sum();
                    LevelDbm::from_mw_floored(mw, noise_floor).dbm()
                }
                CardMode::LogDomain => entries
                    .iter()
                    .map(|e| crossing_coefficient(ch, e.network_channel).as_f64() * e.level.dbm())
                    .sum(),
            };
            w.0 * per_card
        })
        .sum();
    LevelDbm::new(total / h).map_err(|_| EstimationError::InsufficientData(ch.index()))
}

/// Parameters of the hit-count level estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryEstimatorConfig {
    /// Receiver sensitivity, the level reported for zero hits.
    pub l_min: LevelDbm,
    /// Flag trigger level.
    pub l_av: LevelDbm,
    pub n_samples: u32,
}

impl BinaryEstimatorConfig {
    /// nRF24L01 setup: sensitivity -85 dBm, flag at -64 dBm, 200 samples.
    pub fn nrf24() -> Self {
        Self {
            l_min: LevelDbm::new(-85.0).expect("finite"),
            l_av: LevelDbm::new(-64.0).expect("finite"),
            n_samples: DEFAULT_BINARY_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.l_min.dbm() >= self.l_av.dbm() {
            return Err(EstimationError::InvalidConfig("l_min must be below l_av"));
        }
        if self.n_samples == 0 {
            return Err(EstimationError::InvalidConfig(
                "n_samples must be at least 1",
            ));
        }
        Ok(())
    }

    /// dB per hit, `2 (L_av - L_min) / N`.
    pub fn slope(&self) -> f64 {
        2.0 * (self.l_av.dbm() - self.l_min.dbm()) / f64::from(self.n_samples)
    }

    /// Level reported when every sample hits.
    pub fn ceiling(&self) -> f64 {
        self.l_min.dbm() + 2.0 * (self.l_av.dbm() - self.l_min.dbm())
    }

    fn level(&self, hits: u32) -> f64 {
        // multiply before dividing so the integer endpoints come out exact
        self.l_min.dbm()
            + 2.0 * (self.l_av.dbm() - self.l_min.dbm()) * f64::from(hits)
                / f64::from(self.n_samples)
    }
}

/// Per-point levels from per-point hit counts.
pub fn binary_estimate(
    hits: &[u32],
    cfg: &BinaryEstimatorConfig,
) -> Result<Vec<LevelDbm>, EstimationError> {
    cfg.validate()?;
    hits.iter()
        .enumerate()
        .map(|(bin, &h)| {
            if h > cfg.n_samples {
                return Err(EstimationError::MalformedHits {
                    bin,
                    hits: h,
                    n: cfg.n_samples,
                });
            }
            Ok(LevelDbm::new(cfg.level(h)).expect("validated config yields finite levels"))
        })
        .collect()
}
