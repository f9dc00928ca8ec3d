//! 2.4 GHz geometry shared by every other module: Wi-Fi channels, the
//! 128-point measurement grid, dBm levels, channel crossing coefficients
//! and the signal-quality gradation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest and highest Wi-Fi channel handled (ETSI set).
pub const MIN_CHANNEL: u8 = 1;
pub const MAX_CHANNEL: u8 = 13;

/// Nominal Wi-Fi channel width in MHz.
pub const CHANNEL_WIDTH_MHZ: f64 = 20.0;
/// Spacing between neighbouring channel centers in MHz.
pub const CHANNEL_SPACING_MHZ: f64 = 5.0;

/// Start frequency and step of the binary-sensor scan grid.
pub const GRID_START_MHZ: f64 = 2400.0;
pub const GRID_STEP_MHZ: f64 = 0.9765625;
pub const GRID_POINTS: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("channel {0} outside 1..=13")]
    InvalidChannel(i64),
    #[error("bin index {0} outside 0..128")]
    InvalidBin(usize),
    #[error("level {0} dBm is not finite")]
    NonFiniteLevel(f64),
    #[error("grid does not cover channel {0}")]
    UncoveredChannel(u8),
    #[error("growth model is defined for years after 2000, got {0}")]
    YearOutOfDomain(i32),
}

/// A 2.4 GHz Wi-Fi channel, 1..=13.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ChannelId(u8);

impl ChannelId {
    pub fn new(index: u8) -> Result<Self, SpectrumError> {
        if (MIN_CHANNEL..=MAX_CHANNEL).contains(&index) {
            Ok(Self(index))
        } else {
            Err(SpectrumError::InvalidChannel(index as i64))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn center_mhz(self) -> f64 {
        2412.0 + CHANNEL_SPACING_MHZ * f64::from(self.0 - 1)
    }

    /// Channel-index distance `|a - b|`.
    pub fn distance(self, other: ChannelId) -> u8 {
        self.0.abs_diff(other.0)
    }

    /// True when the bin center lies within half a channel width of the
    /// channel center.
    pub fn covers(self, bin: &FrequencyBin) -> bool {
        (bin.center_mhz - self.center_mhz()).abs() <= CHANNEL_WIDTH_MHZ / 2.0
    }

    /// Channels 1..=13 in ascending order.
    pub fn all() -> impl Iterator<Item = ChannelId> {
        (MIN_CHANNEL..=MAX_CHANNEL).map(ChannelId)
    }
}

impl TryFrom<u8> for ChannelId {
    type Error = SpectrumError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        ChannelId::new(value)
    }
}

impl From<ChannelId> for u8 {
    fn from(ch: ChannelId) -> u8 {
        ch.0
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One measuring point of a scan grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBin {
    pub index: usize,
    pub center_mhz: f64,
}

impl FrequencyBin {
    /// Bin `index` on the 128-point, 976.5625 kHz grid starting at 2400 MHz.
    pub fn on_grid(index: usize) -> Result<Self, SpectrumError> {
        if index >= GRID_POINTS {
            return Err(SpectrumError::InvalidBin(index));
        }
        Ok(Self {
            index,
            center_mhz: GRID_START_MHZ + GRID_STEP_MHZ * index as f64,
        })
    }
}

/// The full 128-point grid (2400.0 .. 2524.02 MHz).
pub fn standard_grid() -> Vec<FrequencyBin> {
    (0..GRID_POINTS)
        .map(|i| FrequencyBin {
            index: i,
            center_mhz: GRID_START_MHZ + GRID_STEP_MHZ * i as f64,
        })
        .collect()
}

/// Bins of `grid` that belong to `ch`. An empty result means the grid does
/// not reach the channel, which is treated as a configuration error.
pub fn bins_for_channel(
    ch: ChannelId,
    grid: &[FrequencyBin],
) -> Result<Vec<FrequencyBin>, SpectrumError> {
    let bins: Vec<_> = grid.iter().filter(|b| ch.covers(b)).copied().collect();
    if bins.is_empty() {
        return Err(SpectrumError::UncoveredChannel(ch.index()));
    }
    Ok(bins)
}

/// A signal level in dBm. Always finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LevelDbm(f64);

impl LevelDbm {
    pub fn new(value: f64) -> Result<Self, SpectrumError> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(SpectrumError::NonFiniteLevel(value))
        }
    }

    pub fn dbm(self) -> f64 {
        self.0
    }

    pub fn to_mw(self) -> f64 {
        dbm_to_mw(self.0)
    }

    /// Converts a linear power back to dBm, flooring at `floor` so that a
    /// zero sum stays finite.
    pub fn from_mw_floored(mw: f64, floor: LevelDbm) -> LevelDbm {
        if mw <= 0.0 {
            return floor;
        }
        let db = mw_to_dbm(mw);
        if db < floor.0 {
            floor
        } else {
            LevelDbm(db)
        }
    }
}

impl TryFrom<f64> for LevelDbm {
    type Error = SpectrumError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        LevelDbm::new(value)
    }
}

impl From<LevelDbm> for f64 {
    fn from(l: LevelDbm) -> f64 {
        l.0
    }
}

impl fmt::Display for LevelDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} dBm", self.0)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Fraction of a channel's energy counted against a channel `d` indices
/// away, held as a multiple of 1/4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrossingCoefficient {
    quarters: u8,
}

impl CrossingCoefficient {
    pub const TABLE: [CrossingCoefficient; 5] = [
        CrossingCoefficient { quarters: 4 },
        CrossingCoefficient { quarters: 3 },
        CrossingCoefficient { quarters: 2 },
        CrossingCoefficient { quarters: 1 },
        CrossingCoefficient { quarters: 0 },
    ];

    pub fn for_distance(d: u8) -> Self {
        Self::TABLE[usize::from(d.min(4))]
    }

    /// Numerator and denominator in lowest terms.
    pub fn ratio(self) -> (u8, u8) {
        match self.quarters {
            0 => (0, 1),
            2 => (1, 2),
            4 => (1, 1),
            q => (q, 4),
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.quarters) / 4.0
    }
}

impl fmt::Display for CrossingCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio() {
            (n, 1) => write!(f, "{n}"),
            (n, d) => write!(f, "{n}/{d}"),
        }
    }
}

pub fn crossing_coefficient(ch: ChannelId, k: ChannelId) -> CrossingCoefficient {
    CrossingCoefficient::for_distance(ch.distance(k))
}

/// Signal-quality gradation in dBm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quality {
    Unacceptable,
    Bad,
    Acceptable,
    VeryGood,
    Excellent,
}

impl Quality {
    pub const ALL: [Quality; 5] = [
        Quality::Unacceptable,
        Quality::Bad,
        Quality::Acceptable,
        Quality::VeryGood,
        Quality::Excellent,
    ];

    pub fn band(self) -> QualityBand {
        use Bound::*;
        let (lower, upper) = match self {
            Quality::Unacceptable => (Unbounded, Exclusive(-90.0)),
            Quality::Bad => (Inclusive(-90.0), Inclusive(-81.0)),
            Quality::Acceptable => (Exclusive(-81.0), Inclusive(-71.0)),
            Quality::VeryGood => (Exclusive(-71.0), Inclusive(-67.0)),
            Quality::Excellent => (Exclusive(-67.0), Unbounded),
        };
        QualityBand {
            label: self,
            lower,
            upper,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quality::Unacceptable => "Unacceptable",
            Quality::Bad => "Bad",
            Quality::Acceptable => "Acceptable",
            Quality::VeryGood => "Very good",
            Quality::Excellent => "Excellent",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Unbounded,
    Inclusive(f64),
    Exclusive(f64),
}

/// A quality label together with its dBm interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityBand {
    pub label: Quality,
    pub lower: Bound,
    pub upper: Bound,
}

impl QualityBand {
    pub fn contains(&self, dbm: f64) -> bool {
        let above = match self.lower {
            Bound::Unbounded => true,
            Bound::Inclusive(b) => dbm >= b,
            Bound::Exclusive(b) => dbm > b,
        };
        let below = match self.upper {
            Bound::Unbounded => true,
            Bound::Inclusive(b) => dbm <= b,
            Bound::Exclusive(b) => dbm < b,
        };
        above && below
    }
}

pub fn classify_quality(level: LevelDbm) -> QualityBand {
    let dbm = level.dbm();
    let label = if dbm < -90.0 {
        Quality::Unacceptable
    } else if dbm <= -81.0 {
        Quality::Bad
    } else if dbm <= -71.0 {
        Quality::Acceptable
    } else if dbm <= -67.0 {
        Quality::VeryGood
    } else {
        Quality::Excellent
    };
    label.band()
}

/// Exponent and offset of the access-point growth power law.
pub const GROWTH_EXPONENT: f64 = 4.54;
pub const GROWTH_OFFSET: f64 = 3450.0;

/// Number of access points at the end of `year` according to the power law
/// `(year - 2000)^4.54 + 3450`, evaluated literally.
///
/// The law is usually quoted alongside an estimate of roughly 400 million
/// APs by 2018, which it does not reproduce: evaluated as written it gives
/// about half a million.
///
/// ```
/// use chanalloc::spectrum::growth_model;
///
/// let n2018 = growth_model(2018).unwrap();
/// assert!((n2018 - 5.0e5).abs() / 5.0e5 < 0.01);
/// // nowhere near 400 million
/// assert!(n2018 < 4.0e8 / 100.0);
/// ```
pub fn growth_model(year: i32) -> Result<f64, SpectrumError> {
    if year <= 2000 {
        return Err(SpectrumError::YearOutOfDomain(year));
    }
    Ok(f64::from(year - 2000).powf(GROWTH_EXPONENT) + GROWTH_OFFSET)
}
